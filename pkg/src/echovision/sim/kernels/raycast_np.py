"""Vectorized ray/box intersection, reference implementation.

Keep every expression in lockstep with the compiled kernel: identical slab
formulas, identical comparison and update order, strict-less-than winner
selection. Both backends must return bit-identical arrays.
"""

import numpy as np


def cast_rays(origin, dirs, room_lo, room_hi, obs_lo, obs_hi):
    """Intersect rays from inside the room against walls and obstacles.

    Parameters are float64 arrays: origin (3,), dirs (N, 3), room bounds
    (3,) each, obstacle bounds (M, 3) each. Returns (t, axis, obj) where t
    is the ray parameter of the first hit, axis the normal axis of the hit
    face, and obj the obstacle index or -1 for a wall. The origin must lie
    strictly inside the room and outside every obstacle; direction
    components may be zero (IEEE inf arithmetic handles the parallel-slab
    case) but not all zero.
    """
    origin = np.asarray(origin, dtype=np.float64)
    dirs = np.asarray(dirs, dtype=np.float64)
    n = dirs.shape[0]
    with np.errstate(divide="ignore"):
        inv = 1.0 / dirs
    t_best = np.empty(n, dtype=np.float64)
    axis_best = np.empty(n, dtype=np.int64)
    obj_best = np.full(n, -1, dtype=np.int64)

    # Room: the camera is inside, so the first wall hit is the slab exit,
    # min over axes of max(t_lo, t_hi).
    first = True
    for a in range(3):
        t1 = (room_lo[a] - origin[a]) * inv[:, a]
        t2 = (room_hi[a] - origin[a]) * inv[:, a]
        ta = np.maximum(t1, t2)
        if first:
            t_best[:] = ta
            axis_best[:] = a
            first = False
        else:
            closer = ta < t_best
            t_best[closer] = ta[closer]
            axis_best[closer] = a

    # Obstacles: slab entry max over axes of min(t_lo, t_hi), exit as for
    # the room; a box is hit when 0 < entry <= exit.
    for k in range(obs_lo.shape[0]):
        t_in = None
        t_out = None
        ax_in = None
        for a in range(3):
            t1 = (obs_lo[k, a] - origin[a]) * inv[:, a]
            t2 = (obs_hi[k, a] - origin[a]) * inv[:, a]
            near = np.minimum(t1, t2)
            far = np.maximum(t1, t2)
            if a == 0:
                t_in = near
                t_out = far
                ax_in = np.zeros(n, dtype=np.int64)
            else:
                farther = near > t_in
                t_in = np.maximum(t_in, near)
                ax_in[farther] = a
                t_out = np.minimum(t_out, far)
        hit = (t_in > 0.0) & (t_in <= t_out) & (t_in < t_best)
        t_best[hit] = t_in[hit]
        axis_best[hit] = ax_in[hit]
        obj_best[hit] = k
    return t_best, axis_best, obj_best
