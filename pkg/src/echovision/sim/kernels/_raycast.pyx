# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled ray/box intersection.

Mirrors raycast_np.py expression for expression; any change here must be
made there as well so the two backends stay bit-identical.
"""

import numpy as np
cimport numpy as cnp


def cast_rays(origin, dirs, room_lo, room_hi, obs_lo, obs_hi):
    """See raycast_np.cast_rays; same contract, same results."""
    origin = np.ascontiguousarray(origin, dtype=np.float64)
    dirs = np.ascontiguousarray(dirs, dtype=np.float64)
    room_lo = np.ascontiguousarray(room_lo, dtype=np.float64)
    room_hi = np.ascontiguousarray(room_hi, dtype=np.float64)
    obs_lo = np.ascontiguousarray(obs_lo, dtype=np.float64).reshape(-1, 3)
    obs_hi = np.ascontiguousarray(obs_hi, dtype=np.float64).reshape(-1, 3)

    cdef double[::1] o = origin
    cdef double[:, ::1] d = dirs
    cdef double[::1] rlo = room_lo
    cdef double[::1] rhi = room_hi
    cdef double[:, ::1] blo = obs_lo
    cdef double[:, ::1] bhi = obs_hi

    cdef Py_ssize_t n = d.shape[0]
    cdef Py_ssize_t m = blo.shape[0]

    t_out_arr = np.empty(n, dtype=np.float64)
    axis_out_arr = np.empty(n, dtype=np.int64)
    obj_out_arr = np.full(n, -1, dtype=np.int64)
    cdef double[::1] t_best = t_out_arr
    cdef cnp.int64_t[::1] axis_best = axis_out_arr
    cdef cnp.int64_t[::1] obj_best = obj_out_arr

    cdef double dlo_r[3]
    cdef double dhi_r[3]
    cdef Py_ssize_t a, i, k
    for a in range(3):
        dlo_r[a] = rlo[a] - o[a]
        dhi_r[a] = rhi[a] - o[a]

    cdef double inv0, inv1, inv2, t1, t2, ta, t, t_in, t_out, near, far
    cdef double dlo, dhi
    cdef cnp.int64_t ax, ax_in

    for i in range(n):
        inv0 = 1.0 / d[i, 0]
        inv1 = 1.0 / d[i, 1]
        inv2 = 1.0 / d[i, 2]

        t1 = dlo_r[0] * inv0
        t2 = dhi_r[0] * inv0
        t = t1 if t1 > t2 else t2
        ax = 0
        t1 = dlo_r[1] * inv1
        t2 = dhi_r[1] * inv1
        ta = t1 if t1 > t2 else t2
        if ta < t:
            t = ta
            ax = 1
        t1 = dlo_r[2] * inv2
        t2 = dhi_r[2] * inv2
        ta = t1 if t1 > t2 else t2
        if ta < t:
            t = ta
            ax = 2

        for k in range(m):
            dlo = blo[k, 0] - o[0]
            dhi = bhi[k, 0] - o[0]
            t1 = dlo * inv0
            t2 = dhi * inv0
            t_in = t1 if t1 < t2 else t2
            t_out = t1 if t1 > t2 else t2
            ax_in = 0

            dlo = blo[k, 1] - o[1]
            dhi = bhi[k, 1] - o[1]
            t1 = dlo * inv1
            t2 = dhi * inv1
            near = t1 if t1 < t2 else t2
            far = t1 if t1 > t2 else t2
            if near > t_in:
                t_in = near
                ax_in = 1
            if far < t_out:
                t_out = far

            dlo = blo[k, 2] - o[2]
            dhi = bhi[k, 2] - o[2]
            t1 = dlo * inv2
            t2 = dhi * inv2
            near = t1 if t1 < t2 else t2
            far = t1 if t1 > t2 else t2
            if near > t_in:
                t_in = near
                ax_in = 2
            if far < t_out:
                t_out = far

            if t_in > 0.0 and t_in <= t_out and t_in < t:
                t = t_in
                ax = ax_in
                obj_best[i] = k

        t_best[i] = t
        axis_best[i] = ax

    return t_out_arr, axis_out_arr, obj_out_arr
