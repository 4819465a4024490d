"""Pinhole views of a scene: per-pixel depth, shading and validity."""

import math
import numpy as np

from .scene import MAX_DEPTH_M
from .kernels import cast_rays

# Lambertian shading constants: surface reflectance and the distance at
# which the inverse-square falloff halves the intensity.
ALBEDO = 0.9
FALLOFF_M = 5.0


def camera_rays(rig):
    """Pixel-center ray directions in world coordinates, shape (H·W, 3).

    Directions are left unnormalized with unit component along the camera
    axis, so the ray parameter of a hit equals its z-depth directly.
    Rows run top to bottom, columns left to right.
    """
    f = rig.camera_forward
    up_ref = (np.array([0.0, 0.0, 1.0]) if abs(f[2]) < 0.99
              else np.array([1.0, 0.0, 0.0]))
    right = np.cross(f, up_ref)
    right /= np.linalg.norm(right)
    up = np.cross(right, f)
    n = rig.image_size
    tan_half = math.tan(math.radians(rig.fov_deg) / 2.0)
    centers = (np.arange(n, dtype=np.float64) + 0.5) / n
    u = (2.0 * centers - 1.0) * tan_half
    v = (1.0 - 2.0 * centers) * tan_half
    dirs = (f[None, None, :]
            + u[None, :, None] * right[None, None, :]
            + v[:, None, None] * up[None, None, :])
    return dirs.reshape(-1, 3)


def render_views(scene, rig, max_depth=MAX_DEPTH_M):
    """Ray-cast depth, grayscale shading and validity mask for one rig pose.

    Depth is z-distance along the camera axis to the first wall or obstacle
    hit. Grayscale is Lambertian: albedo times the cosine between the ray
    and the hit face normal, rolled off with squared euclidean distance.
    Pixels deeper than ``max_depth`` are marked invalid.
    """
    if not scene.point_in_free_space(rig.camera_pos):
        raise ValueError(f"camera {rig.camera_pos} not in free space")
    dirs = camera_rays(rig)
    if scene.obstacles:
        obs_lo = np.stack([b.lo for b in scene.obstacles])
        obs_hi = np.stack([b.hi for b in scene.obstacles])
    else:
        obs_lo = np.zeros((0, 3))
        obs_hi = np.zeros((0, 3))
    t, axis, _ = cast_rays(rig.camera_pos, dirs, np.zeros(3),
                           scene.room_size, obs_lo, obs_hi)
    norms = np.sqrt(np.sum(dirs * dirs, axis=1))
    cos = np.abs(dirs[np.arange(len(dirs)), axis]) / norms
    dist = t * norms
    gray = ALBEDO * cos / (1.0 + (dist / FALLOFF_M) ** 2)
    n = rig.image_size
    depth = t.reshape(n, n)
    valid = depth <= max_depth
    return depth, gray.reshape(n, n), valid
