"""Randomized scene construction and paired data generation.

Each sample is a pure function of (config, seed, index): scenes are drawn
from a per-index generator, rendered acoustically and visually from the
same geometry, and are therefore time-paired by construction.

Scene layout rationale: the rig always faces +y with one guaranteed box
obstacle directly ahead, closer than any wall, floor or ceiling. The
nearest reflector is then both the first thing the microphones hear and
the nearest surface the camera sees, which is what makes the audio->depth
mapping learnable from desk-scale data.
"""

import numpy as np
from dataclasses import dataclass, field

from .scene import Box, Scene, SensorRig
from .acoustics import render_echo
from .render import render_views
from .scene import SceneSample
from ..signal import synthesize_chirp

MAX_PLACEMENT_RETRIES = 100


@dataclass
class SamplerConfig:
    """Ranges for scene randomization plus the shared recording layout."""

    # Room extent ranges in meters (x: width, y: depth, z: height).
    room_w: tuple = (3.5, 6.0)
    room_d: tuple = (4.5, 8.0)
    room_h: tuple = (2.8, 3.6)
    wall_absorption: tuple = (0.25, 0.45)
    # One near obstacle is always placed at this face distance; extras go
    # farther out.
    near_face: tuple = (0.7, 1.05)
    max_extra_obstacles: int = 2
    # Rig geometry.
    mic_baseline: float = 0.2
    fov_deg: float = 100.0
    image_size: int = 128
    max_order: int = 3
    # Probe sweep.
    f_start: float = 20.0
    f_end: float = 20000.0
    chirp_duration: float = 0.003
    sample_rate: int = 44100
    # Recording layout in samples: the emitter fires at emit_index inside
    # a recording long enough that every jittered window both starts
    # before the echo train and contains its dominant part.
    window_len: int = 4410
    jitter_frac: float = 0.3
    nominal_start: int = 1400
    emit_index: int = 3000

    def __post_init__(self):
        span = self.jitter_span
        if self.nominal_start - span < 0:
            raise ValueError("jitter span exceeds recording head room")
        if self.emit_index < self.nominal_start + span:
            raise ValueError(
                "emitter must fire after the latest possible window start"
            )

    @property
    def jitter_span(self):
        return int(self.jitter_frac * self.window_len)

    @property
    def total_len(self):
        return self.nominal_start + self.jitter_span + self.window_len

    def make_chirp(self):
        return synthesize_chirp(self.f_start, self.f_end,
                                self.chirp_duration, self.sample_rate)


def _draw_obstacle(rng, cfg, room, x_rig, y_rig, z_rig, y_face_range,
                   near=False):
    """One floor-standing box, or None if the face range is empty."""
    lo_y, hi_y = y_face_range
    if hi_y <= lo_y:
        return None
    w, d, h = room
    face = rng.uniform(lo_y, hi_y)
    sy = rng.uniform(0.3, min(0.8, d - 0.5 - face))
    if near:
        half_w = rng.uniform(0.35, 0.8)
        cx = x_rig + rng.uniform(-1.0, 1.0) * (half_w - 0.15)
        top = min(z_rig + rng.uniform(0.2, 0.7), h - 0.1)
    else:
        half_w = rng.uniform(0.25, 0.7)
        cx = rng.uniform(0.4, w - 0.4)
        top = rng.uniform(0.5, h - 0.5)
    lo = np.array([cx - half_w, face, 0.0])
    hi = np.array([cx + half_w, face + sy, top])
    if lo[0] < 0.05 or hi[0] > w - 0.05:
        return None
    return Box(lo, hi)


def sample_scene(cfg, seed, index):
    """Draw one (Scene, SensorRig) pair, deterministic in (seed, index)."""
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence((seed, index))))
    for _ in range(MAX_PLACEMENT_RETRIES):
        w = rng.uniform(*cfg.room_w)
        d = rng.uniform(*cfg.room_d)
        h = rng.uniform(*cfg.room_h)
        absorption = rng.uniform(*cfg.wall_absorption)

        x_rig = rng.uniform(1.45, w - 1.45)
        y_rig = rng.uniform(1.6, 2.2)
        z_rig = rng.uniform(1.3, h - 1.3)

        near_lo = y_rig + cfg.near_face[0]
        near_hi = y_rig + cfg.near_face[1]
        near = _draw_obstacle(rng, cfg, (w, d, h), x_rig, y_rig, z_rig,
                              (near_lo, near_hi), near=True)
        if near is None:
            continue
        obstacles = [near]
        n_extra = int(rng.integers(0, cfg.max_extra_obstacles + 1))
        lower = float(near.hi[1]) + 0.2
        for _ in range(n_extra):
            extra = _draw_obstacle(rng, cfg, (w, d, h), x_rig, y_rig, z_rig,
                                   (lower, d - 1.3))
            if extra is not None:
                obstacles.append(extra)
                lower = float(extra.hi[1]) + 0.2

        scene = Scene(room_size=np.array([w, d, h]), obstacles=obstacles,
                      wall_absorption=absorption)
        half_b = cfg.mic_baseline / 2.0
        rig_center = np.array([x_rig, y_rig, z_rig])
        rig = SensorRig(
            source_pos=rig_center,
            mic_left_pos=rig_center + np.array([-half_b, 0.0, 0.0]),
            mic_right_pos=rig_center + np.array([half_b, 0.0, 0.0]),
            camera_pos=rig_center,
            camera_forward=np.array([0.0, 1.0, 0.0]),
            fov_deg=cfg.fov_deg,
            image_size=cfg.image_size,
        )
        positions = (rig.source_pos, rig.mic_left_pos, rig.mic_right_pos,
                     rig.camera_pos)
        if all(scene.point_in_free_space(p, margin=0.05) for p in positions):
            return scene, rig
    raise RuntimeError(
        f"no valid scene after {MAX_PLACEMENT_RETRIES} retries "
        f"(seed={seed}, index={index})"
    )


def generate_sample(cfg, seed, index, chirp=None):
    """Render one paired SceneSample from its deterministic scene draw."""
    if chirp is None:
        chirp = cfg.make_chirp()
    scene, rig = sample_scene(cfg, seed, index)
    render_len = cfg.total_len - cfg.emit_index
    # The rig gates out the direct speaker-to-ear feedthrough; recordings
    # contain reflections only.
    echo = render_echo(scene, rig, chirp, cfg.max_order, render_len,
                       include_direct=False)
    from ..signal import BinauralRecording

    left = np.zeros(cfg.total_len)
    right = np.zeros(cfg.total_len)
    left[cfg.emit_index:] = echo.left
    right[cfg.emit_index:] = echo.right
    recording = BinauralRecording(left=left, right=right,
                                  sample_rate=float(cfg.sample_rate))
    depth, gray, valid = render_views(scene, rig)
    meta = {
        "scene_id": f"scene_{index:06d}",
        "seed": int(seed),
        "index": int(index),
        "room_size": [float(v) for v in scene.room_size],
        "wall_absorption": float(scene.wall_absorption),
        "n_obstacles": len(scene.obstacles),
        "rig_center": [float(v) for v in rig.source_pos],
        "mic_baseline": float(cfg.mic_baseline),
        "fov_deg": float(cfg.fov_deg),
        "max_order": int(cfg.max_order),
        "emit_index": int(cfg.emit_index),
        "nominal_start": int(cfg.nominal_start),
        "window_len": int(cfg.window_len),
        "jitter_frac": float(cfg.jitter_frac),
        "f_start": float(cfg.f_start),
        "f_end": float(cfg.f_end),
        "chirp_duration": float(cfg.chirp_duration),
        "sample_rate": int(cfg.sample_rate),
    }
    return SceneSample(recording=recording, depth=depth, grayscale=gray,
                       valid_mask=valid, meta=meta)


def generate_dataset(n, cfg, rng_seed):
    """n paired samples, sample i depending only on (cfg, rng_seed, i)."""
    if n <= 0:
        raise ValueError(f"n must be positive, got {n}")
    chirp = cfg.make_chirp()
    return [generate_sample(cfg, rng_seed, i, chirp=chirp) for i in range(n)]
