"""Geometric scene description: a shoebox room, box obstacles, and the rig."""

import numpy as np
from dataclasses import dataclass, field

SPEED_OF_SOUND = 343.0
MAX_DEPTH_M = 10.0


def _vec3(x):
    v = np.asarray(x, dtype=np.float64)
    if v.shape != (3,):
        raise ValueError(f"expected 3-vector, got shape {v.shape}")
    return v


@dataclass
class Box:
    """Axis-aligned box given by its two extreme corners."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        self.lo = _vec3(self.lo)
        self.hi = _vec3(self.hi)
        if not np.all(self.lo < self.hi):
            raise ValueError(f"degenerate box: lo={self.lo}, hi={self.hi}")

    def contains(self, p, margin=0.0):
        p = _vec3(p)
        return bool(np.all(p > self.lo + margin) and np.all(p < self.hi - margin))


@dataclass
class Scene:
    """A shoebox room with axis-aligned box obstacles.

    The room occupies [0, size] per axis; walls are the six planes of that
    box. ``wall_absorption`` applies per reflection to walls and obstacle
    faces alike.
    """

    room_size: np.ndarray
    obstacles: list = field(default_factory=list)
    wall_absorption: float = 0.3
    speed_of_sound: float = SPEED_OF_SOUND

    def __post_init__(self):
        self.room_size = _vec3(self.room_size)
        if not np.all(self.room_size > 0):
            raise ValueError(f"room size must be positive, got {self.room_size}")
        if not 0 <= self.wall_absorption < 1:
            raise ValueError(
                f"wall_absorption must be in [0, 1), got {self.wall_absorption}"
            )
        for i, ob in enumerate(self.obstacles):
            if not (np.all(ob.lo >= 0) and np.all(ob.hi <= self.room_size)):
                raise ValueError(f"obstacle {i} extends outside the room: {ob}")

    def room_box(self):
        return Box(np.zeros(3), self.room_size.copy())

    def point_in_free_space(self, p, margin=0.0):
        """True if p is inside the room and outside every obstacle."""
        p = _vec3(p)
        if not np.all((p > margin) & (p < self.room_size - margin)):
            return False
        return not any(ob.contains(p, margin=-margin) for ob in self.obstacles)


@dataclass
class SensorRig:
    """Emitter, two microphones and a pinhole camera, rigidly mounted."""

    source_pos: np.ndarray
    mic_left_pos: np.ndarray
    mic_right_pos: np.ndarray
    camera_pos: np.ndarray
    camera_forward: np.ndarray
    fov_deg: float = 100.0
    image_size: int = 128

    def __post_init__(self):
        self.source_pos = _vec3(self.source_pos)
        self.mic_left_pos = _vec3(self.mic_left_pos)
        self.mic_right_pos = _vec3(self.mic_right_pos)
        self.camera_pos = _vec3(self.camera_pos)
        self.camera_forward = _vec3(self.camera_forward)
        if np.linalg.norm(self.mic_left_pos - self.mic_right_pos) <= 0:
            raise ValueError("microphone baseline must be positive")
        if abs(np.linalg.norm(self.camera_forward) - 1.0) > 1e-9:
            raise ValueError("camera_forward must be unit length")
        if not 0 < self.fov_deg < 180:
            raise ValueError(f"fov_deg must be in (0, 180), got {self.fov_deg}")
        if self.image_size < 2:
            raise ValueError("image_size must be >= 2")


@dataclass
class SceneSample:
    """One paired record: echo recording, depth, grayscale, validity, meta."""

    recording: "BinauralRecording"
    depth: np.ndarray
    grayscale: np.ndarray
    valid_mask: np.ndarray
    meta: dict

    def __post_init__(self):
        if not (self.depth.shape == self.grayscale.shape == self.valid_mask.shape):
            raise ValueError("depth, grayscale and valid_mask must share shape")
        if np.any(self.depth[self.valid_mask] <= 0):
            raise ValueError("valid pixels must carry positive depth")
