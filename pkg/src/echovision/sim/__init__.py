from .scene import Box, Scene, SensorRig, SceneSample
from .acoustics import impulse_response, echo_taps, render_echo
from .render import render_views, camera_rays
from .generate import SamplerConfig, sample_scene, generate_dataset

__all__ = [
    "Box", "Scene", "SensorRig", "SceneSample",
    "impulse_response", "echo_taps", "render_echo",
    "render_views", "camera_rays",
    "SamplerConfig", "sample_scene", "generate_dataset",
]
