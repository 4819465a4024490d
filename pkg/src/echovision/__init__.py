"""Synthetic binaural echolocation: simulate rooms, hear echoes, predict depth."""

__version__ = "0.1.0"
