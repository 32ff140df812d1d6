"""Configuration, presets, checkpoints and the command-line interface."""

from .checkpoint import load_checkpoint, save_checkpoint
from .config import ExperimentPreset, expand_preset, parse_config

__all__ = ["ExperimentPreset", "expand_preset", "load_checkpoint", "parse_config", "save_checkpoint"]
