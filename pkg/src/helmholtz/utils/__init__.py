"""Utility functions and helpers."""

from helmholtz.utils.blobs import detect_blobs
from helmholtz.utils.config import get_section, load_config, merge_overrides, save_config
from helmholtz.utils.logging import generate_run_name, get_logger, log_stage, setup_logging

__all__ = [
    "load_config",
    "save_config",
    "get_section",
    "merge_overrides",
    "setup_logging",
    "get_logger",
    "generate_run_name",
    "log_stage",
    "detect_blobs",
]
