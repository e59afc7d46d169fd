"""Logging utilities for simulation, refinement and evaluation runs."""

import logging
import sys
import time
from collections.abc import Iterator
from contextlib import contextmanager
from datetime import datetime
from pathlib import Path

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"


def setup_logging(
    log_level: str = "INFO",
    log_file: str | Path | None = None,
    name: str = "helmholtz",
) -> logging.Logger:
    """Configure the package logger once; later calls only change the level."""
    logger = logging.getLogger(name)
    level = getattr(logging, log_level.upper(), None)
    if not isinstance(level, int):
        raise ValueError(f"unknown log level '{log_level}'")
    logger.setLevel(level)

    if logger.handlers:
        return logger

    formatter = logging.Formatter(LOG_FORMAT, datefmt="%Y-%m-%d %H:%M:%S")
    console_handler = logging.StreamHandler(sys.stderr)
    console_handler.setFormatter(formatter)
    logger.addHandler(console_handler)

    if log_file:
        log_path = Path(log_file)
        log_path.parent.mkdir(parents=True, exist_ok=True)
        file_handler = logging.FileHandler(log_path)
        file_handler.setFormatter(formatter)
        logger.addHandler(file_handler)

    # PIL logs every PNG chunk at DEBUG
    logging.getLogger("PIL").setLevel(logging.WARNING)
    return logger


def get_logger(name: str = "helmholtz") -> logging.Logger:
    return logging.getLogger(name)


@contextmanager
def log_stage(logger: logging.Logger, stage: str) -> Iterator[None]:
    """Log the wall-clock time of one pipeline stage (synthesis, SGM, tracking, ...)."""
    start = time.perf_counter()
    logger.info(f"{stage}...")
    yield
    logger.info(f"{stage} done in {time.perf_counter() - start:.2f}s")


def generate_run_name(prefix: str = "run", scene: str | None = None) -> str:
    """``<prefix>[_<scene>]_<timestamp>``, e.g. ``refine_occluded_floor_20240101_120000``."""
    timestamp = datetime.now().strftime("%Y%m%d_%H%M%S")
    parts = [prefix, Path(scene).stem if scene else None, timestamp]
    return "_".join(p for p in parts if p)
