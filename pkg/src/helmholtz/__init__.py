"""
Helmholtz: Active-Stereo Depth Completion Lab

Simulates an IR stereo rig with an interleaved dot projector, computes semi-dense SGM
depth and sparse tracked landmarks, and completes the depth of each projector-on frame
by directly minimizing a self-supervised photometric and supervision loss.
"""

__version__ = "0.1.0"
__author__ = "Helmholtz Team"

from helmholtz.evaluation import DepthEvaluator
from helmholtz.losses import LossWeights, total_loss
from helmholtz.simulation import generate_sequence
from helmholtz.stereo import run_sgm
from helmholtz.trainers import DepthRefiner, run_ablation

__all__ = [
    "DepthRefiner",
    "DepthEvaluator",
    "LossWeights",
    "total_loss",
    "generate_sequence",
    "run_sgm",
    "run_ablation",
]
