"""Massive-MIMO detection with Bayesian PIC-DSC, its variance evolution, and a polar-coded receiver."""

from ._kernels import BACKEND
from .detectors import DetectionResult, DetectorConfig, detect, detect_batch
from .mimo import Constellation, draw_channel, make_constellation, noise_variance, transmit

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "Constellation",
    "DetectionResult",
    "DetectorConfig",
    "detect",
    "detect_batch",
    "draw_channel",
    "make_constellation",
    "noise_variance",
    "transmit",
]
