"""Adaptive ECG edge-node toolkit.

A desk-scale model of a battery-powered ECG monitoring node: streaming
R-peak detection, integer-quantized 1D-CNN beat classification, a
reconfigurable task/FIFO process network driven by an adaptive runtime
manager, and a calibrated power/energy model with battery-life
estimation.
"""

__version__ = "0.1.0"

from .traceio import BeatAnnotation, EcgTrace, LabelSet, NLRAV, NSVFQ
from .power import Battery, NodeConfig

__all__ = [
    "BeatAnnotation",
    "Battery",
    "EcgTrace",
    "LabelSet",
    "NLRAV",
    "NSVFQ",
    "NodeConfig",
    "__version__",
]
