"""Transmission-line parameter estimation and CT/PT calibration from quantized PMU data."""

from linecal.exceptions import CalibrationError
from linecal.network import Bus, Line, NetworkModel, load_network

__version__ = "0.1.0"

__all__ = ["Bus", "CalibrationError", "Line", "NetworkModel", "load_network", "__version__"]
