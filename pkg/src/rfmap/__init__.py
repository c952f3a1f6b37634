"""Spectrum cartography: simulated RF environments, power map reconstruction
from scattered sensor readings, and sensor deployment density planning."""

__version__ = "0.1.0"
