"""Numerics for Fuchsian systems: local expansions, monodromy,
isomonodromic deformation, and reduction by elementary gauges."""

from __future__ import annotations

from .config import NumericError, ParseError, ToleranceConfig, default_tolerance
from .system import FuchsianSystem, PathSpec, build_system, spectrum

__all__ = [
    "NumericError",
    "ParseError",
    "ToleranceConfig",
    "default_tolerance",
    "FuchsianSystem",
    "PathSpec",
    "build_system",
    "spectrum",
]

__version__ = "0.1.0"
