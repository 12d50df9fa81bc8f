"""Fractional-Laplacian segregation: solvers and frequency diagnostics."""

from __future__ import annotations

from .params import FracParams, Grid1D

__all__ = ["FracParams", "Grid1D"]
__version__ = "0.1.0"
