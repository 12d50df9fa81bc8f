"""Quadrature rules for weighted half-disk, circle and segment integrals."""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy import special


@lru_cache(maxsize=64)
def angular_rule(n: int, b: float) -> tuple[np.ndarray, np.ndarray]:
    """Nodes θ in (0, π) and weights for ∫_0^π f(θ) sin^b θ dθ.

    With t = cos θ the weight becomes (1 - t²)^{(b-1)/2}, a Gauss–Jacobi
    weight with α = β = (b - 1)/2, so the sin^b factor is integrated exactly.
    """
    if b <= -1.0:
        raise ValueError("angular weight exponent must exceed -1")
    t, w = special.roots_jacobi(n, 0.5 * (b - 1.0), 0.5 * (b - 1.0))
    theta = np.arccos(t)
    order = np.argsort(theta)
    return theta[order], w[order]


@lru_cache(maxsize=64)
def legendre01(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss–Legendre nodes and weights on [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def gauss_on(breaks: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Composite Gauss rule on consecutive intervals of ``breaks``."""
    breaks = np.asarray(breaks, dtype=float)
    x, w = legendre01(n)
    lo, width = breaks[:-1, None], np.diff(breaks)[:, None]
    return (lo + width * x).ravel(), (width * w).ravel()


def graded_breaks(r0: float, levels: int = 40, ratio: float = 0.5) -> np.ndarray:
    """Geometric partition of [0, r0] refined toward 0."""
    inner = r0 * ratio ** np.arange(levels, 0, -1)
    return np.concatenate([[0.0], inner, [r0]])


def segment_breaks(x0: float, r: float, nodes: np.ndarray) -> np.ndarray:
    """[x0-r, x0+r] split at the grid nodes (kinks of a P1 trace)."""
    inside = nodes[(nodes > x0 - r) & (nodes < x0 + r)]
    return np.concatenate([[x0 - r], inside, [x0 + r]])


def circle_rule(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Periodic trapezoid rule on [0, 2π); spectrally accurate for smooth data."""
    theta = 2.0 * np.pi * np.arange(n) / n
    return theta, np.full(n, 2.0 * np.pi / n)
