"""Closed-form L_a-harmonic fields used as oracles and fixtures.

Every field exposes ``evaluate(x, y, want)`` with the same conventions as
:class:`~fracseg.extension.ExtensionEvaluator`: ``'w'`` is the value,
``'x'`` the x-derivative and ``'y'`` the weighted derivative ``y^a ∂y w``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .params import FracParams


class _Analytic:
    params: FracParams
    scalar = True
    k = 1
    kinks = np.empty(0)

    def _parts(self, x, y):
        raise NotImplementedError

    def evaluate(self, x, y, want: str = "wxy") -> tuple[np.ndarray, ...]:
        x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
        if np.any(y <= 0):
            raise ValueError("evaluation points need y > 0")
        parts = dict(zip("wxy", self._parts(x, y)))
        return tuple(np.broadcast_to(parts[key], x.shape).astype(float) for key in want)

    def value(self, x, y):
        return self.evaluate(x, y, "w")[0]

    def gradient(self, x, y):
        wx, q = self.evaluate(x, y, "xy")
        return wx, q / np.asarray(y, float) ** self.params.a


@dataclass(frozen=True)
class YPowerField(_Analytic):
    """``y^{1-a} = y^{2s}``: zero trace, constant conormal derivative, degree 2s."""

    params: FracParams
    amplitude: float = 1.0

    def _parts(self, x, y):
        s = self.params.s
        return self.amplitude * y ** (2 * s), np.zeros_like(x), np.full_like(x, 2 * s * self.amplitude)

    def trace_values(self, x):
        return np.zeros_like(np.asarray(x, float))


@dataclass(frozen=True)
class HalfLineField(_Analytic):
    """Extension of ``(x - x0)_+^s``, equal to ``((ρ + ξ)/2)^s``; degree s."""

    params: FracParams
    x0: float = 0.0
    kinks: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "kinks", np.array([self.x0]))

    def _parts(self, x, y):
        s = self.params.s
        xi = x - self.x0
        rho = np.hypot(xi, y)
        # ρ + ξ without cancellation on the left half-line
        sumr = np.where(xi >= 0, rho + xi, y * y / np.where(xi < 0, rho - xi, 1.0))
        half = 0.5 * sumr
        w = half**s
        common = 0.5 * s * half ** (s - 1.0)
        wx = common * sumr / rho
        q = common * y ** (1.0 - 2.0 * s) * y / rho
        return w, wx, q

    def trace_values(self, x):
        return np.clip(np.asarray(x, float) - self.x0, 0.0, None) ** self.params.s


@dataclass(frozen=True)
class RadialPowerField(_Analytic):
    """``|X - X0|^κ``; L_a-harmonic when κ = -a = 2s - 1 (or κ = 0).

    For s > 1/2 its trace ``|x - x0|^{2s-1}`` vanishes only at ``x0`` while
    staying positive on both sides, the local picture of self-segregation.
    """

    params: FracParams
    x0: float = 0.0
    kappa: float | None = None
    kinks: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.kappa is None:
            object.__setattr__(self, "kappa", -self.params.a)
        object.__setattr__(self, "kinks", np.array([self.x0]))

    def _parts(self, x, y):
        k = self.kappa
        xi = x - self.x0
        r2 = xi * xi + y * y
        w = r2 ** (0.5 * k)
        wx = k * xi * r2 ** (0.5 * k - 1.0)
        q = k * y ** (1.0 + self.params.a) * r2 ** (0.5 * k - 1.0)
        return w, wx, q

    def trace_values(self, x):
        return np.abs(np.asarray(x, float) - self.x0) ** self.kappa


@dataclass(frozen=True)
class AffineField(_Analytic):
    """``c0 + c1·x``, independent of y and L_a-harmonic for every a."""

    params: FracParams
    c0: float = 0.0
    c1: float = 1.0

    def _parts(self, x, y):
        return self.c0 + self.c1 * x, np.full_like(x, self.c1), np.zeros_like(x)

    def trace_values(self, x):
        return self.c0 + self.c1 * np.asarray(x, float)


@dataclass(frozen=True)
class SumField:
    """Linear combination of scalar fields sharing one ``params``."""

    parts: tuple
    coefs: tuple

    @property
    def params(self) -> FracParams:
        return self.parts[0].params

    scalar = True
    k = 1

    @property
    def kinks(self) -> np.ndarray:
        return np.unique(np.concatenate([np.asarray(p.kinks) for p in self.parts]))

    def evaluate(self, x, y, want: str = "wxy"):
        total = None
        for part, c in zip(self.parts, self.coefs):
            vals = part.evaluate(x, y, want)
            total = [c * v for v in vals] if total is None else [t + c * v for t, v in zip(total, vals)]
        return tuple(total)

    def value(self, x, y):
        return self.evaluate(x, y, "w")[0]

    def trace_values(self, x):
        return sum(c * p.trace_values(x) for p, c in zip(self.parts, self.coefs))
