"""Parameter and grid containers shared by every module."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class FracParams:
    """Order ``s`` of the fractional Laplacian and derived exponents.

    ``a`` and ``alpha_star`` are properties so they can never drift from ``s``.
    """

    s: float
    c_gagliardo: float = 1.0

    def __post_init__(self) -> None:
        if not (0.0 < float(self.s) < 1.0):
            raise ValueError(f"s must lie in (0, 1), got {self.s!r}")
        if not float(self.c_gagliardo) > 0.0:
            raise ValueError("c_gagliardo must be positive")

    @property
    def a(self) -> float:
        return 1.0 - 2.0 * self.s

    @property
    def alpha_star(self) -> float:
        return self.s if self.s <= 0.5 else 2.0 * self.s - 1.0


@dataclass(frozen=True)
class Grid1D:
    """Uniform grid of ``n`` interior nodes on ``(x_left, x_right)``.

    Grid functions are understood to vanish outside the interval.
    """

    x_left: float
    x_right: float
    n: int
    nodes: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if not self.x_left < self.x_right:
            raise ValueError("x_left must be smaller than x_right")
        if int(self.n) != self.n or self.n < 8:
            raise ValueError(f"n must be an integer >= 8, got {self.n!r}")
        nodes = self.x_left + self.h * np.arange(1, self.n + 1)
        nodes.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)

    @property
    def h(self) -> float:
        return (self.x_right - self.x_left) / (self.n + 1)

    @property
    def length(self) -> float:
        return self.x_right - self.x_left

    @property
    def center(self) -> float:
        return 0.5 * (self.x_left + self.x_right)

    def contains(self, x: float) -> bool:
        return self.x_left < x < self.x_right

    def full_nodes(self) -> np.ndarray:
        """Nodes including the two boundary points where functions vanish."""
        return self.x_left + self.h * np.arange(self.n + 2)
