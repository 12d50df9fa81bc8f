"""Weighted harmonic extension of a piecewise-linear trace to the half-plane.

For a trace ``u`` vanishing outside the grid interval the extension is the
convolution ``w(x, y) = ∫ u(t) P(x - t, y) dt`` with the Poisson kernel
``P = c(s) y^{2s} / (x² + y²)^{(1+2s)/2}``.  Against a linear piece the
kernel integrates in closed form through two antiderivatives in ``z``:

    F0(z, y) = ∫_0^z P(t, y) dt   (an incomplete beta function)
    F1(z, y) = ∫_0^z t P(t, y) dt = c·y·g(z/y)

so values and gradients are exact up to floating point.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import special

from .params import FracParams, Grid1D


def poisson_constant(s: float) -> float:
    """``c(s)`` with ``∫_R P(x, y) dx = 1`` for every ``y > 0``."""
    return special.gamma(0.5 + s) / (np.sqrt(np.pi) * special.gamma(s))


def poisson_kernel(x, y, params: FracParams):
    y = np.asarray(y, dtype=float)
    if np.any(y <= 0):
        raise ValueError("poisson_kernel needs y > 0")
    x = np.asarray(x, dtype=float)
    s = params.s
    out = poisson_constant(s) * y ** (2 * s) / (x * x + y * y) ** (0.5 + s)
    return out if out.ndim else float(out)


def calibration_constant(params: FracParams) -> float:
    """Ratio ``apply / conormal_derivative`` for the same trace.

    ``apply`` realizes ``2 c_g PV∫ (u(x) - u(t)) |x - t|^{-1-2s} dt`` while the
    conormal derivative of the extension equals ``2 s c(s)`` times the same
    principal value integral.
    """
    return params.c_gagliardo / (params.s * poisson_constant(params.s))


def _g(zeta: np.ndarray, s: float) -> np.ndarray:
    # ((1 + ζ²)^{(1-2s)/2} - 1) / (1 - 2s), with its log limit at s = 1/2
    lp = np.log1p(zeta * zeta)
    eps = 1.0 - 2.0 * s
    if eps == 0.0:
        return 0.5 * lp
    return np.expm1(0.5 * eps * lp) / eps


def _f0(z: np.ndarray, y: np.ndarray, s: float) -> np.ndarray:
    # F0 = sign(z) (1/2 - I_{y²/r²}(s, 1/2) / 2); the tail form keeps accuracy as y -> 0
    w = np.minimum(y * y / (z * z + y * y), 1.0)
    return np.sign(z) * (0.5 - 0.5 * special.betainc(s, 0.5, w))


def _f1(z: np.ndarray, y: np.ndarray, s: float) -> np.ndarray:
    return poisson_constant(s) * y * _g(z / y, s)


def _ya_dyf0(z: np.ndarray, y: np.ndarray, s: float) -> np.ndarray:
    # y^a ∂y F0 = -c z / r^{1+2s}
    return -poisson_constant(s) * z * (z * z + y * y) ** (-0.5 - s)


def _ya_dyf1(z: np.ndarray, y: np.ndarray, s: float) -> np.ndarray:
    zeta = z / y
    pz = (1.0 + zeta * zeta) ** (-0.5 - s)
    return poisson_constant(s) * y ** (1.0 - 2.0 * s) * (_g(zeta, s) - zeta * zeta * pz)


@dataclass(frozen=True)
class ExtensionEvaluator:
    """Extension of one or several P1 traces sharing a grid.

    ``trace`` has shape ``(n,)`` or ``(k, n)``; values at the two boundary
    points of the interval are zero by convention.  ``zeros`` lists extra
    abscissae inside the interval where every component is pinned to zero
    (free-boundary points falling between grid nodes); they become
    additional nodes of the piecewise-linear trace.  ``inserted`` adds nodes
    with prescribed values as ``(x, value)`` pairs (``value`` a sequence of
    length k for several components), e.g. to grade the trace toward a
    singular point.
    """

    grid: Grid1D
    params: FracParams
    trace: np.ndarray
    zeros: tuple = ()
    inserted: tuple = ()
    chunk: int = 4096
    _xs: np.ndarray = field(init=False, repr=False, compare=False)
    _nodal: np.ndarray = field(init=False, repr=False, compare=False)
    _slopes: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        tr = np.array(self.trace, dtype=float)
        if tr.shape[-1] != self.grid.n:
            raise ValueError("trace length does not match the grid")
        tr.setflags(write=False)
        object.__setattr__(self, "trace", tr)
        mat = np.atleast_2d(tr)
        xs = self.grid.full_nodes()
        nodal = np.zeros((self.grid.n + 2, mat.shape[0]))
        nodal[1:-1] = mat.T
        k = mat.shape[0]
        pairs = [(float(z), np.zeros(k), True) for z in self.zeros]
        pairs += [(float(x), np.broadcast_to(np.asarray(v, float), (k,)), False) for x, v in self.inserted]
        pairs.sort(key=lambda item: item[0])
        kept = []
        for x, v, is_zero in pairs:
            if not self.grid.x_left < x < self.grid.x_right:
                raise ValueError("inserted nodes must lie inside the interval")
            # nodes coinciding with grid nodes or earlier insertions are dropped
            if np.min(np.abs(x - xs)) <= 1e-12 * self.grid.h or (kept and x <= kept[-1][0]):
                continue
            kept.append((x, v, is_zero))
        if kept:
            ex = np.array([x for x, _, _ in kept])
            pos = np.searchsorted(xs, ex)
            xs = np.insert(xs, pos, ex)
            nodal = np.insert(nodal, pos, np.array([v for _, v, _ in kept]), axis=0)
        object.__setattr__(self, "zeros", tuple(x for x, _, z in kept if z))
        object.__setattr__(self, "_xs", xs)
        object.__setattr__(self, "_nodal", nodal)
        object.__setattr__(self, "_slopes", np.diff(nodal, axis=0) / np.diff(xs)[:, None])

    @property
    def k(self) -> int:
        return self._nodal.shape[1]

    @property
    def scalar(self) -> bool:
        return self.trace.ndim == 1

    def _shape(self, arr: np.ndarray, shape: tuple) -> np.ndarray:
        arr = arr.reshape(shape + (self.k,))
        return arr[..., 0] if self.scalar else arr

    def trace_values(self, x) -> np.ndarray:
        """Piecewise-linear trace at arbitrary abscissae (zero outside)."""
        x = np.asarray(x, dtype=float)
        xs = self._xs
        cols = [np.interp(x.ravel(), xs, self._nodal[:, i], left=0.0, right=0.0) for i in range(self.k)]
        return self._shape(np.stack(cols, axis=-1), x.shape)

    def evaluate(self, x, y, want: str = "wxy") -> tuple[np.ndarray, ...]:
        """Return the requested fields in the order of ``want``.

        ``'w'`` value, ``'x'`` for ∂x w, ``'y'`` for the weighted y^a ∂y w.
        """
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        x, y = np.broadcast_arrays(x, y)
        if np.any(y <= 0):
            raise ValueError("evaluation points need y > 0")
        shape = x.shape
        xf, yf = x.ravel(), y.ravel()
        xs = self._xs
        s = self.params.s
        u, m = self._nodal[:-1], self._slopes
        outs = {key: np.empty((xf.size, self.k)) for key in want}
        for lo in range(0, xf.size, self.chunk):
            sl = slice(lo, lo + self.chunk)
            z = xf[sl, None] - xs[None, :]
            yy = np.broadcast_to(yf[sl, None], z.shape)
            zl = z[:, :-1]
            if "w" in outs or "x" in outs:
                f0 = _f0(z, yy, s)
                d0 = f0[:, :-1] - f0[:, 1:]
                if "x" in outs:
                    outs["x"][sl] = d0 @ m
                if "w" in outs:
                    f1 = _f1(z, yy, s)
                    d1 = f1[:, :-1] - f1[:, 1:]
                    outs["w"][sl] = d0 @ u + (zl * d0) @ m - d1 @ m
            if "y" in outs:
                g0 = _ya_dyf0(z, yy, s)
                g1 = _ya_dyf1(z, yy, s)
                e0 = g0[:, :-1] - g0[:, 1:]
                e1 = g1[:, :-1] - g1[:, 1:]
                outs["y"][sl] = e0 @ u + (zl * e0) @ m - e1 @ m
        return tuple(self._shape(outs[key], shape) for key in want)

    def value(self, x, y) -> np.ndarray:
        return self.evaluate(x, y, "w")[0]

    def gradient(self, x, y) -> tuple[np.ndarray, np.ndarray]:
        """``(∂x w, ∂y w)``."""
        wx, wyw = self.evaluate(x, y, "xy")
        ya = np.asarray(y, dtype=float) ** (1.0 - 2.0 * self.params.s)
        if not self.scalar:
            ya = ya[..., None]
        return wx, wyw / ya

    @property
    def kinks(self) -> np.ndarray:
        """Abscissae where the trace may fail to be smooth."""
        return self._xs


def extend(ev: ExtensionEvaluator, X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    return ev.value(X[..., 0], X[..., 1])


def extend_gradient(ev: ExtensionEvaluator, X) -> tuple[np.ndarray, np.ndarray]:
    X = np.asarray(X, dtype=float)
    return ev.gradient(X[..., 0], X[..., 1])


@dataclass
class ConormalResult:
    value: np.ndarray
    ladder_residual: np.ndarray
    converged: np.ndarray


def _richardson(values: np.ndarray, ys: np.ndarray, exponents: list[float]) -> tuple[np.ndarray, np.ndarray]:
    """Repeated elimination of ``y^p`` terms; returns (best, last correction)."""
    table = [values]
    ratio = ys[0] / ys[1]
    for p in exponents:
        prev = table[-1]
        fac = ratio**p
        table.append((fac * prev[1:] - prev[:-1]) / (fac - 1.0))
        if table[-1].shape[0] == 1:
            break
    best = table[-1][-1]
    resid = np.abs(table[-1][-1] - table[-2][-1])
    return best, resid


def conormal_derivative(
    ev: ExtensionEvaluator,
    x,
    y0: float | None = None,
    rungs: int = 6,
    tol: float = 1e-6,
) -> ConormalResult:
    """``-lim_{y→0} y^a ∂y w(x, y)`` by Richardson extrapolation.

    The ladder is ``y_j = y0·2^{-j}``; corrections are eliminated in the order
    ``y^{2-2s}, y², y^{4-2s}, y⁴, ...``, the powers present in the expansion
    of ``y^a ∂y w`` near a point where the trace is smooth.  ``x`` should keep
    a distance of a fraction of ``h`` from the grid nodes (trace kinks).
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any((x <= ev.grid.x_left) | (x >= ev.grid.x_right)):
        raise ValueError("conormal_derivative needs x inside the interval")
    s = ev.params.s
    if y0 is None:
        y0 = 0.1 * ev.grid.h
    ys = y0 * 2.0 ** -np.arange(rungs)
    X = np.repeat(x[None, :], rungs, axis=0)
    Y = np.repeat(ys[:, None], x.size, axis=1)
    (wyw,) = ev.evaluate(X, Y, "y")
    q = -wyw
    exps = []
    j = 0
    while len(exps) < rungs - 1:
        exps.extend([2.0 * j + 2.0 - 2.0 * s, 2.0 * j + 2.0])
        j += 1
    exps = sorted(exps[: rungs - 1])
    val, resid = _richardson(q, ys, exps)
    scale = np.maximum(np.abs(val), 1.0)
    return ConormalResult(value=val, ladder_residual=resid, converged=resid <= tol * scale)


def export_csv(ev: ExtensionEvaluator, xs, ys, path: str | Path, component: int = 0) -> Path:
    """Write ``x, y, w, dwdx, dwdy`` rows on the tensor grid ``xs × ys``."""
    X, Y = np.meshgrid(np.asarray(xs, float), np.asarray(ys, float), indexing="ij")
    w = ev.value(X, Y)
    wx, wy = ev.gradient(X, Y)
    if not ev.scalar:
        w, wx, wy = w[..., component], wx[..., component], wy[..., component]
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["x", "y", "w", "dwdx", "dwdy"])
        for row in zip(X.ravel(), Y.ravel(), w.ravel(), wx.ravel(), wy.ravel()):
            out.writerow([f"{v:.17g}" for v in row])
    tmp.replace(path)
    return path
