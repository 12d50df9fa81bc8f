"""Gagliardo form of the restricted fractional Laplacian on a 1-D grid.

The form is discretized with continuous piecewise-linear hat functions
extended by zero outside the interval.  On a uniform grid the entries

    A_ij = c ∬_{R×R} (φ_i(x)-φ_i(y)) (φ_j(x)-φ_j(y)) |x-y|^{-1-2s} dx dy

depend only on |i-j| and are computed exactly: the double integral over
all of R×R already contains the exterior (killing) contribution, and the
kernel is integrated in closed form against the hat differences.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import linalg, special

from .params import FracParams, Grid1D

_FAR_OFFSET = 6
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(12)


def standard_gagliardo_constant(s: float) -> float:
    """Constant making the form equal to ∫|ξ|^{2s}|û|² dξ/(2π) in 1-D."""
    c1s = s * 4.0**s * special.gamma(0.5 + s) / (np.sqrt(np.pi) * special.gamma(1.0 - s))
    return 0.5 * c1s


def _near_entries(k: np.ndarray, s: float) -> np.ndarray:
    # fourth difference of z^2 (|z|^eps - 1)/eps, the double antiderivative of the kernel
    eps = 1.0 - 2.0 * s

    def f(z: np.ndarray) -> np.ndarray:
        z = np.abs(z.astype(float))
        logz = np.log(np.where(z > 0, z, 1.0))
        g = np.expm1(eps * logz) / eps if eps != 0.0 else logz
        return z * z * np.where(z > 0, g, 0.0)

    d4 = f(k - 2) - 4 * f(k - 1) + 6 * f(k) - 4 * f(k + 1) + f(k + 2)
    return 2.0 * d4 / (2 * s * (2 - 2 * s) * (3 - 2 * s))


def _cubic_bspline(z: np.ndarray) -> np.ndarray:
    z = np.abs(z)
    inner = (4.0 - 6.0 * z**2 + 3.0 * z**3) / 6.0
    outer = (2.0 - z) ** 3 / 6.0
    return np.where(z <= 1.0, inner, np.where(z <= 2.0, outer, 0.0))


def _far_entries(k: np.ndarray, s: float) -> np.ndarray:
    # disjoint supports: entry = -2 ∫ (φ_0 * φ_0)(z) |k - z|^{-1-2s} dz
    pts, wts = [], []
    for lo in (-2.0, -1.0, 0.0, 1.0):
        pts.append(lo + 0.5 * (_GL_NODES + 1.0))
        wts.append(0.5 * _GL_WEIGHTS)
    z = np.concatenate(pts)
    w = np.concatenate(wts) * _cubic_bspline(z)
    dist = np.abs(k[:, None].astype(float) - z[None, :])
    return -2.0 * (dist ** (-1.0 - 2.0 * s)) @ w


def toeplitz_column(n: int, s: float) -> np.ndarray:
    """Entries t(k), k = 0..n-1, of the unit-spacing, unit-constant form."""
    k = np.arange(n)
    out = np.empty(n)
    near = k < _FAR_OFFSET
    out[near] = _near_entries(k[near], s)
    if (~near).any():
        out[~near] = _far_entries(k[~near], s)
    return out


@dataclass(frozen=True)
class StiffnessForm:
    """Assembled form ``A`` on ``grid``; the discrete L² product is ``h·uᵀv``."""

    grid: Grid1D
    params: FracParams
    matrix: np.ndarray = field(repr=False, compare=False)

    @property
    def h(self) -> float:
        return self.grid.h

    @property
    def n(self) -> int:
        return self.grid.n

    def energy(self, u: np.ndarray) -> float:
        u = _check_vector(self, u)
        return float(u @ (self.matrix @ u))


@dataclass
class EigenResult:
    lam: float
    phi: np.ndarray
    residual_norm: float
    iterations: int
    converged: bool = True
    mask: np.ndarray | None = None


def _check_vector(form: StiffnessForm, u: np.ndarray) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if u.shape[-1] != form.n:
        raise ValueError(f"vector length {u.shape[-1]} does not match grid size {form.n}")
    return u


def _build(grid: Grid1D, params: FracParams, column: np.ndarray) -> StiffnessForm:
    scale = params.c_gagliardo * grid.h ** (1.0 - 2.0 * params.s)
    mat = linalg.toeplitz(scale * column)
    mat.setflags(write=False)
    return StiffnessForm(grid=grid, params=params, matrix=mat)


def _cache_path(cache_dir: Path, grid: Grid1D, params: FracParams) -> Path:
    key = json.dumps(
        [repr(float(params.s)), grid.n, repr(float(grid.x_left)), repr(float(grid.x_right)),
         repr(float(params.c_gagliardo))]
    )
    digest = hashlib.sha256(key.encode()).hexdigest()[:20]
    return Path(cache_dir) / f"form_{digest}.npz"


def assemble_form(grid: Grid1D, params: FracParams, cache_dir: str | Path | None = None) -> StiffnessForm:
    """Assemble the form, optionally through an on-disk cache.

    The cache stores the Toeplitz column together with its key fields
    (s, n, interval, c_gagliardo); see docs/FORMATS.md.
    """
    if not isinstance(grid, Grid1D) or not isinstance(params, FracParams):
        raise TypeError("assemble_form expects a Grid1D and a FracParams")
    if cache_dir is None:
        return _build(grid, params, toeplitz_column(grid.n, params.s))

    path = _cache_path(Path(cache_dir), grid, params)
    if path.exists():
        with np.load(path) as data:
            meta = (float(data["s"]), int(data["n"]), float(data["x_left"]),
                    float(data["x_right"]), float(data["c_gagliardo"]))
            if meta == (params.s, grid.n, grid.x_left, grid.x_right, params.c_gagliardo):
                return _build(grid, params, data["column"])
    column = toeplitz_column(grid.n, params.s)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(".tmp.npz")
    np.savez(tmp, column=column, s=params.s, n=grid.n, x_left=grid.x_left,
             x_right=grid.x_right, c_gagliardo=params.c_gagliardo)
    tmp.replace(path)
    return _build(grid, params, column)


def apply(form: StiffnessForm, u: np.ndarray) -> np.ndarray:
    """``A u / h``, the discrete (-Δ)^s at interior nodes (form normalization)."""
    u = _check_vector(form, u)
    return (form.matrix @ u.T).T / form.h


def rayleigh(form: StiffnessForm, u: np.ndarray) -> float:
    u = _check_vector(form, u)
    den = form.h * float(u @ u)
    if den == 0.0:
        raise ValueError("Rayleigh quotient of the zero vector")
    return float(u @ (form.matrix @ u)) / den


def smallest_eigenpair(
    form: StiffnessForm,
    mask: np.ndarray | None = None,
    tol: float = 1e-10,
    max_iter: int = 10_000,
) -> EigenResult:
    """Principal eigenpair of ``A φ = λ h φ`` restricted to the masked nodes.

    Inverse iteration with a Cholesky factorization of the masked block.
    ``phi`` is returned on the full grid (zero off the mask), nonnegative and
    normalized so that ``h·Σφ² = 1``.
    """
    if mask is None:
        mask = np.ones(form.n, dtype=bool)
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != (form.n,):
        raise ValueError("mask length does not match the grid")
    idx = np.flatnonzero(mask)
    if idx.size == 0:
        raise ValueError("empty mask")
    h = form.h
    sub = form.matrix[np.ix_(idx, idx)] / h
    chol = linalg.cho_factor(sub, lower=True)

    v = np.ones(idx.size)
    v /= np.sqrt(h * (v @ v))
    best = (np.inf, v, 0.0)
    res = np.inf
    it = 0
    for it in range(1, max_iter + 1):
        w = linalg.cho_solve(chol, v)
        v = w / np.sqrt(h * (w @ w))
        av = sub @ v
        lam = h * float(v @ av)
        res = float(np.sqrt(h * np.sum((av - lam * v) ** 2)))
        if res < best[0]:
            best = (res, v.copy(), lam)
        if res <= tol:
            break
    res, v, lam = best
    if v.sum() < 0:
        v = -v
    phi = np.zeros(form.n)
    phi[idx] = np.maximum(v, 0.0) if np.all(v > -1e-8 * np.abs(v).max()) else v
    return EigenResult(lam=lam, phi=phi, residual_norm=res, iterations=it,
                       converged=res <= tol, mask=mask.copy())
