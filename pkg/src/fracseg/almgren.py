"""Frequency-type quantities of weighted harmonic fields in the half-plane.

All functions take a *field*: any object with ``params`` and
``evaluate(x, y, want)`` (see :mod:`fracseg.fields`) plus ``trace_values`` for
the boundary integrals.  Components of vector fields are summed in the
quadratic quantities.

Half-disk integrals split the energy density as

    y^a |∇w|² = y^a (∂x w)² + y^{-a} (y^a ∂y w)²,

so in polar coordinates each piece carries an exact ``sin^{±a} θ`` weight
handled by Gauss–Jacobi rules.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import PchipInterpolator

from .extension import calibration_constant
from .params import FracParams
from .quadrature import (angular_rule, circle_rule, gauss_on, graded_breaks, legendre01,
                         segment_breaks)

H_FLOOR = 1e-14


@dataclass(frozen=True)
class LinearReaction:
    """``f_i(t) = κ_i t`` in the normalization of the extension.

    Build it with :meth:`from_multipliers` from Lagrange multipliers of the
    discrete problem, which live in the normalization of the stiffness form.
    """

    kappa: np.ndarray

    @classmethod
    def from_multipliers(cls, lam, params: FracParams) -> "LinearReaction":
        lam = np.atleast_1d(np.asarray(lam, dtype=float))
        return cls(kappa=lam / calibration_constant(params))

    def f(self, u: np.ndarray) -> np.ndarray:
        return self._k(u) * u

    def F(self, u: np.ndarray) -> np.ndarray:
        return 0.5 * self._k(u) * u * u

    def _k(self, u: np.ndarray):
        # one coefficient acts on scalar fields; k coefficients on the last axis
        k = np.atleast_1d(np.asarray(self.kappa, dtype=float))
        return k[0] if k.size == 1 else k


def _sum_components(arr: np.ndarray, scalar: bool) -> np.ndarray:
    return arr if scalar else arr.sum(axis=-1)


def _is_scalar(fieldobj) -> bool:
    return bool(getattr(fieldobj, "scalar", True))


@dataclass
class CircleData:
    """Angular integrals on half-circles ``ρ = radii`` about ``(x0, 0)``."""

    radii: np.ndarray
    w2: np.ndarray  # ∫ sin^a Σ w²
    wx2: np.ndarray  # ∫ sin^a Σ (∂x w)²
    q2: np.ndarray  # ∫ sin^{-a} Σ (y^a ∂y w)²
    cos2_wx2: np.ndarray | None = None
    sin2_q2: np.ndarray | None = None
    cs_wxq: np.ndarray | None = None


class HalfBall:
    """Quadrature engine for a field about a trace-line point ``(x0, 0)``."""

    def __init__(self, fieldobj, x0: float, n_ang: int = 64, n_rad: int = 32,
                 breakpoints: bool = True):
        self.field = fieldobj
        self.params: FracParams = fieldobj.params
        self.x0 = float(x0)
        self.n_ang = int(n_ang)
        self.n_rad = int(n_rad)
        self.breakpoints = breakpoints
        self.scalar = _is_scalar(fieldobj)

    def _points(self, radii: np.ndarray, b: float):
        theta, wts = angular_rule(self.n_ang, float(b))
        X = self.x0 + radii[:, None] * np.cos(theta)[None, :]
        Y = radii[:, None] * np.sin(theta)[None, :]
        return theta, wts, X, Y

    def _bcast(self, v: np.ndarray) -> np.ndarray:
        return v if self.scalar else v[..., None]

    def circles(self, radii, full: bool = False) -> CircleData:
        radii = np.asarray(radii, dtype=float)
        a = self.params.a
        th_a, w_a, X, Y = self._points(radii, a)
        want = "wx"
        vals = self.field.evaluate(X, Y, want)
        w, wx = vals[0], vals[1]
        S = self._sum
        out = CircleData(radii=radii, w2=S(w * w) @ w_a, wx2=S(wx * wx) @ w_a, q2=None)
        if full:
            c = self._bcast(np.cos(th_a))
            out.cos2_wx2 = S(c * c * wx * wx) @ w_a
        th_m, w_m, Xm, Ym = self._points(radii, -a)
        (q,) = self.field.evaluate(Xm, Ym, "y")
        out.q2 = S(q * q) @ w_m
        if full:
            sn = self._bcast(np.sin(th_m))
            out.sin2_q2 = S(sn * sn * q * q) @ w_m
            th0, w0, X0, Y0 = self._points(radii, 0.0)
            wx0, q0 = self.field.evaluate(X0, Y0, "xy")
            cs = self._bcast(np.cos(th0) * np.sin(th0))
            out.cs_wxq = S(cs * wx0 * q0) @ w0
        return out

    def _sum(self, arr: np.ndarray) -> np.ndarray:
        return _sum_components(arr, self.scalar)

    def radial_breaks(self, radii: np.ndarray) -> np.ndarray:
        radii = np.sort(np.asarray(radii, dtype=float))
        br = [graded_breaks(radii[0]), radii]
        kinks = np.asarray(getattr(self.field, "kinks", np.empty(0)), dtype=float)
        if self.breakpoints and kinks.size:
            d = np.abs(kinks - self.x0)
            br.append(d[(d > 0) & (d < radii[-1])])
        out = np.unique(np.concatenate(br))
        out = out[np.concatenate([[True], np.diff(out) > 1e-12 * radii[-1]])]
        # the radii themselves must survive deduplication exactly
        out[np.abs(out[:, None] - radii[None, :]).argmin(axis=0)] = radii
        return out

    def bulk(self, radii) -> np.ndarray:
        """Cumulative ``∫_{B_r^+} y^a |∇w|²`` at each radius."""
        radii = np.asarray(radii, dtype=float)
        order = np.argsort(radii)
        breaks = self.radial_breaks(radii)
        n_piece = self.n_rad if not self.breakpoints else max(8, self.n_rad // 4)
        xg, wg = legendre01(n_piece)
        lo, width = breaks[:-1, None], np.diff(breaks)[:, None]
        rho = (lo + width * xg).ravel()
        wts = (width * wg).ravel()
        a = self.params.a
        data = self._bulk_integrand(rho)
        dens = wts * (rho ** (1.0 + a) * data[0] + rho ** (1.0 - a) * data[1])
        per_piece = dens.reshape(-1, n_piece).sum(axis=1)
        cum = np.concatenate([[0.0], np.cumsum(per_piece)])
        idx = np.searchsorted(breaks, radii[order])
        out = np.empty_like(radii)
        out[order] = cum[idx]
        return out

    def _bulk_integrand(self, rho: np.ndarray):
        a = self.params.a
        _, w_a, X, Y = self._points(rho, a)
        (wx,) = self.field.evaluate(X, Y, "x")
        _, w_m, Xm, Ym = self._points(rho, -a)
        (q,) = self.field.evaluate(Xm, Ym, "y")
        return self._sum(wx * wx) @ w_a, self._sum(q * q) @ w_m

    def segment(self, r: float, fn, order: int = 8, componentwise: bool = True) -> float:
        """``∫_{x0-r}^{x0+r} fn(trace(x)) dx`` with breaks at trace kinks.

        With ``componentwise`` the values of ``fn`` are summed over components.
        """
        kinks = np.asarray(getattr(self.field, "kinks", np.empty(0)), dtype=float)
        breaks = segment_breaks(self.x0, r, kinks)
        x, w = gauss_on(breaks, order)
        vals = np.asarray(fn(self.field.trace_values(x)))
        if componentwise:
            vals = self._sum(vals)
        return float(np.sum(w * vals))

    def trace_at(self, x) -> np.ndarray:
        return np.asarray(self.field.trace_values(np.asarray(x, float)))


@dataclass
class FrequencyProfile:
    x0: float
    y0: float
    radii: np.ndarray
    E: np.ndarray
    H: np.ndarray
    N: np.ndarray
    psi: np.ndarray
    Psi: np.ndarray
    mode: str
    bulk: np.ndarray = field(repr=False, default=None)
    tau: float = 1.0
    psi_flagged: bool = False
    s: float = 0.5

    @property
    def valid(self) -> np.ndarray:
        return self.H > H_FLOOR


def _uf(reaction, u: np.ndarray) -> np.ndarray:
    return u * reaction.f(u)


def energy_E(fieldobj, x0: float, radii, reaction=None, n_ang: int = 64, n_rad: int = 32,
             engine: HalfBall | None = None) -> np.ndarray:
    """``r^{-a} [∫_{B_r^+} y^a |∇u|² - ∫_{x0-r}^{x0+r} ⟨u, f(u)⟩]``."""
    radii = np.atleast_1d(np.asarray(radii, dtype=float))
    hb = engine or HalfBall(fieldobj, x0, n_ang, n_rad)
    bulk = hb.bulk(radii)
    bnd = np.zeros_like(radii)
    if reaction is not None:
        bnd = np.array([hb.segment(r, lambda u: _uf(reaction, u)) for r in radii])
    return radii ** (-hb.params.a) * (bulk - bnd)


def height_H(fieldobj, x0: float, radii, n_ang: int = 64, engine: HalfBall | None = None) -> np.ndarray:
    """``r^{-1-a} ∫_{∂^+B_r^+} y^a u² dσ`` (equal to ``∫ sin^a θ u² dθ``)."""
    radii = np.atleast_1d(np.asarray(radii, dtype=float))
    hb = engine or HalfBall(fieldobj, x0, n_ang)
    return hb.circles(radii).w2


def frequency_N(E, H, h_floor: float = H_FLOOR):
    """``E/H`` where ``H > h_floor``; NaN marks undefined radii."""
    E = np.asarray(E, dtype=float)
    H = np.asarray(H, dtype=float)
    out = np.full(np.broadcast(E, H).shape, np.nan)
    ok = H > h_floor
    np.divide(E, H, out=out, where=ok)
    return out if out.ndim else float(out)


def default_radii(h: float, dist: float, m: int = 24, r_bar: float | None = None) -> np.ndarray:
    """Geometric radii on ``[4h, min(r_bar, dist)/2]``."""
    top = 0.5 * (dist if r_bar is None else min(r_bar, dist))
    if top <= 4 * h:
        raise ValueError("radius window is empty: base point too close to the boundary")
    return np.geomspace(4 * h, top, m)


def psi_Psi(fieldobj, x0: float, radii, params: FracParams, tau: float = 1.0,
            engine: HalfBall | None = None) -> tuple[np.ndarray, np.ndarray, bool]:
    """Samples of ψ and Ψ on ``radii`` plus a flag for non-monotone ψ.

    ψ(r) = r (r^{-1} ∫_{x0-r}^{x0+r} |u|^{2+τ})^{τ/(2+τ)} and
    Ψ(r) = ∫_0^r t^{-a} (1 + ψ'(t)) dt with ψ' taken from a monotone PCHIP
    interpolant through (0, 0) and the samples.
    """
    if not tau > 0:
        raise ValueError("tau must be positive")
    radii = np.atleast_1d(np.asarray(radii, dtype=float))
    hb = engine or HalfBall(fieldobj, x0)
    p = 2.0 + tau

    def powsum(u):
        u = np.asarray(u, float)
        sq = u * u if hb.scalar else np.sum(u * u, axis=-1)
        return sq ** (0.5 * p)

    integ = np.array([hb.segment(r, powsum, componentwise=False) for r in radii])
    psi = radii * np.maximum(integ / radii, 0.0) ** (tau / p)
    Psi, flagged = _Psi_from_psi(radii, psi, params.a)
    return psi, Psi, flagged


def _Psi_from_psi(radii: np.ndarray, psi: np.ndarray, a: float):
    flagged = bool(np.any(np.diff(psi) < 0))
    env = np.maximum.accumulate(psi)
    if flagged:
        warnings.warn("psi is not monotone; using its running maximum", RuntimeWarning, stacklevel=3)
    t = np.concatenate([[0.0], radii])
    interp = PchipInterpolator(t, np.concatenate([[0.0], env]))
    coef = interp.c  # shape (4, pieces), highest power first in (t - t_j)
    out = np.empty(radii.size)
    total = 0.0
    xg, wg = legendre01(12)
    for j in range(radii.size):
        lo, hi = t[j], t[j + 1]
        c3, c2, c1, _ = coef[:, j]
        if j == 0:
            # ψ' = c1 + 2 c2 t + 3 c3 t² on [0, r1]; t^{-a} integrated exactly
            e = 1.0 - a
            piece = c1 * hi**e / e + 2 * c2 * hi ** (e + 1) / (e + 1) + 3 * c3 * hi ** (e + 2) / (e + 2)
        else:
            tt = lo + (hi - lo) * xg
            d = tt - lo
            dpsi = c1 + 2 * c2 * d + 3 * c3 * d * d
            piece = (hi - lo) * np.sum(wg * tt ** (-a) * dpsi)
        total += piece
        out[j] = radii[j] ** (1.0 - a) / (1.0 - a) + total
    return out, flagged


def frequency_profile(fieldobj, x0: float, radii, reaction=None, mode: str = "free_boundary",
                      tau: float = 1.0, n_ang: int = 64, n_rad: int = 32) -> FrequencyProfile:
    """E, H, N, ψ and Ψ at one trace-line point over a radius grid."""
    if mode not in ("free_boundary", "zero_trace", "neumann_w"):
        raise ValueError(f"unknown mode {mode!r}")
    radii = np.sort(np.atleast_1d(np.asarray(radii, dtype=float)))
    params = fieldobj.params
    hb = HalfBall(fieldobj, x0, n_ang, n_rad)
    bulk = hb.bulk(radii)
    bnd = np.zeros_like(radii)
    if reaction is not None:
        bnd = np.array([hb.segment(r, lambda u: _uf(reaction, u)) for r in radii])
    E = radii ** (-params.a) * (bulk - bnd)
    H = hb.circles(radii).w2
    N = frequency_N(E, H)
    psi, Psi, flagged = psi_Psi(fieldobj, x0, radii, params, tau, engine=hb)
    return FrequencyProfile(x0=float(x0), y0=0.0, radii=radii, E=E, H=H, N=N, psi=psi, Psi=Psi,
                            mode=mode, bulk=bulk, tau=tau, psi_flagged=flagged, s=params.s)


def corrected_frequency(profile: FrequencyProfile, C: float) -> np.ndarray:
    """``e^{CΨ(r)} (N(r) + 1)``."""
    with np.errstate(over="ignore"):
        return np.exp(C * profile.Psi) * (profile.N + 1.0)


@dataclass
class MonotoneFit:
    C: float
    success: bool
    corrected: np.ndarray
    worst_drop: float


def _worst_drop(vals: np.ndarray) -> float:
    v = vals[np.isfinite(vals)]
    if v.size < 2:
        return 0.0
    return float(np.max(-np.diff(v) / np.maximum(1.0, np.abs(v[:-1]))))


def min_monotone_C(profile: FrequencyProfile, slack: float = 1e-3, C_max: float = 1e3,
                   tol: float = 1e-3) -> MonotoneFit:
    """Smallest ``C ≥ 0`` making the corrected frequency nondecreasing up to ``slack``."""
    if not np.all(profile.valid):
        raise ValueError("corrected frequency needs H > h_floor at every radius")

    def ok(C):
        return _worst_drop(corrected_frequency(profile, C)) <= slack

    if ok(0.0):
        C = 0.0
    elif not ok(C_max):
        corr = corrected_frequency(profile, C_max)
        return MonotoneFit(C=C_max, success=False, corrected=corr, worst_drop=_worst_drop(corr))
    else:
        lo, hi = 0.0, C_max
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            lo, hi = (lo, mid) if ok(mid) else (mid, hi)
        C = hi
    corr = corrected_frequency(profile, C)
    return MonotoneFit(C=C, success=True, corrected=corr, worst_drop=_worst_drop(corr))


def extrapolate_N0(profile: FrequencyProfile, C: float, n_fit: int = 5) -> tuple[float, float]:
    """Linear fit in r of the corrected frequency at the smallest radii.

    Returns ``(N(0+), slope)``.
    """
    ok = profile.valid
    r = profile.radii[ok][:n_fit]
    c = corrected_frequency(profile, C)[ok][:n_fit]
    if r.size < 2:
        return float("nan"), float("nan")
    slope, icpt = np.polyfit(r, c, 1)
    return float(icpt - 1.0), float(slope)


# ---------------------------------------------------------------- Pohozaev

@dataclass
class PohozaevReport:
    x0: float
    r: float
    bulk_term: float
    sphere_term: float
    trace_term: float
    corner_term: float
    radial_term: float
    residual: float
    scale: float
    normalized: float

    @property
    def terms(self) -> tuple[float, float, float, float, float]:
        return (self.bulk_term, self.sphere_term, self.trace_term, self.corner_term, self.radial_term)


def pohozaev_residual(fieldobj, x0: float, r: float, reaction=None, n_ang: int = 64,
                      n_rad: int = 32) -> PohozaevReport:
    """Terms of the radial-multiplier identity on ``B_r^+(x0, 0)``, n = 1:

        -a ∫_B y^a|∇u|² + r ∫_{∂^+} y^a|∇u|² + 2 ∫_{∂^0} F(u) - 2r ΣF(u(x0±r))
            = 2r ∫_{∂^+} y^a (∂_r u)².
    """
    hb = HalfBall(fieldobj, x0, n_ang, n_rad)
    a = hb.params.a
    r = float(r)
    bulk = float(hb.bulk(np.array([r]))[0])
    cd = hb.circles(np.array([r]), full=True)
    grad_sphere = r ** (1 + a) * cd.wx2[0] + r ** (1 - a) * cd.q2[0]
    dr2 = r ** (1 + a) * cd.cos2_wx2[0] + 2 * r * cd.cs_wxq[0] + r ** (1 - a) * cd.sin2_q2[0]
    if reaction is None:
        t3 = t4 = 0.0
    else:
        t3 = 2.0 * hb.segment(r, reaction.F)
        ends = hb.trace_at(np.array([x0 - r, x0 + r]))
        t4 = -2.0 * r * float(np.sum(reaction.F(ends)))
    t1 = -a * bulk
    t2 = r * grad_sphere
    t5 = 2.0 * r * dr2
    resid = abs(t1 + t2 + t3 + t4 - t5)
    scale = abs(t1) + abs(t2) + abs(t3) + abs(t4) + abs(t5)
    return PohozaevReport(x0=float(x0), r=r, bulk_term=t1, sphere_term=t2, trace_term=t3,
                          corner_term=t4, radial_term=t5, residual=resid, scale=scale,
                          normalized=resid / scale if scale > 0 else 0.0)


# ---------------------------------------------------------------- other frequencies

def _full_ball(fieldobj, X0, radii, n_ang: int, n_rad: int):
    """Energy and boundary L² of ``u - u(X0)`` on full balls above the line."""
    x0, y0 = X0
    a = fieldobj.params.a
    radii = np.sort(np.atleast_1d(np.asarray(radii, dtype=float)))
    theta, wt = circle_rule(n_ang)
    scalar = _is_scalar(fieldobj)
    S = (lambda v: v) if scalar else (lambda v: v.sum(axis=-1))
    breaks = np.concatenate([[0.0], radii])
    rho, wr = gauss_on(breaks, n_rad)
    X = x0 + rho[:, None] * np.cos(theta)
    Y = y0 + rho[:, None] * np.sin(theta)
    wx, q = fieldobj.evaluate(X, Y, "xy")
    ya = Y**a if scalar else (Y**a)[..., None]
    dens = S(wx * wx * ya + q * q / ya) @ wt
    per = (wr * rho * dens).reshape(radii.size, n_rad).sum(axis=1)
    bulk = np.cumsum(per)
    (u0,) = fieldobj.evaluate(np.array([x0]), np.array([y0]), "w")
    Xc = x0 + radii[:, None] * np.cos(theta)
    Yc = y0 + radii[:, None] * np.sin(theta)
    (w,) = fieldobj.evaluate(Xc, Yc, "w")
    d = w - (u0[0] if scalar else u0[0][None, None, :])
    yac = Yc**a if scalar else (Yc**a)[..., None]
    sph = radii * (S(yac * d * d) @ wt)
    return radii, bulk, sph


def interior_frequency(fieldobj, X0, radii, n_ang: int = 64, n_rad: int = 16) -> np.ndarray:
    """Frequency about an interior point ``X0 = (x0, y0)``, ``y0 > 0``.

    ``r^{-a} ∫_{B_r} y^a|∇u|²`` over ``r^{-1-a} ∫_{∂B_r} y^a |u - u(X0)|²``.
    """
    x0, y0 = map(float, X0)
    radii = np.atleast_1d(np.asarray(radii, dtype=float))
    if y0 <= 0 or np.any(radii <= 0) or np.any(radii >= 0.5 * y0):
        raise ValueError("interior_frequency needs 0 < r < y0/2")
    order = np.argsort(radii)
    rs, bulk, sph = _full_ball(fieldobj, (x0, y0), radii, n_ang, n_rad)
    N = frequency_N(rs * bulk, sph)
    out = np.empty_like(radii)
    out[order] = N
    return out


def zero_trace_frequency(fieldobj, x0: float, radii, n_ang: int = 64, n_rad: int = 32,
                         atol: float = H_FLOOR) -> FrequencyProfile:
    """Half-ball frequency at a point whose trace vanishes on ``[x0-r, x0+r]``."""
    radii = np.atleast_1d(np.asarray(radii, dtype=float))
    rmax = radii.max()
    xs = np.linspace(x0 - rmax, x0 + rmax, 257)
    kinks = np.asarray(getattr(fieldobj, "kinks", np.empty(0)), float)
    xs = np.concatenate([xs, kinks[np.abs(kinks - x0) <= rmax]])
    tr = np.asarray(fieldobj.trace_values(xs))
    if np.max(np.abs(tr)) > atol:
        raise ValueError("trace does not vanish on the segment")
    return frequency_profile(fieldobj, x0, radii, None, "zero_trace", n_ang=n_ang, n_rad=n_rad)


@dataclass(frozen=True)
class NeumannSubstituted:
    """``w = u - u(X0) + y^{1-a} f(u(X0)) / (1-a)`` for a scalar field ``u``.

    With this sign ``-y^a ∂y w = f(u) - f(u(X0)) = V w`` on the trace line.
    """

    base: object
    x0: float
    f0: float
    u0: float

    scalar = True
    k = 1

    @property
    def params(self):
        return self.base.params

    @property
    def kinks(self):
        return getattr(self.base, "kinks", np.empty(0))

    def evaluate(self, x, y, want: str = "wxy"):
        vals = dict(zip(want, self.base.evaluate(x, y, want)))
        a = self.params.a
        y = np.asarray(y, float)
        if "w" in vals:
            vals["w"] = vals["w"] - self.u0 + y ** (1 - a) * self.f0 / (1 - a)
        if "y" in vals:
            vals["y"] = vals["y"] + self.f0
        return tuple(vals[k] for k in want)

    def trace_values(self, x):
        return np.asarray(self.base.trace_values(x)) - self.u0


@dataclass
class NeumannReport:
    profile: FrequencyProfile
    growth_C: float


def neumann_frequency(fieldobj, x0: float, radii, f=None, fprime=None, n_ang: int = 64,
                      n_rad: int = 32, positivity: float = 0.0) -> NeumannReport:
    """Frequency of the substituted field with boundary potential ``V``.

    ``f`` is the reaction in the normalization of the extension (callable);
    ``f = None`` means ``f ≡ 0``.  The report also carries the smallest
    constant in the interior energy growth bound over the radius grid.
    """
    radii = np.sort(np.atleast_1d(np.asarray(radii, dtype=float)))
    rmax = radii[-1]
    xs = np.linspace(x0 - rmax, x0 + rmax, 257)
    tr = np.asarray(fieldobj.trace_values(xs))
    if np.min(tr) <= positivity:
        raise ValueError("density is not bounded away from zero on the segment")
    u0 = float(np.asarray(fieldobj.trace_values(np.array([x0])))[0])
    f = f or (lambda t: 0.0 * t)
    f0 = float(f(np.array([u0]))[0])
    wfield = NeumannSubstituted(fieldobj, x0, f0, u0)

    def V(t):
        t = np.asarray(t, float)
        d = t - u0
        if fprime is not None:
            lin = fprime(np.full_like(t, u0))
        else:
            lin = (f(u0 + 1e-7) - f(u0 - 1e-7)) / 2e-7 * np.ones_like(t)
        safe = np.where(np.abs(d) > 1e-12, d, 1.0)
        return np.where(np.abs(d) > 1e-12, (f(t) - f0) / safe, lin)

    class _Pot:
        def f(self, w):
            return V(w + u0) * w

    prof = frequency_profile(wfield, x0, radii, _Pot(), "neumann_w", n_ang=n_ang, n_rad=n_rad)
    # growth bound for the original field
    hb = HalfBall(fieldobj, x0, n_ang, n_rad)
    bulk_u = hb.bulk(radii)
    cu = hb.circles(radii)
    R = radii[-1]
    s = fieldobj.params.s
    h_u = cu.w2[-1] * R ** (1 + fieldobj.params.a)  # ∫_{∂+} y^a u² dσ
    rhs = bulk_u[-1] / R + h_u / R**2 + R ** (2 * s)
    lhs = bulk_u / radii
    return NeumannReport(profile=prof, growth_C=float(np.max(lhs / rhs)))


# ---------------------------------------------------------------- Morrey and Poincaré

def morrey_quotient(fieldobj, X0, r: float, alpha: float | None = None, n_ang: int = 64,
                    n_rad: int = 32) -> float:
    """``|y_max|^{-a} r^{-2α*} ∫_{B_r(X0)} |y|^a |∇u|²`` in the plane (n = 1).

    Centres on the trace line use the even reflection (twice the half-ball
    energy); centres above the line need ``y0 ≥ r``.
    """
    x0, y0 = map(float, X0)
    params = fieldobj.params
    alpha = params.alpha_star if alpha is None else alpha
    a = params.a
    if r <= 0:
        raise ValueError("radius must be positive")
    if y0 == 0.0:
        energy = 2.0 * HalfBall(fieldobj, x0, n_ang, n_rad).bulk(np.array([r]))[0]
        ymax = r
    elif y0 >= r:
        _, bulk, _ = _full_ball(fieldobj, (x0, y0), np.array([r]), max(n_ang, 64), n_rad)
        energy = bulk[0]
        ymax = y0 + r
    else:
        raise ValueError("morrey_quotient supports y0 = 0 or y0 >= r")
    return float(ymax ** (-a) * energy / r ** (2 * alpha))


def sobolev_cap(s: float) -> float:
    """Largest admissible trace exponent: 2/(1-2s) for s < 1/2, capped at 10."""
    return min(2.0 / (1.0 - 2.0 * s), 10.0) if s < 0.5 else 10.0


@dataclass
class PoincareReport:
    ratio_trace: np.ndarray  # LHS/RHS of the trace inequality
    ratio_height: np.ndarray  # LHS/RHS of the height inequality
    p: float

    @property
    def C_trace(self) -> float:
        v = self.ratio_trace[np.isfinite(self.ratio_trace)]
        return float(v.max()) if v.size else float("nan")

    @property
    def C_height(self) -> float:
        v = self.ratio_height[np.isfinite(self.ratio_height)]
        return float(v.max()) if v.size else float("nan")


def poincare_terms(fieldobj, x0: float, r: float, p: float, n_ang: int = 64, n_rad: int = 32):
    """``(D, H, L)``: scaled energy, height and the L^p trace term at one radius."""
    hb = HalfBall(fieldobj, x0, n_ang, n_rad)
    a = fieldobj.params.a
    D = r ** (-a) * hb.bulk(np.array([r]))[0]
    H = hb.circles(np.array([r])).w2[0]
    L = (hb.segment(r, lambda u: np.abs(u) ** p) / r) ** (2.0 / p)
    return float(D), float(H), float(L)


def poincare_check(samples, p: float | None = None, n_ang: int = 64, n_rad: int = 32) -> PoincareReport:
    """Empirical constants of the trace and height inequalities.

    ``samples`` is an iterable of ``(field, x0, r)``.  Pairs where a ratio is
    0/0 are skipped (NaN).
    """
    rt, rh = [], []
    pp = None
    for fieldobj, x0, r in samples:
        s = fieldobj.params.s
        pp = p if p is not None else sobolev_cap(s)
        if not 2.0 <= pp <= sobolev_cap(s) + 1e-12:
            raise ValueError(f"p = {pp} outside [2, {sobolev_cap(s)}]")
        D, H, L = poincare_terms(fieldobj, x0, r, pp, n_ang, n_rad)
        rt.append(L / (D + H) if D + H > 0 else np.nan)
        rh.append(H / (D + L) if D + L > 0 else np.nan)
    return PoincareReport(ratio_trace=np.array(rt), ratio_height=np.array(rh), p=float(pp or 2.0))
