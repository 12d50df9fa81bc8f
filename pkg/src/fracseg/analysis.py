"""Free-boundary extraction, Hölder fits, self-segregation verdicts and partition reports.

Frequency diagnostics at interface points are evaluated on the hard-segregated
limit profile of a run: the principal eigenfunctions of the extracted supports,
recomputed on a grid of the same resolution whose nodes contain the interface
points (so that every density vanishes there exactly).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .almgren import (H_FLOOR, FrequencyProfile, LinearReaction, MonotoneFit, default_radii,
                      extrapolate_N0, frequency_profile, height_H, min_monotone_C)
from .extension import ExtensionEvaluator
from .fraclap import StiffnessForm, assemble_form, rayleigh, smallest_eigenpair
from .params import FracParams, Grid1D
from .segregation import DensityVector, j_value, segregated_projection

log = logging.getLogger(__name__)

EPS_GAMMA = 1e-3
R2_MIN = 0.98
BAND = 0.05
EQUIV_TOL = 0.02


class FreeBoundaryError(RuntimeError):
    """No free-boundary point where segregation requires one."""


@dataclass(frozen=True)
class GammaPoint:
    """A point of Γ with the labels of the densities abutting from each side.

    ``left``/``right`` are component indices, or ``None`` for a dead zone.
    """

    x: float
    left: int | None
    right: int | None
    kind: str  # "crossing", "node" or "gap_end"


@dataclass
class FreeBoundary:
    points: list
    intervals: list  # (x_lo, x_hi, left_label, right_label)
    eps: float
    labels: np.ndarray = field(repr=False, default=None)  # per node: dominant index or -1

    @property
    def xs(self) -> np.ndarray:
        return np.array([p.x for p in self.points])

    def __len__(self) -> int:
        return len(self.points)


def extract_free_boundary(u, grid: Grid1D, eps_rel: float = EPS_GAMMA,
                          require: bool | None = None) -> FreeBoundary:
    """Γ(u) from the dominant-density pattern on the grid.

    A node is dead when every density is below ``eps_rel·max|u|``.  Adjacent
    live nodes with different dominant labels give a crossing point located
    by linear interpolation of ``u_i - u_j``.  A single interior dead node is
    a point of Γ; a longer interior dead run is reported as an interval and
    its end nodes as points.  Dead runs touching ∂Ω are not part of Γ.
    """
    m = u.u if isinstance(u, DensityVector) else np.atleast_2d(np.asarray(u, float))
    if m.shape[1] != grid.n:
        raise ValueError("density length does not match the grid")
    k = m.shape[0]
    eps = eps_rel * float(np.max(np.abs(m)))
    x = grid.nodes
    live = np.max(m, axis=0) >= eps
    labels = np.where(live, np.argmax(m, axis=0), -1)
    points, intervals = [], []
    n = grid.n
    j = 0
    while j < n:
        if labels[j] < 0:
            lo = j
            while j < n and labels[j] < 0:
                j += 1
            hi = j - 1
            if lo == 0 or hi == n - 1:
                continue
            left, right = int(labels[lo - 1]), int(labels[hi + 1])
            if lo == hi:
                points.append(GammaPoint(float(x[lo]), left, right, "node"))
            else:
                intervals.append((float(x[lo]), float(x[hi]), left, right))
                points.append(GammaPoint(float(x[lo]), left, None, "gap_end"))
                points.append(GammaPoint(float(x[hi]), None, right, "gap_end"))
            continue
        if j + 1 < n and labels[j + 1] >= 0 and labels[j + 1] != labels[j]:
            i1, i2 = int(labels[j]), int(labels[j + 1])
            d0 = m[i1, j] - m[i2, j]
            d1 = m[i1, j + 1] - m[i2, j + 1]
            t = d0 / (d0 - d1) if d0 != d1 else 0.5
            points.append(GammaPoint(float(x[j] + t * grid.h), i1, i2, "crossing"))
        j += 1
    if require is None:
        require = k >= 2
    if require and not points:
        raise FreeBoundaryError("no free-boundary point found: segregation failed")
    return FreeBoundary(points=points, intervals=intervals, eps=eps, labels=labels)


def support_masks(fb: FreeBoundary, k: int) -> list[np.ndarray]:
    """ω_i: the nodes where density i is live and dominant."""
    return [fb.labels == i for i in range(k)]


# ---------------------------------------------------------------- Hölder fit

@dataclass
class HolderFit:
    alpha: float
    r2: float
    window: tuple
    count: int
    flagged: bool


def holder_radii(h: float, count: int = 8, span: float = 4.0) -> np.ndarray:
    """Geometric radii on ``[4h, 4·span·h]``: the small-r window for H."""
    return np.geomspace(4.0 * h, 4.0 * span * h, count)


def holder_fit(radii, H, min_count: int = 8, r2_min: float = R2_MIN) -> HolderFit:
    """Half the least-squares slope of log H against log r."""
    r = np.asarray(radii, float)
    H = np.asarray(H, float)
    ok = H > H_FLOOR
    r, H = r[ok], H[ok]
    if r.size < min_count:
        raise ValueError(f"holder_fit needs at least {min_count} radii with H > h_floor")
    lr, lh = np.log(r), np.log(H)
    slope, icpt = np.polyfit(lr, lh, 1)
    ss_res = float(np.sum((lh - (slope * lr + icpt)) ** 2))
    ss_tot = float(np.sum((lh - lh.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return HolderFit(alpha=float(slope / 2.0), r2=r2, window=(float(r[0]), float(r[-1])),
                     count=int(r.size), flagged=r2 < r2_min)


# ---------------------------------------------------------------- limit profile

def aligned_grid(grid: Grid1D, points, search: int = 16) -> Grid1D:
    """Grid on the same interval, node count within ``search`` of ``grid.n``,
    whose nodes come closest to ``points`` (ties: closest count, then smaller)."""
    pts = np.asarray(points, float)
    if pts.size == 0:
        return grid
    best = None
    for n in sorted(range(max(8, grid.n - search), grid.n + search + 1), key=lambda q: (abs(q - grid.n), q)):
        h = grid.length / (n + 1)
        t = (pts - grid.x_left) / h
        err = float(np.max(np.abs(t - np.round(t)))) * h
        if best is None or err < best[0] - 1e-12 * grid.h:
            best = (err, n)
    return Grid1D(grid.x_left, grid.x_right, best[1])


@dataclass
class LimitProfile:
    grid: Grid1D
    form: StiffnessForm
    phi: np.ndarray  # (k, n) eigenfunctions of the supports on ``grid``
    lambdas: np.ndarray
    evaluator: ExtensionEvaluator
    reaction: LinearReaction
    points: list  # Γ points, snapped to nodes of ``grid`` where they coincide


def _segment_labels(fb: FreeBoundary, grid: Grid1D, x: np.ndarray, k: int) -> np.ndarray:
    """Label arbitrary abscissae by the run's partition; Γ points and gaps are dead (-1)."""
    cuts = sorted({p.x for p in fb.points})
    edges = np.concatenate([[grid.x_left], cuts, [grid.x_right]])
    src = grid.nodes
    out = np.full(x.shape, -1, dtype=int)
    tol = 1e-9 * grid.h
    for lo, hi in zip(edges[:-1], edges[1:]):
        inside = (src > lo + tol) & (src < hi - tol)
        lab = fb.labels[inside]
        lab = lab[lab >= 0]
        if lab.size == 0:
            continue
        out[(x > lo + tol) & (x < hi - tol)] = int(np.bincount(lab).argmax())
    for lo, hi, _, _ in fb.intervals:
        out[(x >= lo - tol) & (x <= hi + tol)] = -1
    return out


def limit_profile(fb: FreeBoundary, grid: Grid1D, params: FracParams, k: int,
                  cache_dir=None, search: int = 16) -> LimitProfile:
    """Principal eigenfunctions of the extracted supports on a Γ-aligned grid."""
    g = aligned_grid(grid, fb.xs, search)
    form = assemble_form(g, params, cache_dir=cache_dir)
    lab = _segment_labels(fb, grid, g.nodes, k)
    points = []
    for p in fb.points:
        j = int(np.argmin(np.abs(g.nodes - p.x)))
        x = float(g.nodes[j]) if abs(g.nodes[j] - p.x) <= 1e-9 * g.h else p.x
        points.append(GammaPoint(x, p.left, p.right, p.kind))
    phi = np.zeros((k, g.n))
    lams = np.zeros(k)
    for i in range(k):
        mask = lab == i
        if not mask.any():
            raise FreeBoundaryError(f"support of density {i} is empty on the diagnostic grid")
        e = smallest_eigenpair(form, mask)
        phi[i], lams[i] = e.phi, e.lam
    ev = ExtensionEvaluator(g, params, phi, zeros=tuple(p.x for p in points))
    return LimitProfile(grid=g, form=form, phi=phi, lambdas=lams, evaluator=ev,
                        reaction=LinearReaction.from_multipliers(lams, params), points=points)


# ---------------------------------------------------------------- self-segregation

@dataclass
class PointDiagnostics:
    point: GammaPoint
    profile: FrequencyProfile
    monotone: MonotoneFit
    N0: float
    N0_slope: float
    holder: HolderFit
    verdict: str = "undetermined"
    consistent: bool = True
    note: str = ""


def point_diagnostics(evaluator, point: GammaPoint, reaction, h: float, dist: float,
                      n_ang: int = 64, n_rad: int = 32) -> PointDiagnostics:
    radii = default_radii(h, dist)
    prof = frequency_profile(evaluator, point.x, radii, reaction, n_ang=n_ang, n_rad=n_rad)
    fit = min_monotone_C(prof)
    N0, slope = extrapolate_N0(prof, fit.C)
    hr = holder_radii(h)
    hf = holder_fit(hr, height_H(evaluator, point.x, hr, n_ang))
    return PointDiagnostics(point=point, profile=prof, monotone=fit, N0=N0, N0_slope=slope, holder=hf)


def detect_self_segregation(diags: list, s: float, band: float = BAND) -> list:
    """Attach a verdict to each point: two_density, self_segregated or undetermined.

    Labels that differ across the point mean two densities; the same label on
    both sides means self-segregation.  Consistency with the frequency
    dichotomy (N(0+) ≥ s, or s > 1/2 and N(0+) = 2s-1) is checked within ``band``.
    """
    for d in diags:
        p = d.point
        if p.left is None or p.right is None or not np.isfinite(d.N0):
            d.verdict, d.consistent = "undetermined", True
            d.note = "dead-zone boundary" if (p.left is None or p.right is None) else "N(0+) undefined"
            continue
        if p.left != p.right:
            d.verdict = "two_density"
            d.consistent = d.N0 >= s - band
            d.note = "" if d.consistent else f"N(0+)={d.N0:.4f} below s-{band}"
        else:
            d.verdict = "self_segregated"
            d.consistent = s > 0.5 and abs(d.N0 - (2 * s - 1)) <= band
            d.note = "" if d.consistent else f"N(0+)={d.N0:.4f} vs 2s-1={2 * s - 1:.4f}"
        if not d.monotone.success:
            d.consistent = False
            d.note = (d.note + "; " if d.note else "") + "no monotone C"
    return diags


# ---------------------------------------------------------------- partition report

@dataclass
class PartitionResult:
    u: DensityVector
    params: FracParams
    grid: Grid1D
    supports: list
    lambdas: np.ndarray
    I: float
    J: float
    rayleigh_sum: float
    equivalence_gap: float
    free_boundary: FreeBoundary
    diagnostics: list
    limit_grid_n: int
    limit_lambdas: np.ndarray
    limit: LimitProfile | None = None

    @property
    def equivalent(self) -> bool:
        return self.equivalence_gap <= EQUIV_TOL

    @property
    def coherence(self) -> list:
        """``|2α̂ - 2N(0+)|`` per point (frequency vs growth rate)."""
        return [abs(2 * d.holder.alpha - 2 * d.N0) for d in self.diagnostics]


def analyze_partition(u, form: StiffnessForm, eps_rel: float = EPS_GAMMA, cache_dir=None,
                      n_ang: int = 64, n_rad: int = 32, diagnostics: bool = True) -> PartitionResult:
    """Supports, eigenvalues, I and J, Γ and per-point frequency diagnostics."""
    grid, params = form.grid, form.params
    u = u if isinstance(u, DensityVector) else DensityVector(u, grid.h)
    k = u.k
    fb = extract_free_boundary(u, grid, eps_rel)
    masks = support_masks(fb, k)
    lams = np.zeros(k)
    for i, mk in enumerate(masks):
        if not mk.any():
            raise FreeBoundaryError(f"support of density {i} is empty")
        lams[i] = smallest_eigenpair(form, mk).lam
    I = float(np.sum(lams))
    rsum = float(sum(rayleigh(form, u.u[i]) for i in range(k)))
    J = j_value(segregated_projection(u), form) if k > 1 else rsum
    gap = abs(J - I) / I
    diags, lgn, llam, lp = [], grid.n, lams.copy(), None
    if diagnostics and len(fb):
        lp = limit_profile(fb, grid, params, k, cache_dir=cache_dir)
        lgn, llam = lp.grid.n, lp.lambdas
        for p in lp.points:
            dist = min(p.x - grid.x_left, grid.x_right - p.x)
            diags.append(point_diagnostics(lp.evaluator, p, lp.reaction, lp.grid.h, dist, n_ang, n_rad))
        detect_self_segregation(diags, params.s)
    return PartitionResult(u=u, params=params, grid=grid, supports=masks, lambdas=lams, I=I, J=J,
                           rayleigh_sum=rsum, equivalence_gap=gap, free_boundary=fb,
                           diagnostics=diags, limit_grid_n=lgn, limit_lambdas=llam, limit=lp)


def partition_report(run_dir, cache_dir=None) -> PartitionResult:
    """Load the final stage of a completed run and analyze it."""
    from .runio import load_run

    run = load_run(run_dir)
    form = assemble_form(run.grid, run.params, cache_dir=cache_dir)
    return analyze_partition(run.final_u, form, eps_rel=run.eps_gamma, cache_dir=cache_dir)
