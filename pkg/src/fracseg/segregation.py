"""Penalized partition functional and its minimization under β-continuation.

The discrete functional on k densities with ``h·Σ u_i² = 1`` is

    J_β(u) = Σ_i u_iᵀ A u_i + β h Σ_{i<j} a_ij Σ u_i² u_j²
             + h Σ_i Σ e(u_i - ū_i)   (anchored variant, e(t) = √(1+t²))
             + h Σ_i m_i Σ u_i³       (cubic variant)

Half of its gradient divided by ``h`` is

    G_i = A u_i / h + β V_i u_i + e'(u_i - ū_i)/2 + (3/2) m_i u_i²,
    V_i = Σ_j a_ij u_j²,

and the Euler–Lagrange system reads ``G_i = λ_i u_i``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .fraclap import StiffnessForm

log = logging.getLogger(__name__)

ARMIJO_C = 1e-4
ENERGY_SLACK = 1e-14


@dataclass
class DensityVector:
    """k nonnegative grid functions sharing the grid of a stiffness form."""

    u: np.ndarray
    h: float

    def __post_init__(self) -> None:
        self.u = np.atleast_2d(np.asarray(self.u, dtype=float))

    @property
    def k(self) -> int:
        return self.u.shape[0]

    @property
    def norms(self) -> np.ndarray:
        return np.sqrt(self.h * np.sum(self.u * self.u, axis=1))

    def copy(self) -> "DensityVector":
        return DensityVector(self.u.copy(), self.h)


@dataclass(frozen=True)
class PenaltySpec:
    beta: float
    coupling: np.ndarray | None = None
    anchor: np.ndarray | None = None
    cubic: np.ndarray | None = None

    def __post_init__(self) -> None:
        if not self.beta > 0:
            raise ValueError("beta must be positive")
        if self.coupling is not None:
            c = np.asarray(self.coupling, dtype=float)
            if c.ndim != 2 or c.shape[0] != c.shape[1]:
                raise ValueError("coupling must be a square matrix")
            if not np.array_equal(c, c.T) or np.any(np.diag(c) != 0) or np.any(c < 0):
                raise ValueError("coupling must be symmetric, nonnegative, with zero diagonal")
        if self.cubic is not None and np.any(np.asarray(self.cubic) < 0):
            raise ValueError("cubic weights must be nonnegative")

    def coupling_matrix(self, k: int) -> np.ndarray:
        if self.coupling is None:
            return np.ones((k, k)) - np.eye(k)
        c = np.asarray(self.coupling, dtype=float)
        if c.shape != (k, k):
            raise ValueError("coupling size does not match the number of densities")
        return c

    def cubic_weights(self, k: int) -> np.ndarray:
        return np.zeros(k) if self.cubic is None else np.broadcast_to(np.asarray(self.cubic, float), (k,))

    def with_beta(self, beta: float) -> "PenaltySpec":
        return PenaltySpec(beta=beta, coupling=self.coupling, anchor=self.anchor, cubic=self.cubic)


@dataclass(frozen=True)
class ContinuationSchedule:
    betas: tuple
    tol: float = 1e-8
    max_iter: int = 3000

    def __post_init__(self) -> None:
        b = np.asarray(self.betas, dtype=float)
        if b.size == 0 or np.any(b <= 0) or np.any(np.diff(b) <= 0):
            raise ValueError("betas must be positive and strictly increasing")

    @classmethod
    def geometric(cls, beta0: float = 1.0, ratio: float = 4.0, stages: int = 10, **kw) -> "ContinuationSchedule":
        return cls(betas=tuple(float(beta0 * ratio**j) for j in range(stages)), **kw)


def _mat(u) -> np.ndarray:
    return u.u if isinstance(u, DensityVector) else np.atleast_2d(np.asarray(u, dtype=float))


def _check(u: np.ndarray, form: StiffnessForm) -> None:
    if u.shape[1] != form.n:
        raise ValueError(f"density length {u.shape[1]} does not match grid size {form.n}")


def _e(t):
    return np.sqrt(1.0 + t * t)


def overlap(u, h: float | None = None, coupling: np.ndarray | None = None) -> float:
    """``Σ_{i<j} a_ij h Σ u_i² u_j²``."""
    if isinstance(u, DensityVector):
        h = u.h if h is None else h
    if h is None:
        raise ValueError("grid spacing h is required")
    m = _mat(u)
    k = m.shape[0]
    c = np.ones((k, k)) - np.eye(k) if coupling is None else np.asarray(coupling, float)
    sq = m * m
    total = 0.0
    for i in range(k):
        for j in range(i + 1, k):
            if c[i, j]:
                total += c[i, j] * h * float(np.sum(sq[i] * sq[j]))
    return total


def dirichlet_energies(u, form: StiffnessForm) -> np.ndarray:
    m = _mat(u)
    _check(m, form)
    return np.einsum("ij,ij->i", m, m @ form.matrix)


def _terms(m: np.ndarray, spec: PenaltySpec, form: StiffnessForm) -> dict:
    h = form.h
    k = m.shape[0]
    out = {"dirichlet": float(np.sum(dirichlet_energies(m, form))),
           "coupling": spec.beta * overlap(m, h, spec.coupling_matrix(k))}
    out["anchor"] = 0.0 if spec.anchor is None else h * float(np.sum(_e(m - np.asarray(spec.anchor))))
    out["cubic"] = h * float(np.sum(spec.cubic_weights(k)[:, None] * m**3))
    return out


def j_beta_value(u, spec: PenaltySpec, form: StiffnessForm, constraint_tol: float = 1e-9) -> float:
    """J_β, or ``+inf`` when some ``|‖u_i‖ - 1|`` exceeds ``constraint_tol``."""
    m = _mat(u)
    _check(m, form)
    norms = np.sqrt(form.h * np.sum(m * m, axis=1))
    if np.any(np.abs(norms - 1.0) > constraint_tol):
        return float("inf")
    return float(sum(_terms(m, spec, form).values()))


def j_value(u, form: StiffnessForm, segregation_tol: float = 1e-6) -> float:
    """``Σ_i u_iᵀ A u_i`` if ``‖u_i u_j‖_{L¹} = δ_ij`` within tolerance, else ``+inf``."""
    m = _mat(u)
    _check(m, form)
    gram = form.h * np.abs(m) @ np.abs(m).T
    if np.max(np.abs(gram - np.eye(m.shape[0]))) > segregation_tol:
        return float("inf")
    return float(np.sum(dirichlet_energies(m, form)))


def project_spheres(u, h: float | None = None) -> DensityVector:
    """Clamp at zero, then rescale each component to unit discrete L² norm."""
    if isinstance(u, DensityVector):
        h = u.h if h is None else h
    if h is None:
        raise ValueError("grid spacing h is required")
    m = np.maximum(_mat(u), 0.0)
    nrm = np.sqrt(h * np.sum(m * m, axis=1))
    if np.any(nrm == 0.0):
        raise ValueError("a component is identically nonpositive")
    return DensityVector(m / nrm[:, None], h)


def segregated_projection(u, h: float | None = None) -> DensityVector:
    """Keep each node only in its dominant component, then renormalize.

    Ties keep the lowest index.  This is the grid surrogate of the hard
    segregation constraint used to evaluate J on finite-β minimizers.
    """
    if isinstance(u, DensityVector):
        h = u.h if h is None else h
    m = _mat(u)
    dom = np.argmax(m, axis=0)
    masked = np.where(np.arange(m.shape[0])[:, None] == dom[None, :], m, 0.0)
    return project_spheres(masked, h)


def gaussian_bumps(form: StiffnessForm, k: int, jitter: float = 0.0,
                   rng: np.random.Generator | None = None) -> DensityVector:
    """k Gaussians with equispaced centres and width |Ω|/(3k), projected."""
    g = form.grid
    L = g.length
    centres = g.x_left + (np.arange(k) + 0.5) * L / k
    width = L / (3.0 * k)
    x = g.nodes
    u = np.exp(-0.5 * ((x[None, :] - centres[:, None]) / width) ** 2)
    if jitter:
        rng = rng or np.random.default_rng(0)
        u = u * (1.0 + jitter * rng.standard_normal(u.shape))
    return project_spheres(DensityVector(u, g.h))


def _gradient(m: np.ndarray, spec: PenaltySpec, form: StiffnessForm):
    h = form.h
    k = m.shape[0]
    c = spec.coupling_matrix(k)
    V = c @ (m * m)
    G = (m @ form.matrix) / h + spec.beta * V * m
    if spec.anchor is not None:
        d = m - np.asarray(spec.anchor)
        G = G + 0.5 * d / _e(d)
    cub = spec.cubic_weights(k)
    if np.any(cub):
        G = G + 1.5 * cub[:, None] * m * m
    lam = h * np.einsum("ij,ij->i", G, m)
    R = G - lam[:, None] * m
    return G, lam, R, V


def euler_lagrange_residual(u, spec: PenaltySpec, form: StiffnessForm) -> tuple[np.ndarray, np.ndarray]:
    """Per-component ``‖G_i - λ_i u_i‖ / ‖u_i‖`` and the multipliers ``λ_i``."""
    m = _mat(u)
    _, lam, R, _ = _gradient(m, spec, form)
    num = np.sqrt(form.h * np.sum(R * R, axis=1))
    den = np.sqrt(form.h * np.sum(m * m, axis=1))
    return num / den, lam


@dataclass
class StageDiagnostics:
    beta: float
    iterations: int
    converged: bool
    grad_norm: float
    energy: float
    lambdas: np.ndarray
    overlap: float
    line_search_failed: bool = False
    history: list = field(default_factory=list, repr=False)


def minimize_stage(u0, spec: PenaltySpec, form: StiffnessForm, tol: float = 1e-8,
                   max_iter: int = 3000) -> tuple[DensityVector, StageDiagnostics]:
    """Preconditioned projected gradient descent with Armijo backtracking.

    The direction for component i is the tangent part of ``P_i r_i`` with
    ``P_i = (A/h + β diag V_i + ...)^{-1}``; for a single density without
    penalty a unit step is one inverse-iteration step.  ``history`` holds
    ``(iteration, energy, overlap, grad_norm, step)`` rows.
    """
    h = form.h
    m = project_spheres(_mat(u0), h).u
    _check(m, form)
    k = m.shape[0]
    base = form.matrix / h
    cub = spec.cubic_weights(k)
    energy = j_beta_value(m, spec, form)
    history = []
    failed = False
    gnorm = np.inf
    it = 0
    for it in range(max_iter + 1):
        _, lam, R, V = _gradient(m, spec, form)
        gnorm = float(np.sqrt(h * np.sum(R * R)))
        history.append((it, energy, overlap(m, h, spec.coupling_matrix(k)), gnorm))
        if gnorm <= tol or it == max_iter:
            break
        D = np.empty_like(m)
        slope = 0.0
        for i in range(k):
            diag = spec.beta * V[i]
            if spec.anchor is not None:
                d = m[i] - np.asarray(spec.anchor)[i]
                diag = diag + 0.5 / _e(d) ** 3
            if cub[i]:
                diag = diag + 3.0 * cub[i] * m[i]
            chol = linalg.cho_factor(base + np.diag(diag), lower=True, check_finite=False)
            Pr = linalg.cho_solve(chol, R[i], check_finite=False)
            Pu = linalg.cho_solve(chol, m[i], check_finite=False)
            D[i] = Pr - (m[i] @ Pr) / (m[i] @ Pu) * Pu
            slope += 2.0 * h * float(R[i] @ D[i])
        t = 1.0
        while True:
            trial = project_spheres(m - t * D, h).u
            e_trial = j_beta_value(trial, spec, form)
            if e_trial <= energy - ARMIJO_C * t * slope + ENERGY_SLACK * abs(energy):
                break
            t *= 0.5
            if t < 1e-12:
                failed = True
                break
        if failed:
            log.warning("line search failed at beta=%g, iteration %d", spec.beta, it)
            break
        m, energy = trial, e_trial
        history[-1] = history[-1] + (t,)
    if len(history[-1]) == 4:
        history[-1] = history[-1] + (0.0,)
    _, lam, _, _ = _gradient(m, spec, form)
    diag = StageDiagnostics(beta=spec.beta, iterations=it, converged=gnorm <= tol, grad_norm=gnorm,
                            energy=energy, lambdas=lam, overlap=overlap(m, h, spec.coupling_matrix(k)),
                            line_search_failed=failed, history=history)
    return DensityVector(m, h), diag


@dataclass
class StageRecord:
    beta: float
    u: DensityVector
    overlap: float
    energy: float
    diagnostics: StageDiagnostics


def beta_continuation(schedule: ContinuationSchedule, spec_base: PenaltySpec, form: StiffnessForm,
                      u_init, callback=None) -> list[StageRecord]:
    """Warm-started stages over the β schedule."""
    u = project_spheres(_mat(u_init), form.h)
    out = []
    for beta in schedule.betas:
        spec = spec_base.with_beta(beta)
        u, diag = minimize_stage(u, spec, form, schedule.tol, schedule.max_iter)
        rec = StageRecord(beta=beta, u=u, overlap=diag.overlap, energy=diag.energy, diagnostics=diag)
        out.append(rec)
        log.info("beta=%g iterations=%d grad=%.3e overlap=%.3e energy=%.12g",
                 beta, diag.iterations, diag.grad_norm, diag.overlap, diag.energy)
        if callback is not None:
            callback(rec)
    return out
