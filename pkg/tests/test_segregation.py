from __future__ import annotations

import numpy as np
import pytest

from fracseg.fraclap import assemble_form, smallest_eigenpair
from fracseg.params import FracParams, Grid1D
from fracseg.segregation import (ContinuationSchedule, _gradient, DensityVector, PenaltySpec, beta_continuation,
                                 dirichlet_energies, euler_lagrange_residual, gaussian_bumps, j_beta_value, j_value,
                                 minimize_stage, overlap, project_spheres, segregated_projection)


@pytest.fixture(scope="module")
def form():
    return assemble_form(Grid1D(-1.0, 1.0, 64), FracParams(0.4))


def _oracle_J(m, spec, form):
    """Unconstrained J_β written out term by term."""
    h, A = form.h, form.matrix
    k = m.shape[0]
    c = spec.coupling_matrix(k)
    val = sum(m[i] @ A @ m[i] for i in range(k))
    val += spec.beta * h * sum(c[i, j] * np.sum(m[i] ** 2 * m[j] ** 2) for i in range(k) for j in range(i + 1, k))
    if spec.anchor is not None:
        val += h * np.sum(np.sqrt(1 + (m - spec.anchor) ** 2))
    val += h * np.sum(spec.cubic_weights(k)[:, None] * m**3)
    return val


def test_project_spheres():
    h = 0.1
    pv = project_spheres(np.array([[1.0, -2.0, 3.0], [0.5, 0.5, 0.0]]), h)
    assert np.all(pv.u >= 0)
    assert np.allclose(pv.norms, 1.0, atol=1e-15)
    assert pv.u[0, 1] == 0.0
    with pytest.raises(ValueError):
        project_spheres(np.array([[1.0, 2.0], [-1.0, 0.0]]), h)
    with pytest.raises(ValueError):
        project_spheres(np.ones((1, 3)))


def test_segregated_projection_disjoint():
    u = np.array([[1.0, 0.5, 0.2, 0.3], [0.1, 0.5, 0.9, 0.0]])
    pv = segregated_projection(u, 0.25)
    assert np.all(pv.u[0] * pv.u[1] == 0)
    assert pv.u[0, 1] > 0 and pv.u[1, 1] == 0  # tie keeps the lower index
    assert np.allclose(pv.norms, 1.0)


def test_overlap_formula():
    u = np.array([[1.0, 2.0, 0.0], [1.0, 1.0, 3.0], [0.0, 1.0, 1.0]])
    h = 0.5
    ref = h * (1 + 4) + h * 4 + h * (1 + 9)
    assert abs(overlap(u, h) - ref) <= 1e-14
    c = np.array([[0, 2, 0], [2, 0, 0], [0, 0, 0]], float)
    assert abs(overlap(u, h, c) - 2 * h * 5) <= 1e-14
    assert overlap(DensityVector(u, h)) == overlap(u, h)
    with pytest.raises(ValueError):
        overlap(u)


def test_j_values(form):
    x = form.grid.nodes
    seg = project_spheres(np.stack([np.maximum(-x, 0), np.maximum(x, 0)]), form.h)
    assert abs(j_value(seg, form) - dirichlet_energies(seg, form).sum()) <= 1e-12
    assert overlap(seg) == 0.0
    bumps = gaussian_bumps(form, 2)
    assert j_value(bumps, form) == np.inf
    assert np.isfinite(j_beta_value(bumps, PenaltySpec(1.0), form))
    assert j_beta_value(2 * bumps.u, PenaltySpec(1.0), form) == np.inf
    with pytest.raises(ValueError):
        j_value(np.ones((2, 5)), form)


@pytest.mark.parametrize("variant", ["plain", "coupling", "anchor", "cubic"])
def test_gradient_matches_finite_differences(form, variant):
    rng = np.random.default_rng(11)
    k = 3
    m = np.abs(rng.normal(size=(k, form.n))) + 0.1
    kw = {}
    if variant == "coupling":
        kw["coupling"] = np.array([[0, 1, 2], [1, 0, 0.5], [2, 0.5, 0]])
    if variant == "anchor":
        kw["anchor"] = rng.random((k, form.n))
    if variant == "cubic":
        kw["cubic"] = np.array([0.5, 1.0, 2.0])
    spec = PenaltySpec(3.0, **kw)
    G = _gradient(m, spec, form)[0]
    v = rng.normal(size=m.shape)
    eps = 1e-6
    fd = (_oracle_J(m + eps * v, spec, form) - _oracle_J(m - eps * v, spec, form)) / (2 * eps)
    assert abs(fd - 2 * form.h * np.sum(G * v)) <= 1e-6 * max(1.0, abs(fd))
    mm = project_spheres(m, form.h).u
    assert abs(j_beta_value(mm, spec, form) - _oracle_J(mm, spec, form)) <= 1e-12 * abs(_oracle_J(mm, spec, form))


def test_k1_stage_is_eigenpair(form):
    u, diag = minimize_stage(gaussian_bumps(form, 1), PenaltySpec(1.0), form, tol=1e-10)
    eig = smallest_eigenpair(form)
    assert diag.converged
    assert abs(diag.energy - eig.lam) <= 1e-10 * eig.lam
    assert abs(diag.lambdas[0] - eig.lam) <= 1e-8 * eig.lam
    assert np.max(np.abs(u.u[0] - eig.phi)) <= 1e-6
    assert diag.history[0][0] == 0 and len(diag.history[-1]) == 5


def test_stage_symmetry_and_euler_lagrange(form):
    spec = PenaltySpec(16.0)
    u, diag = minimize_stage(gaussian_bumps(form, 2), spec, form, tol=1e-9)
    assert diag.converged and not diag.line_search_failed
    assert np.max(np.abs(u.u[0] - u.u[1][::-1])) <= 1e-8
    res, lam = euler_lagrange_residual(u, spec, form)
    assert np.max(res) <= 1e-8
    # λ_i summed over components equals Dirichlet energy plus twice the coupling term
    assert abs(lam.sum() - dirichlet_energies(u, form).sum() - 2 * spec.beta * overlap(u)) <= 1e-9 * lam.sum()
    energies = [row[1] for row in diag.history]
    assert np.all(np.diff(energies) <= 1e-14 * abs(energies[0]))


def test_continuation_monotone(form):
    seen = []
    sched = ContinuationSchedule.geometric(1.0, 4.0, 5, tol=1e-9)
    recs = beta_continuation(sched, PenaltySpec(1.0), form, gaussian_bumps(form, 2), callback=seen.append)
    assert len(seen) == 5 and [r.beta for r in recs] == list(sched.betas)
    ov = np.array([r.overlap for r in recs])
    en = np.array([r.energy for r in recs])
    assert np.all(np.diff(ov) < 0)
    assert np.all(np.diff(en) >= -2e-9)
    assert abs(j_value(segregated_projection(recs[-1].u), form) - en[-1]) <= 0.2 * en[-1]


@pytest.mark.parametrize("kw", [{"anchor": "bumps"}, {"cubic": np.array([0.5, 0.5])}])
def test_variants_converge(form, kw):
    u0 = gaussian_bumps(form, 2)
    if "anchor" in kw:
        kw = {"anchor": u0.u.copy()}
    spec = PenaltySpec(4.0, **kw)
    u, diag = minimize_stage(u0, spec, form, tol=1e-8)
    assert diag.converged
    assert np.max(euler_lagrange_residual(u, spec, form)[0]) <= 1e-7


def test_validation():
    with pytest.raises(ValueError):
        PenaltySpec(0.0)
    with pytest.raises(ValueError):
        PenaltySpec(1.0, coupling=np.array([[0, 1], [2, 0]]))
    with pytest.raises(ValueError):
        PenaltySpec(1.0, coupling=np.array([[1, 1], [1, 0]]))
    with pytest.raises(ValueError):
        PenaltySpec(1.0, cubic=np.array([-1.0]))
    with pytest.raises(ValueError):
        PenaltySpec(1.0, coupling=np.zeros((3, 3))).coupling_matrix(2)
    with pytest.raises(ValueError):
        ContinuationSchedule((1.0, 1.0))
    with pytest.raises(ValueError):
        ContinuationSchedule(())
    assert ContinuationSchedule.geometric(2.0, 3.0, 3).betas == (2.0, 6.0, 18.0)


def test_gaussian_bumps_jitter_reproducible(form):
    a = gaussian_bumps(form, 3, 0.1, np.random.default_rng(4))
    b = gaussian_bumps(form, 3, 0.1, np.random.default_rng(4))
    c = gaussian_bumps(form, 3)
    assert np.array_equal(a.u, b.u) and not np.array_equal(a.u, c.u)
    assert np.allclose(a.norms, 1.0)


def test_projection_idempotent_and_scale_invariant(form):
    u = gaussian_bumps(form, 2)
    again = project_spheres(u)
    assert np.max(np.abs(again.u - u.u)) <= 1e-15
    assert np.max(np.abs(project_spheres(7.3 * u.u, form.h).u - u.u)) <= 1e-15


def test_coupling_term_and_beta_monotonicity(form):
    bump = gaussian_bumps(form, 1).u[0]
    cross = np.stack([bump, bump])
    coupling = j_beta_value(cross, PenaltySpec(10.0), form) - dirichlet_energies(cross, form).sum()
    assert abs(coupling - 10.0 * form.h * np.sum(bump**4)) <= 1e-12 * coupling
    u = gaussian_bumps(form, 3)
    vals = [j_beta_value(u, PenaltySpec(b), form) for b in (1.0, 5.0, 50.0)]
    assert vals[0] <= vals[1] <= vals[2]


def test_single_beta_schedule_is_one_stage(form):
    u0 = gaussian_bumps(form, 2)
    rec = beta_continuation(ContinuationSchedule((5.0,)), PenaltySpec(1.0), form, u0)
    u, _ = minimize_stage(u0, PenaltySpec(5.0), form)
    assert len(rec) == 1 and np.array_equal(rec[0].u.u, u.u)
