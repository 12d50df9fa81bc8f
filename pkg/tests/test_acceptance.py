"""Acceptance criteria, one test (and one printed pass/fail line) each."""

from __future__ import annotations

import time

import numpy as np
from scipy import linalg

from fracseg import cli
from fracseg.almgren import (default_radii, frequency_profile, interior_frequency, poincare_check,
                             pohozaev_residual, zero_trace_frequency)
from fracseg.analysis import (detect_self_segregation, extract_free_boundary, point_diagnostics)
from fracseg.extension import ExtensionEvaluator
from fracseg.fields import HalfLineField, YPowerField
from fracseg.fraclap import assemble_form, smallest_eigenpair
from fracseg.params import FracParams, Grid1D
from fracseg.segregation import PenaltySpec, gaussian_bumps, minimize_stage

S_RUNS = (0.3, 0.5, 0.7)
S_FIELDS = (0.25, 0.5, 0.75)
BAND = 0.05


def _h512():
    return Grid1D(-1.0, 1.0, 512).h


def test_c01_homogeneous_field_frequency(verdict):
    t0 = time.perf_counter()
    worst = 0.0
    for s in S_FIELDS:
        f = YPowerField(FracParams(s))
        prof = frequency_profile(f, 0.0, default_radii(_h512(), 1.0))
        worst = max(worst, float(np.max(np.abs(prof.N - 2 * s))))
    dt = time.perf_counter() - t0
    ok = worst <= 1e-3 and dt < 5.0
    assert verdict("C1 homogeneous-field frequency", ok,
                   f"max |N - 2s| = {worst:.2e} (tol 1e-3), {dt:.2f} s (limit 5 s)")


def test_c02_model_trace_frequency(verdict):
    t0 = time.perf_counter()
    worst = 0.0
    radii = default_radii(_h512(), 1.0)[:2]
    for s in S_FIELDS:
        f = HalfLineField(FracParams(s), 0.0)
        N = frequency_profile(f, 0.0, radii, n_ang=128, n_rad=64).N
        worst = max(worst, float(np.max(np.abs(N - s))))
    dt = time.perf_counter() - t0
    ok = worst <= 2e-2 and dt < 60.0
    assert verdict("C2 model-trace frequency", ok,
                   f"max |N - s| at two finest radii, refined quadrature = {worst:.2e} (tol 2e-2), {dt:.1f} s")


def test_c03_eigen_consistency(verdict):
    t0 = time.perf_counter()
    form = assemble_form(Grid1D(-1.0, 1.0, 512), FracParams(0.5))
    eig = smallest_eigenpair(form)
    _, diag = minimize_stage(gaussian_bumps(form, 1), PenaltySpec(1.0), form, tol=1e-10, max_iter=500)
    rel = abs(diag.energy - eig.lam) / eig.lam
    small = assemble_form(Grid1D(-1.0, 1.0, 64), FracParams(0.5))
    dense = linalg.eigh(small.matrix / small.h, eigvals_only=True)[0]
    rel64 = abs(smallest_eigenpair(small).lam - dense) / dense
    dt = time.perf_counter() - t0
    ok = rel <= 1e-6 and rel64 <= 1e-9 and dt < 120.0
    assert verdict("C3 eigen solver consistency", ok,
                   f"k=1 minimization vs eigenpair rel {rel:.1e} (tol 1e-6); dense n=64 rel {rel64:.1e} "
                   f"(tol 1e-9); {dt:.1f} s")


def test_c04_segregation_pipeline(minimizer_runs, verdict):
    details, ok = [], True
    for s in S_RUNS:
        run = minimizer_runs(s)
        ov = np.array([r.overlap for r in run.records])
        en = np.array([r.energy for r in run.records])
        tol = 1e-8  # stage tolerance of the default schedule
        dec = bool(np.all(np.diff(ov) < 0))
        mono = bool(np.all(np.diff(en) >= -2 * tol))
        u = run.final
        sym = float(np.max(np.abs(u[0] - u[1][::-1])))
        fb = extract_free_boundary(u, run.form.grid)
        centred = len(fb) == 1 and abs(fb.points[0].x) <= run.form.h
        good = dec and ov[-1] <= 1e-5 and mono and sym <= 1e-6 and centred and run.seconds < 900
        ok &= good
        details.append(f"s={s}: overlap {ov[-1]:.1e} decreasing={dec}, J_beta nondecreasing={mono}, "
                       f"asym {sym:.0e}, gamma={[round(p.x, 6) for p in fb.points]}, {run.seconds:.0f} s")
    assert verdict("C4 segregation pipeline", ok, "; ".join(details))


def test_c05_frequency_lower_bound(minimizer_runs, verdict):
    details, ok = [], True
    for s in S_RUNS:
        res = minimizer_runs(s).result
        a_star = FracParams(s).alpha_star
        for d in res.diagnostics:
            good = d.monotone.success and d.monotone.C <= 1e3 and d.N0 >= a_star - BAND and d.N0 >= s - BAND
            ok &= good
            details.append(f"s={s} x={d.point.x:.3g}: C={d.monotone.C:.3g}, N(0+)={d.N0:.4f}")
        ok &= bool(res.diagnostics)
    assert verdict("C5 frequency lower bound", ok, "; ".join(details) + f" (need N(0+) >= s - {BAND})")


def test_c06_holder_exponent(minimizer_runs, verdict):
    details, ok = [], True
    for s in S_RUNS:
        res = minimizer_runs(s).result
        for d in res.diagnostics:
            hf = d.holder
            good = abs(hf.alpha - s) <= BAND and hf.r2 >= 0.98
            ok &= good
            details.append(f"s={s}: alpha={hf.alpha:.4f} R2={hf.r2:.5f} on r in [{hf.window[0]:.3g}, "
                           f"{hf.window[1]:.3g}]")
        ok &= bool(res.diagnostics)
    assert verdict("C6 Holder exponent", ok, "; ".join(details))


def test_c07_pohozaev(minimizer_runs, verdict):
    worst_y = 0.0
    for s in S_FIELDS:
        f = YPowerField(FracParams(s))
        for r in default_radii(_h512(), 1.0)[::6]:
            worst_y = max(worst_y, pohozaev_residual(f, 0.0, r).normalized)
    part_a = worst_y <= 1e-8
    details, part_b = [], True
    orders = ((32, 16), (64, 32), (128, 64))
    for s in S_RUNS:
        res = minimizer_runs(s).result
        lp = res.limit
        x0 = lp.points[0].x
        r = default_radii(lp.grid.h, 1.0)[8]
        vals = [pohozaev_residual(lp.evaluator, x0, r, lp.reaction, na, nr).normalized for na, nr in orders]
        ratios = [vals[i] / vals[i + 1] for i in range(len(vals) - 1)]
        part_b &= all(q >= 1.5 for q in ratios)
        details.append(f"s={s}: residual {vals[0]:.2e}->{vals[-1]:.2e}, ratios "
                       + ", ".join(f"{q:.3f}" for q in ratios))
    ok = part_a and part_b
    assert verdict("C7 Pohozaev residual", ok,
                   f"closed form max {worst_y:.1e} (tol 1e-8, {'ok' if part_a else 'fail'}); minimizers per "
                   f"quadrature doubling (need ratio >= 1.5): " + "; ".join(details))


def _random_trace(rng, x):
    coef = [(rng.normal(), rng.uniform(-0.7, 0.7), rng.uniform(0.1, 0.4)) for _ in range(3)]
    return sum(a * np.exp(-(((x - m) / w) ** 2)) for a, m, w in coef) * (1 - x * x)


def _drop(v):
    return float(np.max(-np.diff(v) / np.maximum(1.0, np.abs(v[:-1]))))


def test_c08_interior_and_zero_trace_monotonicity(verdict):
    rng = np.random.default_rng(20)
    g = Grid1D(-1.0, 1.0, 128)
    x = g.nodes
    worst_int, finite = 0.0, True
    for _ in range(20):
        p = FracParams(rng.uniform(0.15, 0.85))
        ev = ExtensionEvaluator(g, p, _random_trace(rng, x))
        y0 = rng.uniform(0.05, 0.5)
        X0 = (rng.uniform(-0.8, 0.8), y0)
        radii = np.geomspace(0.02 * y0, 0.45 * y0, 12)
        N = interior_frequency(ev, X0, radii)
        finite &= bool(np.all(np.isfinite(N)))
        worst_int = max(worst_int, _drop(np.exp(3 * abs(p.a) * radii / y0) * N))
    worst_zero, worst_d = 0.0, 0.0
    for _ in range(5):
        p = FracParams(rng.uniform(0.15, 0.85))
        u = (np.abs(x) > 0.3) * (1 - x * x) * (np.abs(x) - 0.3) * rng.uniform(0.5, 2.0, size=x.size)
        ev = ExtensionEvaluator(g, p, u)
        x0 = rng.uniform(-0.15, 0.15)
        radii = np.geomspace(4 * g.h, 0.9 * (0.3 - abs(x0)), 10)
        prof = zero_trace_frequency(ev, x0, radii)
        finite &= bool(np.all(np.isfinite(prof.N)))
        worst_zero = max(worst_zero, _drop(prof.N))
        D = prof.bulk / radii ** (2 - p.a)
        worst_d = max(worst_d, float(np.max(-np.diff(D) / np.abs(D[:-1]))))
    ok = finite and worst_int <= 1e-3 and worst_zero <= 1e-3 and worst_d <= 1e-3
    assert verdict("C8 interior / zero-trace monotonicity", ok,
                   f"worst relative drop: interior {worst_int:.1e}, zero-trace N {worst_zero:.1e}, "
                   f"scaled energy {worst_d:.1e} (tol 1e-3)")


def _poincare_samples(n: int):
    rng = np.random.default_rng(9)
    g = Grid1D(-1.0, 1.0, n)
    out = []
    for _ in range(100):
        p = FracParams(rng.uniform(0.15, 0.85))
        ev = ExtensionEvaluator(g, p, _random_trace(rng, g.nodes))
        out.append((ev, rng.uniform(-0.5, 0.5), rng.uniform(0.05, 0.4)))
    return out


def test_c09_poincare_trace(verdict):
    coarse = poincare_check(_poincare_samples(64), n_ang=32, n_rad=16)
    fine = poincare_check(_poincare_samples(128), n_ang=32, n_rad=16)
    holds = all(np.all(np.isfinite(r.ratio_trace)) and np.all(np.isfinite(r.ratio_height))
                for r in (coarse, fine))
    dt = abs(fine.C_trace / coarse.C_trace - 1)
    dh = abs(fine.C_height / coarse.C_height - 1)
    ok = holds and dt <= 0.1 and dh <= 0.1
    assert verdict("C9 Poincare / trace inequality", ok,
                   f"C_trace {coarse.C_trace:.4f} -> {fine.C_trace:.4f} ({dt:.1%}), C_height "
                   f"{coarse.C_height:.4f} -> {fine.C_height:.4f} ({dh:.1%}) under n 64 -> 128 (tol 10%)")


def self_segregation_fixture(s: float = 0.75, n: int = 511):
    """Single density |x|^{2s-1}(1-x²)^s, zero only at the centre node.

    The trace is graded toward 0 with extra P1 nodes so that the point
    source at the self-segregation point is resolved.
    """
    g = Grid1D(-1.0, 1.0, n)
    p = FracParams(s)

    def f(x):
        return np.abs(x) ** (2 * s - 1) * (1 - x * x) ** s

    u = f(g.nodes)
    c = np.sqrt(g.h * np.sum(u * u))
    u = u / c
    graded = g.h * 0.5 ** np.arange(1, 40)
    extra = tuple((float(q), float(f(q) / c)) for q in np.concatenate([-graded, graded]))
    return g, p, u, ExtensionEvaluator(g, p, u, inserted=extra)


def test_c10_self_segregation_detector(minimizer_runs, verdict):
    s = 0.75
    g, p, u, ev = self_segregation_fixture(s)
    fb = extract_free_boundary(u[None, :], g)
    diags = [point_diagnostics(ev, pt, None, g.h, min(pt.x - g.x_left, g.x_right - pt.x)) for pt in fb.points]
    detect_self_segregation(diags, s)
    fix_ok = (len(diags) == 1 and diags[0].verdict == "self_segregated" and diags[0].consistent
              and abs(diags[0].N0 - (2 * s - 1)) <= BAND)
    mins = [(sr, d.verdict, d.consistent) for sr in S_RUNS for d in minimizer_runs(sr).result.diagnostics]
    min_ok = bool(mins) and all(v == "two_density" and c for _, v, c in mins)
    fixture = f"{diags[0].verdict}, N(0+)={diags[0].N0:.4f}" if diags else "no point"
    assert verdict("C10 self-segregation detector", fix_ok and min_ok,
                   f"fixture s=0.75: {fixture} (target {2 * s - 1} +/- {BAND}); minimizers: "
                   + ", ".join(f"s={sr} {v}" for sr, v, _ in mins))


def test_c11_determinism(tmp_path, verdict):
    args = ["--seed", "7", "--set", "n=128", "--set", "stages=5", "--set", "jitter=0.05", "--set", "s=0.4"]
    outs = []
    for tag in ("a", "b"):
        out = tmp_path / tag
        assert cli.main(["--out", str(out)] + args + ["segregate"]) == 0
        outs.append((out / "summary").read_bytes())
    other = tmp_path / "c"
    assert cli.main(["--out", str(other), "--seed", "8"] + args[2:] + ["segregate"]) == 0
    differs = (other / "summary").read_bytes() != outs[0]
    ok = outs[0] == outs[1]
    assert verdict("C11 determinism", ok,
                   f"summary bitwise identical across reruns: {ok}; different seed changes it: {differs}")
