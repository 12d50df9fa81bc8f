from __future__ import annotations

import numpy as np
import pytest
from scipy import special

from fracseg.quadrature import angular_rule, circle_rule, gauss_on, graded_breaks, legendre01, segment_breaks


@pytest.mark.parametrize("b", [-0.6, 0.0, 0.4, 1.0])
def test_angular_rule_moments(b):
    th, w = angular_rule(24, b)
    assert np.all(np.diff(th) > 0) and 0 < th[0] and th[-1] < np.pi
    # ∫_0^π sin^b θ dθ = √π Γ((b+1)/2) / Γ(b/2 + 1)
    mass = np.sqrt(np.pi) * special.gamma((b + 1) / 2) / special.gamma(b / 2 + 1)
    assert abs(w.sum() - mass) <= 1e-13 * mass
    # cos² θ against sin^b θ: mass / (b + 2)
    assert abs(w @ np.cos(th) ** 2 - mass / (b + 2)) <= 1e-13 * mass


def test_angular_rule_rejects_bad_weight():
    with pytest.raises(ValueError):
        angular_rule(8, -1.0)


def test_legendre_and_composite():
    x, w = legendre01(5)
    assert abs(w.sum() - 1) <= 1e-15
    assert abs(w @ x**9 - 0.1) <= 1e-15
    xs, ws = gauss_on(np.array([0.0, 0.5, 2.0]), 4)
    assert abs(ws @ xs**3 - 4.0) <= 1e-13


def test_breaks():
    b = graded_breaks(2.0, levels=5)
    assert b[0] == 0 and b[-1] == 2.0 and np.all(np.diff(b) > 0)
    assert abs(b[1] - 2.0 / 32) <= 1e-15
    seg = segment_breaks(0.0, 0.3, np.linspace(-1, 1, 11))
    assert np.allclose(seg, [-0.3, -0.2, 0.0, 0.2, 0.3])


def test_circle_rule_exact_for_trig():
    th, w = circle_rule(16)
    assert abs(w @ np.cos(3 * th) ** 2 - np.pi) <= 1e-13
    assert abs(w.sum() - 2 * np.pi) <= 1e-13
