import math

import numpy as np
import pytest

from relu1d.errors import InvalidCorrelation, InvalidInterval, InvalidLayer, InvalidVariance
from relu1d.gp_theory import (
    arccos_kernel,
    base_state,
    cov_step,
    crossing_density,
    expansion_coefficient,
    expected_crossings,
    rho_pair,
    sign_change_prob,
    theta_linearized,
    variance,
)

GRID = [(ell, x, s) for ell in range(1, 7) for x in (0.0, 0.5, 1.0, 2.0) for s in (0.5, 1.0, 2.0)]


def slope(r1: float, r2: float, e1: float, e2: float) -> float:
    return math.log(r1 / r2) / math.log(e1 / e2)


# -- closed forms -----------------------------------------------------------------


def test_variance():
    assert variance(1, 0, 1) == 1
    assert variance(3, 1, 0.5) == 2.75
    assert variance(7, 0, 0.3) == pytest.approx(7 * 0.09)
    with pytest.raises(InvalidLayer):
        variance(0, 1, 1)


def test_arccos_kernel_examples():
    assert arccos_kernel(3.0, 3.0, 1.0) == pytest.approx(1.5)
    assert arccos_kernel(2.0, 8.0, 0.0) == pytest.approx(4.0 / (2 * math.pi))
    with pytest.raises(InvalidVariance):
        arccos_kernel(0.0, 1.0, 0.5)
    with pytest.raises(InvalidCorrelation):
        arccos_kernel(1.0, 1.0, 1.01)
    arccos_kernel(1.0, 1.0, 1.0 + 1e-13)  # clamped


def test_arccos_kernel_monte_carlo():
    rng = np.random.default_rng(12345)
    rho, n = 0.3, 10_000_000
    acc = acc2 = 0.0
    for _ in range(10):
        z1 = rng.standard_normal(n // 10)
        z2 = rho * z1 + math.sqrt(1 - rho * rho) * rng.standard_normal(n // 10)
        p = np.maximum(z1, 0) * np.maximum(z2, 0)
        acc += p.sum()
        acc2 += (p * p).sum()
    mean = acc / n
    se = math.sqrt((acc2 / n - mean * mean) / n)
    assert abs(mean - arccos_kernel(1.0, 1.0, rho)) <= 3 * se


def test_cov_step_examples():
    s = base_state(0.0, 0.0, 1.0)
    assert s.cov == 1.0
    t = cov_step(s, 1.0)
    assert t.cov == pytest.approx(2.0) and t.var_u == 2.0
    u = base_state(0.7, 0.7, 1.3)
    assert cov_step(u, 1.3).cov == pytest.approx(u.var_u + 1.69)
    for a, b in [(0, 5), (-3, 3), (1, 1.0001)]:
        st = rho_pair(4, a, b, 0.8)
        assert abs(st.rho) <= 1 and 0 <= st.theta <= math.pi


def test_rho_pair_examples():
    assert rho_pair(1, 0, 0.1, 1).rho == pytest.approx(1 / math.sqrt(1.02), rel=1e-12)
    st = rho_pair(5, 0.3, 0.3, 1.0)
    assert st.rho == 1 and st.theta == 0
    r = rho_pair(2, 0, 0.01, 1).one_minus_rho / 1e-4
    assert r == pytest.approx(0.5, rel=0.05)


def test_state_invariants():
    for ell, x, s in GRID:
        st = rho_pair(ell, x, x + 0.3, s)
        assert st.var_u == pytest.approx(variance(ell, x, s), rel=1e-12)
        assert st.var_v == pytest.approx(variance(ell, x + 0.3, s), rel=1e-12)
        assert st.rho == pytest.approx(st.cov / math.sqrt(st.var_u * st.var_v), abs=1e-12)
        assert st.theta == pytest.approx(math.acos(st.rho), abs=1e-7)
        assert st.one_minus_rho == pytest.approx(1 - st.rho, abs=1e-12)


def test_expansion_coefficient_examples():
    assert expansion_coefficient(1, 0, 1) == 1
    assert expansion_coefficient(4, 0, 0.5) == pytest.approx(1 / (4 * 0.25))
    assert expansion_coefficient(2, 1, 1) == 0.125


def test_expansion_recursion_matches_closed_form():
    for ell, x, s in GRID:
        if ell == 1:
            continue
        v = variance(ell - 1, x, s)
        w = v + s * s
        a_prev = expansion_coefficient(ell - 1, x, s)
        rec = a_prev * v / w + 2 * s * s * x * x / (v * w * w)
        assert rec == pytest.approx(expansion_coefficient(ell, x, s), rel=1e-12)


def test_theta_linearized():
    assert theta_linearized(1, 0, 1e-3, 1) == pytest.approx(math.sqrt(2) * 1e-3)
    assert theta_linearized(3, 2.0, 0.0, 0.7) == 0
    for ell in range(1, 6):
        for x in (0.0, 0.5, 1.0):
            ratios = [
                abs(rho_pair(ell, x, x + e, 1.0).theta - theta_linearized(ell, x, e, 1.0)) / e
                for e in (1e-2, 1e-3, 1e-4)
            ]
            assert ratios[0] > ratios[1] > ratios[2] or ratios[0] < 1e-10
            assert ratios[2] < 1e-3


def test_sign_change_prob():
    assert sign_change_prob(0) == 0.5
    assert sign_change_prob(1) == 0
    assert sign_change_prob(-1) == 1
    assert sign_change_prob(0.5) == pytest.approx(1 / 3)
    with pytest.raises(InvalidCorrelation):
        sign_change_prob(1.1)


def test_crossing_density():
    assert crossing_density(1, 0, 1) == pytest.approx(math.sqrt(2) / math.pi)
    xs = np.array([-2.0, -0.3, 0.3, 2.0])
    d = crossing_density(3, xs, 0.7)
    assert np.array_equal(d, d[::-1])
    # sqrt(2l) / (pi l) at x = 0; the third value is 0.25990, not 0.25984
    want = [math.sqrt(2) / math.pi, 1 / math.pi, math.sqrt(6) / (3 * math.pi)]
    assert [crossing_density(ell, 0, 1) for ell in (1, 2, 3)] == pytest.approx(want, rel=1e-15)
    assert want == pytest.approx([0.45016, 0.31831, 0.25990], abs=5e-6)


def test_expected_crossings():
    assert expected_crossings(3, -math.inf, math.inf, 0.4) == 1.0
    assert expected_crossings(2, -3, 3, 1) == pytest.approx(2 / math.pi * math.atan(3))
    assert expected_crossings(2, -100, 100, 1) == pytest.approx(0.99363, abs=5e-6)
    a, b, c = -1.3, 0.2, 4.0
    assert expected_crossings(2, a, b, 1) + expected_crossings(2, b, c, 1) == pytest.approx(
        expected_crossings(2, a, c, 1), rel=1e-15
    )
    d = 1e-6
    assert expected_crossings(4, 0.7, 0.7 + d, 1.3) / d == pytest.approx(
        crossing_density(4, 0.7, 1.3), rel=1e-5
    )
    with pytest.raises(InvalidInterval):
        expected_crossings(1, 2, 2, 1)
    with pytest.raises(InvalidInterval):
        expected_crossings(1, math.inf, math.inf, 1)


def test_density_integrates_to_one():
    from scipy.integrate import quad

    for ell, s in [(1, 1.0), (3, 0.5), (6, 2.0)]:
        total, _ = quad(lambda x: crossing_density(ell, x, s), -np.inf, np.inf)
        assert total == pytest.approx(1.0, abs=1e-8)


# -- expansion residual decay ------------------------------------------------------


def test_base_case_cubic_decay():
    rng = np.random.default_rng(7)
    for _ in range(20):
        x, s = rng.uniform(-2, 2), rng.uniform(0.3, 2.0)
        res = []
        for e in (1e-1, 1e-2):
            one_minus = base_state(x, x + e, s).gap / math.sqrt(
                variance(1, x, s) * variance(1, x + e, s)
            )
            res.append(abs(one_minus - s * s * e * e / (2 * x * x + s * s) ** 2))
        assert slope(res[0], res[1], 1e-1, 1e-2) >= 2.7


def test_sine_cosine_identity_cubic_decay():
    def resid(t):
        return abs((math.sin(t) + (math.pi - t) * math.cos(t)) / math.pi - (1 - t * t / 2))

    assert slope(resid(0.1), resid(0.01), 0.1, 0.01) >= 2.7
