import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from robinsector.analysis import (
    AlphaScan, MeshBudget, agmon_decay_rate, boundedness_constant, converge_sector, count_below,
    count_growth, default_r_max, energy_estimate, fit_decay, fit_expansion, lambda1_quadrature,
    min_count_estimate, monotone_verdict, scan_alpha,
)
from robinsector.pencil import ConfigurationError

SMALL = MeshBudget(n_r0=60, n_theta0=4, grading0=1.03, min_level=1, max_level=1)


@pytest.fixture(scope="module")
def alpha03():
    return converge_sector(0.3, keep_pencil=True)


def test_energy_estimate_and_truncation():
    assert energy_estimate(0.5, 1) == pytest.approx(-1 / math.sin(0.5) ** 2)
    assert default_r_max(0.5) == pytest.approx(16 / math.sqrt(1 / math.sin(0.5) ** 2 - 1))
    assert default_r_max(1.5, cap=50.0) == 50.0
    assert default_r_max(0.5, gamma=2.0) == pytest.approx(default_r_max(0.5) / 2)


def test_budget_levels_are_nested():
    g0 = MeshBudget().grid(1.2, level=0)
    g2 = MeshBudget().grid(1.2, level=2)
    assert (g2.n_r, g2.n_theta) == (4 * g0.n_r, 4 * g0.n_theta)
    assert g2.theta_grading == pytest.approx(1.3 ** 0.25)
    assert MeshBudget().grid(0.5).theta_grading == 1.0


def test_converged_ground_state(alpha03):
    exact = -1 / math.sin(0.3) ** 2
    assert alpha03.converged
    assert 2 <= alpha03.count <= count_below(0.3)
    assert abs(alpha03.values[0] / exact - 1) < 1e-4
    assert abs(alpha03.extrapolated[0] / exact - 1) < 1e-6
    lo, hi = alpha03.enclosures[0]
    assert lo <= exact <= hi
    assert alpha03.values[0] >= exact  # min-max upper bound
    sizes = [h[2] for h in alpha03.history]
    assert sizes == sorted(sizes)


def test_agmon_rate_small_angle(alpha03):
    fit = agmon_decay_rate(alpha03.results[0], alpha03.pencil)
    target = math.sqrt(-1 - alpha03.values[0])
    assert fit.rate == pytest.approx(target, rel=0.1)
    assert fit.goodness > 0.999


def test_fit_decay_synthetic():
    r = np.linspace(0, 30, 301)
    fit = fit_decay(r, 5 * np.exp(-2 * 0.7 * r), (5, 25))
    assert fit.rate == pytest.approx(0.7, rel=1e-12)
    with pytest.raises(ValueError):
        fit_decay(r, np.zeros_like(r), (5, 25))


def test_scan_is_deterministic_and_ordered():
    a = scan_alpha([0.9, 0.5, 0.7], budget=SMALL, jobs=1)
    b = scan_alpha([0.5, 0.7, 0.9], budget=SMALL, jobs=2)
    assert a.alphas == [0.5, 0.7, 0.9]
    assert a.eigenvalues == b.eigenvalues
    assert a.enclosures == b.enclosures
    assert all(monotone_verdict(a))
    with pytest.raises(ConfigurationError):
        scan_alpha([1.6], budget=SMALL)


def test_alphascan_validation():
    with pytest.raises(ValueError):
        AlphaScan([0.2, 0.1], [[-1.5], [-2]], [[-1.5], [-2]], [], [1, 1], [], [])
    with pytest.raises(ValueError):
        AlphaScan([0.1], [[-1.0, -2.0]], [[-1.0, -2.0]], [], [2], [], [])
    s = AlphaScan([0.1, 0.2], [[-3.0, -2.0], [-1.5]], [[-3.1, -2.1], [-1.6]], [], [2, 1], [], [])
    np.testing.assert_array_equal(s.column(2), [-2.0, np.nan])
    np.testing.assert_array_equal(s.column(1, extrapolated=True), [-3.1, -1.6])


@given(st.floats(-2, 0), st.floats(-1, 1), st.floats(-1, 1))
def test_fit_recovers_polynomial(l0, l1, l2):
    a = np.geomspace(0.04, 0.16, 8)
    e = (l0 + l1 * a**2 + l2 * a**4) / a**2
    fit = fit_expansion(a, e, 1, 2)
    np.testing.assert_allclose(fit.coefficients, [l0, l1, l2], atol=1e-7)


def test_fit_needs_enough_points():
    with pytest.raises(ValueError):
        fit_expansion([0.1, 0.2, 0.3], [-100, -25, -11], 1, 2)
    with pytest.raises(ValueError):
        fit_expansion([0.1, 0.1, 0.1, 0.1], [-100] * 4, 1, 2)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_lambda1_quadrature(n):
    assert lambda1_quadrature(n) == pytest.approx(-1 / 3, abs=1e-9)


def test_lambda1_without_lambda0_term():
    # the dropped term is +(lambda_0 / 3) <f, u_0>, which is -1/6 for n = 1
    assert lambda1_quadrature(1, include_lambda0_term=False) == pytest.approx(-0.5, abs=1e-9)


def test_count_growth():
    kappa, table = count_growth([0.2, 0.05, 0.1], [4, 15, 8])
    assert table == [(0.05, 15), (0.1, 8), (0.2, 4)]
    assert kappa == pytest.approx(0.75)
    with pytest.raises(ValueError):
        count_growth([0.05, 0.1], [3, 4])


def test_counts_on_default_grid():
    # E_3 is about -1.0009 here, so a third state sits just below threshold
    assert count_below(0.3) == 3
    assert count_below(1.0) == 1
    assert count_below(1.0, threshold=-5.0) == 0


def test_counts_dominate_lower_estimate():
    for alpha in (0.05, 0.1, 0.2):
        assert count_below(alpha) >= min_count_estimate(alpha, 0.35)


def test_boundedness_constant():
    a = np.array([0.1, 0.2])
    e1 = (-1 + 0.3 * a**2) / a**2
    e2 = (-1 / 9 - 0.5 * a**2) / a**2
    assert boundedness_constant(a, {1: e1, 2: e2}) == pytest.approx(0.5)


def test_min_count_estimate():
    assert min_count_estimate(0.05, 0.0) == 9
    assert min_count_estimate(0.6, 0.35) == 0
