import json
import math

import numpy as np
import pytest

from robinsector.discretization import build_grid
from robinsector.eigensolver import dense_solve
from robinsector.discretization import assemble_stargraph
from robinsector.pencil import ConfigurationError
from robinsector.stargraph import (
    CountingViolation, StarGraph, StarReport, default_star_grid, direct_solve, sector_bound,
    verify_counting,
)

PI = math.pi
COARSE = build_grid(0.0, 40.0, 40, 1.05, 32, 1.1)


def test_geometry():
    s = StarGraph((0.0, PI / 2, PI))
    np.testing.assert_allclose(s.half_gaps, [PI / 4, PI / 4, PI / 2])
    assert s.threshold == -0.25
    assert StarGraph((0.0,), 2.0).threshold == -1.0
    r = s.rotated(5.0)
    np.testing.assert_allclose(np.sort(r.half_gaps), np.sort(s.half_gaps))


def test_validation():
    with pytest.raises(ConfigurationError):
        StarGraph(())
    with pytest.raises(ConfigurationError):
        StarGraph((1.0, 0.5))
    with pytest.raises(ConfigurationError):
        StarGraph((0.0,), 0.0)


def test_equal_gap_stars_are_exact():
    # glued sector ground states exp(-(gamma/2) r cot beta) satisfy the jump condition
    res, count = direct_solve(StarGraph((0.0, PI / 2, PI, 3 * PI / 2)))
    assert count == 1
    assert res[0].value == pytest.approx(-0.5, abs=1e-3)
    assert res[0].value >= -0.5 - 1e-9


def test_two_rays_right_angle():
    star = StarGraph((0.0, PI / 2))
    res, count = direct_solve(star)
    assert count == 1
    # strictly between the cross value and the threshold
    assert -0.5 < res[0].value < -0.25
    assert res[0].value == pytest.approx(-0.2655, abs=2e-3)


def test_single_ray_and_straight_line_have_no_bound_state():
    for angles in ((0.0,), (0.0, PI)):
        _, count = direct_solve(StarGraph(angles), COARSE, k=1)
        assert count == 0


def test_rotation_invariance():
    star = StarGraph((0.0, 1.0, 2.7))
    a = dense_solve(assemble_stargraph(star.angles, 1.0, build_grid(0, 25, 20, 1.1, 40)))[:3]
    b = dense_solve(assemble_stargraph(star.rotated(0.4).angles, 1.0, build_grid(0, 25, 20, 1.1, 40)))[:3]
    np.testing.assert_allclose(a, b, rtol=2e-2)


def test_gamma_scaling():
    star1, star2 = StarGraph((0.0, 1.2), 1.0), StarGraph((0.0, 1.2), 2.0)
    g1 = default_star_grid(star1, 40.0)
    g1 = build_grid(0.0, g1.r_max, 30, 1.05, 32)
    g2 = build_grid(0.0, g1.r_max / 2, 30, 1.05, 32)
    e1 = dense_solve(assemble_stargraph(star1.angles, 1.0, g1))[:2]
    e2 = dense_solve(assemble_stargraph(star2.angles, 2.0, g2))[:2]
    np.testing.assert_allclose(e2, 4 * e1, rtol=1e-10)


def test_sector_bound_terms():
    bound, per = sector_bound(StarGraph((0.0, PI / 2)))
    assert per == [1, 0]
    assert bound == 1
    bound, per = sector_bound(StarGraph((0.0, 0.3, PI)))
    assert per[2] == 0 and per[0] >= 5
    assert bound == sum(per)


def test_report_rejects_violation():
    with pytest.raises(CountingViolation) as info:
        StarReport([-1.0, -0.5], [(-1, -1), (-0.5, -0.5)], 2, [1, 0], 1)
    assert info.value.report.bound == 1


def test_verify_counting_json():
    rep = verify_counting(StarGraph((0.0, 2 * PI / 3, 4 * PI / 3)))
    assert rep.direct_count == 1 <= rep.bound
    assert rep.direct_eigenvalues[0] == pytest.approx(-1 / 3, abs=1e-3)
    d = json.loads(rep.to_json())
    assert d["meta"]["n_theta"] == 128
