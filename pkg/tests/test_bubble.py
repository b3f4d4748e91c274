import math

import numpy as np
import pytest

from isolab import (ChartMetric, ConvergenceError, DomainError, SolverConfig, SphereFunction, f_area, residual,
                    solve_beta, symmetry_check, verify_uniqueness)
from isolab.bubble import recentered_bubble, residual_norm
from isolab.sphere import enclosed_volume

C2 = 2 * math.sqrt(math.pi)
C3 = (36 * math.pi) ** (1 / 3)


def test_residual_examples(euclid2, sphere2, origin2):
    assert residual_norm(origin2, SphereFunction.constant(2, 0.2), euclid2) < 1e-10
    assert residual_norm(origin2, SphereFunction.constant(2, 0.3), sphere2) < 1e-9
    ell = SphereFunction.from_fourier(0.1, [0, 0.01])
    assert residual(origin2, ell, euclid2).norm() > 1e-3


def test_euclidean_exact(euclid2, origin2):
    pb = solve_beta(origin2, 0.01, euclid2)
    assert pb.area == pytest.approx(C2 * 0.1, rel=1e-8)
    assert np.allclose(pb.u.data[1:], 0, atol=1e-12)
    assert pb.u.data[0] == pytest.approx(math.sqrt(0.01 / math.pi), rel=1e-10)
    assert pb.residual < 1e-10
    assert abs(pb.volume - 0.01) < 1e-10 * 0.01


def test_euclidean_3d():
    assert f_area(np.zeros(3), 1e-3, ChartMetric.euclidean(3)) == pytest.approx(C3 * 1e-2, rel=1e-6)


def test_homogeneity(euclid2):
    a = f_area(np.array([0.3, -0.2]), 0.01, euclid2)
    b = f_area(np.array([-0.5, 0.1]), 0.01, euclid2)
    assert a == pytest.approx(b, rel=1e-12)


@pytest.mark.parametrize("v", [0.02, 0.05])
def test_space_form_oracles(sphere2, hyper2, v):
    p = np.array([0.1, 0.05])
    assert f_area(p, v, sphere2) == pytest.approx(math.sqrt(4 * math.pi * v - v * v), rel=1e-6)
    assert f_area(p, v, hyper2) == pytest.approx(math.sqrt(4 * math.pi * v + v * v), rel=1e-6)


def test_cap_oracle_value(sphere2, origin2):
    # sqrt(0.08 pi - 0.0004) = 0.5009266
    assert f_area(origin2, 0.02, sphere2) == pytest.approx(0.5009266, abs=1e-7)


def test_invariants_on_conformal(bump):
    p = np.array([0.1, -0.05])
    pb = solve_beta(p, 1e-3, bump)
    assert pb.residual < 1e-10
    assert enclosed_volume(p, pb.u, bump) == pytest.approx(1e-3, rel=1e-10)
    rule = pb.u.default_rule()
    assert np.all(pb.u.values(rule) > 0)
    assert pb.com_offset < 0.01 * pb.mean_radius


def test_com_offset_decreases_with_volume(bump):
    p = np.array([0.2, 0.1])
    offs = [solve_beta(p, v, bump).com_offset for v in (1e-3, 2e-3, 4e-3, 8e-3)]
    assert all(a < b for a, b in zip(offs, offs[1:]))


@pytest.mark.parametrize("name,bound", [("sphere2", 1e-3), ("bump", 1e-2)])
def test_small_volume_shape(name, bound, request):
    m = request.getfixturevalue(name)
    pb = solve_beta(np.array([0.1, 0.0]), 1e-4, m)
    vals = pb.u.values(pb.u.default_rule())
    assert np.max(np.abs(vals / vals.mean() - 1)) < bound


def test_gauge_independence(bump):
    p = np.array([0.15, 0.05])
    a = solve_beta(p, 1e-3, bump).area
    b = recentered_bubble(p, 1e-3, bump).area
    assert abs(a - b) / a < 1e-8


def test_volume_cap(euclid2, origin2):
    with pytest.raises(DomainError):
        solve_beta(origin2, 1.0, euclid2)


def test_nonconvergence_carries_trace(sphere2, origin2):
    with pytest.raises(ConvergenceError) as info:
        solve_beta(origin2, 0.05, sphere2, SolverConfig(max_iter=1, tol=1e-15))
    assert info.value.payload["trace"]


def test_jacobian_reuse_matches_cold_solve(sphere2, origin2):
    a = solve_beta(origin2, 0.01, sphere2)
    b = solve_beta(origin2, 0.011, sphere2, initial=a.u * (1.1 ** 0.5), jacobian=a.jacobian)
    c = solve_beta(origin2, 0.011, sphere2)
    assert b.area == pytest.approx(c.area, rel=1e-12)


def test_symmetry_checks(euclid2, origin2):
    rep = symmetry_check(solve_beta(origin2, 0.01, euclid2), euclid2)
    assert rep.applicable and rep.energy < 1e-10
    radial = ChartMetric.conformal("0.1*(x^2+y^2)", 2)
    rep = symmetry_check(solve_beta(origin2, 0.01, radial), radial)
    assert rep.applicable and rep.energy < 1e-8
    skew = ChartMetric.conformal("0.1*x", 2)
    rep = symmetry_check(solve_beta(origin2, 0.01, skew), skew)
    assert not rep.applicable and rep.note == "no stabilizer symmetry"


@pytest.mark.parametrize("name,v,trials,tol", [("euclid2", 0.01, 10, 1e-8), ("sphere2", 0.05, 10, 1e-7),
                                               ("bump", 0.01, 5, 1e-6)])
def test_uniqueness(name, v, trials, tol, request):
    m = request.getfixturevalue(name)
    rep = verify_uniqueness(np.array([0.02, 0.0]), v, m, trials=trials)
    assert rep.all_converged
    assert rep.max_deviation < tol


def test_report_serializes(sphere2, origin2):
    d = solve_beta(origin2, 0.01, sphere2).to_dict()
    assert {"center", "volume", "area", "lambda", "residual", "com_offset", "u"} <= set(d)
