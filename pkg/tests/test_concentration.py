import math

import numpy as np
import pytest

from isolab import (AnnealSchedule, DomainError, VoxelDomain, best_ball_fit, concentration_experiment,
                    diameter_boundedness_check, minimize_perimeter, symmetric_difference_ratio)
from isolab.concentration import ball_ratio, crofton_perimeter, lattice_set, star_shaped_fraction
from isolab.grid import small_diameter_pipeline

FAST = AnnealSchedule(sweeps_per_level=10, levels=30)


def test_schedule_validation():
    with pytest.raises(DomainError):
        AnnealSchedule(cooling=1.0)


def test_crofton_of_digital_disc_close_to_circumference():
    D = VoxelDomain.ball(30, 1.0)
    assert crofton_perimeter(D) == pytest.approx(2 * math.pi * 30, rel=0.01)


def test_single_voxel_ratio():
    ls = minimize_perimeter(1)
    assert ls.ratio == pytest.approx(4 / (2 * math.sqrt(math.pi)), rel=1e-12)
    assert ball_ratio(ls.domain) == 0.0


def test_annealing_quality_and_conservation():
    ls = minimize_perimeter(400, schedule=FAST)
    assert ls.domain.count == 400 and ls.conserved
    assert ls.quality <= 1.1
    assert ls.quality >= 1 - 2 / math.sqrt(400)
    assert all(a >= b for a, b in zip(ls.history, ls.history[1:]))


def test_annealing_deterministic():
    a = minimize_perimeter(200, schedule=FAST)
    b = minimize_perimeter(200, schedule=FAST)
    assert a.domain == b.domain and a.perimeter == b.perimeter
    c = minimize_perimeter(200, schedule=AnnealSchedule(sweeps_per_level=10, levels=30, seed=9))
    assert c.domain.count == 200


def test_volume_gate():
    with pytest.raises(DomainError):
        minimize_perimeter(400, box=30)


def test_ball_fit_examples():
    disc = VoxelDomain.ball(12, 1.0)
    ball = best_ball_fit(disc)
    assert np.allclose(ball.center, 0, atol=1e-12)
    assert symmetric_difference_ratio(disc, ball) < 0.05
    bar = VoxelDomain(np.ones((200, 1)), 1.0)
    assert ball_ratio(bar) > 0.5


def test_symmetric_difference_extremes():
    disc = VoxelDomain.ball(8, 1.0)
    assert symmetric_difference_ratio(disc, disc) == 0.0
    shifted = VoxelDomain(disc.occ, 1.0, disc.origin + 100)
    assert symmetric_difference_ratio(disc, shifted) == 2.0


def test_star_shaped_annealed():
    ls = minimize_perimeter(400, schedule=FAST)
    assert star_shaped_fraction(ls) >= 0.99


def test_two_disc_selection_improves_ratio():
    D = VoxelDomain.from_indicator(
        lambda x: (np.hypot(x[..., 0] - 20, x[..., 1] - 20) <= 10) | (np.hypot(x[..., 0] - 60, x[..., 1] - 20) <= 10),
        (0, 0), (80, 40), 1.0)
    piece = small_diameter_pipeline(D, 40.0, seed=0).component
    assert ball_ratio(piece) < ball_ratio(D)
    assert piece.volume / D.volume == pytest.approx(0.5, abs=0.01)


def test_digital_ball_control():
    vols = [6400, 1600, 400]
    balls = [VoxelDomain.ball(math.sqrt(v / math.pi), 1.0) for v in vols]
    rep = concentration_experiment(vols, domains=balls)
    assert all(r["sym_diff"] < 0.05 for r in rep.rows)


def test_experiment_preconditions():
    with pytest.raises(DomainError):
        concentration_experiment([400, 1600, 6400])
    with pytest.raises(DomainError):
        concentration_experiment([400, 100])


def test_quality_gate_skips():
    rep = concentration_experiment([300, 200, 100], AnnealSchedule(sweeps_per_level=1, levels=1),
                                   quality_gate=0.5)
    assert all("skipped" in r for r in rep.rows)
    assert not rep.passed


def test_diameter_boundedness():
    discs = [VoxelDomain.ball(math.sqrt(v / math.pi), 1.0) for v in (6400, 1600, 400)]
    rep = diameter_boundedness_check(discs)
    assert rep.passed
    assert all(x == pytest.approx(2 / math.sqrt(math.pi), rel=0.05) for x in rep.rescaled)
    annealed = [minimize_perimeter(v, schedule=FAST) for v in (800, 400, 200)]
    assert diameter_boundedness_check(annealed).R <= 2
    bar = VoxelDomain(np.ones((100, 4)), 1.0)
    rep = diameter_boundedness_check(discs + [bar])
    assert not rep.passed and rep.flagged == [3]


def test_lattice_set_wraps_domain():
    ls = lattice_set(VoxelDomain.ball(10, 1.0))
    assert ls.target == ls.domain.count and ls.ratio > ls.quality
