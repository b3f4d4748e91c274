import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from isolab import (DomainError, GridSpec, InputError, ResolutionError, SearchError, VoxelDomain,
                    average_over_offsets, grid_intersection_area, largest_component_check, partition_components,
                    select_grid, small_diameter_pipeline)

H = 1 / 256


@pytest.fixture(scope="module")
def square():
    return VoxelDomain.box(1.0, H)


@pytest.fixture(scope="module")
def disc():
    return VoxelDomain.ball(0.5, H)


def test_voxel_domain_basics(square):
    assert square.volume == pytest.approx(1.0)
    assert square.boundary_area == pytest.approx(4.0)
    assert VoxelDomain(np.ones((1, 1)), 0.5).boundary_area == 2.0


def test_rle_round_trip(disc, tmp_path):
    path = tmp_path / "disc.vox"
    disc.save(path)
    assert VoxelDomain.load(path) == disc
    assert path.read_text().splitlines()[0].split()[:4] == ["2", repr(H), *map(str, disc.occ.shape[:2])]


def test_rle_rejects_garbage():
    with pytest.raises(InputError):
        VoxelDomain.loads("2 1.0 3 3\n1 2")
    with pytest.raises(InputError):
        VoxelDomain.loads("two 1.0 3 3\n9")


def test_grid_spec_offset_range():
    with pytest.raises(DomainError):
        GridSpec(0.5, (0.5, 0.0))
    with pytest.raises(DomainError):
        GridSpec(0.0, (0.0, 0.0))


def test_intersection_examples(square):
    assert grid_intersection_area(square, GridSpec(0.5, (0.0, 0.0))) == pytest.approx(2.0, abs=2 * H)
    assert grid_intersection_area(square, GridSpec(2.0, (0.9, 0.9))) == 0.0


def test_resolution_error(square):
    with pytest.raises(ResolutionError):
        grid_intersection_area(square, GridSpec(3 * H, (0.0, 0.0)))


@pytest.mark.parametrize("r", [0.25, 0.5])
def test_averaging_square_and_disc(square, r):
    disc = VoxelDomain.ball(1.0, H)
    for D in (square, disc):
        rep = average_over_offsets(D, r, 10_000, seed=0)
        assert abs(rep.mean - 2 / r * D.volume) <= 3 * rep.stderr + 1e-12


def test_averaging_half_disc_and_scaling(disc):
    a = average_over_offsets(disc, 0.5, 10_000, seed=1)
    assert a.mean == pytest.approx(math.pi, rel=0.01)
    b = average_over_offsets(disc, 1.0, 10_000, seed=1)
    assert abs(b.mean - a.mean / 2) <= 3 * (b.stderr + a.stderr / 2)
    with pytest.raises(DomainError):
        average_over_offsets(disc, 0.5, 10)


def test_scaling_on_voxel_exact_inputs():
    rng = np.random.default_rng(0)
    occ = rng.random((40, 40)) < 0.5
    D, sD = VoxelDomain(occ, 1 / 32), VoxelDomain(occ, 2 / 32)
    for off in [(0.0, 0.0), (3 / 32, 5 / 32), (0.1, 0.2)]:
        a = grid_intersection_area(D, GridSpec(0.25, off))
        b = grid_intersection_area(sD, GridSpec(0.5, tuple(2 * x for x in off)))
        assert b == pytest.approx(2 * a, rel=1e-12)


def test_select_grid(square, disc):
    G, trials = select_grid(square, 0.5, max_trials=10, seed=0)
    assert grid_intersection_area(square, G) <= 4.0 + 1e-12 and trials <= 10
    G, _ = select_grid(square, 1.1, seed=3)
    assert grid_intersection_area(square, G) <= 2 / 1.1
    G, _ = select_grid(disc, 0.25, seed=0)
    assert grid_intersection_area(disc, G) <= 2 / 0.25 * disc.volume


def test_select_grid_exhaustion():
    # the bound equals the offset mean, so only an empty budget guarantees failure
    D = VoxelDomain(np.ones((64, 1)), H)
    with pytest.raises(SearchError) as exc:
        select_grid(D, 8 * H, max_trials=0, seed=0)
    assert exc.value.payload["trials"] == 0


def test_partition_square(square):
    part = partition_components(square, GridSpec(0.5, (0.0, 0.0)))
    assert len(part.components) == 4
    assert all(c.boundary_area == pytest.approx(2.0) for c in part.components)
    assert part.boundary_sum - part.boundary_domain == pytest.approx(2 * 2.0)
    assert part.identity_exact
    part = partition_components(square, GridSpec(2.0, (0.9, 0.9)))
    assert len(part.components) == 1 and part.boundary_sum == part.boundary_domain


def test_partition_disc_identity():
    disc = VoxelDomain.ball(1.0, H)
    part = partition_components(disc, GridSpec(0.25, (0.1, 0.07)))
    assert part.identity_exact
    assert part.identity_error <= part.tolerance


def test_partition_empty():
    with pytest.raises(DomainError):
        partition_components(VoxelDomain(np.zeros((8, 8)), H), GridSpec(0.5, (0.0, 0.0)))


def test_pipeline_examples():
    h = 1 / 64
    sq = VoxelDomain.box(0.25, h)
    res = small_diameter_pipeline(sq, 10 * 0.25, seed=0)
    assert res.largest_fraction == pytest.approx(1.0)
    disc = VoxelDomain.ball(0.5, h)
    a = disc.volume
    res = small_diameter_pipeline(disc, 3 * math.sqrt(a), seed=0)
    assert res.added_boundary_ratio <= 2 * 2 * math.sqrt(a) / (3 * math.sqrt(a)) / math.sqrt(a) * a ** 0.5 * 1.1
    assert res.diameter_bound_ok


def test_two_distant_discs():
    h = 1 / 64
    D = VoxelDomain.from_indicator(
        lambda x: (np.hypot(x[..., 0] - 0.5, x[..., 1] - 0.5) <= 0.3) | (np.hypot(x[..., 0] - 1.5, x[..., 1] - 0.5) <= 0.3),
        (0, 0), (2, 1), h)
    part = partition_components(D, GridSpec(1.0, (0.0, 0.0)))
    fr = sorted(c.volume / D.volume for c in part.components)
    assert fr == pytest.approx([0.5, 0.5])


def test_pipeline_diameter_bound_random_domains():
    rng = np.random.default_rng(5)
    for seed in range(3):
        occ = rng.random((64, 64)) < 0.7
        D = VoxelDomain(occ, 1 / 64)
        res = small_diameter_pipeline(D, 0.25, seed=seed)
        assert res.diameter_bound_ok


def test_largest_component_examples():
    rep = largest_component_check([[1.0]], 0.1)
    assert rep.sums == [1.0] and rep.maxima == [1.0]
    rep = largest_component_check([[0.9, 0.1]], 0.1)
    assert rep.sums[0] == pytest.approx(1.2649, abs=1e-4) and rep.passed
    rep = largest_component_check([[0.5, 0.5]], 0.5)
    assert rep.sums[0] == pytest.approx(math.sqrt(2)) and rep.passed
    with pytest.raises(InputError):
        largest_component_check([[0.5, 0.4]], 0.1)


@settings(max_examples=200)
@given(st.lists(st.floats(0.0, 1.0), min_size=1, max_size=12).filter(lambda x: sum(x) > 0),
       st.floats(0.01, 0.99), st.sampled_from([2, 3]))
def test_combinatorial_lemma_property(raw, eps, n):
    f = np.array(raw) / sum(raw)
    f = f / f.sum()
    rep = largest_component_check([f], eps, n)
    assert rep.passed
