"""Acceptance criteria, one test each; every test prints a PASS/FAIL line."""
import math
import time

import numpy as np
import pytest

from isolab import (ChartMetric, GridSpec, VoxelDomain, average_over_offsets, exp_map, fit_ap, karcher_mean,
                    largest_component_check, log_map, metric_from_spec, partition_components,
                    profile_expansion_check, scalar_curvature, solve_beta, sweep_v)
from isolab.cli import run
from isolab.profile import default_v_grid


@pytest.fixture
def report(capsys):
    def emit(k, ok, detail):
        with capsys.disabled():
            print(f"\ncriterion {k}: {'PASS' if ok else 'FAIL'} {detail}")
        assert ok, detail
    return emit


def _spread(u):
    vals = u.values(u.default_rule())
    return float(np.ptp(vals) / np.mean(vals))


def test_criterion_1_euclidean_exactness(report):
    t = time.perf_counter()
    errs, spreads = [], []
    m2 = ChartMetric.euclidean(2)
    for v in (1e-3, 1e-2):
        pb = solve_beta(np.zeros(2), v, m2)
        errs.append(abs(pb.area / (2 * math.sqrt(math.pi * v)) - 1))
        spreads.append(_spread(pb.u))
    pb = solve_beta(np.zeros(3), 1e-3, ChartMetric.euclidean(3))
    err3 = abs(pb.area / ((36 * math.pi) ** (1 / 3) * 1e-3 ** (2 / 3)) - 1)
    spreads.append(_spread(pb.u))
    dt = time.perf_counter() - t
    ok = max(errs) < 1e-8 and err3 < 1e-6 and max(spreads) < 1e-8 and dt < 5
    report(1, ok, f"n=2 rel {max(errs):.1e}, n=3 rel {err3:.1e}, u spread {max(spreads):.1e}, {dt:.1f}s")


def test_criterion_2_space_forms(report):
    v = np.linspace(1e-3, 0.05, 12)
    worst, slowest = 0.0, 0.0
    for kind, sign in (("sphere", -1), ("hyperbolic", 1)):
        t = time.perf_counter()
        samples = sweep_v(np.zeros(2), v, ChartMetric.__dict__[kind].__func__(ChartMetric, 2))
        slowest = max(slowest, time.perf_counter() - t)
        for s in samples:
            exact = math.sqrt(4 * math.pi * s.volume + sign * s.volume ** 2)
            worst = max(worst, abs(s.area / exact - 1) if s.converged else math.inf)
    report(2, worst < 1e-6 and slowest < 30, f"max rel {worst:.1e}, slowest sweep {slowest:.1f}s")


def test_criterion_3_expansion_coefficient(report):
    fits = {}
    for name, m in (("S2", ChartMetric.sphere(2)), ("H2", ChartMetric.hyperbolic(2)),
                    ("E2", ChartMetric.euclidean(2))):
        fits[name] = fit_ap(sweep_v(np.zeros(2), default_v_grid(), m), 2).a_p
    fits["S3"] = fit_ap(sweep_v(np.zeros(3), default_v_grid(per_decade=3), ChartMetric.sphere(3)), 3).a_p
    ok = (abs(fits["S2"] + 0.125) <= 0.005 and abs(fits["H2"] - 0.125) <= 0.005
          and abs(fits["E2"]) <= 1e-4 and abs(fits["S3"] + 0.2) <= 0.02)
    report(3, ok, " ".join(f"{k}={a:+.6f}" for k, a in fits.items()))


def test_criterion_4_profile_expansion(report):
    m = metric_from_spec("bump")
    ax = np.array([-0.05, 0.0, 0.05])
    grid = np.array([[x, y] for x in ax for y in ax])
    chk = profile_expansion_check(m, grid, default_v_grid(per_decade=3))
    near = all(np.linalg.norm(np.asarray(e.argmin) - chk.maximizer) <= 0.05
               for e in chk.estimates if e.volume <= 1e-3)
    ok = chk.relative_error <= 0.1 and near
    report(4, ok, f"S={chk.S:.5f} fitted={chk.fit.a_p:.6f} expected={chk.expected:.6f} "
                  f"rel {chk.relative_error:.1e}, argmin near maximizer {near}")


def test_criterion_5_grid_averaging(report):
    h = 1 / 256
    zs = []
    for D in (VoxelDomain.box(1.0, h), VoxelDomain.ball(1.0, h)):
        for r in (0.25, 0.5):
            rep = average_over_offsets(D, r, 10_000, seed=0)
            zs.append(abs(rep.z_score))
    part = partition_components(VoxelDomain.box(1.0, h), GridSpec(0.5, (0.0, 0.0)))
    identity = (len(part.components) == 4 and part.identity_exact
                and part.boundary_sum - part.boundary_domain == 2 * part.cut_area == 4.0)
    report(5, max(zs) <= 3 and identity, f"max |z| {max(zs):.2f} against the exact volume, identity {identity}")


def test_criterion_6_combinatorial_lemma(report):
    rng = np.random.default_rng(0)
    ks = rng.integers(1, 20, size=10_000)
    eps = rng.uniform(0.01, 0.99, size=10_000)
    violations = 0
    for k, e in zip(ks, eps):
        f = rng.dirichlet(np.full(k, rng.uniform(0.1, 3.0)))
        for n in (2, 3):
            if not largest_component_check([f], float(e), n).passed:
                violations += 1
    report(6, violations == 0, f"{violations} violations over 10000 vectors, n in (2, 3)")


def test_criterion_7_concentration(report, tmp_path):
    status, rep = run({"command": "concentrate", "seed": 0}, tmp_path)
    rows = rep["result"]["experiment"]["rows"]
    ratios = [r.get("sym_diff") for r in rows]
    quals = [r["quality"] for r in rows]
    ctrl = rep["result"]["control"]["max_sym_diff"]
    report(7, status == 0, f"quality {[round(q, 4) for q in quals]}, sym diff "
                           f"{[None if x is None else round(x, 4) for x in ratios]}, control {ctrl:.4f}")


def test_criterion_8_inequality_suite(report, tmp_path):
    outcomes = {}
    for name, metric in (("E2", {"kind": "euclidean"}), ("S2", {"kind": "sphere"}),
                         ("H2", {"kind": "hyperbolic"}), ("bump", {"kind": "preset", "name": "bump"})):
        status, rep = run({"command": "checks", "metric": metric})
        res = rep["result"]
        outcomes[name] = (status == 0, res["uniqueness"]["max_deviation"], len(res["failed_samples"]))
    ok = all(o[0] for o in outcomes.values())
    report(8, ok, " ".join(f"{k}:{'ok' if o[0] else 'fail'}(dev {o[1]:.1e}, {o[2]} unconverged)"
                           for k, o in outcomes.items()))


def test_criterion_9_kernel_numerics(report):
    bump = metric_from_spec("bump")
    rng = np.random.default_rng(7)
    trip = 0.0
    for m in (ChartMetric.sphere(2), ChartMetric.hyperbolic(2), bump):
        for _ in range(5):
            p = rng.uniform(-0.2, 0.2, 2)
            d = rng.normal(size=2)
            q = exp_map(m, p, 0.5 * d / m.norm(p, d))
            trip = max(trip, float(np.linalg.norm(exp_map(m, p, log_map(m, p, q)) - q)))
    pts = [rng.uniform(-0.15, 0.15, 2) for _ in range(6)]
    w = rng.uniform(0.5, 1.0, 6)
    w /= w.sum()
    x = karcher_mean(pts, w, bump)
    foc = bump.norm(x, sum(wi * log_map(bump, x, s) for wi, s in zip(w, pts)))
    stereo = ChartMetric.conformal("-log(1+(x^2+y^2)/4)", 2, chart_radius=4.0)
    p = np.array([0.1, 0.2])
    errs = [abs(scalar_curvature(stereo, p, step=h) - 2.0) for h in (0.1, 0.05, 0.025)]
    rates = [math.log2(errs[i] / errs[i + 1]) for i in range(2)]
    ok = trip < 1e-8 and foc < 1e-8 and all(1.8 <= r <= 2.2 for r in rates)
    report(9, ok, f"round trip {trip:.1e}, Karcher gradient {foc:.1e}, "
                  f"curvature rates {', '.join(f'{r:.3f}' for r in rates)}")
