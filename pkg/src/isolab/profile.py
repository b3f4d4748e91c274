"""Small-volume isoperimetric profile experiments built on pseudo-bubbles.

The profile at volume v is estimated as the minimum over centers of the
pseudo-bubble area f(p, v); its small-volume behaviour is compared with

    f(p, v) = c_n v^((n-1)/n) (1 + a_p (v / omega_n)^(2/n) + O(v^(4/n))),
    a_p = -Sc(p) / (2 n (n + 2)).
"""
from dataclasses import dataclass, field
import math

import numpy as np
from scipy.optimize import minimize, minimize_scalar

from .bubble import SolverConfig, UNIT_BALL_VOLUME, solve_beta
from .errors import DomainError, FitError, IsolabError
from .geometry import scalar_curvature
from .sphere import SPHERE_AREA

ISOPERIMETRIC_CONSTANT = {
    2: 2 * math.sqrt(math.pi),
    3: (36 * math.pi) ** (1 / 3),
}


def isoperimetric_constant(n):
    """c_n = |S^(n-1)| / omega_n^((n-1)/n)."""
    return SPHERE_AREA[n - 1] / UNIT_BALL_VOLUME[n] ** ((n - 1) / n)


def euclidean_profile(v, n):
    return isoperimetric_constant(n) * np.asarray(v, dtype=float) ** ((n - 1) / n)


def default_v_grid(lo=1e-4, hi=1e-2, per_decade=8):
    k = int(round(per_decade * math.log10(hi / lo)))
    return np.logspace(math.log10(lo), math.log10(hi), k + 1)


@dataclass
class ProfileSample:
    center: np.ndarray
    volume: float
    area: float | None
    curvature: float | None = None
    residual: float | None = None
    com_offset: float | None = None
    error: str | None = None

    @property
    def converged(self):
        return self.error is None and self.area is not None

    def to_dict(self):
        d = dict(self.__dict__)
        d["center"] = np.asarray(self.center).tolist()
        return d


@dataclass
class ExpansionFit:
    dimension: int
    c_n: float
    omega_n: float
    a_p: float
    b: float
    residual: float
    v_grid: list
    condition: float

    def __post_init__(self):
        n = self.dimension
        if n not in ISOPERIMETRIC_CONSTANT:
            raise DomainError("dimension must be 2 or 3")
        if abs(self.c_n - ISOPERIMETRIC_CONSTANT[n]) > 1e-12 or abs(self.omega_n - UNIT_BALL_VOLUME[n]) > 1e-12:
            raise ValueError("inconsistent Euclidean constants")

    def to_dict(self):
        return dict(self.__dict__)


def sweep_v(p, v_grid, m, cfg=None):
    """Warm-started solves along an ascending volume grid.

    A failed solve is recorded on its sample and the sweep restarts cold.
    """
    cfg = cfg or SolverConfig(compute_com=False)
    v_grid = np.asarray(v_grid, dtype=float)
    if np.any(np.diff(v_grid) <= 0):
        raise DomainError("v_grid must be strictly ascending")
    n = m.dimension
    samples = []
    prev = None
    for v in v_grid:
        init, jac = None, None
        if prev is not None:
            init = prev.u * (v / prev.volume) ** (1.0 / n)
            jac = prev.jacobian
        try:
            pb = solve_beta(p, float(v), m, cfg, initial=init, jacobian=jac)
        except IsolabError as exc:
            samples.append(ProfileSample(np.asarray(p, dtype=float), float(v), None, error=str(exc)))
            prev = None
            continue
        samples.append(ProfileSample(pb.center, float(v), pb.area, pb.curvature, pb.residual, pb.com_offset))
        prev = pb
    return samples


def _expansion_terms(v, f, n):
    c = isoperimetric_constant(n)
    s = (v / UNIT_BALL_VOLUME[n]) ** (2.0 / n)
    y = (f / (c * v ** ((n - 1) / n)) - 1.0) / s
    return s, y


def fit_expansion(v, f, n, max_condition=1e8):
    """Least squares of the normalized area defect against a + b (v/omega_n)^(2/n)."""
    v = np.asarray(v, dtype=float)
    f = np.asarray(f, dtype=float)
    if v.size < 4:
        raise FitError("need at least 4 samples", count=int(v.size))
    s, y = _expansion_terms(v, f, n)
    A = np.stack([np.ones_like(s), s], axis=1)
    cond = float(np.linalg.cond(A))
    if cond > max_condition:
        raise FitError("ill-conditioned expansion fit", condition=cond)
    (a, b), *_ = np.linalg.lstsq(A, y, rcond=None)
    res = float(np.sqrt(np.mean((A @ [a, b] - y) ** 2)))
    return ExpansionFit(n, ISOPERIMETRIC_CONSTANT[n], UNIT_BALL_VOLUME[n], float(a), float(b), res, v.tolist(), cond)


def fit_ap(samples, dimension=None):
    """Fit the second expansion coefficient a_p from converged samples."""
    good = [s for s in samples if s.converged]
    if len(good) != len(samples):
        raise FitError("fit_ap needs converged samples", failed=len(samples) - len(good))
    n = dimension or len(np.atleast_1d(good[0].center))
    return fit_expansion([s.volume for s in good], [s.area for s in good], n)


# -- profile as a minimum over centers ------------------------------------------

@dataclass
class ProfileEstimate:
    volume: float
    value: float
    argmin: np.ndarray
    grid_values: list
    on_boundary: bool
    evaluations: int

    def to_dict(self):
        d = dict(self.__dict__)
        d["argmin"] = np.asarray(self.argmin).tolist()
        d["warning"] = "minimum on grid boundary; may lie outside the chart" if self.on_boundary else None
        return d


def _grid_axes(p_grid):
    pts = np.asarray(p_grid, dtype=float)
    axes = [np.unique(pts[:, k]) for k in range(pts.shape[1])]
    return pts, axes


def estimate_profile(v, p_grid, m, cfg=None, polish=True, xtol=None, map_fn=map):
    """Minimize f(., v) over the centers in ``p_grid`` and polish by golden section.

    ``p_grid`` is an array of chart points (k, n). The polish runs one pass of
    bounded golden-section search along each coordinate within one grid
    spacing of the best grid point. ``map_fn`` may be a parallel map.
    """
    cfg = cfg or SolverConfig(compute_com=False)
    pts, axes = _grid_axes(p_grid)
    vals = np.array(list(map_fn(lambda q: solve_beta(q, v, m, cfg).area, pts)))
    j = int(np.argmin(vals))
    best, fbest = pts[j].copy(), float(vals[j])
    on_boundary = any(len(ax) > 1 and best[k] in (ax[0], ax[-1]) for k, ax in enumerate(axes))
    evals = len(pts)
    if polish:
        for k, ax in enumerate(axes):
            if len(ax) < 2:
                continue
            h = float(np.min(np.diff(ax)))
            tol = xtol if xtol is not None else 1e-3 * h

            def along(t, k=k):
                q = best.copy()
                q[k] = t
                return solve_beta(q, v, m, cfg).area

            r = minimize_scalar(along, bounds=(best[k] - h, best[k] + h), method="bounded", options={"xatol": tol})
            evals += int(r.nfev)
            if r.fun < fbest:
                best[k], fbest = float(r.x), float(r.fun)
    return ProfileEstimate(float(v), fbest, best, vals.tolist(), bool(on_boundary), evals)


def curvature_maximizer(m, p_grid):
    """Grid maximum of the scalar curvature refined by Nelder-Mead."""
    pts = np.asarray(p_grid, dtype=float)
    sc = np.array([scalar_curvature(m, q) for q in pts])
    j = int(np.argmax(sc))
    r = minimize(lambda q: -scalar_curvature(m, q), pts[j], method="Nelder-Mead",
                 options={"xatol": 1e-6, "fatol": 1e-12})
    if -r.fun >= sc[j]:
        return r.x, float(-r.fun)
    return pts[j], float(sc[j])


@dataclass
class ExpansionCheck:
    S: float
    maximizer: list
    expected: float
    fit: ExpansionFit
    relative_error: float
    estimates: list = field(default_factory=list)

    def to_dict(self):
        d = dict(self.__dict__)
        d["fit"] = self.fit.to_dict()
        d["estimates"] = [e.to_dict() for e in self.estimates]
        return d


def profile_expansion_check(m, p_grid, v_grid, cfg=None, polish=True, map_fn=map):
    """Compare the fitted profile coefficient with -S / (2 n (n + 2)), S = max Sc."""
    n = m.dimension
    q, S = curvature_maximizer(m, p_grid)
    ests = [estimate_profile(v, p_grid, m, cfg, polish=polish, map_fn=map_fn) for v in v_grid]
    fit = fit_expansion([e.volume for e in ests], [e.value for e in ests], n)
    expected = -S / (2 * n * (n + 2))
    rel = abs(fit.a_p - expected) / abs(expected) if expected else abs(fit.a_p)
    return ExpansionCheck(S, np.asarray(q).tolist(), expected, fit, float(rel), ests)


# -- inequality and regularity checks --------------------------------------------------

@dataclass
class CheckReport:
    name: str
    passed: bool
    details: dict

    def to_dict(self):
        return {"name": self.name, "passed": self.passed, **self.details}


def berard_meyer_check(samples, delta, dimension=None):
    """Check f >= delta c_n v^((n-1)/n) and that the ratio tends to 1 as v -> 0."""
    if not 0 < delta < 1:
        raise DomainError("delta must lie in (0, 1)")
    good = sorted((s for s in samples if s.converged), key=lambda s: s.volume)
    n = dimension or len(np.atleast_1d(good[0].center))
    v = np.array([s.volume for s in good])
    ratio = np.array([s.area for s in good]) / euclidean_profile(v, n)
    offending = [{"volume": float(vi), "ratio": float(ri)} for vi, ri in zip(v, ratio) if ri < delta]
    dev = np.abs(ratio - 1.0)
    trend = bool(dev[0] <= dev[-1] + 1e-12) if len(dev) > 1 else True
    return CheckReport(
        "berard_meyer",
        not offending,
        {"delta": delta, "inf_ratio": float(ratio.min()), "ratios": ratio.tolist(), "volumes": v.tolist(),
         "ratio_tends_to_one": trend, "offending": offending},
    )


def psi_c1_check(p, v_grid, m, cfg=None, max_spread=1.1, samples=None):
    """Slopes of psi(v) = f(p, v)^(n/(n-1)): positive, bounded and nearly constant."""
    n = m.dimension
    if samples is None:
        samples = sweep_v(p, v_grid, m, cfg)
    good = [s for s in samples if s.converged]
    v = np.array([s.volume for s in good])
    psi = np.array([s.area for s in good]) ** (n / (n - 1))
    slopes = np.diff(psi) / np.diff(v)
    spread = float(slopes.max() / slopes.min()) if np.all(slopes > 0) else float("inf")
    return CheckReport(
        "psi_c1",
        bool(np.all(slopes > 0) and spread < max_spread),
        {"C": float(np.max(np.abs(slopes))), "spread": spread, "slopes": slopes.tolist(),
         "midpoints": (0.5 * (v[1:] + v[:-1])).tolist(), "psi": psi.tolist()},
    )


def continuity_scan(volumes, values, dimension, w_grid=None, tol=1e-12):
    """Check |I(v + w) - I(v)| <= c_n w^((n-1)/n) over pairs of profile samples.

    With ``w_grid`` given, only pairs whose gap matches a listed w (to 1e-9
    relative) are checked; otherwise every ordered pair is.
    """
    v = np.asarray(volumes, dtype=float)
    I = np.asarray(values, dtype=float)
    c = isoperimetric_constant(dimension)
    worst, checked, violations = np.inf, 0, []
    for i in range(len(v)):
        for j in range(len(v)):
            w = v[j] - v[i]
            if w < 0:
                continue
            if w_grid is not None and not any(abs(w - wg) <= 1e-9 * max(wg, 1e-300) or w == wg for wg in w_grid):
                continue
            bound = c * w ** ((dimension - 1) / dimension)
            margin = bound + tol - abs(I[j] - I[i])
            checked += 1
            worst = min(worst, margin)
            if margin < 0:
                violations.append({"v": float(v[i]), "w": float(w), "delta": float(I[j] - I[i]), "bound": float(bound)})
    return CheckReport("continuity", not violations,
                       {"pairs": checked, "min_margin": float(worst), "violations": violations})
