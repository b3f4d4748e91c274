"""Pseudo-bubbles: radial graphs whose mean curvature is constant modulo
degree-1 spherical harmonics, at prescribed enclosed volume.

The solve is a Newton iteration on a Galerkin system. Unknowns are the
coefficients of ``u`` on the orthonormal modes of degree 0 and 2..L (the
degree-1 modes, which only translate the graph to first order, are gauged
to zero) plus the curvature constant ``lam``; equations are the projections
of ``H(u) - lam`` on the same modes and the volume constraint.
"""
from dataclasses import dataclass, field, replace
import itertools
import math

import numpy as np

from .errors import ConvergenceError, DomainError, IsolabError
from .geometry import _coords, karcher_mean, log_map, model_distance
from .sphere import (
    SPHERE_AREA,
    holder_surrogate,
    QuadratureRule,
    SphereFunction,
    graph_batch,
    graph_steps,
    mode_matrix,
)

UNIT_BALL_VOLUME = {2: math.pi, 3: 4 * math.pi / 3}


def euclidean_radius(v, n):
    return (v / UNIT_BALL_VOLUME[n]) ** (1.0 / n)


@dataclass(frozen=True)
class SolverConfig:
    tol: float = 1e-10
    max_iter: int = 40
    fd_step: float = 1e-6
    gauge: bool = True
    bandwidth: int | None = None
    n_nodes: int = 128
    grid: tuple = (32, 64)
    volume_cap: float | None = None
    compute_com: bool = True
    recenter_rounds: int = 0
    max_shape_deviation: float = 0.5

    def __post_init__(self):
        if not self.tol > 0:
            raise DomainError("solver tolerance must be positive")

    def bandwidth_for(self, n):
        if self.bandwidth is not None:
            return self.bandwidth
        return 16 if n == 2 else 4

    def rule_for(self, n):
        return QuadratureRule.circle(self.n_nodes) if n == 2 else QuadratureRule.sphere_grid(*self.grid)


@dataclass
class PseudoBubble:
    center: np.ndarray
    u: SphereFunction
    volume: float
    area: float
    curvature: float
    residual: float
    com_offset: float | None
    iterations: int = 0
    volume_error: float = 0.0
    trace: list = field(default_factory=list)
    jacobian: np.ndarray | None = field(default=None, repr=False)

    @property
    def mean_radius(self):
        rule = self.u.default_rule()
        return float(rule.mean(self.u.values(rule)))

    def to_dict(self):
        return {
            "center": np.asarray(self.center).tolist(),
            "volume": self.volume,
            "area": self.area,
            "lambda": self.curvature,
            "residual": self.residual,
            "com_offset": self.com_offset,
            "iterations": self.iterations,
            "volume_error": self.volume_error,
            "u": self.u.to_dict(),
            "c2alpha_surrogate": holder_surrogate(self.u)["norm"],
        }

    def summary(self):
        off = "n/a" if self.com_offset is None else f"{self.com_offset:.3e}"
        return (f"center={np.round(np.asarray(self.center), 6).tolist()} v={self.volume:.6g} "
                f"A={self.area:.12g} lambda={self.curvature:.10g} residual={self.residual:.2e} com_offset={off}")


def volume_cap(m, cfg=None):
    if cfg is not None and cfg.volume_cap is not None:
        return cfg.volume_cap
    return UNIT_BALL_VOLUME[m.dimension] * (m.chart_radius / 8) ** m.dimension


def _oscillating_values(H, rule, n):
    """(id - P0 - P1) applied to node values (last axis)."""
    w = rule.weights
    mean = (H @ w) / SPHERE_AREA[n - 1]
    P1 = ((H * w) @ rule.nodes) * (n / SPHERE_AREA[n - 1])
    return H - mean[..., None] - P1 @ rule.nodes.T


def residual_values(p, u, m, rule=None):
    rule = rule or u.default_rule()
    H = graph_batch(m, p, u.values(rule)[None], rule, volume=False)["H"][0]
    return _oscillating_values(H, rule, m.dimension)


def residual(p, u, m, rule=None):
    """(id - P0 - P1) H(u): vanishes exactly on pseudo-bubbles."""
    rule = rule or u.default_rule()
    return SphereFunction.from_samples(u.dimension, residual_values(p, u, m, rule), rule)


def residual_norm(p, u, m, rule=None):
    """RMS of the oscillating part of H relative to the mean curvature."""
    rule = rule or u.default_rule()
    H = graph_batch(m, p, u.values(rule)[None], rule, volume=False)["H"][0]
    osc = _oscillating_values(H, rule, m.dimension)
    return float(np.sqrt(rule.mean(osc ** 2)) / abs(rule.mean(H)))


class _System:
    """Galerkin system for fixed center, volume, quadrature and step count."""

    def __init__(self, m, p, v, cfg):
        self.m, self.p, self.v, self.cfg = m, p, v, cfg
        n = m.dimension
        self.n = n
        self.rule = cfg.rule_for(n)
        L = cfg.bandwidth_for(n)
        degrees = [0] + list(range(2, L + 1)) if cfg.gauge else list(range(L + 1))
        self.basis, self.labels = mode_matrix(self.rule, L, degrees)
        self.r0 = euclidean_radius(v, n)
        self.area_s = SPHERE_AREA[n - 1]
        self.steps = graph_steps(m, 2.0 * self.r0)
        self.test = self.basis * self.rule.weights[:, None]  # Galerkin projections

    def u_nodes(self, c):
        return self.basis @ c

    def initial(self):
        c = np.zeros(self.basis.shape[1])
        c[0] = self.r0 * math.sqrt(self.area_s)
        return np.concatenate([c / self.r0, [(self.n - 1.0)]])

    def geometry(self, Z):
        C = Z[:, :-1] * self.r0
        U = C @ self.basis.T
        if np.any(U <= 0):
            raise DomainError("radial function became nonpositive during the solve")
        return graph_batch(self.m, self.p, U, self.rule, steps=self.steps)

    def equations(self, Z, geo):
        lam = Z[:, -1] / self.r0
        Fh = self.r0 * ((geo["H"] - lam[:, None]) @ self.test)
        Fv = (geo["volume"] - self.v) / self.v
        return np.concatenate([Fh, Fv[:, None]], axis=1)

    def jacobian(self, z, F0):
        k = z.size - 1
        d = self.cfg.fd_step
        Z = np.repeat(z[None], k, axis=0)
        Z[np.arange(k), np.arange(k)] += d
        geo = self.geometry(Z)
        J = np.empty((k + 1, k + 1))
        J[:, :k] = ((self.equations(Z, geo) - F0[None]) / d).T
        # d/d(lam r0) of r0 * int (H - lam) psi_j = -int psi_j
        J[:, k] = 0.0
        J[:k, k] = -self.test.sum(axis=0)
        return J


def _line_search(sysm, z, step, fnorm, cfg, halvings=12):
    """Backtrack until the equation norm drops; full steps are taken at roundoff level."""
    t = 1.0
    for _ in range(halvings):
        zt = z + t * step
        try:
            geo = sysm.geometry(zt[None])
        except DomainError:
            t *= 0.5
            continue
        F = sysm.equations(zt[None], geo)[0]
        if np.all(np.isfinite(F)) and (np.linalg.norm(F) < fnorm or fnorm < 1e-11):
            return zt, geo, F
        t *= 0.5
    return None


def solve_beta(p, v, m, cfg=None, initial=None, jacobian=None):
    """Pseudo-bubble about ``p`` enclosing volume ``v``.

    ``initial`` optionally gives a starting radial function (SphereFunction);
    the default start is the constant Euclidean radius of volume ``v``.
    ``jacobian`` may carry the dimensionless Jacobian of a nearby solve
    (``PseudoBubble.jacobian``); it is refreshed whenever convergence stalls.
    """
    cfg = cfg or SolverConfig()
    x0 = m.check_inside(_coords(p))
    if not v > 0:
        raise DomainError("volume must be positive", volume=v)
    cap = volume_cap(m, cfg)
    if v > cap:
        raise DomainError("volume above the small-volume cap for this chart", volume=v, cap=cap)
    sysm = _System(m, x0, v, cfg)
    z = sysm.initial()
    if initial is not None:
        vals = initial.values(sysm.rule)
        c = np.linalg.lstsq(sysm.basis, vals, rcond=None)[0]
        z[:-1] = c / sysm.r0
    trace = []
    geo = sysm.geometry(z[None])
    F = sysm.equations(z[None], geo)[0]
    J = jacobian if jacobian is not None and jacobian.shape == (z.size, z.size) else None
    fnorm_prev = np.inf
    for it in range(cfg.max_iter + 1):
        fnorm = float(np.linalg.norm(F))
        osc = _oscillating_values(geo["H"][0], sysm.rule, sysm.n)
        lam = float(sysm.rule.mean(geo["H"][0]))
        res = float(np.sqrt(sysm.rule.mean(osc ** 2)) / abs(lam))
        verr = abs(float(geo["volume"][0]) - v) / v
        trace.append({"iteration": it, "equations": fnorm, "residual": res, "volume_error": verr})
        if res < cfg.tol and verr < 1e-12:
            break
        if it == cfg.max_iter:
            raise ConvergenceError("pseudo-bubble Newton iteration did not converge", trace=trace)
        fresh = J is None or fnorm > 0.25 * fnorm_prev
        if fresh:
            J = sysm.jacobian(z, F)
        fnorm_prev = fnorm
        while True:
            step = np.linalg.solve(J, -F)
            accepted = _line_search(sysm, z, step, fnorm, cfg)
            if accepted is not None or fresh:
                break
            J, fresh = sysm.jacobian(z, F), True
        if accepted is None:
            raise ConvergenceError("Newton line search failed", trace=trace)
        z, geo, F = accepted
        u_now = sysm.u_nodes(z[:-1] * sysm.r0)
        dev = float(np.max(np.abs(u_now / np.mean(u_now) - 1)))
        if dev > cfg.max_shape_deviation:
            raise ConvergenceError("Newton left the perturbative regime", shape_deviation=dev, trace=trace)
    u_vals = sysm.u_nodes(z[:-1] * sysm.r0)
    u = SphereFunction.from_samples(sysm.n, u_vals, sysm.rule, cfg.bandwidth_for(2) if sysm.n == 2 else None)
    pb = PseudoBubble(
        center=x0,
        u=u,
        volume=float(geo["volume"][0]),
        area=float(geo["area"][0]),
        curvature=lam,
        residual=res,
        com_offset=None,
        iterations=it,
        volume_error=verr,
        trace=trace,
    )
    pb.jacobian = J
    if cfg.compute_com:
        pb.com_offset = center_of_mass_offset(pb, m, geo=geo)
    return pb


def boundary_center_of_mass(pb, m, geo=None):
    """Karcher mean of the boundary's area measure."""
    if geo is None:
        rule = pb.u.default_rule()
        geo = graph_batch(m, pb.center, pb.u.values(rule)[None], rule, volume=False, curvature=False)
    X, dA = geo["X"][0], geo["dA"][0]
    return karcher_mean(X, dA / dA.sum(), m, x0=pb.center)


def center_of_mass_offset(pb, m, geo=None):
    q = boundary_center_of_mass(pb, m, geo)
    if m.kind == "model":
        return float(model_distance(m, pb.center, q[None])[0])
    return float(m.norm(pb.center, log_map(m, pb.center, q)))


def recentered_bubble(p, v, m, cfg=None, rounds=5, tol=1e-12):
    """Move the gauge center until the boundary's Karcher mean sits at ``p``."""
    cfg = cfg or SolverConfig()
    target = np.asarray(_coords(p), dtype=float)
    center = target.copy()
    pb = solve_beta(center, v, m, cfg)
    for _ in range(rounds):
        q = boundary_center_of_mass(pb, m)
        shift = target - q
        if np.linalg.norm(shift) < tol:
            break
        center = center + shift
        pb = solve_beta(center, v, m, cfg, initial=pb.u)
    pb.com_offset = float(np.linalg.norm(target - boundary_center_of_mass(pb, m)))
    return pb


def f_area(p, v, m, cfg=None):
    """Area of the pseudo-bubble about ``p`` enclosing ``v``."""
    cfg = cfg or SolverConfig(compute_com=False)
    return solve_beta(p, v, m, cfg).area


def _perturbed_initial(sysm, rng, amplitude):
    """Constant radius plus a smooth random shape of sup-norm ``amplitude * r0``.

    Coefficients decay like 1/l^2 so the start stays a mild perturbation.
    """
    c = np.zeros(sysm.basis.shape[1])
    c[0] = sysm.r0 * math.sqrt(sysm.area_s)
    k = c.size - 1
    if k:
        deg = np.array([lab[0] for lab in sysm.labels[1:]], dtype=float)
        g = rng.uniform(-1, 1, size=k) / deg ** 2
        pert = sysm.basis[:, 1:] @ g
        c[1:] = g * amplitude * sysm.r0 / max(np.max(np.abs(pert)), 1e-300)
    return SphereFunction.from_samples(sysm.n, sysm.basis @ c, sysm.rule, sysm.cfg.bandwidth_for(2) if sysm.n == 2 else None)


@dataclass
class UniquenessReport:
    trials: int
    converged: int
    max_deviation: float
    failures: list
    seed: int

    @property
    def all_converged(self):
        return self.converged == self.trials

    def passed(self, tol=1e-6):
        return self.all_converged and self.max_deviation < tol

    def to_dict(self):
        return {**self.__dict__, "all_converged": self.all_converged}


def verify_uniqueness(p, v, m, trials=10, cfg=None, seed=0, amplitude=0.2):
    """Re-solve from randomized starts and compare the converged graphs (sup norm)."""
    cfg = replace(cfg or SolverConfig(), compute_com=False)
    rng = np.random.default_rng(seed)
    sysm = _System(m, m.check_inside(_coords(p)), v, cfg)
    sols, failures = [], []
    for t in range(trials):
        start = _perturbed_initial(sysm, rng, amplitude) if t else None
        try:
            pb = solve_beta(p, v, m, cfg, initial=start)
        except IsolabError as exc:
            failures.append({"trial": t, "error": str(exc)})
            continue
        sols.append(pb.u.values(sysm.rule))
    dev = 0.0
    for a, b in itertools.combinations(sols, 2):
        dev = max(dev, float(np.max(np.abs(a - b))))
    return UniquenessReport(trials, len(sols), dev, failures, seed)


def _has_rotational_symmetry(m, p, samples=64, tol=1e-12):
    if m.kind == "model":
        return True
    x0 = np.asarray(_coords(p), dtype=float)
    if np.linalg.norm(x0) > 0:
        return False
    rng = np.random.default_rng(12345)
    n = m.dimension
    pts = rng.uniform(-0.5, 0.5, size=(samples, n)) * m.chart_radius
    Q, _ = np.linalg.qr(rng.normal(size=(n, n)))
    a, b = m.phi(pts), m.phi(pts @ Q.T)
    return bool(np.max(np.abs(a - b)) <= tol * max(1.0, np.max(np.abs(a))))


@dataclass
class SymmetryReport:
    applicable: bool
    energy: float | None
    note: str

    def to_dict(self):
        return dict(self.__dict__)


def symmetry_check(pb, m):
    """Energy of the non-constant part of ``u`` when rotations about the center are isometries."""
    if not _has_rotational_symmetry(m, pb.center):
        return SymmetryReport(False, None, "no stabilizer symmetry")
    u = pb.u
    if u.dimension == 2:
        energy = float(np.sum(u.data[1:] ** 2))
    else:
        rule = u.default_rule()
        vals = u.values(rule)
        energy = float(rule.mean((vals - rule.mean(vals)) ** 2))
    return SymmetryReport(True, energy, "rotations about the center are isometries")
