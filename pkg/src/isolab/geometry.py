"""Riemannian primitives on single-chart conformal metrics.

Every metric handled here has the form ``g = exp(2 phi) * delta`` on a ball
of chart coordinates. Model spaces of constant curvature ``K`` use the
stereographic factor ``phi = -log(1 + K |x|^2 / 4)`` with analytic
derivatives; user charts supply ``phi`` as an expression string and are
differentiated by central finite differences.

Tangent vectors are stored by their coordinate components.
"""
from dataclasses import dataclass, field
import math

import numpy as np

from .errors import ConvergenceError, DomainError, RangeError
from .expr import Expression


@dataclass(frozen=True)
class ChartMetric:
    """A coordinate ball of radius ``chart_radius`` carrying ``exp(2 phi) delta``."""

    dimension: int
    kind: str
    curvature: float = 0.0
    phi_expr: Expression | None = None
    chart_radius: float = 1.0
    fd_step: float | None = None
    steps_per_unit: int = 256
    min_steps: int = 32
    injectivity_bound: float | None = None
    name: str = ""

    def __post_init__(self):
        if self.dimension not in (2, 3):
            raise DomainError("dimension must be 2 or 3", dimension=self.dimension)
        if self.kind not in ("model", "conformal"):
            raise DomainError(f"unknown metric kind {self.kind!r}")
        if self.kind == "conformal" and self.phi_expr is None:
            raise DomainError("conformal chart needs a conformal factor")
        if self.kind == "model" and self.curvature < 0:
            if self.chart_radius >= 2.0 / math.sqrt(-self.curvature):
                raise DomainError("hyperbolic chart radius must stay inside the Poincare ball")

    # -- constructors -----------------------------------------------------

    @classmethod
    def model(cls, dimension, curvature, chart_radius=None, **kw):
        K = float(curvature)
        if chart_radius is None:
            if K > 0:
                chart_radius = 4.0 / math.sqrt(K)
            elif K < 0:
                chart_radius = 1.8 / math.sqrt(-K)
            else:
                chart_radius = 4.0
        name = kw.pop("name", {1: "sphere", 0: "euclidean", -1: "hyperbolic"}.get(int(np.sign(K)), "model"))
        return cls(dimension, "model", curvature=K, chart_radius=float(chart_radius), name=name, **kw)

    @classmethod
    def euclidean(cls, dimension=2, **kw):
        return cls.model(dimension, 0.0, **kw)

    @classmethod
    def sphere(cls, dimension=2, **kw):
        return cls.model(dimension, 1.0, **kw)

    @classmethod
    def hyperbolic(cls, dimension=2, **kw):
        return cls.model(dimension, -1.0, **kw)

    @classmethod
    def conformal(cls, phi, dimension=2, chart_radius=1.0, fd_step=None, **kw):
        expr = phi if isinstance(phi, Expression) else Expression(phi, dimension)
        kw.setdefault("name", expr.text)
        return cls(dimension, "conformal", phi_expr=expr, chart_radius=float(chart_radius), fd_step=fd_step, **kw)

    # -- pointwise data ---------------------------------------------------

    @property
    def h_fd(self):
        return self.fd_step if self.fd_step is not None else 1e-4 * self.chart_radius

    def check_inside(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.dimension:
            raise DomainError(f"expected {self.dimension} coordinates, got shape {x.shape}")
        r = np.linalg.norm(x, axis=-1)
        if np.any(~np.isfinite(r)) or np.any(r >= self.chart_radius):
            raise DomainError("point outside chart", radius=float(np.max(r)), chart_radius=self.chart_radius)
        return x

    def phi(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "model":
            return -np.log1p(0.25 * self.curvature * np.sum(x * x, axis=-1))
        return self.phi_expr(x)

    def grad_phi(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "model":
            s = 1.0 + 0.25 * self.curvature * np.sum(x * x, axis=-1)
            return -0.5 * self.curvature * x / s[..., None]
        h = self.h_fd
        out = np.empty_like(x)
        for k in range(self.dimension):
            e = np.zeros(self.dimension)
            e[k] = h
            out[..., k] = (self.phi_expr(x + e) - self.phi_expr(x - e)) / (2 * h)
        return out

    def conformal_factor(self, x):
        """exp(phi): the ratio between metric length and coordinate length."""
        return np.exp(self.phi(x))

    def metric(self, x):
        x = np.asarray(x, dtype=float)
        lam = np.exp(2.0 * self.phi(x))
        return lam[..., None, None] * np.eye(self.dimension)

    def norm(self, x, w):
        return self.conformal_factor(x) * np.linalg.norm(np.asarray(w, dtype=float), axis=-1)

    def inner(self, x, a, b):
        return np.exp(2.0 * self.phi(x)) * np.sum(np.asarray(a) * np.asarray(b), axis=-1)

    def christoffel(self, x):
        """Gamma[..., k, i, j] = d_i phi delta_kj + d_j phi delta_ki - d_k phi delta_ij."""
        d = self.grad_phi(x)
        eye = np.eye(self.dimension)
        return (
            d[..., None, :, None] * eye[:, None, :]
            + d[..., None, None, :] * eye[:, :, None]
            - d[..., :, None, None] * eye[None, :, :]
        )

    def geodesic_acceleration(self, x, v):
        d = self.grad_phi(x)
        dv = np.sum(d * v, axis=-1, keepdims=True)
        vv = np.sum(v * v, axis=-1, keepdims=True)
        return -2.0 * dv * v + vv * d

    def steps_for(self, length):
        """RK4 step count for a geodesic of metric length ``length``."""
        length = np.asarray(length, dtype=float)
        n = np.ceil(self.steps_per_unit * length).astype(int)
        return np.maximum(n, self.min_steps)

    def to_dict(self):
        d = {"dimension": self.dimension, "kind": self.kind, "chart_radius": self.chart_radius, "name": self.name}
        if self.kind == "model":
            d["curvature"] = self.curvature
        else:
            d["phi"] = self.phi_expr.text
            d["fd_step"] = self.h_fd
        return d


@dataclass(frozen=True)
class ManifoldPoint:
    coords: np.ndarray
    chart: str = "chart0"

    def __post_init__(self):
        object.__setattr__(self, "coords", np.asarray(self.coords, dtype=float))


@dataclass(frozen=True)
class TangentVec:
    base: ManifoldPoint
    components: np.ndarray = field(default=None)

    def __post_init__(self):
        object.__setattr__(self, "components", np.asarray(self.components, dtype=float))

    def norm(self, m):
        return float(m.norm(self.base.coords, self.components))


def _coords(p):
    if isinstance(p, ManifoldPoint):
        return p.coords
    if isinstance(p, TangentVec):
        return p.components
    return np.asarray(p, dtype=float)


# -- curvature ------------------------------------------------------------

def _christoffel_fd(m, x, h):
    n = m.dimension
    ginv = np.linalg.inv(m.metric(x))
    dg = np.empty((n, n, n))  # dg[l, i, j] = d_l g_ij
    for l in range(n):
        e = np.zeros(n)
        e[l] = h
        dg[l] = (m.metric(x + e) - m.metric(x - e)) / (2 * h)
    # Gamma^k_ij = 1/2 g^kl (d_i g_jl + d_j g_il - d_l g_ij)
    return 0.5 * np.einsum("kl,ijl->kij", ginv, _lower_sym(dg))


def _lower_sym(dg):
    # returns T[i, j, l] = d_i g_jl + d_j g_il - d_l g_ij
    return np.einsum("ijl->ijl", dg) + np.einsum("jil->ijl", dg) - np.einsum("lij->ijl", dg)


def _check_spd(g):
    w = np.linalg.eigvalsh(g)
    if np.any(w <= 0) or not np.all(np.isfinite(w)):
        raise DomainError("metric is not positive definite", eigenvalues=w.tolist())


def scalar_curvature(m, p, step=None):
    """Scalar curvature at ``p``.

    Model spaces use the closed form n(n-1)K. Conformal charts assemble the
    Christoffel symbols from central differences of the metric, differentiate
    them once more by central differences, and contract the Riemann tensor.
    """
    x = m.check_inside(_coords(p))
    n = m.dimension
    _check_spd(m.metric(x))
    if m.kind == "model" and step is None:
        return n * (n - 1) * m.curvature
    h = m.h_fd if step is None else float(step)
    gam = _christoffel_fd(m, x, h)
    dgam = np.empty((n, n, n, n))  # dgam[m_, k, i, j] = d_m Gamma^k_ij
    for a in range(n):
        e = np.zeros(n)
        e[a] = h
        dgam[a] = (_christoffel_fd(m, x + e, h) - _christoffel_fd(m, x - e, h)) / (2 * h)
    # R^r_{s mu nu} = d_mu G^r_{nu s} - d_nu G^r_{mu s} + G^r_{mu l} G^l_{nu s} - G^r_{nu l} G^l_{mu s}
    riem = (
        np.einsum("mrns->rsmn", dgam)
        - np.einsum("nrms->rsmn", dgam)
        + np.einsum("rml,lns->rsmn", gam, gam)
        - np.einsum("rnl,lms->rsmn", gam, gam)
    )
    ricci = np.einsum("rsrn->sn", riem)
    return float(np.einsum("sn,sn->", np.linalg.inv(m.metric(x)), ricci))


# -- geodesics --------------------------------------------------------------

def integrate_geodesics(m, x0, v0, steps, record=False):
    """Classical RK4 for the geodesic ODE over unit parameter time.

    ``x0``, ``v0`` have shape (k, n); ``steps`` is an int or a length-k array.
    Returns final positions and velocities, plus the full trajectories
    (steps+1, k, n) when ``record`` is set (requires a uniform step count).
    Raises RangeError if any trajectory leaves the chart.
    """
    x = np.array(x0, dtype=float, ndmin=2)
    v = np.array(v0, dtype=float, ndmin=2)
    steps = np.broadcast_to(np.asarray(steps, dtype=int), x.shape[:1])
    nmax = int(steps.max())
    uniform = bool(np.all(steps == nmax))
    if record and not uniform:
        raise ValueError("recording trajectories needs a uniform step count")
    h = (1.0 / steps)[:, None]
    acc = m.geodesic_acceleration
    rho2 = m.chart_radius ** 2
    xs = [x.copy()] if record else None
    vs = [v.copy()] if record else None
    for s in range(nmax):
        if uniform:
            xa, va, ha = x, v, h
        else:
            act = s < steps
            xa, va, ha = x[act], v[act], h[act]
        k1x, k1v = va, acc(xa, va)
        k2x, k2v = va + 0.5 * ha * k1v, acc(xa + 0.5 * ha * k1x, va + 0.5 * ha * k1v)
        k3x, k3v = va + 0.5 * ha * k2v, acc(xa + 0.5 * ha * k2x, va + 0.5 * ha * k2v)
        k4x, k4v = va + ha * k3v, acc(xa + ha * k3x, va + ha * k3v)
        xn = xa + ha / 6.0 * (k1x + 2 * k2x + 2 * k3x + k4x)
        vn = va + ha / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v)
        if uniform:
            x, v = xn, vn
        else:
            x[act], v[act] = xn, vn
        r2 = np.sum(x * x, axis=-1)
        if not np.all(r2 < rho2):
            bad = int(np.argmax(~(r2 < rho2)))
            raise RangeError("geodesic left the chart", exit_time=float((s + 1) / steps[bad]), index=bad)
        if record:
            xs.append(x.copy())
            vs.append(v.copy())
    if record:
        return x, v, np.array(xs), np.array(vs)
    return x, v


def exp_map(m, p, w):
    """Riemannian exponential ``exp_p(w)`` by fixed-step RK4."""
    x = m.check_inside(_coords(p))
    w = np.asarray(_coords(w), dtype=float)
    length = float(m.norm(x, w))
    if length > m.chart_radius / 2 * (1 + 1e-9):
        raise DomainError("tangent vector too long for the chart", length=length, limit=m.chart_radius / 2)
    xe, _ = integrate_geodesics(m, x[None], w[None], m.steps_for(length))
    return xe[0]


def exp_map_batch(m, p, w):
    """Vectorised exp: ``p`` of shape (n,) or (k, n), ``w`` of shape (k, n)."""
    w = np.array(w, dtype=float, ndmin=2)
    x = np.broadcast_to(np.asarray(p, dtype=float), w.shape)
    steps = m.steps_for(m.norm(x, w))
    return integrate_geodesics(m, x, w, steps)[0]


def log_map_batch(m, p, q, tol=1e-12, max_iter=30):
    """Shooting inverse of exp_map_batch by damped Newton.

    The Jacobian of exp is taken by central differences of the shooting map.
    Returns tangent components of shape (k, n).
    """
    q = np.array(q, dtype=float, ndmin=2)
    x = np.array(np.broadcast_to(np.asarray(p, dtype=float), q.shape))
    k, n = q.shape
    # initial guess: coordinate difference (exact for Euclidean, first order otherwise)
    w = q - x
    scale = np.maximum(np.linalg.norm(w, axis=-1), 1e-300)
    mismatch = exp_map_batch(m, x, w) - q
    err = np.linalg.norm(mismatch, axis=-1)
    for it in range(max_iter):
        todo = err > tol * np.maximum(1.0, np.linalg.norm(q, axis=-1))
        if not np.any(todo):
            return w
        idx = np.nonzero(todo)[0]
        wi, xi = w[idx], x[idx]
        steps = m.steps_for(m.norm(xi, wi) * 1.0001)
        d = 1e-6 * np.maximum(np.linalg.norm(wi, axis=-1), 1e-3)
        J = np.empty((len(idx), n, n))
        for a in range(n):
            e = np.zeros(n)
            e[a] = 1.0
            dw = d[:, None] * e
            plus = integrate_geodesics(m, xi, wi + dw, steps)[0]
            minus = integrate_geodesics(m, xi, wi - dw, steps)[0]
            J[:, :, a] = (plus - minus) / (2 * d[:, None])
        delta = np.linalg.solve(J, -mismatch[idx][..., None])[..., 0]
        # exp_map itself caps lengths at half the chart radius; shooting may
        # overshoot that while converging, leaving the chart is what matters
        lim = m.chart_radius
        t = np.ones(len(idx))
        trial, mm, new_err = wi, mismatch[idx] + q[idx], err[idx]
        for _ in range(30):
            trial = wi + t[:, None] * delta
            ok_len = m.norm(xi, trial) <= lim
            try:
                mm = exp_map_batch(m, xi, np.where(ok_len[:, None], trial, wi))
            except RangeError:
                t *= 0.5
                continue
            new_err = np.linalg.norm(mm - q[idx], axis=-1)
            worse = (new_err > err[idx]) | ~ok_len
            if not np.any(worse) or np.all(t < 1e-8):
                break
            t = np.where(worse, 0.5 * t, t)
        keep = ~((new_err > err[idx]) | ~ok_len) if trial is not wi else np.zeros(len(idx), bool)
        sel = idx[keep]
        w[sel] = trial[keep]
        mismatch[sel] = mm[keep] - q[sel]
        err[sel] = new_err[keep]
        if not np.any(keep):
            break
    raise ConvergenceError("log_map shooting did not converge", mismatch=float(err.max()), iterations=max_iter)


def log_map(m, p, q):
    x = m.check_inside(_coords(p))
    y = m.check_inside(_coords(q))
    if np.array_equal(x, y):
        return np.zeros(m.dimension)
    return log_map_batch(m, x, y[None])[0]


def distance(m, p, q):
    x = _coords(p)
    return float(m.norm(x, log_map(m, x, q)))


def model_distance(m, p, q):
    """Closed-form distance for model spaces (vectorised over q)."""
    if m.kind != "model":
        raise DomainError("closed-form distance only exists for model spaces")
    x = np.asarray(_coords(p), dtype=float)
    y = np.asarray(_coords(q), dtype=float)
    K = m.curvature
    if K == 0:
        return np.linalg.norm(y - x, axis=-1)
    R = 1.0 / math.sqrt(abs(K))
    a, b = x / 2, y / 2  # metric (2R^2/(R^2 +- |a|^2))^2 da^2
    na, nb = np.sum(a * a, axis=-1), np.sum(b * b, axis=-1)
    if K > 0:
        ea = np.concatenate([2 * R * a, [R * R - na]]) / (R * R + na)
        eb = np.concatenate([2 * R * b, (R * R - nb)[..., None]], axis=-1) / (R * R + nb)[..., None]
        return 2 * R * np.arcsin(np.clip(np.linalg.norm(ea - eb, axis=-1) / 2, 0.0, 1.0))
    ea = np.concatenate([2 * R * a, [R * R + na]]) / (R * R - na)
    eb = np.concatenate([2 * R * b, (R * R + nb)[..., None]], axis=-1) / (R * R - nb)[..., None]
    # hyperbolic chord in the Minkowski sense keeps precision at short range
    diff = ea - eb
    chord2 = np.sum(diff[..., :-1] ** 2, axis=-1) - diff[..., -1] ** 2
    return 2 * R * np.arcsinh(np.sqrt(np.maximum(chord2, 0.0)) / 2)


# -- center of mass -----------------------------------------------------------

def karcher_mean(samples, weights, m, x0=None, tol=1e-10, max_iter=200):
    """Weighted Riemannian center of mass by geodesic gradient descent.

    Iterates ``x <- exp_x(tau * sum_i w_i log_x(s_i))`` with tau = 1, halving
    tau whenever the energy 1/2 sum w_i d(x, s_i)^2 would increase.
    """
    s = np.array([_coords(q) for q in samples], dtype=float) if not isinstance(samples, np.ndarray) else np.asarray(samples, dtype=float)
    s = m.check_inside(s)
    wts = np.asarray(weights, dtype=float)
    if np.any(wts < 0) or abs(wts.sum() - 1.0) > 1e-9:
        raise DomainError("weights must be nonnegative and sum to 1")
    x = np.asarray(x0, dtype=float) if x0 is not None else s[np.argmax(wts)].copy()

    def energy_and_grad(pt):
        logs = log_map_batch(m, pt, s)
        lam2 = np.exp(2.0 * m.phi(pt))
        e = 0.5 * float(np.sum(wts * lam2 * np.sum(logs * logs, axis=-1)))
        return e, wts @ logs

    energy, grad = energy_and_grad(x)
    tau = 1.0
    for it in range(max_iter):
        gnorm = float(m.norm(x, grad))
        if gnorm < tol:
            return x
        while True:
            cand = exp_map(m, x, tau * grad)
            e_new, g_new = energy_and_grad(cand)
            if e_new <= energy or tau < 1e-8:
                break
            tau *= 0.5
        step = float(m.norm(x, tau * grad))
        x, energy, grad = cand, e_new, g_new
        if step < tol:
            gnorm = float(m.norm(x, grad))
            if gnorm < 1e-8:
                return x
    raise ConvergenceError("karcher mean did not converge", gradient_norm=float(m.norm(x, grad)))


# -- coverings ---------------------------------------------------------------

@dataclass
class CoveringReport:
    centers: np.ndarray
    eps: float
    cover_radius: float
    lebesgue_number: float
    multiplicity: int
    n_probes: int
    seed: int

    @property
    def passed(self):
        return self.lebesgue_number >= self.eps

    def to_dict(self):
        return {
            "centers": self.centers.tolist(),
            "eps": self.eps,
            "cover_radius": self.cover_radius,
            "lebesgue_number": self.lebesgue_number,
            "multiplicity": self.multiplicity,
            "n_probes": self.n_probes,
            "seed": self.seed,
            "passed": self.passed,
        }


def _distance_fn(m):
    if m.kind == "model":
        return lambda c, pts: model_distance(m, c, pts)
    return lambda c, pts: m.norm(np.broadcast_to(c, pts.shape), log_map_batch(m, c, pts))


def _region_points(m, shape, size, spacing=None, count=None, rng=None, center=None):
    n = m.dimension
    center = np.zeros(n) if center is None else np.asarray(center, dtype=float)
    if shape == "square":
        half = size / 2
        box = half
    elif shape == "ball":
        # coordinate radius enclosing the geodesic ball; refined below by distance
        box = size
        while True:
            probe = center + np.eye(n)[0] * box
            if np.linalg.norm(probe) >= m.chart_radius * 0.999:
                box = m.chart_radius * 0.999 - np.linalg.norm(center)
                break
            if float(_distance_fn(m)(center, probe[None])[0]) > size:
                break
            box *= 1.5
    else:
        raise DomainError(f"unknown region shape {shape!r}")
    if spacing is not None:
        ticks = np.arange(-box, box + 0.5 * spacing, spacing)
        pts = np.stack(np.meshgrid(*([ticks] * n), indexing="ij"), axis=-1).reshape(-1, n) + center
    else:
        pts = center + rng.uniform(-box, box, size=(count * (4 if shape == "ball" else 1), n))
    if shape == "square":
        keep = np.all(np.abs(pts - center) <= half + 1e-12, axis=-1)
    else:
        keep = _distance_fn(m)(center, pts) <= size
    pts = pts[keep]
    if count is not None:
        if len(pts) < count:
            return _region_points(m, shape, size, count=2 * count, rng=rng, center=center)[:count]
        pts = pts[:count]
    return pts


def build_covering(m, radius, eps, shape="ball", n_probes=10_000, seed=0, center=None):
    """Greedy maximal separated net and its 3*eps ball cover over a region.

    The region is a geodesic ball of the given radius about ``center``
    (``shape="ball"``) or a coordinate square/cube of side ``radius``
    (``shape="square"``). Centers are inserted farthest-point first until
    every candidate lies within ``2*eps - delta`` of a center, where ``delta``
    is the candidate-lattice covering radius; the balls of radius ``3*eps``
    about them then have Lebesgue number ``eps``, which is measured on random
    probes together with the multiplicity (the largest number of cover balls
    meeting one probe ball of radius ``eps``).
    """
    if m.injectivity_bound is not None and eps >= m.injectivity_bound / 2:
        raise DomainError("eps must be below half the injectivity bound", eps=eps)
    dist = _distance_fn(m)
    spacing = eps / 4
    cand = _region_points(m, shape, radius, spacing=spacing, center=center)
    m.check_inside(cand)
    delta = spacing * math.sqrt(m.dimension) / 2 * float(np.max(m.conformal_factor(cand)))
    threshold = 2 * eps - delta
    centers = [cand[0]]
    dmin = dist(cand[0], cand)
    while True:
        j = int(np.argmax(dmin))
        if dmin[j] < threshold:
            break
        centers.append(cand[j])
        dmin = np.minimum(dmin, dist(cand[j], cand))
    centers = np.array(centers)
    rng = np.random.default_rng(seed)
    probes = _region_points(m, shape, radius, count=n_probes, rng=rng, center=center)
    dmat = np.stack([dist(c, probes) for c in centers], axis=1)
    cover = 3 * eps
    lebesgue = float(np.min(np.max(cover - dmat, axis=1)))
    multiplicity = int(np.max(np.sum(dmat < cover + eps, axis=1)))
    return CoveringReport(centers, eps, cover, lebesgue, multiplicity, len(probes), seed)
