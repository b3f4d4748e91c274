"""Functions on the unit tangent sphere and radial graphs over it.

A radial graph is the hypersurface ``theta -> exp_p(u(theta) theta)`` for a
positive function ``u`` on the unit sphere of ``T_p M`` (a circle when
n = 2, a 2-sphere when n = 3). Its points are obtained by shooting one
geodesic per quadrature node with a common RK4 step count, so the discrete
embedding is a smooth function of the angles and can be differentiated
spectrally: FFT on the circle, and FFT on the double-Fourier extension of
the colatitude/longitude grid on the 2-sphere.
"""
from dataclasses import dataclass
import math

import numpy as np
from scipy.special import sph_harm_y

from .errors import DomainError, GeometryError, InputError
from .geometry import integrate_geodesics, _coords

SPHERE_AREA = {1: 2 * math.pi, 2: 4 * math.pi}


# -- quadrature --------------------------------------------------------------

@dataclass(frozen=True)
class QuadratureRule:
    """Nodes on S^(n-1) (unit vectors of R^n) with positive weights."""

    sphere_dim: int
    nodes: np.ndarray
    weights: np.ndarray
    shape: tuple
    angles: tuple

    @classmethod
    def circle(cls, n_nodes=128):
        t = 2 * np.pi * np.arange(n_nodes) / n_nodes
        nodes = np.stack([np.cos(t), np.sin(t)], axis=-1)
        return cls(1, nodes, np.full(n_nodes, 2 * np.pi / n_nodes), (n_nodes,), (t,))

    @classmethod
    def sphere_grid(cls, n_lat=32, n_lon=64):
        """Fejer (first rule) in colatitude times the trapezoid rule in longitude.

        Exact for spherical harmonics of degree < min(n_lat, n_lon / 2).
        """
        if n_lon % 2:
            raise InputError("longitude count must be even")
        th = (np.arange(n_lat) + 0.5) * np.pi / n_lat
        k = np.arange(1, n_lat // 2 + 1)
        wt = 2.0 / n_lat * (1 - 2 * np.sum(np.cos(2 * np.outer(th, k)) / (4 * k * k - 1), axis=1))
        ph = 2 * np.pi * np.arange(n_lon) / n_lon
        TH, PH = np.meshgrid(th, ph, indexing="ij")
        nodes = np.stack([np.sin(TH) * np.cos(PH), np.sin(TH) * np.sin(PH), np.cos(TH)], axis=-1)
        weights = np.outer(wt, np.full(n_lon, 2 * np.pi / n_lon))
        return cls(2, nodes.reshape(-1, 3), weights.ravel(), (n_lat, n_lon), (th, ph))

    @classmethod
    def default(cls, dimension):
        return cls.circle() if dimension == 2 else cls.sphere_grid()

    @property
    def dimension(self):
        return self.sphere_dim + 1

    def integrate(self, values):
        """Quadrature over the nodes; ``values`` has the node axes last."""
        v = np.asarray(values)
        if v.shape[-1] != self.weights.size:
            v = v.reshape(v.shape[: v.ndim - len(self.shape)] + (-1,))
        return v @ self.weights

    def mean(self, values):
        return self.integrate(values) / SPHERE_AREA[self.sphere_dim]

    def flat_integrate_weights(self):
        """Weights for integrals written in plain angle measure d(theta) d(phi)."""
        if self.sphere_dim == 1:
            return self.weights
        th = self.angles[0]
        return (self.weights.reshape(self.shape) / np.sin(th)[:, None]).ravel()


# -- mode bases ----------------------------------------------------------------

def real_sph_harm(l, m, theta, phi):
    """Orthonormal real spherical harmonic; ``theta`` is colatitude."""
    if m == 0:
        return np.real(sph_harm_y(l, 0, theta, phi))
    y = sph_harm_y(l, abs(m), theta, phi)
    return math.sqrt(2) * (np.real(y) if m > 0 else np.imag(y))


def mode_labels(dimension, bandwidth):
    """Labels (degree, index) of the real orthonormal modes up to ``bandwidth``."""
    if dimension == 2:
        return [(0, 0)] + [(k, s) for k in range(1, bandwidth + 1) for s in (1, -1)]
    return [(l, m) for l in range(bandwidth + 1) for m in range(-l, l + 1)]


def mode_matrix(rule, bandwidth, degrees=None):
    """Columns: orthonormal modes evaluated at the rule's nodes.

    For the circle the modes are 1/sqrt(2 pi), cos(k t)/sqrt(pi), sin(k t)/sqrt(pi).
    """
    labels = mode_labels(rule.dimension, bandwidth)
    if degrees is not None:
        labels = [lab for lab in labels if lab[0] in degrees]
    cols = []
    if rule.sphere_dim == 1:
        t = rule.angles[0]
        for k, s in labels:
            if k == 0:
                cols.append(np.full_like(t, 1 / math.sqrt(2 * math.pi)))
            else:
                cols.append((np.cos(k * t) if s > 0 else np.sin(k * t)) / math.sqrt(math.pi))
    else:
        th, ph = rule.angles
        TH, PH = np.meshgrid(th, ph, indexing="ij")
        for l, mm in labels:
            cols.append(real_sph_harm(l, mm, TH, PH).ravel())
    return np.stack(cols, axis=-1), labels


# -- functions on the sphere ----------------------------------------------------

class SphereFunction:
    """A real function on S^(n-1).

    n = 2: truncated Fourier series, ``coeffs = (a_0, a_1..a_L, b_1..b_L)`` for
    ``a_0 + sum a_k cos(k t) + b_k sin(k t)``.
    n = 3: samples on a colatitude/longitude grid of shape (n_lat, n_lon).
    """

    def __init__(self, dimension, data):
        if dimension not in (2, 3):
            raise DomainError("dimension must be 2 or 3")
        data = np.asarray(data, dtype=float)
        if dimension == 2 and (data.ndim != 1 or data.size % 2 == 0):
            raise InputError("Fourier coefficient vector must have odd length 2L+1")
        if dimension == 3 and data.ndim != 2:
            raise InputError("grid values must be a 2-d array")
        self.dimension = dimension
        self.data = data

    # constructors
    @classmethod
    def constant(cls, dimension, value, bandwidth=16, grid=(32, 64)):
        if dimension == 2:
            c = np.zeros(2 * bandwidth + 1)
            c[0] = value
            return cls(2, c)
        return cls(3, np.full(grid, float(value)))

    @classmethod
    def from_fourier(cls, a0, a=(), b=(), bandwidth=None):
        a, b = list(a), list(b)
        L = max(len(a), len(b), bandwidth or 0)
        c = np.zeros(2 * L + 1)
        c[0] = a0
        c[1 : 1 + len(a)] = a
        c[1 + L : 1 + L + len(b)] = b
        return cls(2, c)

    @classmethod
    def from_samples(cls, dimension, values, rule, bandwidth=None):
        """Build from values at the nodes of ``rule``."""
        values = np.asarray(values, dtype=float).reshape(rule.shape)
        if dimension == 3:
            return cls(3, values)
        N = rule.shape[0]
        L = bandwidth if bandwidth is not None else (N - 1) // 2
        F = np.fft.rfft(values) / N
        c = np.zeros(2 * L + 1)
        c[0] = F[0].real
        k = np.arange(1, L + 1)
        c[1 : L + 1] = 2 * F[k].real
        c[L + 1 :] = -2 * F[k].imag
        return cls(2, c)

    @classmethod
    def from_callable(cls, f, dimension, rule=None, bandwidth=16):
        """Sample ``f(nodes)`` (unit vectors, shape (N, n)) on ``rule``."""
        rule = rule or QuadratureRule.default(dimension)
        return cls.from_samples(dimension, f(rule.nodes), rule, bandwidth if dimension == 2 else None)

    @property
    def bandwidth(self):
        return (self.data.size - 1) // 2 if self.dimension == 2 else None

    def fourier(self):
        L = self.bandwidth
        return self.data[0], self.data[1 : L + 1], self.data[L + 1 :]

    def values(self, rule):
        if self.dimension == 2:
            t = rule.angles[0]
            a0, a, b = self.fourier()
            k = np.arange(1, len(a) + 1)
            return a0 + np.cos(np.outer(t, k)) @ a + np.sin(np.outer(t, k)) @ b
        if self.data.shape != rule.shape:
            raise InputError(f"grid shape {self.data.shape} does not match rule {rule.shape}")
        return self.data.ravel()

    def default_rule(self):
        if self.dimension == 2:
            return QuadratureRule.circle(max(128, 4 * (self.bandwidth + 1)))
        return QuadratureRule.sphere_grid(*self.data.shape)

    def _like(self, data):
        return SphereFunction(self.dimension, data)

    def __add__(self, other):
        if isinstance(other, SphereFunction):
            return self._like(_pad_add(self.data, other.data, self.dimension))
        if self.dimension == 2:
            d = self.data.copy()
            d[0] += other
            return self._like(d)
        return self._like(self.data + other)

    def __sub__(self, other):
        return self + (-1.0) * other if isinstance(other, SphereFunction) else self + (-other)

    def __mul__(self, s):
        return self._like(self.data * float(s))

    __rmul__ = __mul__

    def norm(self, rule=None):
        """L2 norm over the sphere."""
        rule = rule or self.default_rule()
        return float(np.sqrt(rule.integrate(self.values(rule) ** 2)))

    def inner(self, other, rule=None):
        rule = rule or self.default_rule()
        return float(rule.integrate(self.values(rule) * other.values(rule)))

    def sup(self, rule=None):
        rule = rule or self.default_rule()
        return float(np.max(np.abs(self.values(rule))))

    def to_dict(self):
        if self.dimension == 2:
            return {"dimension": 1, "representation": "fourier", "bandwidth": self.bandwidth, "data": self.data.tolist()}
        return {"dimension": 2, "representation": "grid", "shape": list(self.data.shape), "data": self.data.ravel().tolist()}

    @classmethod
    def from_dict(cls, d):
        if d["representation"] == "fourier":
            return cls(2, np.asarray(d["data"], dtype=float))
        return cls(3, np.asarray(d["data"], dtype=float).reshape(d["shape"]))

    def __repr__(self):
        if self.dimension == 2:
            return f"SphereFunction(n=2, L={self.bandwidth})"
        return f"SphereFunction(n=3, grid={self.data.shape})"


def _pad_add(a, b, dimension):
    if dimension == 3:
        return a + b
    La, Lb = (a.size - 1) // 2, (b.size - 1) // 2
    L = max(La, Lb)
    out = np.zeros(2 * L + 1)
    for c, Lc in ((a, La), (b, Lb)):
        out[0] += c[0]
        out[1 : 1 + Lc] += c[1 : 1 + Lc]
        out[1 + L : 1 + L + Lc] += c[1 + Lc :]
    return out


def project_first_eigenspace(u, rule=None):
    """Component of ``u`` in the degree-1 spherical harmonics."""
    if u.dimension == 2:
        L = u.bandwidth
        c = np.zeros_like(u.data)
        if L >= 1:
            c[1] = u.data[1]
            c[L + 1] = u.data[L + 1]
        return SphereFunction(2, c)
    rule = rule or u.default_rule()
    vals = u.values(rule)
    coef = rule.integrate(vals * rule.nodes.T) * (3 / (4 * np.pi))
    return SphereFunction(3, (rule.nodes @ coef).reshape(rule.shape))


def project_Q(u, rule=None):
    """Q = id - P with P the projection on the first eigenspace."""
    return u - project_first_eigenspace(u, rule)


def project_mean(u, rule=None):
    if u.dimension == 2:
        return SphereFunction.constant(2, u.data[0], bandwidth=u.bandwidth)
    rule = rule or u.default_rule()
    return SphereFunction.constant(3, float(rule.mean(u.values(rule))), grid=rule.shape)


def oscillating_part(u, rule=None):
    """(id - P0 - P1) u: ``u`` minus its mean and its degree-1 component."""
    return project_Q(u, rule) - project_mean(u, rule)


# -- spectral differentiation ----------------------------------------------------

def _circle_derivatives(F, axis):
    """First and second derivatives of equispaced periodic samples along ``axis``."""
    N = F.shape[axis]
    k = np.fft.rfftfreq(N, 1.0 / N)
    shape = [1] * F.ndim
    shape[axis] = k.size
    k = k.reshape(shape)
    G = np.fft.rfft(F, axis=axis)
    k1 = k.copy()
    if N % 2 == 0:
        k1 = np.where(k == N // 2, 0.0, k1)
    d1 = np.fft.irfft(1j * k1 * G, n=N, axis=axis)
    d2 = np.fft.irfft(-(k ** 2) * G, n=N, axis=axis)
    return d1, d2


def _dfs_extend(F):
    """Double-Fourier-sphere extension of (..., n_lat, n_lon) samples to colatitude in [0, 2 pi)."""
    n_lon = F.shape[-1]
    refl = np.roll(F[..., ::-1, :], -n_lon // 2, axis=-1)
    return np.concatenate([F, refl], axis=-2)


def _sphere_derivatives(F):
    """Spectral d/dtheta, d/dphi and second derivatives on the colatitude/longitude grid."""
    n_lat = F.shape[-2]
    E = _dfs_extend(F)
    Et, Ett = _circle_derivatives(E, E.ndim - 2)
    Ep, Epp = _circle_derivatives(E, E.ndim - 1)
    Etp, _ = _circle_derivatives(Et, E.ndim - 1)
    cut = lambda A: A[..., :n_lat, :]
    return cut(Et), cut(Ep), cut(Ett), cut(Etp), cut(Epp)


def holder_surrogate(u, alpha=0.5, rule=None):
    """Discrete stand-in for the C^(2,alpha) norm of ``u``.

    Returns max|u| + max|Du| + max|D^2u| + the largest Hölder quotient of the
    second derivatives between neighbouring grid nodes. Derivatives are taken
    in angle coordinates, so for n = 3 the longitude terms blow up near the
    poles like 1/sin; only relative comparisons are meaningful.
    """
    rule = rule or u.default_rule()
    vals = u.values(rule)
    if u.dimension == 2:
        d1, d2 = _circle_derivatives(vals, 0)
        step = 2 * math.pi / vals.size
        hq = np.max(np.abs(np.diff(np.append(d2, d2[0])))) / step ** alpha
        parts = [np.max(np.abs(vals)), np.max(np.abs(d1)), np.max(np.abs(d2)), hq]
    else:
        Ft, Fp, Ftt, Ftp, Fpp = _sphere_derivatives(vals.reshape(rule.shape))
        sin = np.sin(rule.angles[0])[:, None]
        dphi = 2 * math.pi / rule.shape[1]
        dth = np.min(np.diff(rule.angles[0]))
        hess = np.maximum(np.abs(Ftt), np.maximum(np.abs(Ftp / sin), np.abs(Fpp / sin ** 2)))
        hq = max(np.max(np.abs(np.diff(hess, axis=0))) / dth ** alpha,
                 np.max(np.abs(np.diff(hess, axis=1)) / (sin * dphi) ** alpha))
        grad = np.sqrt(Ft ** 2 + (Fp / sin) ** 2)
        parts = [np.max(np.abs(vals)), np.max(grad), np.max(hess), hq]
    return {"sup": float(parts[0]), "d1": float(parts[1]), "d2": float(parts[2]), "holder": float(parts[3]),
            "alpha": alpha, "norm": float(sum(parts))}


# -- radial graphs ------------------------------------------------------------------

def graph_steps(m, u_max):
    """Even RK4 step count shared by all rays of a graph with sup u = u_max."""
    s = int(m.steps_for(u_max))
    return s + (s % 2)


def _simpson(f, axis=0):
    n = f.shape[axis] - 1
    w = np.ones(n + 1)
    w[1:-1:2] = 4
    w[2:-1:2] = 2
    shape = [1] * f.ndim
    shape[axis] = n + 1
    return np.sum(f * w.reshape(shape), axis=axis) / (3 * n)


def graph_batch(m, p, U, rule, steps=None, volume=True, curvature=True):
    """Geometry of a batch of radial graphs about ``p``.

    ``U`` holds node values with shape (B, N_nodes). Returns a dict with the
    embedded points ``X`` (B, N, n), ``area`` (B,), ``volume`` (B,), inward mean
    curvature ``H`` (B, N) and the boundary measure ``dA`` (B, N).
    """
    x0 = m.check_inside(_coords(p))
    U = np.atleast_2d(np.asarray(U, dtype=float))
    B, N = U.shape
    n = m.dimension
    if np.any(U <= 0):
        raise DomainError("radial function must be positive", min=float(U.min()))
    umax = float(U.max())
    if umax >= m.chart_radius / 2:
        raise DomainError("graph too large for the chart", sup=umax, limit=m.chart_radius / 2)
    if steps is None:
        steps = graph_steps(m, umax)
    lam_p = float(m.conformal_factor(x0))
    W = (U[..., None] * rule.nodes[None]) / lam_p
    start = np.broadcast_to(x0, (B * N, n))
    out = integrate_geodesics(m, start, W.reshape(-1, n), steps, record=volume)
    X = out[0].reshape(B, N, n)
    res = {"X": X, "steps": steps}
    if rule.sphere_dim == 1:
        geo = _curve_geometry(m, X, rule, curvature)
    else:
        geo = _surface_geometry(m, X, rule, curvature)
    res.update(geo)
    if volume:
        Y = out[2].reshape(steps + 1, B, N, n)
        V = out[3].reshape(steps + 1, B, N, n)
        res["volume"] = _volume(m, Y, V, rule)
    return res


def _curve_geometry(m, X, rule, curvature):
    T, A2 = _circle_derivatives(X, 1)
    lam = m.conformal_factor(X)
    speed = np.linalg.norm(T, axis=-1)
    if np.any(speed <= 1e-14 * np.max(speed)):
        raise GeometryError("degenerate tangent: the graph folds over")
    dA = lam * speed * rule.weights
    res = {"dA": dA, "area": dA.sum(axis=-1)}
    if curvature:
        d = m.grad_phi(X)
        dT = np.sum(d * T, axis=-1, keepdims=True)
        acc = A2 + 2 * dT * T - (speed ** 2)[..., None] * d
        JT = np.stack([-T[..., 1], T[..., 0]], axis=-1)
        res["H"] = np.sum(acc * JT, axis=-1) / (lam * speed ** 3)
    return res


def _surface_geometry(m, X, rule, curvature):
    n_lat, n_lon = rule.shape
    B = X.shape[0]
    F = np.moveaxis(X.reshape(B, n_lat, n_lon, 3), -1, 1)  # (B, 3, lat, lon)
    Xt, Xp, Xtt, Xtp, Xpp = (np.moveaxis(D, 1, -1).reshape(B, -1, 3) for D in _sphere_derivatives(F))
    lam = m.conformal_factor(X)
    nu = np.cross(Xt, Xp)
    nn = np.linalg.norm(nu, axis=-1)
    if np.any(nn <= 1e-14 * np.max(nn)):
        raise GeometryError("degenerate tangent frame: the graph folds over")
    flat = rule.flat_integrate_weights()
    dA = lam ** 2 * nn * flat
    res = {"dA": dA, "area": dA.sum(axis=-1)}
    if curvature:
        d = m.grad_phi(X)

        def cov(Xa, Xb, Xab):
            return Xab + np.sum(d * Xa, -1, keepdims=True) * Xb + np.sum(d * Xb, -1, keepdims=True) * Xa - np.sum(Xa * Xb, -1, keepdims=True) * d

        N = -nu / nn[..., None]  # inward, Euclidean-unit in the chart
        l2 = lam ** 2
        E, Fm, G = l2 * np.sum(Xt * Xt, -1), l2 * np.sum(Xt * Xp, -1), l2 * np.sum(Xp * Xp, -1)
        # second fundamental form against the g-unit normal N / lam
        L_ = lam * np.sum(cov(Xt, Xt, Xtt) * N, -1)
        M_ = lam * np.sum(cov(Xt, Xp, Xtp) * N, -1)
        N_ = lam * np.sum(cov(Xp, Xp, Xpp) * N, -1)
        det = E * G - Fm ** 2
        res["H"] = (G * L_ - 2 * Fm * M_ + E * N_) / det
    return res


def _volume(m, Y, V, rule):
    S1, B, N, n = Y.shape
    lam = m.conformal_factor(Y)
    if rule.sphere_dim == 1:
        Yt, _ = _circle_derivatives(Y, 2)
        integrand = lam ** 2 * (V[..., 0] * Yt[..., 1] - V[..., 1] * Yt[..., 0])
        inner = integrand @ rule.weights
    else:
        n_lat, n_lon = rule.shape
        F = np.moveaxis(Y.reshape(S1, B, n_lat, n_lon, 3), -1, 2)
        Yt, Yp = (np.moveaxis(D, 2, -1).reshape(S1, B, -1, 3) for D in _sphere_derivatives(F)[:2])
        integrand = lam ** 3 * np.sum(V * np.cross(Yt, Yp), axis=-1)
        inner = integrand @ rule.flat_integrate_weights()
    return _simpson(inner, axis=0)


def graph_area(p, u, m, rule=None):
    """Riemannian area of the radial graph exp_p(u(theta) theta)."""
    rule = rule or u.default_rule()
    return float(graph_batch(m, p, u.values(rule)[None], rule, volume=False, curvature=False)["area"][0])


def enclosed_volume(p, u, m, rule=None):
    """Riemannian volume of {exp_p(t theta) : 0 <= t <= u(theta)}."""
    rule = rule or u.default_rule()
    return float(graph_batch(m, p, u.values(rule)[None], rule, volume=True, curvature=False)["volume"][0])


def mean_curvature(p, u, m, rule=None):
    """Inward mean curvature (sum of principal curvatures) of the radial graph."""
    rule = rule or u.default_rule()
    H = graph_batch(m, p, u.values(rule)[None], rule, volume=False)["H"][0]
    return SphereFunction.from_samples(u.dimension, H, rule)
