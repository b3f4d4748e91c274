"""Lattice perimeter minimization at fixed volume and ball-closeness diagnostics.

Annealing works on planar bitmaps with a Cauchy-Crofton perimeter: for a set
of lattice directions v_d with angular weights dθ_d (summing to π over a
half-turn) the estimate

    P(D) = Σ_d dθ_d / (2 |v_d|) · #{x : exactly one of x, x + v_d lies in D}

converges to the Euclidean length of smooth boundaries. The exposed-face
count used by VoxelDomain overestimates diagonal boundary by up to √2 and is
kept only for reporting.
"""
from dataclasses import dataclass, field
import math

import numba
import numpy as np

from .errors import DomainError
from .grid import VoxelDomain, small_diameter_pipeline
from .profile import isoperimetric_constant
from .bubble import UNIT_BALL_VOLUME

_PRIMITIVE = [(1, 0), (3, 1), (2, 1), (3, 2), (1, 1), (2, 3), (1, 2), (1, 3)]


def crofton_stencil():
    """Sixteen lattice directions over a half-turn and their Crofton weights."""
    dirs = _PRIMITIVE + [(-b, a) for a, b in _PRIMITIVE]
    ang = np.array([math.atan2(b, a) for a, b in dirs])
    order = np.argsort(ang)
    dirs = np.array(dirs, dtype=np.int64)[order]
    ang = ang[order]
    gaps = np.diff(np.concatenate([ang, [ang[0] + math.pi]]))
    span = 0.5 * (gaps + np.roll(gaps, 1))
    weights = span / (2 * np.hypot(dirs[:, 0], dirs[:, 1]))
    return dirs, weights


_DIRS, _WEIGHTS = crofton_stencil()
_MARGIN = int(np.abs(_DIRS).max()) + 1


@numba.njit(cache=True)
def _crofton(occ, dirs, weights):
    nx, ny = occ.shape
    total = 0.0
    for d in range(dirs.shape[0]):
        a, b = dirs[d, 0], dirs[d, 1]
        c = 0
        for i in range(-abs(a), nx + abs(a)):
            for j in range(-abs(b), ny + abs(b)):
                u = 0 <= i < nx and 0 <= j < ny and occ[i, j]
                i2, j2 = i + a, j + b
                w = 0 <= i2 < nx and 0 <= j2 < ny and occ[i2, j2]
                if u != w:
                    c += 1
        total += weights[d] * c
    return total


def crofton_perimeter(D):
    if D.dimension != 2:
        raise DomainError("Crofton perimeter is planar only")
    return float(_crofton(D.occ, _DIRS, _WEIGHTS)) * D.h


@numba.njit(cache=True)
def _flip_delta(occ, i, j, dirs, weights):
    s = occ[i, j]
    delta = 0.0
    for d in range(dirs.shape[0]):
        a, b = dirs[d, 0], dirs[d, 1]
        for sgn in (-1, 1):
            t = occ[i + sgn * a, j + sgn * b]
            # pair cut before the flip iff s != t, after iff s == t
            delta += weights[d] * (1.0 if s == t else -1.0)
    return delta


@numba.njit(cache=True)
def _anneal(occ, cells, dirs, weights, t0, cooling, sweeps, levels, seed, margin):
    np.random.seed(seed)
    nx, ny = occ.shape
    count = cells.shape[0]
    energy = _crofton(occ, dirs, weights)
    best_e = energy
    best = occ.copy()
    history = np.empty(levels)
    accepted = 0
    conserved = True
    T = t0
    di = (1, -1, 0, 0)
    dj = (0, 0, 1, -1)
    for lev in range(levels):
        for sw in range(sweeps):
            for it in range(count):
                # removal candidate: an occupied cell with an empty 4-neighbour
                while True:
                    k = np.random.randint(count)
                    ri, rj = cells[k, 0], cells[k, 1]
                    if not (occ[ri + 1, rj] and occ[ri - 1, rj] and occ[ri, rj + 1] and occ[ri, rj - 1]):
                        break
                # addition candidate: an empty 4-neighbour of an exposed cell, off the margin
                while True:
                    k2 = np.random.randint(count)
                    bi, bj = cells[k2, 0], cells[k2, 1]
                    m = 0
                    for q in range(4):
                        if not occ[bi + di[q], bj + dj[q]]:
                            m += 1
                    if m == 0:
                        continue
                    pick = np.random.randint(m)
                    for q in range(4):
                        if not occ[bi + di[q], bj + dj[q]]:
                            if pick == 0:
                                ai, aj = bi + di[q], bj + dj[q]
                            pick -= 1
                    if (ai != ri or aj != rj) and margin <= ai < nx - margin and margin <= aj < ny - margin:
                        break
                d1 = _flip_delta(occ, ri, rj, dirs, weights)
                occ[ri, rj] = False
                d2 = _flip_delta(occ, ai, aj, dirs, weights)
                dE = d1 + d2
                if dE <= 0.0 or np.random.random() < math.exp(-dE / T):
                    occ[ai, aj] = True
                    cells[k, 0] = ai
                    cells[k, 1] = aj
                    energy += dE
                    accepted += 1
                else:
                    occ[ri, rj] = True
            for k in range(count):
                if not occ[cells[k, 0], cells[k, 1]]:
                    conserved = False
            if energy < best_e - 1e-12:
                best_e = energy
                best[:, :] = occ
        if occ.sum() != count:
            conserved = False
        history[lev] = best_e
        T *= cooling
    return best, best_e, history, accepted, conserved


@dataclass(frozen=True)
class AnnealSchedule:
    t0: float = 0.3
    cooling: float = 0.85
    sweeps_per_level: int = 20
    levels: int = 40
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.cooling < 1:
            raise DomainError("cooling factor must lie in (0, 1)")
        if self.t0 <= 0 or self.sweeps_per_level < 1 or self.levels < 1:
            raise DomainError("invalid annealing schedule")

    def to_dict(self):
        return dict(self.__dict__)


@dataclass
class LatticeSet:
    domain: VoxelDomain
    target: int
    perimeter: float
    ratio: float
    quality: float
    history: list = field(default_factory=list)
    accepted: int = 0
    conserved: bool = True

    def to_dict(self):
        return {"target": self.target, "perimeter": self.perimeter, "face_ratio": self.ratio,
                "quality": self.quality, "accepted": self.accepted, "conserved": self.conserved}


def isoperimetric_ratio(perimeter, volume, n=2):
    return perimeter / (isoperimetric_constant(n) * volume ** ((n - 1) / n))


def lattice_set(D, target=None, history=(), accepted=0, conserved=True):
    """Wrap a planar domain with both perimeter ratios."""
    vol = D.volume
    return LatticeSet(D, D.count if target is None else target, D.boundary_area,
                      isoperimetric_ratio(D.boundary_area, vol), isoperimetric_ratio(crofton_perimeter(D), vol),
                      list(history), accepted, conserved)


def _initial_blob(volume, side):
    """Centered 2:1 rectangle topped up row-wise to exactly ``volume`` cells."""
    occ = np.zeros((side, side), dtype=bool)
    w = max(1, int(math.sqrt(volume / 2)))
    full, rest = divmod(volume, w)
    i0 = (side - (full + (rest > 0))) // 2
    j0 = (side - w) // 2
    occ[i0:i0 + full, j0:j0 + w] = True
    occ[i0 + full, j0:j0 + rest] = True
    return occ


def minimize_perimeter(volume, box=None, schedule=None, h=1.0):
    """Anneal a planar lattice set of exactly ``volume`` cells.

    ``box`` is the side of the square working area in cells (default four
    times the side of the equal-area square, plus the stencil margin).
    """
    schedule = schedule or AnnealSchedule()
    volume = int(volume)
    if volume < 1:
        raise DomainError("volume must be a positive cell count")
    side = box or int(math.ceil(4 * math.sqrt(volume))) + 2 * _MARGIN + 2
    if volume > 0.25 * side * side:
        raise DomainError("volume exceeds a quarter of the box", volume=volume, box=side)
    occ = _initial_blob(volume, side)
    if volume == 1:
        best, hist, acc, ok = occ, [], 0, True
    else:
        cells = np.argwhere(occ).astype(np.int64)
        best, _, hist, acc, ok = _anneal(occ, cells, _DIRS, _WEIGHTS, schedule.t0, schedule.cooling,
                                         schedule.sweeps_per_level, schedule.levels, schedule.seed, _MARGIN)
        if int(best.sum()) != volume:
            ok = False
    D = VoxelDomain(best, h, -(side / 2) * h * np.ones(2))
    return lattice_set(D, volume, list(np.asarray(hist) * h), int(acc), bool(ok))


# -- ball fitting ---------------------------------------------------------------

@dataclass(frozen=True)
class Ball:
    center: tuple
    radius: float


def best_ball_fit(D):
    """Centroid of the voxel centers and the radius of the equal-volume ball."""
    if isinstance(D, LatticeSet):
        D = D.domain
    if D.count == 0:
        raise DomainError("empty set")
    c = D.centers().mean(axis=0)
    R = (D.volume / UNIT_BALL_VOLUME[D.dimension]) ** (1 / D.dimension)
    return Ball(tuple(float(x) for x in c), float(R))


def digital_ball(ball, like):
    """Cells of the lattice of ``like`` whose centers lie in ``ball``, on a box covering both."""
    h, n = like.h, like.dimension
    c = np.asarray(ball.center)
    lo = np.minimum(like.origin, np.floor((c - ball.radius - like.origin) / h - 1) * h + like.origin)
    hi_like = like.origin + np.array(like.occ.shape) * h
    hi = np.maximum(hi_like, np.ceil((c + ball.radius - like.origin) / h + 1) * h + like.origin)
    return VoxelDomain.from_indicator(lambda x: np.sum((x - c) ** 2, axis=-1) <= ball.radius ** 2, lo, hi, h)


def _on_common_box(A, B):
    h = A.h
    lo = np.minimum(A.origin, B.origin)
    hi = np.maximum(A.origin + np.array(A.occ.shape) * h, B.origin + np.array(B.occ.shape) * h)
    shape = tuple(np.rint((hi - lo) / h).astype(int))
    out = []
    for D in (A, B):
        occ = np.zeros(shape, dtype=bool)
        o = np.rint((D.origin - lo) / h).astype(int)
        occ[tuple(slice(a, a + s) for a, s in zip(o, D.occ.shape))] = D.occ
        out.append(occ)
    return out


def symmetric_difference_ratio(D, ball):
    """|D Δ B| / |D| in cell counts; ``ball`` is a Ball or a VoxelDomain on the same lattice."""
    if isinstance(D, LatticeSet):
        D = D.domain
    B = digital_ball(ball, D) if isinstance(ball, Ball) else ball
    a, b = _on_common_box(D, B)
    return float(np.count_nonzero(a ^ b) / a.sum())


def ball_ratio(D):
    return symmetric_difference_ratio(D, best_ball_fit(D))


# -- experiments ----------------------------------------------------------------

@dataclass
class ConcentrationReport:
    volumes: list
    rows: list
    inversions: int
    passed: bool
    quality_gate: float
    schedule: dict

    def to_dict(self):
        return dict(self.__dict__)


def count_inversions(values, tol=1e-12):
    return int(sum(1 for a, b in zip(values, values[1:]) if b > a + tol))


def concentration_experiment(volumes, schedule=None, quality_gate=1.1, r_factor=5.0, seed=0,
                             domains=None, max_inversions=1):
    """Anneal (or take ``domains``), cut along a grid, fit a ball to the largest piece.

    ``volumes`` are cell counts in descending order. Ratios must not increase
    as the volume shrinks, up to ``max_inversions`` exceptions.
    """
    if len(volumes) < 3:
        raise DomainError("need at least three volumes")
    if list(volumes) != sorted(volumes, reverse=True):
        raise DomainError("volumes must be descending")
    schedule = schedule or AnnealSchedule(seed=seed)
    rows = []
    for i, v in enumerate(volumes):
        if domains is not None:
            ls = lattice_set(domains[i])
        else:
            ls = minimize_perimeter(v, schedule=schedule)
        row = {"volume": int(v), "quality": ls.quality, "face_ratio": ls.ratio}
        if domains is None and ls.quality > quality_gate:
            row["skipped"] = f"quality {ls.quality:.4f} above gate {quality_gate}"
            rows.append(row)
            continue
        D = ls.domain
        r = r_factor * D.volume ** (1 / D.dimension)
        pipe = small_diameter_pipeline(D.padded(1), r, seed=seed)
        piece = pipe.component
        row.update(
            mesh=r,
            largest_fraction=pipe.largest_fraction,
            sym_diff=ball_ratio(piece),
            sym_diff_whole=ball_ratio(D),
            rescaled_diameter=piece.diameter() / piece.volume ** (1 / piece.dimension),
        )
        rows.append(row)
    ratios = [r["sym_diff"] for r in rows if "sym_diff" in r]
    inv = count_inversions(ratios)
    ok = len(ratios) >= 2 and inv <= max_inversions
    return ConcentrationReport(list(map(int, volumes)), rows, inv, ok, quality_gate, schedule.to_dict())


@dataclass
class DiameterReport:
    passed: bool
    R: float
    rescaled: list
    flagged: list
    growing: bool

    def to_dict(self):
        return dict(self.__dict__)


def diameter_boundedness_check(sets, R=2.0, slack=0.05):
    """Rescaled diameters Diam / Vol^(1/n) stay below a common R and do not grow."""
    doms = [s.domain if isinstance(s, LatticeSet) else s for s in sets]
    resc = [d.diameter() / d.volume ** (1 / d.dimension) for d in doms]
    flagged = [i for i, x in enumerate(resc) if x > R]
    growing = any(resc[i] > max(resc[:i]) + slack for i in range(1, len(resc)))
    return DiameterReport(not flagged and not growing, float(max(resc)), resc, flagged, growing)


def star_shaped_fraction(D, oversample=4):
    """Fraction of boundary cells visible from the centroid through occupied cells."""
    if isinstance(D, LatticeSet):
        D = D.domain
    c = D.centers().mean(axis=0)
    occ = np.pad(D.occ, 1)
    inner = occ[1:-1, 1:-1] if D.dimension == 2 else occ[1:-1, 1:-1, 1:-1]
    exposed = np.zeros_like(inner)
    for k in range(D.dimension):
        for s in (-1, 1):
            exposed |= ~np.roll(occ, s, axis=k)[tuple(slice(1, -1) for _ in range(D.dimension))]
    exposed &= inner
    idx = np.argwhere(exposed)
    if len(idx) == 0:
        return 1.0
    good = 0
    for i in idx:
        p = D.origin + (i + 0.5) * D.h
        steps = max(2, int(math.ceil(oversample * np.linalg.norm(p - c) / D.h)))
        t = np.linspace(0.0, 1.0, steps + 1)[:, None]
        cells = np.floor((c + t * (p - c) - D.origin) / D.h).astype(int)
        inside = np.all((cells >= 0) & (cells < np.array(D.occ.shape)), axis=1)
        if inside.all() and D.occ[tuple(cells.T)].all():
            good += 1
    return good / len(idx)
