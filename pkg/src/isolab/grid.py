"""Mesh-r grids acting on voxel domains.

A voxel with multi-index i occupies the closed cube origin + h*[i, i+1]. Grid
hyperplanes are {x_k = offset_k + j r}. All areas are (n-1)-dimensional
measures in physical units.
"""
from dataclasses import dataclass, field
import math

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import ConvexHull
from scipy.spatial.distance import pdist

from .errors import DomainError, InputError, ResolutionError, SearchError

_SNAP_TOL = 1e-9


class VoxelDomain:
    """Occupancy bitmap with voxel size ``h`` and physical ``origin``."""

    def __init__(self, occupancy, h, origin=None):
        occ = np.asarray(occupancy, dtype=bool)
        if occ.ndim not in (2, 3):
            raise DomainError("occupancy must be 2- or 3-dimensional")
        if h <= 0:
            raise DomainError("voxel size must be positive")
        self.occ = occ
        self.h = float(h)
        self.origin = np.zeros(occ.ndim) if origin is None else np.asarray(origin, dtype=float)

    @property
    def dimension(self):
        return self.occ.ndim

    @property
    def count(self):
        return int(self.occ.sum())

    @property
    def volume(self):
        return self.count * self.h ** self.dimension

    def exposed_faces(self):
        padded = np.pad(self.occ, 1)
        return int(sum(np.count_nonzero(np.diff(padded, axis=k)) for k in range(self.dimension)))

    @property
    def boundary_area(self):
        return self.exposed_faces() * self.h ** (self.dimension - 1)

    def centers(self):
        idx = np.argwhere(self.occ)
        return self.origin + (idx + 0.5) * self.h

    def diameter(self):
        """Largest distance between two voxel corners of the set."""
        idx = np.argwhere(self.occ)
        if len(idx) == 0:
            return 0.0
        n = self.dimension
        shifts = np.array(np.meshgrid(*[[0, 1]] * n, indexing="ij")).reshape(n, -1).T
        corners = np.unique((idx[:, None, :] + shifts[None]).reshape(-1, n), axis=0)
        pts = corners
        if len(corners) > n + 1:
            try:
                pts = corners[ConvexHull(corners).vertices]
            except Exception:  # flat point sets
                pass
        return float(pdist(pts).max() * self.h) if len(pts) > 1 else 0.0

    def cropped(self):
        idx = np.argwhere(self.occ)
        if len(idx) == 0:
            raise DomainError("empty domain")
        lo, hi = idx.min(0), idx.max(0) + 1
        sl = tuple(slice(a, b) for a, b in zip(lo, hi))
        return VoxelDomain(self.occ[sl], self.h, self.origin + lo * self.h)

    def padded(self, width):
        return VoxelDomain(np.pad(self.occ, width), self.h, self.origin - width * self.h)

    def __eq__(self, other):
        return (isinstance(other, VoxelDomain) and self.h == other.h and self.occ.shape == other.occ.shape
                and np.array_equal(self.origin, other.origin) and np.array_equal(self.occ, other.occ))

    def __repr__(self):
        return f"VoxelDomain(n={self.dimension}, h={self.h}, shape={self.occ.shape}, count={self.count})"

    # constructors ---------------------------------------------------------

    @classmethod
    def from_indicator(cls, fn, lo, hi, h):
        """Voxels of the box [lo, hi] whose centers satisfy ``fn``."""
        lo = np.asarray(lo, dtype=float)
        shape = tuple(int(round(x)) for x in (np.asarray(hi, dtype=float) - lo) / h)
        grids = np.meshgrid(*[lo[k] + (np.arange(s) + 0.5) * h for k, s in enumerate(shape)], indexing="ij")
        return cls(fn(np.stack(grids, axis=-1)), h, lo)

    @classmethod
    def box(cls, side, h, n=2, center=None):
        """Axis-aligned cube of the given side, centered at the origin by default."""
        k = int(round(side / h))
        c = np.zeros(n) if center is None else np.asarray(center, dtype=float)
        return cls(np.ones((k,) * n, dtype=bool), h, c - k * h / 2)

    @classmethod
    def ball(cls, radius, h, n=2, center=None):
        c = np.zeros(n) if center is None else np.asarray(center, dtype=float)
        k = int(math.ceil(radius / h)) + 1
        lo = c - k * h
        return cls.from_indicator(lambda x: np.sum((x - c) ** 2, axis=-1) <= radius ** 2, lo, lo + 2 * k * h, h)

    # file format ----------------------------------------------------------

    def dumps(self):
        """Header ``n h dims... origin...`` then alternating run lengths starting with empty."""
        flat = self.occ.ravel()
        edges = np.flatnonzero(np.diff(flat.astype(np.int8))) + 1
        bounds = np.concatenate([[0], edges, [flat.size]])
        runs = np.diff(bounds).tolist()
        if flat.size and flat[0]:
            runs = [0] + runs
        head = [str(self.dimension), repr(self.h), *map(str, self.occ.shape), *map(repr, self.origin.tolist())]
        lines = [" ".join(head)]
        for i in range(0, len(runs), 32):
            lines.append(" ".join(map(str, runs[i:i + 32])))
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text):
        lines = text.strip().splitlines()
        if not lines:
            raise InputError("empty voxel file")
        head = lines[0].split()
        try:
            n = int(head[0])
            h = float(head[1])
            dims = tuple(int(x) for x in head[2:2 + n])
            origin = [float(x) for x in head[2 + n:2 + 2 * n]] or None
            runs = [int(x) for line in lines[1:] for x in line.split()]
        except (ValueError, IndexError) as exc:
            raise InputError(f"malformed voxel header: {exc}") from None
        if len(dims) != n or (origin is not None and len(origin) != n):
            raise InputError("header does not match dimension")
        if sum(runs) != math.prod(dims) or min(runs, default=0) < 0:
            raise InputError("run lengths do not cover the box")
        values = np.arange(len(runs)) % 2 == 1
        return cls(np.repeat(values, runs).reshape(dims), h, origin)

    def save(self, path):
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.dumps())

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.loads(fh.read())


@dataclass(frozen=True)
class GridSpec:
    mesh: float
    offset: tuple

    def __post_init__(self):
        if self.mesh <= 0:
            raise DomainError("mesh must be positive")
        off = tuple(float(x) for x in self.offset)
        if any(not 0 <= x < self.mesh for x in off):
            raise DomainError("offset must lie in [0, mesh)", offset=off)
        object.__setattr__(self, "offset", off)

    def planes(self, axis, lo, hi):
        """Plane coordinates along ``axis`` inside the closed interval [lo, hi]."""
        o = self.offset[axis]
        j0 = math.ceil((lo - o) / self.mesh - 1e-12)
        j1 = math.floor((hi - o) / self.mesh + 1e-12)
        return o + self.mesh * np.arange(j0, j1 + 1)

    def to_dict(self):
        return {"mesh": self.mesh, "offset": list(self.offset)}


def _check_resolution(D, r):
    if r < 4 * D.h:
        raise ResolutionError("grid mesh below 4 voxels", mesh=r, h=D.h)


def _slab_profiles(D):
    """Per axis: cross-section counts inside each slab and on each slab boundary."""
    out = []
    for k in range(D.dimension):
        axes = tuple(a for a in range(D.dimension) if a != k)
        inside = D.occ.sum(axis=axes)
        padded = np.pad(D.occ, [(1, 1) if a == k else (0, 0) for a in range(D.dimension)])
        lo = np.take(padded, np.arange(0, padded.shape[k] - 1), axis=k)
        hi = np.take(padded, np.arange(1, padded.shape[k]), axis=k)
        on = (lo & hi).sum(axis=axes)  # boundary b sits between slabs b-1 and b
        out.append((inside, on))
    return out


def _plane_measure(D, profile, axis, coords):
    inside, on = profile
    t = (np.asarray(coords, dtype=float) - D.origin[axis]) / D.h
    b = np.rint(t)
    at_face = np.abs(t - b) <= _SNAP_TOL
    total = 0
    bi = b[at_face].astype(int)
    ok = (bi >= 0) & (bi < on.size)
    total += int(on[bi[ok]].sum())
    si = np.floor(t[~at_face]).astype(int)
    ok = (si >= 0) & (si < inside.size)
    total += int(inside[si[ok]].sum())
    return total


def grid_intersection_area(D, G, _profiles=None):
    """(n-1)-measure of the grid hyperplanes inside the open domain, by slab counting."""
    _check_resolution(D, G.mesh)
    profiles = _profiles or _slab_profiles(D)
    count = 0
    for k in range(D.dimension):
        lo = D.origin[k]
        hi = lo + D.occ.shape[k] * D.h
        count += _plane_measure(D, profiles[k], k, G.planes(k, lo, hi))
    return count * D.h ** (D.dimension - 1)


@dataclass
class AverageReport:
    mean: float
    stderr: float
    expected: float
    samples: int
    seed: int
    mesh: float

    @property
    def z_score(self):
        return (self.mean - self.expected) / self.stderr if self.stderr > 0 else (0.0 if self.mean == self.expected else math.inf)

    @property
    def passed(self):
        return abs(self.z_score) <= 3

    def to_dict(self):
        return {**self.__dict__, "z_score": self.z_score, "passed": self.passed}


def average_over_offsets(D, r, n_samples=10000, seed=0):
    """Monte Carlo mean of the intersection area over uniform grid offsets."""
    if n_samples < 100:
        raise DomainError("need at least 100 offset samples")
    _check_resolution(D, r)
    rng = np.random.default_rng(seed)
    offsets = rng.uniform(0.0, r, size=(n_samples, D.dimension))
    profiles = _slab_profiles(D)
    vals = np.array([grid_intersection_area(D, GridSpec(r, tuple(o)), profiles) for o in offsets])
    return AverageReport(float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(n_samples)),
                         D.dimension / r * D.volume, n_samples, seed, r)


def select_grid(D, r, max_trials=100, seed=0):
    """First random grid with Area(D ∩ G) <= (n/r) Vol(D)."""
    _check_resolution(D, r)
    rng = np.random.default_rng(seed)
    bound = D.dimension / r * D.volume
    profiles = _slab_profiles(D)
    for trial in range(1, max_trials + 1):
        G = GridSpec(r, tuple(rng.uniform(0.0, r, size=D.dimension)))
        if grid_intersection_area(D, G, profiles) <= bound * (1 + 1e-12):
            return G, trial
    raise SearchError("no admissible grid found", mesh=r, trials=max_trials, seed=seed)


# -- decomposition ----------------------------------------------------------

@dataclass
class Partition:
    grid: GridSpec
    components: list
    labels: np.ndarray = field(repr=False)
    boundary_sum: float
    boundary_domain: float
    cut_area: float
    cut_area_unsnapped: float
    identity_exact: bool
    identity_error: float
    tolerance: float
    cells: int

    @property
    def volumes(self):
        return [c.volume for c in self.components]

    def to_dict(self):
        return {
            "grid": self.grid.to_dict(),
            "n_components": len(self.components),
            "volumes": self.volumes,
            "boundary_areas": [c.boundary_area for c in self.components],
            "diameters": [c.diameter() for c in self.components],
            "boundary_sum": self.boundary_sum,
            "boundary_domain": self.boundary_domain,
            "cut_area": self.cut_area,
            "cut_area_unsnapped": self.cut_area_unsnapped,
            "identity_exact": self.identity_exact,
            "identity_error": self.identity_error,
            "tolerance": self.tolerance,
        }


def _snapped_cuts(D, G, axis):
    """Voxel boundary indices nearest to the grid planes meeting the box."""
    lo = D.origin[axis]
    hi = lo + D.occ.shape[axis] * D.h
    b = np.rint((G.planes(axis, lo, hi) - lo) / D.h).astype(int)
    return np.unique(b[(b > 0) & (b < D.occ.shape[axis])])


def partition_components(D, G):
    """Connected components of D minus the voxel-snapped grid, with the boundary identity."""
    if D.count == 0:
        raise DomainError("empty domain")
    _check_resolution(D, G.mesh)
    n, shape = D.dimension, D.occ.shape
    index = -np.ones(shape, dtype=np.int64)
    index[D.occ] = np.arange(D.count)
    rows, cols = [], []
    cut_faces = 0
    cell_ids = []
    for k in range(n):
        cuts = _snapped_cuts(D, G, k)
        cell_ids.append(len(cuts) + 1)
        a = np.take(index, np.arange(shape[k] - 1), axis=k)
        b = np.take(index, np.arange(1, shape[k]), axis=k)
        both = (a >= 0) & (b >= 0)
        sever = np.zeros(shape[k] - 1, dtype=bool)
        sever[cuts - 1] = True  # boundary c separates slabs c-1 and c
        sever = sever.reshape([-1 if ax == k else 1 for ax in range(n)])
        keep = both & ~sever
        cut_faces += int((both & sever).sum())
        rows.append(a[keep])
        cols.append(b[keep])
    rows, cols = np.concatenate(rows), np.concatenate(cols)
    adj = coo_matrix((np.ones(rows.size), (rows, cols)), shape=(D.count, D.count))
    ncomp, lab = connected_components(adj, directed=False)
    labels = -np.ones(shape, dtype=np.int64)
    labels[D.occ] = lab
    comps = [VoxelDomain(labels == c, D.h, D.origin).cropped() for c in range(ncomp)]
    comps.sort(key=lambda c: (-c.count, tuple(c.origin)))
    faces = sum(c.exposed_faces() for c in comps)
    lhs_faces = faces - D.exposed_faces()
    face = D.h ** (n - 1)
    cells = math.prod(cell_ids)
    unsnapped = grid_intersection_area(D, G)
    return Partition(
        G, comps, labels, faces * face, D.boundary_area, cut_faces * face, unsnapped,
        lhs_faces == 2 * cut_faces, abs(lhs_faces * face - 2 * unsnapped),
        8 * D.h * cells, cells,
    )


# -- combinatorial lemma and pipeline -----------------------------------------------------

@dataclass
class FractionReport:
    passed: bool
    epsilon: float
    dimension: int
    rows: int
    violations: list
    sums: list
    maxima: list

    def to_dict(self):
        return dict(self.__dict__)


def largest_component_check(fractions, epsilon, dimension=2, tol=1e-12):
    """If max_k f_k <= 1 - eps then sum_k f_k^((n-1)/n) >= (1 - eps)^(-1/n)."""
    if not 0 < epsilon < 1:
        raise DomainError("epsilon must lie in (0, 1)")
    sums, maxima, bad = [], [], []
    q = (dimension - 1) / dimension
    bound = (1 - epsilon) ** (-1 / dimension)
    for i, row in enumerate(fractions):
        f = np.asarray(row, dtype=float)
        if f.size == 0 or np.any(f < 0) or abs(f.sum() - 1) > 1e-9:
            raise InputError("fractions must be nonnegative and sum to 1", row=i)
        s, mx = float(np.sum(f ** q)), float(f.max())
        sums.append(s)
        maxima.append(mx)
        if mx <= 1 - epsilon and s < bound - tol:
            bad.append({"row": i, "sum": s, "max": mx, "bound": bound})
    return FractionReport(not bad, epsilon, dimension, len(sums), bad, sums, maxima)


@dataclass
class PipelineResult:
    component: VoxelDomain
    partition: Partition
    trials: int
    seed: int
    added_boundary_ratio: float
    max_diameter_ratio: float
    largest_fraction: float
    diameter_bound_ok: bool

    def to_dict(self):
        return {
            "seed": self.seed,
            "trials": self.trials,
            "added_boundary_ratio": self.added_boundary_ratio,
            "max_diameter_ratio": self.max_diameter_ratio,
            "largest_fraction": self.largest_fraction,
            "diameter_bound_ok": self.diameter_bound_ok,
            "partition": self.partition.to_dict(),
        }


def small_diameter_pipeline(D, r, seed=0, max_trials=100):
    """Select a good grid, cut D along it and keep the largest piece."""
    G, trials = select_grid(D, r, max_trials, seed)
    part = partition_components(D, G)
    n = D.dimension
    diams = [c.diameter() for c in part.components]
    largest = part.components[0]
    return PipelineResult(
        largest, part, trials, seed,
        (part.boundary_sum - part.boundary_domain) / D.volume ** ((n - 1) / n),
        max(diams) / r,
        largest.volume / D.volume,
        all(d <= math.sqrt(n) * r + 2 * D.h for d in diams),
    )
