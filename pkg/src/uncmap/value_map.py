"""3D Value Map queries: exact spherical aggregation over uncertainty-augmented primitives."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .gaussians import GaussianMap
from .geometry import InputError

DEFAULT_RADIUS = 0.75
FEATURE_DIM = 7


@dataclass(frozen=True)
class ValueQueryResult:
    count: int
    mean_ug: float
    mean_us: float
    mean_ua: float
    sem_centroid: tuple[float, float, float]
    occupancy: float

    @property
    def empty(self) -> bool:
        return self.count == 0

    @classmethod
    def from_indices(cls, m: GaussianMap, idx: np.ndarray) -> "ValueQueryResult":
        idx = np.sort(np.asarray(idx, dtype=np.int64))
        if len(idx) == 0:
            return cls(0, 0.0, 0.0, 0.0, (0.0, 0.0, 0.0), 0.0)
        rec = m.records[idx].astype(np.float64)
        alpha = rec[:, 10]
        wsum = alpha.sum()
        if wsum > 0:
            cen = (alpha[:, None] * rec[:, 14:17]).sum(axis=0) / wsum
        else:
            cen = np.zeros(3)
        return cls(len(idx), float(rec[:, 17].mean()), float(rec[:, 18].mean()), float(rec[:, 19].mean()),
                   tuple(float(x) for x in cen), float(wsum))

    def csv_row(self) -> str:
        vals = [self.count, self.mean_ug, self.mean_us, self.mean_ua, *self.sem_centroid, self.occupancy,
                int(self.empty)]
        return ",".join(repr(v) if isinstance(v, float) else str(v) for v in vals)

    CSV_HEADER = "count,mean_ug,mean_us,mean_ua,sem_x,sem_y,sem_z,occupancy,empty"


class GridIndex:
    """Uniform grid over primitive centers with cell size equal to the query radius."""

    def __init__(self, points: np.ndarray, cell: float):
        if not cell > 0:
            raise InputError("grid cell size must be positive")
        self.points = np.asarray(points, dtype=np.float64)
        self.cell = float(cell)
        self.cells: dict[tuple[int, int, int], np.ndarray] = {}
        if len(self.points):
            keys = np.floor(self.points / self.cell).astype(np.int64)
            order = np.lexsort(keys.T[::-1])
            ks = keys[order]
            starts = np.flatnonzero(np.r_[True, np.any(ks[1:] != ks[:-1], axis=1)])
            ends = np.r_[starts[1:], len(ks)]
            for s, e in zip(starts, ends):
                self.cells[tuple(int(x) for x in ks[s])] = order[s:e]

    def query(self, center, radius: float) -> np.ndarray:
        center = np.asarray(center, dtype=np.float64)
        lo = np.floor((center - radius) / self.cell).astype(np.int64)
        hi = np.floor((center + radius) / self.cell).astype(np.int64)
        found = []
        for i in range(lo[0], hi[0] + 1):
            for j in range(lo[1], hi[1] + 1):
                for k in range(lo[2], hi[2] + 1):
                    ids = self.cells.get((i, j, k))
                    if ids is not None:
                        found.append(ids)
        if not found:
            return np.zeros(0, dtype=np.int64)
        ids = np.concatenate(found)
        d = np.linalg.norm(self.points[ids] - center, axis=1)
        return np.sort(ids[d <= radius])


@dataclass
class ValueMap:
    """A Gaussian map with populated uncertainty fields plus a spatial index."""

    map: GaussianMap
    radius: float = DEFAULT_RADIUS
    index: GridIndex = field(init=False, repr=False)

    def __post_init__(self):
        if not self.radius > 0:
            raise InputError("radius must be positive")
        self.index = GridIndex(self.map.mu.astype(np.float64), self.radius)

    def query(self, center, radius: float | None = None) -> ValueQueryResult:
        r = self.radius if radius is None else radius
        if not r > 0:
            raise InputError("radius must be positive")
        if r <= self.radius:
            idx = self.index.query(center, r)
        else:
            idx = GridIndex(self.index.points, r).query(center, r)
        return ValueQueryResult.from_indices(self.map, idx)


def query_sphere(m: GaussianMap, center, radius: float = DEFAULT_RADIUS) -> ValueQueryResult:
    """Aggregate the primitives whose centers lie within `radius` of `center` (inclusive)."""
    if not radius > 0:
        raise InputError("radius must be positive")
    return ValueMap(m, radius).query(center, radius)


def brute_force_query(m: GaussianMap, center, radius: float) -> ValueQueryResult:
    d = np.linalg.norm(m.mu.astype(np.float64) - np.asarray(center, dtype=np.float64), axis=1)
    return ValueQueryResult.from_indices(m, np.flatnonzero(d <= radius))


@dataclass
class Norms:
    """Running min/max per uncertainty channel (ug, us, ua)."""

    lo: np.ndarray = field(default_factory=lambda: np.full(3, np.inf))
    hi: np.ndarray = field(default_factory=lambda: np.full(3, -np.inf))

    def __post_init__(self):
        self.lo = np.asarray(self.lo, dtype=np.float64).copy()
        self.hi = np.asarray(self.hi, dtype=np.float64).copy()

    @property
    def valid(self) -> bool:
        return bool(np.all(self.lo <= self.hi))

    def update(self, values) -> None:
        v = np.asarray(values, dtype=np.float64).reshape(-1, 3)
        if len(v):
            self.lo = np.minimum(self.lo, v.min(axis=0))
            self.hi = np.maximum(self.hi, v.max(axis=0))

    def normalize(self, values) -> np.ndarray:
        if not self.valid:
            raise InputError("norms are not initialized (min > max)")
        v = np.asarray(values, dtype=np.float64)
        span = self.hi - self.lo
        safe = np.where(span > 0, span, 1.0)
        return np.where(span > 0, np.clip((v - self.lo) / safe, 0.0, 1.0), 0.0)


def featurize(result: ValueQueryResult, norms: Norms) -> np.ndarray:
    """(occupancy, sem_centroid[3], normalized mean_ug, mean_us, mean_ua)."""
    u = norms.normalize([result.mean_ug, result.mean_us, result.mean_ua])
    return np.array([result.occupancy, *result.sem_centroid, *u], dtype=np.float64)
