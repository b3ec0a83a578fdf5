"""Gaussian primitives, the map container, initialization and SGM1 files.

A map is stored as an (N, 20) float32 record array in natural units, field
order (mu, e, r, alpha, c, s, ug, us, ua). Optimization works on
:class:`GaussianParams`, a float64 reparameterization with log-scales,
raw (unnormalized) quaternions and pre-sigmoid opacities.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from .geometry import InputError, PointCloud

RECORD_FIELDS = (("mu", 3), ("e", 3), ("r", 4), ("alpha", 1), ("c", 3), ("s", 3), ("ug", 1), ("us", 1), ("ua", 1))
RECORD_SIZE = 20
MAGIC = b"SGM1"

_SLICES = {}
_off = 0
for _name, _n in RECORD_FIELDS:
    _SLICES[_name] = slice(_off, _off + _n)
    _off += _n
assert _off == RECORD_SIZE

ALPHA0 = 0.5
SCALE_CLAMP = (1e-3, 0.5)
QUAT_TOL = 1e-4


class MapFormatError(Exception):
    """Malformed SGM1 file. `offset` is the byte position where parsing failed."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


# -- quaternions -----------------------------------------------------------


def quat_to_rotmat(q: np.ndarray) -> np.ndarray:
    """Rotation matrices (..., 3, 3) from unit quaternions (..., 4) in (w, x, y, z) order."""
    q = np.asarray(q, dtype=np.float64)
    w, x, y, z = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    R = np.empty(q.shape[:-1] + (3, 3))
    R[..., 0, 0] = 1 - 2 * (y * y + z * z)
    R[..., 0, 1] = 2 * (x * y - w * z)
    R[..., 0, 2] = 2 * (x * z + w * y)
    R[..., 1, 0] = 2 * (x * y + w * z)
    R[..., 1, 1] = 1 - 2 * (x * x + z * z)
    R[..., 1, 2] = 2 * (y * z - w * x)
    R[..., 2, 0] = 2 * (x * z - w * y)
    R[..., 2, 1] = 2 * (y * z + w * x)
    R[..., 2, 2] = 1 - 2 * (x * x + y * y)
    return R


def quat_rotmat_jacobian(q: np.ndarray) -> np.ndarray:
    """dR/dq for unit quaternions: shape (..., 4, 3, 3), entry [k] = dR/dq_k."""
    q = np.asarray(q, dtype=np.float64)
    w, x, y, z = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    zero = np.zeros_like(w)
    dw = np.stack([zero, -z, y, z, zero, -x, -y, x, zero], axis=-1)
    dx = np.stack([zero, y, z, y, -2 * x, -w, z, w, -2 * x], axis=-1)
    dy = np.stack([-2 * y, x, w, x, zero, z, -w, z, -2 * y], axis=-1)
    dz = np.stack([-2 * z, -w, x, w, -2 * z, y, x, y, zero], axis=-1)
    J = 2.0 * np.stack([dw, dx, dy, dz], axis=-2)
    return J.reshape(q.shape[:-1] + (4, 3, 3))


def covariance(e, r) -> np.ndarray:
    """Sigma = R E E^T R^T for scales `e` (..., 3) and unit quaternions `r` (..., 4)."""
    e = np.asarray(e, dtype=np.float64)
    r = np.asarray(r, dtype=np.float64)
    if np.any(e <= 0):
        raise InputError("scales must be positive")
    if np.any(np.abs(np.linalg.norm(r, axis=-1) - 1.0) > QUAT_TOL):
        raise InputError("quaternion is not unit length; normalize before calling covariance")
    R = quat_to_rotmat(r)
    RE = R * e[..., None, :]
    return RE @ np.swapaxes(RE, -1, -2)


# -- class embeddings ------------------------------------------------------

CLASS_NAMES = ("wall", "floor", "cabinet", "sofa", "plant", "door")
# octahedron vertices: the six maximally separated unit vectors in R^3
_OCTA = np.array(
    [[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1]], dtype=np.float64
)


def default_class_embeddings() -> dict[int, np.ndarray]:
    return {i: _OCTA[i].copy() for i in range(len(CLASS_NAMES))}


def embed_labels(labels, table: dict[int, np.ndarray]) -> np.ndarray:
    """Map an integer label array to embeddings (..., 3); unknown ids raise."""
    labels = np.asarray(labels, dtype=np.int64)
    ids = np.unique(labels)
    missing = [int(i) for i in ids if int(i) not in table]
    if missing:
        raise InputError(f"unknown class ids: {missing}")
    lut_size = int(max(table)) + 1
    lut = np.zeros((lut_size, 3))
    for k, v in table.items():
        lut[k] = v
    return lut[labels]


# -- primitives and maps ---------------------------------------------------


@dataclass
class GaussianPrimitive:
    mu: np.ndarray
    e: np.ndarray
    r: np.ndarray
    alpha: float
    c: np.ndarray
    s: np.ndarray
    ug: float = 0.0
    us: float = 0.0
    ua: float = 0.0

    def to_record(self) -> np.ndarray:
        return np.concatenate(
            [self.mu, self.e, self.r, [self.alpha], self.c, self.s, [self.ug, self.us, self.ua]]
        ).astype(np.float64)

    @classmethod
    def from_record(cls, rec) -> "GaussianPrimitive":
        rec = np.asarray(rec, dtype=np.float64)
        if rec.shape != (RECORD_SIZE,):
            raise InputError(f"record must have {RECORD_SIZE} entries, got {rec.shape}")
        g = {name: rec[sl] for name, sl in _SLICES.items()}
        return cls(
            g["mu"].copy(), g["e"].copy(), g["r"].copy(), float(g["alpha"][0]), g["c"].copy(), g["s"].copy(),
            float(g["ug"][0]), float(g["us"][0]), float(g["ua"][0]),
        )


@dataclass(eq=False)
class GaussianMap:
    records: np.ndarray = field(default_factory=lambda: np.zeros((0, RECORD_SIZE), np.float32))
    frame_id: int = 0

    def __post_init__(self):
        rec = np.asarray(self.records, dtype=np.float32)
        if rec.ndim != 2 or rec.shape[1] != RECORD_SIZE:
            rec = rec.reshape(-1, RECORD_SIZE)
        self.records = np.ascontiguousarray(rec)

    def __len__(self) -> int:
        return len(self.records)

    def __getitem__(self, i: int) -> GaussianPrimitive:
        return GaussianPrimitive.from_record(self.records[i])

    def __eq__(self, other) -> bool:
        if not isinstance(other, GaussianMap):
            return NotImplemented
        return self.records.shape == other.records.shape and self.records.tobytes() == other.records.tobytes()

    @property
    def primitives(self) -> list[GaussianPrimitive]:
        return [self[i] for i in range(len(self))]

    def field(self, name: str) -> np.ndarray:
        out = self.records[:, _SLICES[name]].astype(np.float64)
        return out[:, 0] if out.shape[1] == 1 else out

    mu = property(lambda self: self.field("mu"))
    e = property(lambda self: self.field("e"))
    r = property(lambda self: self.field("r"))
    alpha = property(lambda self: self.field("alpha"))
    c = property(lambda self: self.field("c"))
    s = property(lambda self: self.field("s"))
    ug = property(lambda self: self.field("ug"))
    us = property(lambda self: self.field("us"))
    ua = property(lambda self: self.field("ua"))

    @classmethod
    def from_primitives(cls, prims, frame_id: int = 0) -> "GaussianMap":
        recs = np.array([p.to_record() for p in prims], dtype=np.float64).reshape(-1, RECORD_SIZE)
        return cls(recs, frame_id)

    @classmethod
    def from_fields(cls, mu, e, r, alpha, c, s, ug=None, us=None, ua=None, frame_id: int = 0) -> "GaussianMap":
        n = len(np.asarray(mu).reshape(-1, 3))
        zeros = np.zeros(n)
        cols = [
            np.asarray(mu, float).reshape(n, 3), np.asarray(e, float).reshape(n, 3),
            np.asarray(r, float).reshape(n, 4), np.asarray(alpha, float).reshape(n, 1),
            np.asarray(c, float).reshape(n, 3), np.asarray(s, float).reshape(n, 3),
            np.reshape(zeros if ug is None else ug, (n, 1)), np.reshape(zeros if us is None else us, (n, 1)),
            np.reshape(zeros if ua is None else ua, (n, 1)),
        ]
        return cls(np.concatenate(cols, axis=1), frame_id)

    def subset(self, keep) -> "GaussianMap":
        keep = np.asarray(keep)
        if keep.dtype != bool:
            keep = keep.astype(np.int64)
        return GaussianMap(self.records[keep], self.frame_id)

    def with_uncertainty(self, ug, us, ua) -> "GaussianMap":
        rec = self.records.copy()
        rec[:, 17] = ug
        rec[:, 18] = us
        rec[:, 19] = ua
        return GaussianMap(rec, self.frame_id)

    def to_params(self) -> "GaussianParams":
        return GaussianParams.from_natural(self.mu, self.e, self.r, self.alpha, self.c, self.s)

    def validate(self) -> None:
        if not np.all(np.isfinite(self.records)):
            raise InputError("map contains non-finite values")
        if np.any(self.records[:, 3:6] <= 0):
            raise InputError("map contains non-positive scales")
        a = self.records[:, 10]
        if np.any((a < 0) | (a > 1)):
            raise InputError("map contains opacity outside [0, 1]")


_LOGIT_CLIP = 30.0


def _logit(a):
    a = np.clip(np.asarray(a, dtype=np.float64), 1e-13, 1 - 1e-13)
    return np.clip(np.log(a) - np.log1p(-a), -_LOGIT_CLIP, _LOGIT_CLIP)


def sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(x, dtype=np.float64)))


@dataclass
class GaussianParams:
    """Unconstrained float64 parameters for rendering and optimization."""

    mu: np.ndarray
    log_e: np.ndarray
    q: np.ndarray
    logit_alpha: np.ndarray
    c: np.ndarray
    s: np.ndarray

    GROUPS = ("mu", "log_e", "q", "logit_alpha", "c", "s")

    def __len__(self) -> int:
        return len(self.mu)

    @property
    def e(self) -> np.ndarray:
        return np.exp(self.log_e)

    @property
    def alpha(self) -> np.ndarray:
        return sigmoid(self.logit_alpha)

    @property
    def q_unit(self) -> np.ndarray:
        return self.q / np.linalg.norm(self.q, axis=1, keepdims=True)

    @classmethod
    def from_natural(cls, mu, e, r, alpha, c, s) -> "GaussianParams":
        return cls(
            np.array(mu, dtype=np.float64).reshape(-1, 3),
            np.log(np.asarray(e, dtype=np.float64)).reshape(-1, 3),
            np.array(r, dtype=np.float64).reshape(-1, 4),
            _logit(alpha).reshape(-1),
            np.array(c, dtype=np.float64).reshape(-1, 3),
            np.array(s, dtype=np.float64).reshape(-1, 3),
        )

    def copy(self) -> "GaussianParams":
        return GaussianParams(*(getattr(self, g).copy() for g in self.GROUPS))

    def to_map(self, frame_id: int = 0, ug=None, us=None, ua=None) -> GaussianMap:
        return GaussianMap.from_fields(
            self.mu, self.e, self.q_unit, self.alpha, self.c, self.s, ug, us, ua, frame_id=frame_id
        )

    def flat_view(self, group: str) -> np.ndarray:
        return getattr(self, group)


# -- initialization --------------------------------------------------------


def nn_scale(points: np.ndarray, k: int = 3) -> np.ndarray:
    """Isotropic initial scale per point: mean distance to its k nearest neighbours / 3.

    With fewer than k+1 points the mean runs over the available neighbours.
    A single point gets the upper clamp.
    """
    n = len(points)
    if n < 2:
        return np.full(n, SCALE_CLAMP[1])
    kk = min(k, n - 1)
    dist, _ = cKDTree(points).query(points, k=kk + 1)
    mean = dist[:, 1:].mean(axis=1)
    return np.clip(mean / 3.0, *SCALE_CLAMP)


def init_from_cloud(cloud: PointCloud, class_embeddings: dict[int, np.ndarray], frame_id: int = 0) -> GaussianMap:
    if len(cloud) == 0:
        raise InputError("cannot initialize a map from an empty cloud")
    n = len(cloud)
    s = embed_labels(cloud.labels, class_embeddings)
    e = np.repeat(nn_scale(cloud.points)[:, None], 3, axis=1)
    r = np.tile([1.0, 0.0, 0.0, 0.0], (n, 1))
    return GaussianMap.from_fields(
        cloud.points, e, r, np.full(n, ALPHA0), np.clip(cloud.colors, 0, 1), s, frame_id=frame_id
    )


# -- serialization ---------------------------------------------------------

_HEADER = struct.Struct("<4sI")


def save_map(m: GaussianMap, path) -> None:
    m.validate()
    payload = _HEADER.pack(MAGIC, len(m)) + m.records.astype("<f4").tobytes()
    Path(path).write_bytes(payload)


def load_map(path) -> GaussianMap:
    data = Path(path).read_bytes()
    return loads_map(data)


def loads_map(data: bytes) -> GaussianMap:
    if len(data) < 4:
        raise MapFormatError("truncated header", len(data))
    if data[:4] != MAGIC:
        raise MapFormatError(f"bad magic {data[:4]!r}", 0)
    if len(data) < _HEADER.size:
        raise MapFormatError("truncated primitive count", len(data))
    _, count = _HEADER.unpack_from(data)
    expected = _HEADER.size + count * RECORD_SIZE * 4
    if len(data) < expected:
        raise MapFormatError(f"truncated payload: header declares {count} primitives", len(data))
    if len(data) > expected:
        raise MapFormatError(f"count mismatch: {len(data) - expected} trailing bytes after {count} primitives", expected)
    rec = np.frombuffer(data, dtype="<f4", offset=_HEADER.size, count=count * RECORD_SIZE)
    return GaussianMap(rec.astype(np.float32).reshape(count, RECORD_SIZE))
