"""Axis-aligned box worlds and an exact ray caster producing RGB-D-label frames."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import Camera, look_camera
from .io import Frame

FACE_SHADE = (0.85, 0.7, 1.0)  # x-facing, y-facing, z-facing surfaces


@dataclass
class Box:
    """Solid axis-aligned box with a class label and surface appearance.

    ``ramp`` (3x3) adds ``ramp @ (p - center)`` to the color. ``texture``
    adds hashed per-cell noise of that amplitude. ``label_noise`` relabels
    that fraction of surface cells into ``noise_labels`` (evenly split).
    """

    lo: np.ndarray
    hi: np.ndarray
    label: int
    color: np.ndarray
    ramp: np.ndarray | None = None
    texture: float = 0.0
    label_noise: float = 0.0
    noise_labels: tuple[int, ...] = ()
    cell: float = 0.05
    salt: int = 0

    def __post_init__(self):
        self.lo = np.asarray(self.lo, dtype=np.float64)
        self.hi = np.asarray(self.hi, dtype=np.float64)
        self.color = np.asarray(self.color, dtype=np.float64)
        if np.any(self.hi <= self.lo):
            raise ValueError("box needs hi > lo on every axis")

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lo + self.hi)


@dataclass
class World:
    boxes: list[Box] = field(default_factory=list)

    def classes(self) -> set[int]:
        out = set()
        for b in self.boxes:
            out.add(b.label)
            if b.label_noise > 0:
                out.update(b.noise_labels)
        return out


def _hash01(cells: np.ndarray, salt: int) -> np.ndarray:
    """Deterministic uniform [0, 1) value per integer cell triple (splitmix-style)."""
    c = cells.astype(np.int64).astype(np.uint64)
    with np.errstate(over="ignore"):
        h = np.uint64(salt) * np.uint64(0x9E3779B97F4A7C15) + np.uint64(0x632BE59BD9B4E019)
        for k in range(3):
            h = h ^ (c[..., k] + np.uint64(0x9E3779B97F4A7C15) + (h << np.uint64(6)) + (h >> np.uint64(2)))
            h = (h ^ (h >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
            h = (h ^ (h >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
            h = h ^ (h >> np.uint64(31))
    return (h >> np.uint64(11)).astype(np.float64) / float(1 << 53)


def camera_rays(cam: Camera) -> tuple[np.ndarray, np.ndarray]:
    """World-frame ray origin and per-pixel directions scaled so that t equals camera depth."""
    v, u = np.mgrid[0:cam.height, 0:cam.width].astype(np.float64)
    d_cam = np.stack([(u - cam.cu) / cam.fx, (v - cam.cv) / cam.fy, np.ones_like(u)], axis=-1)
    return cam.translation, d_cam @ cam.rotation.T


def ray_cast(world: World, cam: Camera) -> Frame:
    """Render the exact first-hit surface of every pixel ray.

    Pixels without a hit get depth 0 and label 0 (treated as invalid depth).
    """
    o, d = camera_rays(cam)
    h, w = cam.height, cam.width
    best = np.full((h, w), np.inf)
    rgb = np.zeros((h, w, 3))
    labels = np.zeros((h, w), dtype=np.int64)
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = 1.0 / d
    for bi, b in enumerate(world.boxes):
        with np.errstate(invalid="ignore"):
            t1 = (b.lo - o) * inv
            t2 = (b.hi - o) * inv
        tn = np.where(np.isnan(t1), -np.inf, np.minimum(t1, t2))
        tf = np.where(np.isnan(t1), np.inf, np.maximum(t1, t2))
        tmin = tn.max(axis=-1)
        tmax = tf.min(axis=-1)
        hit = (tmax >= tmin) & (tmin > 1e-9) & (tmin < best)
        if not hit.any():
            continue
        t = tmin[hit]
        best[hit] = t
        p = o + d[hit] * t[:, None]
        axis = tn[hit].argmax(axis=-1)
        shade = np.asarray(FACE_SHADE)[axis]
        col = np.broadcast_to(b.color, p.shape).copy()
        if b.ramp is not None:
            col += (p - b.center) @ np.asarray(b.ramp).T
        cells = np.floor(p / b.cell + 1e-9)
        if b.texture > 0:
            for ch in range(3):
                col[:, ch] += b.texture * (2 * _hash01(cells, b.salt * 7 + ch + 1) - 1)
        rgb[hit] = np.clip(col * shade[:, None], 0.0, 1.0)
        lab = np.full(len(t), b.label, dtype=np.int64)
        if b.label_noise > 0 and b.noise_labels:
            r = _hash01(cells, b.salt * 7 + 101)
            flip = r < b.label_noise
            k = np.minimum((r / b.label_noise * len(b.noise_labels)).astype(np.int64), len(b.noise_labels) - 1)
            lab[flip] = np.asarray(b.noise_labels)[k[flip]]
        labels[hit] = lab
    depth = np.where(np.isfinite(best), best, 0.0)
    return Frame(rgb, depth, labels, cam)


def flat_wall_scene(seed: int = 7, size: int = 64, distance: float = 2.0) -> list[Frame]:
    """Single frame of a smoothly shaded wall filling the view."""
    rng = np.random.default_rng(seed)
    base = rng.uniform(0.35, 0.65, 3)
    ramp = np.zeros((3, 3))
    ramp[:, 1:] = rng.uniform(-0.12, 0.12, (3, 2))
    wall = Box([distance, -4.0, -4.0], [distance + 0.2, 4.0, 4.0], 0, base, ramp=ramp)
    cam = look_camera(np.zeros(3), 0.0, size, size)
    frame = ray_cast(World([wall]), cam)
    frame.rgb = np.clip(frame.rgb / FACE_SHADE[0], 0.0, 1.0)  # undo face shading so colors span the full ramp
    return [frame]
