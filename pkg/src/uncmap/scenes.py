"""Constructed map-level scenes with known structure, for uncertainty experiments."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .gaussians import GaussianMap, default_class_embeddings
from .geometry import Camera
from .io import Frame
from .renderer import render
from .rng import stage_rng


def front_camera(position, size: int = 32, focal: float = 32.0) -> Camera:
    """Camera at `position` looking along world +x with z up."""
    rot = np.array([[0.0, 0.0, 1.0], [-1.0, 0.0, 0.0], [0.0, -1.0, 0.0]])
    c = (size - 1) / 2.0
    return Camera(focal, focal, c, c, size, size, rot, np.asarray(position, dtype=np.float64))


def rendered_frame(m: GaussianMap, cam: Camera, labels: np.ndarray | None = None) -> Frame:
    """Frame whose color and depth are a render of `m`; labels default to 0."""
    buf = render(m.to_params(), cam)
    if labels is None:
        labels = np.zeros(cam.shape, dtype=np.int64)
    return Frame(buf.color, buf.depth, labels, cam)


@dataclass
class OcclusionScene:
    map: GaussianMap
    frames: list[Frame]
    visible: np.ndarray     # well-observed, consistent observations
    occluded: np.ndarray    # behind an opaque layer in every frame
    conflicted: np.ndarray  # visible, but frames disagree on their semantics


def occlusion_scene(seed: int = 0, size: int = 32, grid: int = 5, n_hidden: int = 4,
                    n_frames: int = 6) -> OcclusionScene:
    """An opaque splat layer facing the cameras with a hidden group behind it.

    Layer depths alternate in a checkerboard so small position perturbations
    never reorder overlapping splats. The four corner splats get a random
    unit semantic target per frame, so no single embedding explains all
    frames; the stored map holds the normalized mean of those targets.
    """
    rng = stage_rng(seed, "occlusion-scene")
    table = default_class_embeddings()
    ys = np.linspace(-0.8, 0.8, grid)
    yy, zz = np.meshgrid(ys, ys, indexing="ij")
    checker = (np.add.outer(np.arange(grid), np.arange(grid)) % 2).ravel()
    front = np.stack([2.0 + 0.04 * checker, yy.ravel(), zz.ravel()], axis=1)
    n_front = len(front)
    hidden = np.stack([np.full(n_hidden, 2.5), rng.uniform(-0.15, 0.15, n_hidden),
                       rng.uniform(-0.15, 0.15, n_hidden)], axis=1)
    mu = np.concatenate([front, hidden])
    n = len(mu)
    e = np.tile([0.02, 0.22, 0.22], (n, 1))
    q = np.tile([1.0, 0.0, 0.0, 0.0], (n, 1))
    alpha = np.full(n, 0.99)
    c = rng.uniform(0.15, 0.85, (n, 3))
    s = np.tile(table[2], (n, 1))
    corners = np.array([0, grid - 1, n_front - grid, n_front - 1])
    targets = rng.normal(size=(n_frames, len(corners), 3))
    targets /= np.linalg.norm(targets, axis=2, keepdims=True)
    mean = targets.mean(axis=0)
    s[corners] = mean / np.linalg.norm(mean, axis=1, keepdims=True)
    base = GaussianMap.from_fields(mu, e, q, alpha, c, s)
    frames = []
    for k in range(n_frames):
        ang = 2 * np.pi * k / n_frames + np.pi / 4
        cam = front_camera((0.0, 0.12 * np.cos(ang), 0.12 * np.sin(ang)), size)
        s_k = s.copy()
        s_k[corners] = targets[k]
        gt = GaussianMap.from_fields(mu, e, q, alpha, c, s_k)
        buf = render(gt.to_params(), cam)
        frames.append(Frame(buf.color, buf.depth, np.zeros(cam.shape, dtype=np.int64), cam, sem=buf.sem))
    visible = np.setdiff1d(np.arange(n_front), corners)
    return OcclusionScene(base, frames, visible, np.arange(n_front, n), corners)


def random_map(seed: int, n: int, center=(2.0, 0.0, 0.0), spread=0.6, e_range=(0.03, 0.15)) -> GaussianMap:
    """Random primitives scattered in front of a +x facing camera at the origin."""
    rng = stage_rng(seed, "random-map")
    mu = np.asarray(center) + rng.uniform(-spread, spread, (n, 3)) * np.array([0.5, 1.0, 1.0])
    e = rng.uniform(*e_range, (n, 3))
    q = rng.normal(size=(n, 4))
    q /= np.linalg.norm(q, axis=1, keepdims=True)
    a = rng.uniform(0.2, 0.95, n)
    c = rng.uniform(0, 1, (n, 3))
    s = rng.normal(size=(n, 3))
    s /= np.linalg.norm(s, axis=1, keepdims=True)
    return GaussianMap.from_fields(mu, e, q, a, c, s)


def add_rgb_noise(frames: list[Frame], std: float, seed: int) -> list[Frame]:
    """Copies of `frames` with i.i.d. Gaussian noise on color, clipped to [0, 1]."""
    out = []
    for k, fr in enumerate(frames):
        rng = stage_rng(seed, "rgb-noise", str(k))
        noisy = np.clip(fr.rgb + std * rng.standard_normal(fr.rgb.shape), 0.0, 1.0) if std > 0 else fr.rgb.copy()
        out.append(Frame(noisy, fr.depth.copy(), fr.labels.copy(), fr.cam))
    return out
