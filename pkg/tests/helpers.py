"""Shared oracles for the test suite: finite differences and small constructed scenes."""

import numpy as np

from uncmap.gaussians import GaussianParams
from uncmap.geometry import look_camera
from uncmap.renderer import PARAM_SLICES, render

GROUP_OF = {k: (g, k - sl.start) for g, sl in PARAM_SLICES.items() for k in range(sl.start, sl.stop)}


def five_primitive_scene(seed, size=32):
    """Five random splats in front of a +x facing camera at the origin, internal parameters."""
    rng = np.random.default_rng(seed)
    n = 5
    mu = np.stack([rng.uniform(1.5, 3, n), rng.uniform(-0.5, 0.5, n), rng.uniform(-0.5, 0.5, n)], 1)
    p = GaussianParams(mu, np.log(rng.uniform(0.1, 0.3, (n, 3))), rng.normal(size=(n, 4)),
                       rng.normal(size=n) * 0.5, rng.uniform(0, 1, (n, 3)), rng.normal(size=(n, 3)))
    return p, look_camera([0, 0, 0], 0.0, size, size)


def pixel_outputs(p, cam, u, v):
    b = render(p, cam)
    return np.r_[b.color[v, u], b.depth[v, u], b.sem[v, u]]


def central_difference(p, cam, i, k, u, v, h=1e-4):
    """d(7 pixel outputs)/d(internal parameter k of primitive i) by central differences."""
    group, off = GROUP_OF[k]

    def shifted(delta):
        q = p.copy()
        arr = getattr(q, group)
        if arr.ndim == 1:
            arr[i] += delta
        else:
            arr[i, off] += delta
        return pixel_outputs(q, cam, u, v)

    return (shifted(h) - shifted(-h)) / (2 * h)


def gradient_matches(analytic, fd, rel=1e-3, abs_tol=1e-6) -> np.ndarray:
    err = np.abs(analytic - fd)
    return (err <= abs_tol) | (err <= rel * np.abs(fd))


def brute_force_sphere(mu, center, radius):
    d = np.sqrt(((mu - np.asarray(center)) ** 2).sum(axis=1))
    return np.flatnonzero(d <= radius)
