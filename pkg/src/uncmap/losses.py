"""Rendering losses: L1 + SSIM on color, L1 on depth and semantics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import correlate1d

from .geometry import InputError

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_C1 = 0.01**2
SSIM_C2 = 0.03**2

W_RGB = 1.0
W_DEPTH = 0.5
W_SEM = 0.5


def gaussian_kernel(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    x = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-(x**2) / (2 * sigma**2))
    return g / g.sum()


def gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    g = gaussian_kernel(size, sigma)
    return np.outer(g, g)


_K1 = gaussian_kernel()
_HALF = SSIM_WINDOW // 2


def _filt(x):
    """'valid' 2D filtering over the first two axes (the window is symmetric and separable)."""
    y = correlate1d(x, _K1, axis=0, mode="constant")
    y = correlate1d(y, _K1, axis=1, mode="constant")
    return y[_HALF:-_HALF, _HALF:-_HALF]


def _filt_adjoint(g):
    """Adjoint of `_filt`: 'full' filtering back to the input size."""
    pad = [(2 * _HALF, 2 * _HALF), (2 * _HALF, 2 * _HALF)] + [(0, 0)] * (g.ndim - 2)
    return _filt(np.pad(g, pad))


def ssim(x: np.ndarray, y: np.ndarray, with_grad: bool = False):
    """Mean SSIM of images (H, W) or (H, W, C) over valid window positions and channels.

    With ``with_grad`` also returns d(mean SSIM)/dx.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise InputError(f"ssim shape mismatch {x.shape} vs {y.shape}")
    squeeze = x.ndim == 2
    if squeeze:
        x, y = x[..., None], y[..., None]
    h, w, nc = x.shape
    if h < SSIM_WINDOW or w < SSIM_WINDOW:
        raise InputError(f"images must be at least {SSIM_WINDOW}x{SSIM_WINDOW} for SSIM")
    stats = _filt(np.concatenate([x, y, x * x, y * y, x * y], axis=2))
    mx, my, exx, eyy, exy = (stats[..., k * nc:(k + 1) * nc] for k in range(5))
    sxx = exx - mx * mx
    syy = eyy - my * my
    sxy = exy - mx * my
    n1 = 2 * mx * my + SSIM_C1
    n2 = 2 * sxy + SSIM_C2
    d1 = mx * mx + my * my + SSIM_C1
    d2 = sxx + syy + SSIM_C2
    smap = (n1 * n2) / (d1 * d2)
    scale = 1.0 / smap.size
    val = float(smap.sum() * scale)
    if not with_grad:
        return val
    # partials of each window's ssim with respect to mx, E[x^2], E[xy]
    g_sxx = -smap / d2
    g_sxy = 2 * n1 / (d1 * d2)
    g_mx = 2 * my * n2 / (d1 * d2) - smap * 2 * mx / d1
    # chain through sxx = Exx - mx^2 and sxy = Exy - mx*my
    g_mx = g_mx - 2 * mx * g_sxx - my * g_sxy
    back = _filt_adjoint(np.concatenate([g_mx, g_sxx, g_sxy], axis=2))
    grad = back[..., :nc] + 2 * x * back[..., nc:2 * nc] + y * back[..., 2 * nc:]
    grad *= scale
    return val, (grad[..., 0] if squeeze else grad)


@dataclass
class LossTerms:
    l_rgb: float
    l_depth: float
    l_sem: float
    total: float
    d_color: np.ndarray | None = None
    d_depth: np.ndarray | None = None
    d_sem: np.ndarray | None = None


def _check(name, a, b):
    if a.shape != b.shape:
        raise InputError(f"{name} ground truth shape {b.shape} does not match render {a.shape}")


def losses(buffers, gt_rgb, gt_depth, gt_sem, with_grad: bool = False,
           weights=(W_RGB, W_DEPTH, W_SEM), reduction: str = "mean") -> LossTerms:
    """L_rgb = mean|I^-I| + (1 - SSIM); L_depth = mean|D^-D| over valid depth; L_sem = mean|S^-S|.

    With ``reduction="sum"`` every mean becomes a sum over its elements
    (pixels and channels, valid depth pixels, SSIM windows and channels).
    Gradients, when requested, are of `total` with respect to the rendered buffers.
    """
    if reduction not in ("mean", "sum"):
        raise ValueError(f"unknown reduction {reduction!r}")
    gt_rgb = np.asarray(gt_rgb, dtype=np.float64)
    gt_depth = np.asarray(gt_depth, dtype=np.float64)
    gt_sem = np.asarray(gt_sem, dtype=np.float64)
    _check("rgb", buffers.color, gt_rgb)
    _check("depth", buffers.depth, gt_depth)
    _check("semantic", buffers.sem, gt_sem)
    wr, wd, ws = weights

    h, w = gt_depth.shape
    valid = gt_depth > 0
    nvalid = int(valid.sum())
    if reduction == "mean":
        n_l1, n_ssim, n_depth, n_sem = gt_rgb.size, 1.0, nvalid, gt_sem.size
    else:
        n_ssim = (h - SSIM_WINDOW + 1) * (w - SSIM_WINDOW + 1) * gt_rgb.shape[2]
        n_l1, n_depth, n_sem = 1.0, 1.0, 1.0

    rc = buffers.color - gt_rgb
    l1 = np.abs(rc).sum() / n_l1
    if with_grad:
        s, ds = ssim(buffers.color, gt_rgb, with_grad=True)
    else:
        s = ssim(buffers.color, gt_rgb)
    l_rgb = l1 + n_ssim * (1.0 - s)

    rd = np.where(valid, buffers.depth - gt_depth, 0.0)
    l_depth = np.abs(rd).sum() / n_depth if nvalid else 0.0

    rs = buffers.sem - gt_sem
    l_sem = np.abs(rs).sum() / n_sem
    total = wr * l_rgb + wd * l_depth + ws * l_sem
    out = LossTerms(float(l_rgb), float(l_depth), float(l_sem), float(total))
    if with_grad:
        out.d_color = wr * (np.sign(rc) / n_l1 - n_ssim * ds)
        out.d_depth = wd * (np.sign(rd) / n_depth if nvalid else np.zeros_like(rd))
        out.d_sem = ws * np.sign(rs) / n_sem
    return out
