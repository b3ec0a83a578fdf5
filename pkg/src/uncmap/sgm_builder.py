"""Semantic Gaussian Map construction: init from RGB-D, Adam on rendering losses, prune."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .gaussians import GaussianMap, GaussianParams, default_class_embeddings, embed_labels, init_from_cloud
from .geometry import InputError, PointCloud, frame_to_cloud
from .io import Frame
from .losses import losses
from .renderer import FAR, render


class OptimizationError(RuntimeError):
    def __init__(self, message: str, iteration: int):
        super().__init__(f"{message} at iteration {iteration}")
        self.iteration = iteration


TAU_E = 0.015
TAU_ALPHA = 0.005


@dataclass
class BuildConfig:
    n_iters: int = 500
    tau_e: float = TAU_E
    tau_alpha: float = TAU_ALPHA
    stride: int = 2
    seed: int = 0
    lr_mu: float = 1.6e-4  # multiplied by the scene extent
    lr_e: float = 5e-3
    lr_r: float = 1e-3
    lr_alpha: float = 5e-2
    lr_c: float = 2.5e-2
    lr_s: float = 2.5e-2
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-15
    far: float = FAR
    threads: int | None = None


class Adam:
    """Per-group Adam over a dict of arrays."""

    def __init__(self, lrs: dict[str, float], beta1=0.9, beta2=0.999, eps=1e-15):
        self.lrs = dict(lrs)
        self.b1, self.b2, self.eps = beta1, beta2, eps
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}
        self.t = 0

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray], scale: float = 1.0) -> None:
        self.t += 1
        b1t = 1 - self.b1**self.t
        b2t = 1 - self.b2**self.t
        for name, lr in self.lrs.items():
            g = grads[name]
            if name not in self.m:
                self.m[name] = np.zeros_like(g)
                self.v[name] = np.zeros_like(g)
            m, v = self.m[name], self.v[name]
            m *= self.b1
            m += (1 - self.b1) * g
            v *= self.b2
            v += (1 - self.b2) * g * g
            params[name] -= scale * lr * (m / b1t) / (np.sqrt(v / b2t) + self.eps)


def prune(m: GaussianMap, tau_e: float = TAU_E, tau_alpha: float = TAU_ALPHA) -> GaussianMap:
    """Keep primitives with ||e||_2 > tau_e and alpha > tau_alpha, preserving order."""
    if tau_e < 0 or not (0 <= tau_alpha <= 1):
        raise InputError("tau_e must be >= 0 and tau_alpha in [0, 1]")
    if len(m) == 0:
        return m
    keep = (np.linalg.norm(m.e, axis=1) > tau_e) & (m.alpha > tau_alpha)
    return m.subset(np.flatnonzero(keep))


def frame_targets(fr: Frame, table) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Ground-truth (rgb, depth, sem) arrays for one frame; no-return pixels get zero semantics."""
    sem = embed_labels(fr.labels, table) if fr.sem is None else np.array(fr.sem, dtype=np.float64)
    sem[~(fr.depth > 0)] = 0.0
    return np.asarray(fr.rgb, float), np.asarray(fr.depth, float), sem


def frames_cloud(frames: list[Frame], stride: int) -> PointCloud:
    return PointCloud.concatenate([frame_to_cloud(f.rgb, f.depth, f.labels, f.cam, stride) for f in frames])


def scene_extent(points: np.ndarray) -> float:
    if len(points) == 0:
        return 1.0
    return max(float(np.linalg.norm(points - points.mean(axis=0), axis=1).max()), 1e-3)


def optimize(params: GaussianParams, frames: list[Frame], cfg: BuildConfig, table, extent: float,
             history: list | None = None) -> GaussianParams:
    targets = [frame_targets(f, table) for f in frames]
    groups = {
        "mu": cfg.lr_mu * extent, "log_e": cfg.lr_e, "q": cfg.lr_r,
        "logit_alpha": cfg.lr_alpha, "c": cfg.lr_c, "s": cfg.lr_s,
    }
    opt = Adam(groups, cfg.beta1, cfg.beta2, cfg.adam_eps)
    state = {g: getattr(params, g) for g in GaussianParams.GROUPS}
    for it in range(cfg.n_iters):
        k = it % len(frames)
        p = GaussianParams(**state)
        buf = render(p, frames[k].cam, with_grad=True, far=cfg.far, threads=cfg.threads)
        lt = losses(buf, *targets[k], with_grad=True)
        if not np.isfinite(lt.total):
            raise OptimizationError("total loss is not finite", it)
        if history is not None:
            history.append(lt)
        g = buf.backward(lt.d_color, lt.d_depth, lt.d_sem)
        grads = {"mu": g.mu, "log_e": g.log_e, "q": g.q, "logit_alpha": g.logit_alpha, "c": g.c, "s": g.s}
        opt.step(state, grads)
        state["q"] /= np.linalg.norm(state["q"], axis=1, keepdims=True)
        np.clip(state["c"], 0.0, 1.0, out=state["c"])
        np.clip(state["log_e"], np.log(1e-4), np.log(2.0), out=state["log_e"])
        if not all(np.all(np.isfinite(v)) for v in state.values()):
            raise OptimizationError("parameters became non-finite", it)
    return GaussianParams(**state)


def build(frames: list[Frame], cfg: BuildConfig | None = None, class_embeddings=None,
          history: list | None = None) -> GaussianMap:
    """Construct a pruned Semantic Gaussian Map from RGB-D frames."""
    cfg = cfg or BuildConfig()
    if not frames:
        raise InputError("build needs at least one frame")
    shape = frames[0].cam.shape
    if any(f.cam.shape != shape for f in frames):
        raise InputError("all frames must share the camera dimensions")
    table = class_embeddings or default_class_embeddings()
    cloud = frames_cloud(frames, cfg.stride)
    init = init_from_cloud(cloud, table)
    if cfg.n_iters <= 0:
        return prune(init, cfg.tau_e, cfg.tau_alpha)
    params = optimize(init.to_params(), frames, cfg, table, scene_extent(cloud.points), history)
    return prune(params.to_map(), cfg.tau_e, cfg.tau_alpha)
