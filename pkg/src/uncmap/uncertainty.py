"""Per-Gaussian geometric, semantic and appearance uncertainty.

Geometric and semantic uncertainty come from diagonal-Gaussian variational
perturbations fitted by maximizing a Monte Carlo ELBO with the map frozen.
Appearance uncertainty is the log-determinant of each primitive's
Fisher-information block built from renderer Jacobians.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .gaussians import GaussianMap, GaussianParams, default_class_embeddings
from .io import Frame
from .losses import losses
from .renderer import APPEARANCE_DIM, FAR, render
from .rng import stage_rng
from .sgm_builder import Adam, frame_targets


class EstimationError(RuntimeError):
    def __init__(self, message: str, primitives=None):
        extra = ""
        if primitives is not None and len(primitives):
            extra = f"; primitives involved: {list(map(int, primitives[:10]))}"
        super().__init__(message + extra)
        self.primitives = primitives


GEOMETRIC = "geometric"
SEMANTIC = "semantic"


@dataclass(frozen=True)
class Priors:
    delta: float = 0.0025
    eta: float = 0.1
    epsilon: float = 0.0025

    def __post_init__(self):
        if not (self.delta > 0 and 0 < self.eta < 1 and self.epsilon > 0):
            raise ValueError("priors need delta > 0, 0 < eta < 1, epsilon > 0")

    def scale_std(self, e: np.ndarray) -> np.ndarray:
        # moment-matched Gaussian stand-in for U(-eta e, eta e)
        return self.eta * np.asarray(e, dtype=np.float64) / np.sqrt(3.0)


@dataclass
class UncertaintyConfig:
    n_samples: int = 8
    steps: int = 200
    semantic_steps: int | None = None  # defaults to `steps`
    sigma_obs: float = 0.1
    lr_mean: float = 0.1  # times the prior std of each coordinate
    lr_logstd: float = 0.05
    lam: float = 1e-6
    seed: int = 0
    far: float = FAR
    threads: int | None = None


@dataclass
class VariationalParams:
    mean_mu: np.ndarray
    logstd_mu: np.ndarray
    mean_e: np.ndarray
    logstd_e: np.ndarray
    mean_s: np.ndarray
    logstd_s: np.ndarray

    FIELDS = ("mean_mu", "logstd_mu", "mean_e", "logstd_e", "mean_s", "logstd_s")

    @classmethod
    def initial(cls, m: GaussianMap, priors: Priors) -> "VariationalParams":
        n = len(m)
        z = np.zeros((n, 3))
        return cls(
            z.copy(), np.full((n, 3), np.log(priors.delta / 2)),
            z.copy(), np.log(priors.scale_std(m.e) / 2),
            z.copy(), np.full((n, 3), np.log(priors.epsilon / 2)),
        )

    def copy(self) -> "VariationalParams":
        return VariationalParams(*(getattr(self, f).copy() for f in self.FIELDS))

    std_mu = property(lambda self: np.exp(self.logstd_mu))
    std_e = property(lambda self: np.exp(self.logstd_e))
    std_s = property(lambda self: np.exp(self.logstd_s))

    def equals(self, other: "VariationalParams") -> bool:
        return all(np.array_equal(getattr(self, f), getattr(other, f)) for f in self.FIELDS)


def kl_diag_gaussian(mean, logstd, prior_std) -> float:
    """Sum over entries of KL(N(mean, std^2) || N(0, prior_std^2))."""
    mean = np.asarray(mean, dtype=np.float64)
    logstd = np.asarray(logstd, dtype=np.float64)
    p = np.broadcast_to(np.asarray(prior_std, dtype=np.float64), mean.shape)
    dlog = logstd - np.log(p)  # exactly 0 when the scales coincide
    return float(np.sum(0.5 * (np.exp(2 * dlog) + mean**2 / p**2 - 1.0) - dlog))


def _kl_grads(mean, logstd, prior_std):
    p2 = np.asarray(prior_std, dtype=np.float64) ** 2
    return mean / p2, np.exp(2 * logstd) / p2 - 1.0


def kl_term(vp: VariationalParams, m: GaussianMap, priors: Priors, which: str) -> float:
    if which == GEOMETRIC:
        return kl_diag_gaussian(vp.mean_mu, vp.logstd_mu, priors.delta) + kl_diag_gaussian(
            vp.mean_e, vp.logstd_e, priors.scale_std(m.e)
        )
    if which == SEMANTIC:
        return kl_diag_gaussian(vp.mean_s, vp.logstd_s, priors.epsilon)
    raise ValueError(f"unknown perturbation group {which!r}")


def draw_noise(n: int, n_samples: int, which: str, seed: int) -> np.ndarray:
    """Standard-normal draws shared across evaluations (common random numbers).

    Shape (n_samples, n, 6) for geometric (mu then e), (n_samples, n, 3) for semantic.
    Draws come in antithetic pairs (eps, -eps) so the sample mean is exactly
    zero and likelihood terms linear in the perturbation cancel.
    """
    width = 6 if which == GEOMETRIC else 3
    half = stage_rng(seed, "elbo-noise", which).standard_normal(((n_samples + 1) // 2, n, width))
    return np.concatenate([half, -half])[:n_samples]


class _Objective:
    """Monte Carlo ELBO over a frozen map and fixed frames."""

    def __init__(self, m: GaussianMap, frames: list[Frame], priors: Priors, which: str,
                 cfg: UncertaintyConfig, table=None):
        if which not in (GEOMETRIC, SEMANTIC):
            raise ValueError(f"unknown perturbation group {which!r}")
        self.map = m
        self.frames = frames
        self.priors = priors
        self.which = which
        self.cfg = cfg
        self.params = m.to_params()
        self.e = m.e
        self.targets = [frame_targets(f, table or default_class_embeddings()) for f in frames]
        self.scale = 1.0 / (2 * cfg.sigma_obs**2)
        if which == SEMANTIC:
            # geometry is fixed, so blend weights are too; render once per frame
            self.base = [render(self.params, f.cam, with_grad=False, far=cfg.far, threads=cfg.threads)
                         for f in frames]
            self.fixed = [losses(b, *t, reduction="sum") for b, t in zip(self.base, self.targets)]

    def _frame_loglik_geometric(self, chi_mu, chi_e, want_grad):
        p = self.params
        e_new = np.maximum(self.e + chi_e, 1e-6)
        pert = GaussianParams(p.mu + chi_mu, np.log(e_new), p.q, p.logit_alpha, p.c, p.s)
        ll = 0.0
        g_mu = np.zeros_like(chi_mu)
        g_e = np.zeros_like(chi_e)
        for fr, tgt in zip(self.frames, self.targets):
            buf = render(pert, fr.cam, with_grad=want_grad, far=self.cfg.far, threads=self.cfg.threads)
            lt = losses(buf, *tgt, with_grad=want_grad, reduction="sum")
            ll -= self.scale * lt.total
            if want_grad:
                gr = buf.backward(lt.d_color, lt.d_depth, lt.d_sem)
                g_mu -= self.scale * gr.mu
                g_e -= self.scale * gr.log_e / e_new
        if not np.isfinite(ll):
            raise EstimationError("non-finite sample log-likelihood",
                                  np.flatnonzero(~np.all(np.isfinite(chi_mu), axis=1)))
        return ll, g_mu, g_e

    def _frame_loglik_semantic(self, chi_s, want_grad):
        s_new = self.params.s + chi_s
        ll = 0.0
        g_s = np.zeros_like(chi_s)
        ws = 0.5
        for buf, tgt, fixed in zip(self.base, self.targets, self.fixed):
            sem = buf.resemantic(s_new)
            rs = sem - tgt[2]
            l_sem = np.abs(rs).sum()
            total = fixed.total - ws * fixed.l_sem + ws * l_sem
            ll -= self.scale * total
            if want_grad:
                g_s -= self.scale * buf.sem_backward(ws * np.sign(rs))
        if not np.isfinite(ll):
            raise EstimationError("non-finite sample log-likelihood")
        return ll, g_s

    def value_and_grad(self, vp: VariationalParams, noise: np.ndarray, want_grad: bool = True):
        n_samples = noise.shape[0]
        kl = kl_term(vp, self.map, self.priors, self.which)
        ell = 0.0
        grads = {f: np.zeros_like(getattr(vp, f)) for f in VariationalParams.FIELDS}
        if self.which == GEOMETRIC:
            smu, se = vp.std_mu, vp.std_e
            for k in range(n_samples):
                eps_mu, eps_e = noise[k, :, :3], noise[k, :, 3:]
                chi_mu = vp.mean_mu + smu * eps_mu
                chi_e = vp.mean_e + se * eps_e
                ll, g_mu, g_e = self._frame_loglik_geometric(chi_mu, chi_e, want_grad)
                ell += ll / n_samples
                if want_grad:
                    grads["mean_mu"] += g_mu / n_samples
                    grads["logstd_mu"] += g_mu * smu * eps_mu / n_samples
                    grads["mean_e"] += g_e / n_samples
                    grads["logstd_e"] += g_e * se * eps_e / n_samples
            if want_grad:
                for mname, lname, pstd in (("mean_mu", "logstd_mu", self.priors.delta),
                                           ("mean_e", "logstd_e", self.priors.scale_std(self.e))):
                    gm, gl = _kl_grads(getattr(vp, mname), getattr(vp, lname), pstd)
                    grads[mname] -= gm
                    grads[lname] -= gl
        else:
            ss = vp.std_s
            for k in range(n_samples):
                eps_s = noise[k]
                ll, g_s = self._frame_loglik_semantic(vp.mean_s + ss * eps_s, want_grad)
                ell += ll / n_samples
                if want_grad:
                    grads["mean_s"] += g_s / n_samples
                    grads["logstd_s"] += g_s * ss * eps_s / n_samples
            if want_grad:
                gm, gl = _kl_grads(vp.mean_s, vp.logstd_s, self.priors.epsilon)
                grads["mean_s"] -= gm
                grads["logstd_s"] -= gl
        return ell - kl, ell, kl, grads


def elbo(m: GaussianMap, frames: list[Frame], vp: VariationalParams, priors: Priors, which: str,
         n_samples: int = 8, seed: int = 0, cfg: UncertaintyConfig | None = None, noise=None,
         parts: bool = False):
    """Monte Carlo ELBO: mean sample log-likelihood minus closed-form KL to the prior."""
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    cfg = cfg or UncertaintyConfig()
    obj = _Objective(m, frames, priors, which, cfg)
    if noise is None:
        noise = draw_noise(len(m), n_samples, which, seed)
    value, ell, kl, _ = obj.value_and_grad(vp, noise, want_grad=False)
    return (value, ell, kl) if parts else value


def fit_variational(m: GaussianMap, frames: list[Frame], priors: Priors, which: str, steps: int | None = None,
                    seed: int = 0, cfg: UncertaintyConfig | None = None, checkpoints: list | None = None,
                    checkpoint_every: int = 50) -> VariationalParams:
    """Ascend the ELBO with Adam from means 0, std = prior std / 2.

    The Monte Carlo draws are fixed for the whole fit, so the objective is a
    deterministic function of the variational parameters. Adam steps freely
    and the best iterate seen is kept and returned; `checkpoints`, when
    given, receives (step, elbo of the incumbent) every `checkpoint_every`
    steps, so recorded values never decrease.
    """
    cfg = cfg or UncertaintyConfig()
    steps = cfg.steps if steps is None else steps
    vp = VariationalParams.initial(m, priors)
    if steps <= 0 or len(m) == 0:
        return vp
    obj = _Objective(m, frames, priors, which, cfg)
    noise = draw_noise(len(m), cfg.n_samples, which, seed)
    if which == GEOMETRIC:
        names = ("mean_mu", "logstd_mu", "mean_e", "logstd_e")
        lrs = {"mean_mu": cfg.lr_mean * priors.delta, "logstd_mu": cfg.lr_logstd,
               "mean_e": cfg.lr_mean * priors.scale_std(m.e), "logstd_e": cfg.lr_logstd}
    else:
        names = ("mean_s", "logstd_s")
        lrs = {"mean_s": cfg.lr_mean * priors.epsilon, "logstd_s": cfg.lr_logstd}
    opt = Adam(lrs, eps=1e-12)
    best, best_value = vp, -np.inf
    for step in range(steps + 1):
        value, _, _, grads = obj.value_and_grad(vp, noise, want_grad=step < steps)
        if value > best_value:
            best, best_value = vp, value
        if checkpoints is not None and step % checkpoint_every == 0:
            checkpoints.append((step, best_value))
        if step == steps:
            break
        vp = vp.copy()
        opt.step({k: getattr(vp, k) for k in names}, {k: -grads[k] for k in names})
    return best


def geometric_uncertainty(vp: VariationalParams) -> np.ndarray:
    return np.linalg.norm(vp.std_mu, axis=1) + np.linalg.norm(vp.std_e, axis=1)


def semantic_uncertainty(vp: VariationalParams) -> np.ndarray:
    return np.linalg.norm(vp.std_s, axis=1)


def fisher_logdet(F: np.ndarray, lam: float = 1e-6) -> np.ndarray:
    """log det(F + lam I) for a stack of symmetric PSD blocks (..., d, d)."""
    d = F.shape[-1]
    sign, logdet = np.linalg.slogdet(F + lam * np.eye(d))
    if np.any(sign <= 0):
        raise EstimationError("regularized Fisher block is not positive definite", np.flatnonzero(sign <= 0))
    return logdet


def fisher_blocks(m: GaussianMap, frames: list[Frame], lam: float = 1e-6, far: float = FAR,
                  threads: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Per-primitive 14x14 Fisher blocks over all frames and their log-det scores."""
    params = m.to_params()
    F = np.zeros((len(m), APPEARANCE_DIM, APPEARANCE_DIM))
    for fr in frames:
        F += render(params, fr.cam, with_grad=True, far=far, threads=threads).fisher_blocks()
    F = 0.5 * (F + np.swapaxes(F, 1, 2))
    return F, fisher_logdet(F, lam)


@dataclass
class UncertaintyReport:
    geometric: VariationalParams
    semantic: VariationalParams
    fisher: np.ndarray = field(repr=False)


def estimate_all(m: GaussianMap, frames: list[Frame], priors: Priors | None = None,
                 cfg: UncertaintyConfig | None = None, report: list | None = None) -> GaussianMap:
    """Attach U^g, U^s, U^a to every primitive; other fields are untouched."""
    priors = priors or Priors()
    cfg = cfg or UncertaintyConfig()
    if len(m) == 0:
        return m
    vp_g = fit_variational(m, frames, priors, GEOMETRIC, cfg.steps, seed=cfg.seed, cfg=cfg)
    sem_steps = cfg.steps if cfg.semantic_steps is None else cfg.semantic_steps
    vp_s = fit_variational(m, frames, priors, SEMANTIC, sem_steps, seed=cfg.seed, cfg=cfg)
    F, ua = fisher_blocks(m, frames, cfg.lam, cfg.far, cfg.threads)
    ug = geometric_uncertainty(vp_g)
    us = semantic_uncertainty(vp_s)
    for name, arr in (("U^g", ug), ("U^s", us), ("U^a", ua)):
        if not np.all(np.isfinite(arr)):
            raise EstimationError(f"non-finite {name}", np.flatnonzero(~np.isfinite(arr)))
    if report is not None:
        report.append(UncertaintyReport(vp_g, vp_s, F))
    return m.with_uncertainty(ug, us, ua)


def with_steps(cfg: UncertaintyConfig, steps: int) -> UncertaintyConfig:
    return replace(cfg, steps=steps)
