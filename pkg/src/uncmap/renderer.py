"""Tile-based differentiable splatting rasterizer.

Each primitive is projected to an image-plane Gaussian (center, 2x2
covariance), binned into 16x16 pixel tiles by its 3-sigma box, and blended
front to back per pixel. With ``with_grad`` the renderer keeps, for every
contributing (pixel, primitive) fragment, the partial derivatives of the
seven pixel outputs (rgb, depth, 3 semantic channels) with respect to that
primitive's internal parameters. Those per-fragment Jacobians serve both
loss backpropagation and per-primitive Fisher blocks.

Internal parameter layout per primitive (17 numbers)::

    mu(3) | log_e(3) | q(4, raw) | logit_alpha(1) | c(3) | s(3)
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .gaussians import GaussianMap, GaussianParams, GaussianPrimitive, quat_rotmat_jacobian, quat_to_rotmat
from .geometry import Camera

EPS2D = 0.3
ALPHA_MAX = 0.999
T_MIN = 1e-4
FAR = 10.0
Z_NEAR = 0.05
TILE = 16

N_OUT = 7  # r, g, b, depth, s0, s1, s2
N_GEO = 11  # mu, log_e, q, logit_alpha
N_PARAM = 17
APPEARANCE_DIM = 14  # geometric block + color

PARAM_SLICES = {
    "mu": slice(0, 3),
    "log_e": slice(3, 6),
    "q": slice(6, 10),
    "logit_alpha": slice(10, 11),
    "c": slice(11, 14),
    "s": slice(14, 17),
}


def default_threads() -> int:
    env = os.environ.get("UNCMAP_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


@dataclass
class Splat2D:
    mu2: np.ndarray
    cov2: np.ndarray
    z: float
    index: int


# -- projection ------------------------------------------------------------


@dataclass
class _Projected:
    idx: np.ndarray  # source primitive index of each kept splat
    uv: np.ndarray
    z: np.ndarray
    cov: np.ndarray  # (m, 3): A, B, C of [[A, B], [B, C]]
    conic: np.ndarray  # (m, 3): inverse covariance entries a, b, c
    alpha: np.ndarray
    bbox: np.ndarray  # (m, 4) umin, umax, vmin, vmax inclusive
    feat: np.ndarray  # (m, 7) c, z, s
    duv: np.ndarray | None = None  # (m, 2, 10)
    dcov: np.ndarray | None = None  # (m, 3, 10)
    dz_dmu: np.ndarray | None = None  # (m, 3)
    depth_rank: np.ndarray | None = None  # position of each splat in (z, index) order
    dgeo: list | None = None  # five (m, 10) rows: du, dv, dA, dB, dC


def _as_params(scene) -> GaussianParams:
    if isinstance(scene, GaussianParams):
        return scene
    if isinstance(scene, GaussianMap):
        return scene.to_params()
    raise TypeError(f"cannot render {type(scene).__name__}")


def _project_all(p: GaussianParams, cam: Camera, with_grad: bool, eps2d: float = EPS2D) -> _Projected:
    W = cam.rotation.T  # world -> camera rotation
    pc = (p.mu - cam.translation) @ cam.rotation
    x, y, z = pc[:, 0], pc[:, 1], pc[:, 2]
    front = z > Z_NEAR
    zs = np.where(front, z, 1.0)
    fx, fy = cam.fx, cam.fy
    u = fx * x / zs + cam.cu
    v = fy * y / zs + cam.cv

    n = len(p)
    J = np.zeros((n, 2, 3))
    J[:, 0, 0] = fx / zs
    J[:, 0, 2] = -fx * x / zs**2
    J[:, 1, 1] = fy / zs
    J[:, 1, 2] = -fy * y / zs**2
    M = J @ W
    qn = np.linalg.norm(p.q, axis=1)
    qu = p.q / qn[:, None]
    R = quat_to_rotmat(qu)
    e = np.exp(p.log_e)
    RE = R * e[:, None, :]
    Sigma = RE @ np.swapaxes(RE, 1, 2)
    SMt = Sigma @ np.swapaxes(M, 1, 2)  # (n, 3, 2)
    cov2 = M @ SMt
    A = cov2[:, 0, 0] + eps2d
    B = 0.5 * (cov2[:, 0, 1] + cov2[:, 1, 0])
    C = cov2[:, 1, 1] + eps2d
    det = A * C - B * B
    mid = 0.5 * (A + C)
    lam = mid + np.sqrt(np.maximum(mid * mid - det, 0.0))
    rad = 3.0 * np.sqrt(lam)
    umin = np.maximum(np.ceil(u - rad), 0)
    umax = np.minimum(np.floor(u + rad), cam.width - 1)
    vmin = np.maximum(np.ceil(v - rad), 0)
    vmax = np.minimum(np.floor(v + rad), cam.height - 1)
    keep = front & (umin <= umax) & (vmin <= vmax) & np.isfinite(rad)
    k = np.flatnonzero(keep)

    conic = np.stack([C / det, -B / det, A / det], axis=1)[k]
    alpha = p.alpha[k]
    feat = np.concatenate([p.c[k], z[k, None], p.s[k]], axis=1)
    proj = _Projected(
        idx=k, uv=np.stack([u, v], axis=1)[k], z=z[k], cov=np.stack([A, B, C], axis=1)[k],
        conic=conic, alpha=alpha, bbox=np.stack([umin, umax, vmin, vmax], axis=1)[k].astype(np.int64),
        feat=feat,
    )
    rank = np.empty(len(k), dtype=np.int64)
    rank[np.lexsort((k, z[k]))] = np.arange(len(k))
    proj.depth_rank = rank
    if not with_grad or len(k) == 0:
        return proj

    m = len(k)
    Jk, Mk, Wk = J[k], M[k], W
    xk, yk, zk = x[k], y[k], z[k]
    Sk, SMtk, Rk, ek, quk, qnk = Sigma[k], SMt[k], R[k], e[k], qu[k], qn[k]

    # d(u, v)/d mu = J W
    duv = np.zeros((m, 2, 10))
    duv[:, :, 0:3] = Mk

    dcov_full = np.zeros((m, 10, 2, 2))
    # mu directions: dp = W[:, j]; perturbs J, hence M
    for j in range(3):
        dp = Wk[:, j]
        dJ = np.zeros((m, 2, 3))
        dJ[:, 0, 0] = -fx * dp[2] / zk**2
        dJ[:, 0, 2] = -fx * dp[0] / zk**2 + 2 * fx * xk * dp[2] / zk**3
        dJ[:, 1, 1] = -fy * dp[2] / zk**2
        dJ[:, 1, 2] = -fy * dp[1] / zk**2 + 2 * fy * yk * dp[2] / zk**3
        dM = dJ @ Wk
        t1 = dM @ SMtk
        dcov_full[:, j] = t1 + np.swapaxes(t1, 1, 2)
    # log-scale directions: dSigma = 2 e_j^2 R_j R_j^T
    MR = Mk @ Rk  # (m, 2, 3)
    for j in range(3):
        col = MR[:, :, j]
        dcov_full[:, 3 + j] = 2.0 * (ek[:, j] ** 2)[:, None, None] * col[:, :, None] * col[:, None, :]
    # raw quaternion directions through normalization
    dRdqu = quat_rotmat_jacobian(quk)  # (m, 4, 3, 3)
    P = (np.eye(4)[None] - quk[:, :, None] * quk[:, None, :]) / qnk[:, None, None]  # dqu/dq
    dRdq = np.einsum("mlab,mlk->mkab", dRdqu, P)
    E2 = ek**2
    for kq in range(4):
        dR = dRdq[:, kq]
        t = (dR * E2[:, None, :]) @ np.swapaxes(Rk, 1, 2)
        dS = t + np.swapaxes(t, 1, 2)
        dcov_full[:, 6 + kq] = Mk @ dS @ np.swapaxes(Mk, 1, 2)
    dcov = np.stack(
        [dcov_full[:, :, 0, 0], 0.5 * (dcov_full[:, :, 0, 1] + dcov_full[:, :, 1, 0]), dcov_full[:, :, 1, 1]], axis=1
    )
    proj.duv = duv
    proj.dcov = dcov
    proj.dgeo = [np.ascontiguousarray(d) for d in np.concatenate([duv, dcov], axis=1).transpose(1, 0, 2)]
    proj.dz_dmu = np.repeat(W[2][None, :], m, axis=0)
    return proj


def project_splat(g: GaussianPrimitive, cam: Camera, eps2d: float = EPS2D) -> Splat2D | None:
    """Image-plane footprint of one primitive, or None when culled."""
    p = GaussianParams.from_natural(g.mu[None], g.e[None], g.r[None], [max(g.alpha, 1e-12)], g.c[None], g.s[None])
    pr = _project_all(p, cam, with_grad=False, eps2d=eps2d)
    if len(pr.idx) == 0:
        return None
    A, B, C = pr.cov[0]
    return Splat2D(pr.uv[0].copy(), np.array([[A, B], [B, C]]), float(pr.z[0]), 0)


def alpha_at(splat: Splat2D, alpha: float, pixel) -> float:
    d = np.asarray(pixel, dtype=np.float64) - splat.mu2
    m = d @ np.linalg.solve(splat.cov2, d)
    return float(min(alpha * np.exp(-0.5 * m), ALPHA_MAX))


# -- rasterization -----------------------------------------------------------


@dataclass
class _Fragments:
    """Contributing fragments, ordered by (tile, pixel, depth, primitive)."""

    splat: np.ndarray  # index into the projected splat list
    pid: np.ndarray  # flat pixel id v * W + u
    w: np.ndarray  # blend weight
    dout_da: np.ndarray | None = None  # (F, 7)
    q: np.ndarray | None = None  # (F, 5): d alpha' / d(u, v, A, B, C), zero where clamped
    q_alpha: np.ndarray | None = None  # (F,): d alpha' / d logit


def _gen_fragments(pr: _Projected, width: int, height: int):
    bb = pr.bbox
    bw = bb[:, 1] - bb[:, 0] + 1
    bh = bb[:, 3] - bb[:, 2] + 1
    counts = bw * bh
    total = int(counts.sum())
    sp = np.repeat(np.arange(len(counts)), counts)
    offs = np.cumsum(counts) - counts
    local = np.arange(total) - np.repeat(offs, counts)
    bwr = bw[sp]
    px = bb[sp, 0] + local % bwr
    py = bb[sp, 2] + local // bwr
    return sp, px, py


def _blend_block(pr, sp, px, py, width, with_grad, far):
    """Blend a set of fragments whose pixels do not appear in any other block."""
    pid = py * width + px
    # one key orders by pixel, then depth, then primitive index
    order = np.argsort(pid * len(pr.idx) + pr.depth_rank[sp], kind="stable")
    sp, pid = sp[order], pid[order]
    dx = px[order] - pr.uv[sp, 0]
    dy = py[order] - pr.uv[sp, 1]
    con = pr.conic[sp]
    y1 = con[:, 0] * dx + con[:, 1] * dy
    y2 = con[:, 1] * dx + con[:, 2] * dy
    araw = pr.alpha[sp] * np.exp(-0.5 * (dx * y1 + dy * y2))
    clamped = araw > ALPHA_MAX
    a = np.minimum(araw, ALPHA_MAX)

    nf = len(sp)
    start = np.empty(nf, dtype=bool)
    start[0] = True
    start[1:] = pid[1:] != pid[:-1]
    seg = np.cumsum(start) - 1
    seg_start = np.flatnonzero(start)
    seg_end = np.r_[seg_start[1:], nf] - 1
    nseg = len(seg_start)

    # segmented exclusive log-transmittance
    la = np.log1p(-a)
    cl = np.cumsum(la)
    base = cl[seg_start] - la[seg_start]
    logT = cl - la - base[seg]
    T = np.exp(logT)
    incl = T >= T_MIN
    a_in = np.where(incl, a, 0.0)
    w = a_in * T
    # transmittance after the last included fragment of each pixel
    la_in = np.where(incl, la, 0.0)
    cli = np.cumsum(la_in)
    tfin = np.exp(cli[seg_end] - (cli[seg_start] - la_in[seg_start]))

    seg_pid = pid[seg_start]
    feat = pr.feat[sp]
    wf = w[:, None] * feat
    out = np.add.reduceat(wf, seg_start, axis=0)
    out[:, 3] += tfin * far
    acc = np.add.reduceat(w, seg_start)

    if with_grad:
        # contribution strictly behind each fragment, background included
        cw = np.cumsum(wf, axis=0)
        behind = cw[seg_end][seg] - cw
        behind[:, 3] += tfin[seg] * far
        dout_da = T[:, None] * feat - behind / (1.0 - a)[:, None]

        keep = np.flatnonzero(incl)
        spk = sp[keep]
        y1k, y2k = y1[keep], y2[keep]
        ak = a[keep] * ~clamped[keep]
        # d alpha'/d power = alpha'; power depends on (u, v, A, B, C) through these
        q = ak[:, None] * np.stack([y1k, y2k, 0.5 * y1k * y1k, y1k * y2k, 0.5 * y2k * y2k], axis=1)
        frag = _Fragments(spk, pid[keep], w[keep], dout_da[keep], q, ak * (1.0 - pr.alpha[spk]))
    else:
        frag = _Fragments(sp[incl], pid[incl], w[incl])
    return seg_pid, out, acc, tfin, frag


@dataclass
class ParamGrads:
    mu: np.ndarray
    log_e: np.ndarray
    q: np.ndarray
    logit_alpha: np.ndarray
    c: np.ndarray
    s: np.ndarray

    def as_array(self) -> np.ndarray:
        return np.concatenate([self.mu, self.log_e, self.q, self.logit_alpha[:, None], self.c, self.s], axis=1)


@dataclass(eq=False)
class RenderBuffers:
    color: np.ndarray
    depth: np.ndarray
    sem: np.ndarray
    acc: np.ndarray
    remainder: np.ndarray
    n_primitives: int
    far: float = FAR
    _proj: _Projected | None = None
    _frag: _Fragments | None = None
    _splat_order: tuple | None = None

    @property
    def shape(self) -> tuple[int, int]:
        return self.depth.shape

    @property
    def has_grad(self) -> bool:
        return self._frag is not None and self._frag.dout_da is not None

    def _require_grad(self):
        if not self.has_grad:
            raise RuntimeError("render was called without with_grad")

    def fragment_primitives(self) -> np.ndarray:
        return self._proj.idx[self._frag.splat]

    def weights_at(self, u: int, v: int) -> list[tuple[int, float]]:
        """(primitive, weight) pairs blended at pixel (u, v), front to back."""
        pid = v * self.shape[1] + u
        sel = np.flatnonzero(self._frag.pid == pid)
        return [(int(self._proj.idx[self._frag.splat[i]]), float(self._frag.w[i])) for i in sel]

    def _splat_sum(self, values: np.ndarray) -> np.ndarray:
        """Per-splat sums of fragment rows in a fixed order."""
        if self._splat_order is None:
            sp = self._frag.splat
            order = np.argsort(sp, kind="stable")
            starts = np.flatnonzero(np.r_[True, sp[order][1:] != sp[order][:-1]]) if len(sp) else np.zeros(0, np.int64)
            self._splat_order = (order, starts, sp[order][starts] if len(sp) else np.zeros(0, np.int64))
        order, starts, ids = self._splat_order
        out = np.zeros((len(self._proj.idx),) + values.shape[1:])
        if len(order):
            out[ids] = np.add.reduceat(values[order], starts, axis=0)
        return out

    def _da_dgeo(self, f: np.ndarray) -> np.ndarray:
        """d alpha'/d(mu, log_e, q, logit) for fragments `f`, shape (len(f), 11)."""
        fr, pr = self._frag, self._proj
        D = np.stack(pr.dgeo, axis=1)[fr.splat[f]]  # (f, 5, 10)
        out = np.empty((len(f), N_GEO))
        out[:, :10] = np.einsum("fk,fkj->fj", fr.q[f], D)
        out[:, 10] = fr.q_alpha[f]
        return out

    def pixel_jacobian(self, index: int, u: int, v: int) -> np.ndarray:
        """d(pixel outputs)/d(internal params of primitive `index`) as a (7, 17) array."""
        self._require_grad()
        out = np.zeros((N_OUT, N_PARAM))
        pid = v * self.shape[1] + u
        hit = np.flatnonzero((self._frag.pid == pid) & (self._proj.idx[self._frag.splat] == index))
        if len(hit) == 0:
            return out
        f = hit[0]
        sp = self._frag.splat[f]
        w = self._frag.w[f]
        out[:, :N_GEO] = np.outer(self._frag.dout_da[f], self._da_dgeo(np.array([f]))[0])
        out[3, 0:3] += w * self._proj.dz_dmu[sp]
        out[0:3, 11:14] += w * np.eye(3)
        out[4:7, 14:17] += w * np.eye(3)
        return out

    def backward(self, d_color=None, d_depth=None, d_sem=None) -> ParamGrads:
        """Accumulate per-primitive gradients of sum(cotangent * output)."""
        self._require_grad()
        h, w = self.shape
        g = np.zeros((h * w, N_OUT))
        if d_color is not None:
            g[:, 0:3] = np.asarray(d_color).reshape(-1, 3)
        if d_depth is not None:
            g[:, 3] = np.asarray(d_depth).reshape(-1)
        if d_sem is not None:
            g[:, 4:7] = np.asarray(d_sem).reshape(-1, 3)
        fr, pr = self._frag, self._proj
        gf = g[fr.pid]
        ga = np.einsum("fo,fo->f", gf, fr.dout_da)
        vals = np.empty((len(fr.w), 13))
        vals[:, 0:5] = ga[:, None] * fr.q
        vals[:, 5] = ga * fr.q_alpha
        vals[:, 6] = gf[:, 3] * fr.w
        vals[:, 7:10] = fr.w[:, None] * gf[:, 0:3]
        vals[:, 10:13] = fr.w[:, None] * gf[:, 4:7]
        S = self._splat_sum(vals)
        per = np.zeros((len(pr.idx), N_PARAM))
        if len(pr.idx):
            per[:, :10] = sum(S[:, k:k + 1] * pr.dgeo[k] for k in range(5))
            per[:, 10] = S[:, 5]
            per[:, 0:3] += S[:, 6:7] * pr.dz_dmu
            per[:, 11:14] = S[:, 7:10]
            per[:, 14:17] = S[:, 10:13]
        total = np.zeros((self.n_primitives, N_PARAM))
        total[pr.idx] = per
        return ParamGrads(
            total[:, 0:3], total[:, 3:6], total[:, 6:10], total[:, 10], total[:, 11:14], total[:, 14:17]
        )

    def fisher_blocks(self) -> np.ndarray:
        """Per-primitive sum over pixels and color channels of J J^T, J over (mu, log_e, q, logit_alpha, c).

        With J_c = dout_c/d alpha' * [D^T q, q_alpha] + w e_c per fragment and
        channel, the sums factor through per-splat 5x5 moments of q.
        """
        self._require_grad()
        fr, pr = self._frag, self._proj
        n = self.n_primitives
        out = np.zeros((n, APPEARANCE_DIM, APPEARANCE_DIM))
        if len(fr.w) == 0:
            return out
        dc = fr.dout_da[:, 0:3]
        kappa = np.einsum("fc,fc->f", dc, dc)
        qa = fr.q_alpha
        wv = fr.w
        # per-fragment moments: q q^T (15 unique kept dense), q*qa, qa^2, q*dc*w, qa*dc*w, w^2
        qq = (kappa[:, None, None] * fr.q[:, :, None] * fr.q[:, None, :]).reshape(len(wv), 25)
        cols = [qq, (kappa * qa)[:, None] * fr.q, (kappa * qa * qa)[:, None],
                ((dc * wv[:, None])[:, None, :] * fr.q[:, :, None]).reshape(len(wv), 15),
                qa[:, None] * dc * wv[:, None], (wv * wv)[:, None]]
        S = self._splat_sum(np.concatenate(cols, axis=1))
        m = len(pr.idx)
        D = np.stack(pr.dgeo, axis=1)  # (m, 5, 10)
        Mqq = S[:, 0:25].reshape(m, 5, 5)
        Mqa = S[:, 25:30]
        Maa = S[:, 30]
        Mqc = S[:, 31:46].reshape(m, 5, 3)
        Mac = S[:, 46:49]
        Mww = S[:, 49]
        F = np.zeros((m, APPEARANCE_DIM, APPEARANCE_DIM))
        Dt = np.swapaxes(D, 1, 2)
        F[:, :10, :10] = Dt @ Mqq @ D
        geo_a = np.einsum("mkj,mk->mj", D, Mqa)
        F[:, :10, 10] = geo_a
        F[:, 10, :10] = geo_a
        F[:, 10, 10] = Maa
        geo_c = Dt @ Mqc  # (m, 10, 3)
        F[:, :10, 11:14] = geo_c
        F[:, 11:14, :10] = np.swapaxes(geo_c, 1, 2)
        F[:, 10, 11:14] = Mac
        F[:, 11:14, 10] = Mac
        F[:, 11, 11] = F[:, 12, 12] = F[:, 13, 13] = Mww
        out[pr.idx] = F
        return out

    def resemantic(self, s_new: np.ndarray) -> np.ndarray:
        """Semantic image for replacement embeddings with the blend weights held fixed."""
        h, w = self.shape
        fr, pr = self._frag, self._proj
        vals = np.asarray(s_new, dtype=np.float64)[pr.idx[fr.splat]] * fr.w[:, None]
        sem = np.zeros((h * w, 3))
        for ch in range(3):
            sem[:, ch] = np.bincount(fr.pid, weights=vals[:, ch], minlength=h * w)
        return sem.reshape(h, w, 3)

    def sem_backward(self, d_sem: np.ndarray) -> np.ndarray:
        """Gradient of sum(d_sem * sem) with respect to the embeddings (fixed weights)."""
        fr, pr = self._frag, self._proj
        g = np.asarray(d_sem).reshape(-1, 3)[fr.pid] * fr.w[:, None]
        out = np.zeros((self.n_primitives, 3))
        out[pr.idx] = self._splat_sum(g)
        return out


def render(scene, cam: Camera, with_grad: bool = False, far: float = FAR, threads: int | None = None,
           eps2d: float = EPS2D) -> RenderBuffers:
    """Render color, depth and semantics; optionally keep fragment Jacobians."""
    p = _as_params(scene)
    h, w = cam.height, cam.width
    pr = _project_all(p, cam, with_grad, eps2d=eps2d)
    color = np.zeros((h * w, 3))
    depth = np.full(h * w, float(far))
    sem = np.zeros((h * w, 3))
    acc = np.zeros(h * w)
    rem = np.ones(h * w)
    empty = _Fragments(np.zeros(0, np.int64), np.zeros(0, np.int64), np.zeros(0),
                       *((np.zeros((0, N_OUT)), np.zeros((0, 5)), np.zeros(0)) if with_grad else ()))
    if len(pr.idx) == 0:
        return RenderBuffers(color.reshape(h, w, 3), depth.reshape(h, w), sem.reshape(h, w, 3),
                             acc.reshape(h, w), rem.reshape(h, w), len(p), far, pr, empty)

    sp, px, py = _gen_fragments(pr, w, h)
    # one block per row of tiles; pixel sets are disjoint across blocks
    band = py // TILE
    order = np.argsort(band, kind="stable")
    sp, px, py, band = sp[order], px[order], py[order], band[order]
    cuts = np.flatnonzero(np.r_[True, band[1:] != band[:-1], True])
    blocks = [(sp[a:b], px[a:b], py[a:b]) for a, b in zip(cuts[:-1], cuts[1:])]

    def run(blk):
        return _blend_block(pr, blk[0], blk[1], blk[2], w, with_grad, far)

    nthreads = threads or default_threads()
    if nthreads > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=nthreads) as ex:
            results = list(ex.map(run, blocks))
    else:
        results = [run(b) for b in blocks]

    frags = []
    for seg_pid, out, a, tfin, frag in results:
        color[seg_pid] = out[:, 0:3]
        depth[seg_pid] = out[:, 3]
        sem[seg_pid] = out[:, 4:7]
        acc[seg_pid] = a
        rem[seg_pid] = tfin
        frags.append(frag)
    merged = _Fragments(
        np.concatenate([f.splat for f in frags]),
        np.concatenate([f.pid for f in frags]),
        np.concatenate([f.w for f in frags]),
        np.concatenate([f.dout_da for f in frags]) if with_grad else None,
        np.concatenate([f.q for f in frags]) if with_grad else None,
        np.concatenate([f.q_alpha for f in frags]) if with_grad else None,
    )
    return RenderBuffers(color.reshape(h, w, 3), depth.reshape(h, w), sem.reshape(h, w, 3),
                         acc.reshape(h, w), rem.reshape(h, w), len(p), far, pr, merged)
