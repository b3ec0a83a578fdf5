import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from uncmap.gaussians import GaussianMap
from uncmap.io import Frame
from uncmap.losses import losses
from uncmap.renderer import render
from uncmap.scenes import front_camera, occlusion_scene, random_map, rendered_frame
from uncmap.sgm_builder import frame_targets
from uncmap.gaussians import default_class_embeddings
from uncmap.uncertainty import (GEOMETRIC, SEMANTIC, Priors, UncertaintyConfig, VariationalParams, draw_noise,
                                elbo, estimate_all, fisher_blocks, fisher_logdet, fit_variational,
                                geometric_uncertainty, kl_diag_gaussian, semantic_uncertainty)


def kl_scalar(m, v, d):
    return 0.5 * (v / d**2 + m**2 / d**2 - 1 - math.log(v / d**2))


def test_prior_defaults():
    p = Priors()
    assert (p.delta, p.eta, p.epsilon) == (0.0025, 0.1, 0.0025)
    cfg = UncertaintyConfig()
    assert (cfg.n_samples, cfg.steps, cfg.sigma_obs, cfg.lam) == (8, 200, 0.1, 1e-6)


def test_priors_validated():
    with pytest.raises(ValueError):
        Priors(eta=1.0)
    with pytest.raises(ValueError):
        Priors(delta=0.0)


def test_kl_identical_is_zero():
    d = 0.0025
    assert kl_diag_gaussian(np.zeros((4, 3)), np.full((4, 3), math.log(d)), d) == 0.0


def test_kl_closed_form_example():
    m, s, d = 0.001, 0.002, 0.0025
    got = kl_diag_gaussian(np.full(3, m), np.full(3, math.log(s)), d)
    assert math.isclose(got, 3 * kl_scalar(m, s * s, d), rel_tol=1e-12)


@given(st.floats(-0.01, 0.01), st.floats(1e-4, 0.02), st.floats(1e-4, 0.02))
def test_kl_matches_scalar_formula(m, s, d):
    assert math.isclose(kl_diag_gaussian(m, math.log(s), d), kl_scalar(m, s * s, d), rel_tol=1e-9, abs_tol=1e-12)


def test_uniform_prior_surrogate_moments():
    # U(-eta e, eta e) has variance (eta e)^2 / 3
    e = np.array([0.3, 0.03, 3.0])
    assert np.allclose(Priors(eta=0.1).scale_std(e) ** 2, (0.1 * e) ** 2 / 3)


def test_noise_antithetic_and_reproducible():
    a = draw_noise(4, 8, GEOMETRIC, seed=3)
    assert a.shape == (8, 4, 6)
    assert np.array_equal(a[:4], -a[4:])
    assert np.array_equal(a, draw_noise(4, 8, GEOMETRIC, seed=3))
    assert not np.array_equal(a, draw_noise(4, 8, GEOMETRIC, seed=4))


def test_norm_examples():
    a, b = 0.02, 0.5
    vp = VariationalParams(*(np.zeros((2, 3)) for _ in range(6)))
    vp.logstd_mu[:] = math.log(a)
    vp.logstd_e[:] = math.log(b)
    vp.logstd_s[:] = math.log(a)
    assert np.allclose(geometric_uncertainty(vp), math.sqrt(3) * (a + b), rtol=1e-12)
    assert np.allclose(semantic_uncertainty(vp), math.sqrt(3) * a, rtol=1e-12)
    vp.logstd_mu[:] = vp.logstd_e[:] = vp.logstd_s[:] = -np.inf
    assert np.all(geometric_uncertainty(vp) == 0) and np.all(semantic_uncertainty(vp) == 0)


@given(st.integers(0, 10_000))
def test_norms_match_scalar_recomputation(seed):
    rng = np.random.default_rng(seed)
    vp = VariationalParams(*(rng.normal(size=(3, 3)) for _ in range(6)))
    for i in range(3):
        ug = sum(math.sqrt(sum(math.exp(x) ** 2 for x in row)) for row in (vp.logstd_mu[i], vp.logstd_e[i]))
        us = math.sqrt(sum(math.exp(x) ** 2 for x in vp.logstd_s[i]))
        assert math.isclose(geometric_uncertainty(vp)[i], ug, rel_tol=1e-12)
        assert math.isclose(semantic_uncertainty(vp)[i], us, rel_tol=1e-12)


# -- ELBO and fitting --------------------------------------------------------


def single_splat_scene(size=16):
    m = GaussianMap.from_fields([[2.0, 0.0, 0.0]], [[0.15, 0.1, 0.12]], [[1, 0, 0, 0]], [0.8], [[0.7, 0.3, 0.2]],
                                [[1.0, 0.0, 0.0]])
    cam = front_camera((0.0, 0.05, -0.03), size, focal=16.0)
    truth = GaussianMap.from_fields([[2.0, 0.01, 0.0]], [[0.15, 0.1, 0.12]], [[1, 0, 0, 0]], [0.8],
                                    [[0.7, 0.3, 0.2]], [[1.0, 0.0, 0.0]])
    return m, [rendered_frame(truth, cam)]


def test_fit_zero_steps_returns_initialization():
    m, frames = single_splat_scene()
    p = Priors()
    vp = fit_variational(m, frames, p, GEOMETRIC, steps=0)
    init = VariationalParams.initial(m, p)
    assert vp.equals(init)
    assert np.allclose(vp.std_mu, p.delta / 2) and np.allclose(vp.std_s, p.epsilon / 2)
    assert np.allclose(vp.std_e, p.scale_std(m.e) / 2)


def test_elbo_kl_zero_at_prior():
    m, frames = single_splat_scene()
    p = Priors()
    vp = VariationalParams.initial(m, p)
    vp.logstd_mu[:] = math.log(p.delta)
    vp.logstd_e[:] = np.log(p.scale_std(m.e))
    _, _, kl = elbo(m, frames, vp, p, GEOMETRIC, n_samples=2, parts=True)
    assert kl == 0.0


def brute_force_expected_loglik(m, frames, vp, n, seed, sigma=0.1):
    rng = np.random.default_rng(seed)
    p = m.to_params()
    tgt = [frame_targets(f, default_class_embeddings()) for f in frames]
    vals = np.empty(n)
    for k in range(n):
        q = p.copy()
        q.mu = p.mu + vp.std_mu * rng.standard_normal(p.mu.shape)
        q.log_e = np.log(np.maximum(m.e + vp.std_e * rng.standard_normal(p.mu.shape), 1e-6))
        vals[k] = -sum(losses(render(q, f.cam), *t, reduction="sum").total for f, t in zip(frames, tgt)) / (2 * sigma**2)
    return vals.mean(), vals.std(ddof=1) / math.sqrt(n)


def test_monte_carlo_term_converges_to_loss_average():
    m, frames = single_splat_scene()
    p = Priors()
    vp = VariationalParams.initial(m, p)
    vp.logstd_mu[:] = math.log(0.01)  # wide enough that the draws matter
    ref, se = brute_force_expected_loglik(m, frames, vp, 10_000, seed=0)
    _, ell, _ = elbo(m, frames, vp, p, GEOMETRIC, n_samples=400, seed=1, parts=True)
    assert abs(ell - ref) < 4 * se + 4 * se * math.sqrt(10_000 / 400)


def test_fit_ascends_with_common_random_numbers():
    m, frames = single_splat_scene()
    p = Priors()
    cfg = UncertaintyConfig(steps=30, n_samples=4)
    ck = []
    vp = fit_variational(m, frames, p, GEOMETRIC, cfg=cfg, seed=5, checkpoints=ck, checkpoint_every=10)
    noise = draw_noise(len(m), 4, GEOMETRIC, 5)
    start = elbo(m, frames, VariationalParams.initial(m, p), p, GEOMETRIC, cfg=cfg, noise=noise)
    end = elbo(m, frames, vp, p, GEOMETRIC, cfg=cfg, noise=noise)
    assert end >= start
    values = [v for _, v in ck]
    assert values == sorted(values)


def test_fit_deterministic():
    m, frames = single_splat_scene()
    cfg = UncertaintyConfig(steps=5, n_samples=2)
    a = fit_variational(m, frames, Priors(), GEOMETRIC, cfg=cfg, seed=2)
    b = fit_variational(m, frames, Priors(), GEOMETRIC, cfg=cfg, seed=2)
    assert a.equals(b)


def occluded_pair_scene():
    """A large opaque splat facing the camera and a small one hidden straight behind it."""
    m = GaussianMap.from_fields([[2.0, 0.0, 0.0], [2.6, 0.0, 0.0]], [[0.02, 0.3, 0.3], [0.05, 0.05, 0.05]],
                                [[1, 0, 0, 0]] * 2, [1.0, 0.9], [[0.2, 0.6, 0.4], [0.9, 0.1, 0.1]],
                                [[1.0, 0, 0]] * 2)
    frames = [rendered_frame(m, front_camera((0.0, dy, dz), 16, focal=16.0))
              for dy, dz in ((0.03, 0.0), (-0.03, 0.02), (0.0, -0.03))]
    return m, frames


def test_occluded_primitive_has_larger_std():
    m, frames = occluded_pair_scene()
    p = Priors()
    cfg = UncertaintyConfig(steps=40, n_samples=4)
    vp = fit_variational(m, frames, p, GEOMETRIC, cfg=cfg)
    assert np.all(vp.std_mu[1] > vp.std_mu[0])
    # grid oracle: shifting the hidden splat's log-stds away from the fit never raises the ELBO
    noise = draw_noise(2, 4, GEOMETRIC, cfg.seed)
    grid = np.linspace(-0.5, 0.5, 11)
    vals = []
    for g in grid:
        trial = vp.copy()
        trial.logstd_mu[1] += g
        vals.append(elbo(m, frames, trial, p, GEOMETRIC, cfg=cfg, noise=noise))
    assert grid[int(np.argmax(vals))] == 0.0


def test_conflicted_semantics_raise_us():
    sc = occlusion_scene(seed=0, size=24, n_frames=4)
    vp = fit_variational(sc.map, sc.frames, Priors(), SEMANTIC, cfg=UncertaintyConfig(steps=60, n_samples=4))
    us = semantic_uncertainty(vp)
    assert us[sc.conflicted].mean() > us[sc.visible].mean()


# -- Fisher ---------------------------------------------------------------


def test_zero_gradient_logdet():
    assert fisher_logdet(np.zeros((3, 14, 14))).tolist() == [14 * math.log(1e-6)] * 3


@given(st.integers(0, 10_000), st.floats(1e-3, 30.0))
def test_rank_one_determinant_lemma(seed, scale):
    # beyond |v| ~ 100 the rounding of v v^T alone moves the 13 tiny eigenvalues by more than 1e-6 in log
    v = np.random.default_rng(seed).normal(size=14)
    v *= scale / np.linalg.norm(v)
    lam = 1e-6
    expect = 13 * math.log(lam) + math.log(lam + v @ v)
    assert math.isclose(float(fisher_logdet(np.outer(v, v)[None], lam)[0]), expect, abs_tol=1e-6)


def test_fully_occluded_primitive_scores_floor():
    m = GaussianMap.from_fields([[2.0, 0, 0], [2.5, 0, 0]], [[0.02, 2.0, 2.0], [0.02, 0.02, 0.02]],
                                [[1, 0, 0, 0]] * 2, [1.0, 0.5], [[0.5] * 3] * 2, [[0] * 3] * 2)
    cam = front_camera((0.0, 0.0, 0.0), 16, focal=16.0)
    # three stacked opaque layers push transmittance below the early-stop floor
    stack = GaussianMap(np.concatenate([m.records[:1]] * 3 + [m.records[1:]]))
    recs = stack.records.copy()
    recs[1, 0], recs[2, 0] = 2.1, 2.2
    stack = GaussianMap(recs)
    F, ua = fisher_blocks(stack, [Frame(np.zeros((16, 16, 3)), np.ones((16, 16)), np.zeros((16, 16), int), cam)])
    assert np.all(F[3] == 0)
    assert ua[3] == 14 * math.log(1e-6)


def test_fisher_blocks_symmetric_psd():
    m = random_map(1, 50)
    frames = [rendered_frame(m, front_camera((0.0, dy, 0.0), 32)) for dy in (-0.1, 0.1)]
    F, ua = fisher_blocks(m, frames)
    assert F.shape == (50, 14, 14)
    assert np.array_equal(F, np.swapaxes(F, 1, 2))
    assert np.linalg.eigvalsh(F).min() >= -1e-8
    assert np.all(np.isfinite(ua))


def test_fisher_single_pixel_outer_product():
    m = GaussianMap.from_fields([[2.0, 0, 0]], [[0.01, 0.01, 0.01]], [[1, 0, 0, 0]], [0.6], [[0.3, 0.5, 0.7]],
                                [[0, 0, 0]])
    cam = front_camera((0.0, 0.0, 0.0), 15, focal=8.0)
    b = render(m, cam, with_grad=True)
    # with eps2d the footprint still spans several pixels; compare against per-pixel Jacobians
    ref = np.zeros((14, 14))
    for v in range(15):
        for u in range(15):
            J = b.pixel_jacobian(0, u, v)[0:3, :14]
            ref += J.T @ J
    F, _ = fisher_blocks(m, [Frame(b.color, b.depth, np.zeros((15, 15), int), cam)])
    assert np.allclose(F[0], ref, rtol=1e-9, atol=1e-15)


# -- estimate_all -----------------------------------------------------------


@pytest.fixture(scope="module")
def estimated():
    m, frames = occluded_pair_scene()
    cfg = UncertaintyConfig(steps=6, n_samples=2, seed=4)
    return m, frames, cfg, estimate_all(m, frames, Priors(), cfg)


def test_estimate_touches_only_uncertainty_fields(estimated):
    m, _, _, out = estimated
    assert np.array_equal(out.records[:, :17], m.records[:, :17])
    assert not np.array_equal(out.records[:, 17:], m.records[:, 17:])


def test_estimate_reproducible(estimated):
    m, frames, cfg, out = estimated
    assert estimate_all(m, frames, Priors(), cfg) == out


def test_uncertainties_finite_and_epistemic_non_negative(estimated):
    out = estimated[3]
    assert np.all(np.isfinite(out.records[:, 17:]))
    assert np.all(out.ug >= 0) and np.all(out.us >= 0)


def test_estimate_empty_map():
    assert len(estimate_all(GaussianMap(), [])) == 0
