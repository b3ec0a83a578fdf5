"""Fast closed-form checks run by `uncmap selftest`.

Each check is a zero-argument function returning None on success and
raising AssertionError otherwise. They cover the trivially derivable
behaviours of every stage and finish in a few seconds.
"""

from __future__ import annotations

import math
import tempfile
from pathlib import Path

import numpy as np

from .gaussians import GaussianMap, MapFormatError, covariance, loads_map, save_map
from .geometry import Camera, back_project, project
from .losses import losses
from .nav import STOP, WaypointGraph, metrics, nn_action, score_candidates
from .nav.episode import Episode
from .nav.policy import PolicyConfig
from .renderer import ALPHA_MAX, FAR, alpha_at, project_splat, render
from .sgm_builder import prune
from .uncertainty import VariationalParams, fisher_logdet, geometric_uncertainty, kl_diag_gaussian, semantic_uncertainty
from .value_map import Norms, ValueQueryResult, featurize, query_sphere

CAM = Camera(40.0, 40.0, 15.5, 15.5, 32, 32)


def _one(mu=(0.0, 0.0, 2.0), e=(0.1, 0.1, 0.1), alpha=0.5, c=(1.0, 0.0, 0.0)) -> GaussianMap:
    return GaussianMap.from_fields([mu], [e], [(1.0, 0.0, 0.0, 0.0)], [alpha], [c], [(0.0, 0.0, 0.0)])


def check_back_project_axis():
    cam = Camera(10.0, 10.0, 15.5, 15.5, 32, 32)
    assert np.allclose(back_project(cam.cu, cam.cv, 2.0, cam), (0.0, 0.0, 2.0))
    assert np.allclose(back_project(cam.cu + cam.fx, cam.cv, 3.0, cam), (3.0, 0.0, 3.0))


def check_project_axis():
    assert np.allclose(project([0.0, 0.0, 2.0], CAM), (CAM.cu, CAM.cv, 2.0))


def check_covariance_identity():
    sig = covariance(np.array([1.0, 2.0, 3.0]), np.array([1.0, 0.0, 0.0, 0.0]))
    assert np.allclose(sig, np.diag([1.0, 4.0, 9.0]))


def check_map_roundtrip():
    rng = np.random.default_rng(0)
    n = 50
    q = rng.normal(size=(n, 4))
    m = GaussianMap.from_fields(rng.normal(size=(n, 3)), rng.uniform(0.01, 0.2, (n, 3)),
                                q / np.linalg.norm(q, axis=1, keepdims=True), rng.uniform(0, 1, n),
                                rng.uniform(0, 1, (n, 3)), rng.normal(size=(n, 3)))
    with tempfile.TemporaryDirectory() as d:
        for mm in (m, GaussianMap()):
            p = Path(d) / "m.sgm"
            save_map(mm, p)
            data = p.read_bytes()
            assert loads_map(data) == mm
    try:
        loads_map(b"XXXX" + data[4:])
    except MapFormatError:
        pass
    else:
        raise AssertionError("corrupted magic was accepted")


def check_empty_render():
    buf = render(GaussianMap(), CAM)
    assert np.all(buf.color == 0) and np.all(buf.acc == 0) and np.all(buf.depth == FAR)


def check_zero_alpha():
    sp = project_splat(_one()[0], CAM)
    assert alpha_at(sp, 0.0, (3.0, 7.0)) == 0.0
    assert alpha_at(sp, 1.0, sp.mu2) == ALPHA_MAX


def check_identical_losses():
    buf = render(_one(), CAM)
    lt = losses(buf, buf.color, np.where(buf.acc > 0, buf.depth, 0.0), buf.sem)
    assert abs(lt.total) < 1e-7


def check_prune_zero_alpha():
    assert len(prune(_one(alpha=0.0), 0.0, 0.0)) == 0


def check_kl_identical():
    d = 0.0025
    assert kl_diag_gaussian(np.zeros(6), np.full(6, math.log(d)), d) == 0.0


def check_uncertainty_norms():
    a, b = 0.3, 0.2
    n = 1
    vp = VariationalParams(np.zeros((n, 3)), np.full((n, 3), math.log(a)), np.zeros((n, 3)),
                           np.full((n, 3), math.log(b)), np.zeros((n, 3)), np.full((n, 3), math.log(a)))
    assert math.isclose(geometric_uncertainty(vp)[0], math.sqrt(3) * (a + b), rel_tol=1e-12)
    assert math.isclose(semantic_uncertainty(vp)[0], math.sqrt(3) * a, rel_tol=1e-12)


def check_fisher_zero():
    assert math.isclose(float(fisher_logdet(np.zeros((1, 14, 14)))[0]), 14 * math.log(1e-6), rel_tol=1e-12)


def check_query_extremes():
    m = _one()
    assert query_sphere(m, (0.0, 0.0, 2.0), 100.0).count == 1
    assert query_sphere(m, (50.0, 0.0, 0.0), 0.5).empty


def check_featurize_affine():
    norms = Norms(np.zeros(3), np.full(3, 2.0))
    mid = ValueQueryResult(1, 1.0, 1.0, 1.0, (0.0, 0.0, 0.0), 0.0)
    assert np.allclose(featurize(mid, norms)[4:], 0.5, atol=1e-9)
    top = ValueQueryResult(1, 2.0, 2.0, 2.0, (0.0, 0.0, 0.0), 0.0)
    assert np.allclose(featurize(top, norms)[4:], 1.0)


def check_softmax_symmetry():
    f = np.zeros(7)
    _, p = score_candidates([1], {1: f}, None, np.ones(3), PolicyConfig())
    assert p.tolist() == [1.0]
    _, p = score_candidates([1, 2], {1: f, 2: f}, None, np.ones(3), PolicyConfig())
    assert np.allclose(p, 0.5)


def check_nn_action():
    g = WaypointGraph()
    for k in range(3):
        g.add_node((float(k), 0.0, 0.0))
    g.add_edge(0, 1)
    g.add_edge(1, 2)
    assert nn_action(np.array([0.9, 0.1]), [1, STOP], g, 0) == (1, 1)
    assert nn_action(np.array([0.1, 0.9]), [1, STOP], g, 0) == (STOP, STOP)


def check_metrics():
    ep = Episode(2, "unambiguous", 0, 1, 15, path=[0, 1], outcome="arrived", path_length=2.0, shortest=1.0)
    assert metrics([ep]) == (1.0, 0.5)
    ep.outcome = "max-steps"
    assert metrics([ep]) == (0.0, 0.0)


CHECKS = [v for k, v in sorted(globals().items()) if k.startswith("check_")]


def run(out=print) -> int:
    """Run every check, report one line each; returns the number of failures."""
    failures = 0
    for fn in CHECKS:
        try:
            fn()
            out(f"PASS {fn.__name__[6:]}")
        except Exception as exc:  # noqa: BLE001 - report and continue
            failures += 1
            out(f"FAIL {fn.__name__[6:]}: {type(exc).__name__}: {exc}")
    return failures
