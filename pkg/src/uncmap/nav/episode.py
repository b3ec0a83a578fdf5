"""Episode execution: perceive, build a value map, update memory, score, act."""

from __future__ import annotations

import copy
import zlib
from dataclasses import dataclass, field, replace

import numpy as np

from ..gaussians import GaussianMap, default_class_embeddings
from ..sgm_builder import BuildConfig, build
from ..uncertainty import Priors, UncertaintyConfig, estimate_all
from ..value_map import Norms, ValueMap, ValueQueryResult, featurize
from .graph import WaypointGraph
from .policy import STOP, PolicyConfig, candidate_set, nn_action, score_candidates
from .scene import SyntheticScene, gen_scene

MAX_STEPS = 15


@dataclass(frozen=True)
class PerceptionConfig:
    """Per-step mapping budget: panorama size, builder and estimator effort."""

    size: int = 32
    k_views: int = 4
    stride: int = 2
    build_iters: int = 10
    unc_steps: int = 10
    sem_steps: int = 10
    n_samples: int = 2
    radius: float = 0.75
    max_primitives: int = 5000
    threads: int | None = None


@dataclass
class Perception:
    node: int
    map: GaussianMap
    regions: dict[int, ValueQueryResult]
    spread: np.ndarray  # (k, 3): (ug, us, ua) means of the non-empty regions


def _node_seed(scene: SyntheticScene, node: int) -> int:
    return zlib.crc32(f"{scene.difficulty}:{scene.seed}:{node}".encode())


def perceive(scene: SyntheticScene, node: int, pcfg: PerceptionConfig) -> Perception:
    """Panoramic views at `node`, an SGM with uncertainties, and region stats for every node."""
    frames = scene.panorama(node, pcfg.size, pcfg.k_views)
    seed = _node_seed(scene, node)
    bcfg = BuildConfig(n_iters=pcfg.build_iters, stride=pcfg.stride, seed=seed, threads=pcfg.threads)
    m = build(frames, bcfg)
    if len(m) > pcfg.max_primitives:
        keep = np.argsort(-m.alpha, kind="stable")[: pcfg.max_primitives]
        m = m.subset(np.sort(keep))
    ucfg = UncertaintyConfig(steps=pcfg.unc_steps, semantic_steps=pcfg.sem_steps, n_samples=pcfg.n_samples, seed=seed, threads=pcfg.threads)
    m = estimate_all(m, frames, Priors(), ucfg)
    vm = ValueMap(m, pcfg.radius)
    regions = {n.id: vm.query(n.position) for n in scene.graph.nodes}
    spread = np.array([[r.mean_ug, r.mean_us, r.mean_ua] for r in regions.values() if not r.empty]).reshape(-1, 3)
    return Perception(node, m, regions, spread)


class PerceptionCache:
    """Memoizes perception per (scene, node); results do not depend on the policy."""

    def __init__(self, pcfg: PerceptionConfig):
        self.pcfg = pcfg
        self.store: dict[tuple, Perception] = {}

    def get(self, scene: SyntheticScene, node: int) -> Perception:
        key = (scene.difficulty, scene.seed, node)
        if key not in self.store:
            self.store[key] = perceive(scene, node, self.pcfg)
        return self.store[key]


@dataclass
class StepRecord:
    step: int
    node: int
    action: int
    choice: int
    candidates: list[int]
    p: list[float]
    region: dict

    def to_dict(self) -> dict:
        return {"step": self.step, "node": self.node, "action": "STOP" if self.action == STOP else self.action,
                "choice": "STOP" if self.choice == STOP else self.choice,
                "candidates": ["STOP" if c == STOP else c for c in self.candidates],
                "p": self.p, "region": self.region}


@dataclass
class Episode:
    target: int
    qualifier: str
    start: int
    goal: int
    max_steps: int
    path: list[int] = field(default_factory=list)
    outcome: str = "running"
    path_length: float = 0.0
    shortest: float = 0.0
    steps: list[StepRecord] = field(default_factory=list)

    @property
    def success(self) -> bool:
        return self.outcome in ("stop-at-goal", "arrived")

    def summary(self) -> dict:
        return {"outcome": self.outcome, "success": self.success, "path": self.path,
                "path_length": self.path_length, "shortest": self.shortest,
                "instruction": {"target": self.target, "qualifier": self.qualifier}}


def _absorb(graph: WaypointGraph, per: Perception, vantage: np.ndarray) -> None:
    """Store region stats for every node seen from a vantage at least as close as before."""
    for nid, res in per.regions.items():
        node = graph.nodes[nid]
        rng = float(np.linalg.norm(node.position - vantage))
        if rng <= node.feature_range:
            node.feature_range = rng
            node.stats = res


def _feature(stats: ValueQueryResult | None, norms: Norms) -> np.ndarray:
    if stats is None or stats.empty:
        return np.zeros(7)
    return featurize(stats, norms)


def run_episode(scene: SyntheticScene, cfg: PolicyConfig, cache: PerceptionCache | None = None,
                max_steps: int = MAX_STEPS) -> Episode:
    """Navigate from the scene start toward its target class until STOP, arrival or the step limit."""
    cache = cache or PerceptionCache(PerceptionConfig())
    graph = copy.deepcopy(scene.graph)
    target_emb = default_class_embeddings()[scene.target]
    ep = Episode(scene.target, scene.qualifier, scene.start, scene.goal, max_steps, path=[scene.start])
    ep.shortest = graph.distance(scene.start, scene.goal)
    norms = Norms()
    cur = scene.start
    for step in range(max_steps):
        per = cache.get(scene, cur)
        graph.nodes[cur].visited = True
        _absorb(graph, per, graph.position(cur))
        norms.update(per.spread)
        cands = candidate_set(graph, cur)
        feats = {c: _feature(graph.nodes[c].stats, norms) for c in cands if c != STOP}
        cur_feat = _feature(graph.nodes[cur].stats, norms)
        _, p = score_candidates(cands, feats, cur_feat, target_emb, cfg)
        choice, nxt = nn_action(p, cands, graph, cur)
        st = graph.nodes[cur].stats
        region = {"mean_ug": st.mean_ug, "mean_us": st.mean_us, "mean_ua": st.mean_ua, "count": st.count}
        ep.steps.append(StepRecord(step, cur, nxt, choice, cands, [float(x) for x in p], region))
        if nxt == STOP:
            ep.outcome = "stop-at-goal" if cur == scene.goal else "stop-elsewhere"
            break
        cur = nxt
        ep.path.append(cur)
        if cur == scene.goal:
            ep.outcome = "arrived"
            break
    else:
        ep.outcome = "max-steps"
    ep.path_length = graph.path_length(ep.path)
    return ep


def metrics(episodes: list[Episode]) -> tuple[float, float]:
    """(SR, SPL); SPL averages success * l / max(p, l) with lengths in meters."""
    if not episodes:
        return 0.0, 0.0
    sr = float(np.mean([e.success for e in episodes]))
    spl_terms = []
    for e in episodes:
        if not e.success:
            spl_terms.append(0.0)
            continue
        ell, p = e.shortest, e.path_length
        spl_terms.append(1.0 if max(ell, p) == 0 else ell / max(p, ell))
    return sr, float(np.mean(spl_terms))


@dataclass(frozen=True)
class SweepRow:
    gamma: float
    difficulty: str
    sr: float
    spl: float
    episodes: int


def evaluate(n_episodes: int, difficulty: str, gammas, pcfg: PerceptionConfig | None = None,
             first_seed: int = 0, policy: PolicyConfig | None = None, max_steps: int = MAX_STEPS,
             cache: PerceptionCache | None = None) -> tuple[list[SweepRow], dict[float, list[Episode]]]:
    """SR/SPL over seeds first_seed..first_seed+n-1 for every gamma; perception is shared across gammas."""
    cache = cache or PerceptionCache(pcfg or PerceptionConfig())
    base = policy or PolicyConfig()
    gammas = [float(g) for g in gammas]
    runs: dict[float, list[Episode]] = {g: [] for g in gammas}
    for seed in range(first_seed, first_seed + n_episodes):
        scene = gen_scene(seed, difficulty)
        for g in gammas:
            runs[g].append(run_episode(scene, replace(base, gamma=g), cache, max_steps))
    rows = [SweepRow(g, difficulty, *metrics(runs[g]), len(runs[g])) for g in gammas]
    return rows, runs
