"""Linear uncertainty-aware candidate scorer and nearest-neighbor action mapping."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..geometry import InputError
from .graph import WaypointGraph

STOP = -1


class ContractError(RuntimeError):
    pass


@dataclass(frozen=True)
class PolicyConfig:
    w_sem: float = 2.0
    w_occ: float = 1.0
    w_g: float = 1.0
    w_s: float = 1.0
    w_a: float = 1.0
    stop_threshold: float = 0.8
    stop_bonus: float = 1.0
    occ_scale: float = 40.0
    gamma: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.gamma <= 1.0:
            raise InputError("gamma must lie in [0, 1]")


def cosine(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    return float(a @ b / (na * nb)) if na > 0 and nb > 0 else 0.0


def region_logit(feature: np.ndarray, target_emb, cfg: PolicyConfig, gamma: float) -> float:
    """w_sem cos + w_occ occupancy_penalty - gamma (w_g ug + w_s us + w_a ua) for one feature vector."""
    occ = feature[0]
    pen = -(1.0 - np.exp(-occ / cfg.occ_scale))
    u = feature[4:7]
    return (cfg.w_sem * cosine(feature[1:4], target_emb) + cfg.w_occ * pen
            - gamma * (cfg.w_g * u[0] + cfg.w_s * u[1] + cfg.w_a * u[2]))


def softmax(logits) -> np.ndarray:
    z = np.asarray(logits, dtype=np.float64)
    z = np.exp(z - z.max())
    return z / z.sum()


def score_candidates(candidates: list[int], features: dict, current_feature: np.ndarray | None,
                     target_emb, cfg: PolicyConfig, gamma: float | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Logits and softmax probabilities over `candidates` (node ids, STOP included as -1).

    The STOP logit is the current node's region logit plus `stop_bonus` when
    the region's semantic cosine to the target reaches `stop_threshold`, and
    minus `stop_bonus` otherwise.
    """
    if not candidates:
        raise ContractError("score_candidates needs at least one candidate")
    g = cfg.gamma if gamma is None else gamma
    logits = []
    for c in candidates:
        if c == STOP:
            if current_feature is None:
                logits.append(-cfg.stop_bonus)
                continue
            base = region_logit(current_feature, target_emb, cfg, g)
            match = cosine(current_feature[1:4], target_emb) >= cfg.stop_threshold
            logits.append(base + (cfg.stop_bonus if match else -cfg.stop_bonus))
        else:
            logits.append(region_logit(features[c], target_emb, cfg, g))
    logits = np.array(logits)
    return logits, softmax(logits)


def candidate_set(graph: WaypointGraph, current: int) -> list[int]:
    """Unvisited neighbors, every visited node other than the current one, then STOP."""
    cand = {n for n in graph.neighbors(current) if not graph.nodes[n].visited}
    cand |= {n.id for n in graph.nodes if n.visited and n.id != current}
    return sorted(cand) + [STOP]


def argmax_candidate(p: np.ndarray, candidates: list[int]) -> int:
    """Highest-probability candidate; ties go to the smallest node id, STOP last."""
    best = p.max()
    tied = [c for c, pi in zip(candidates, p) if pi == best]
    nodes = sorted(c for c in tied if c != STOP)
    return nodes[0] if nodes else STOP


def nn_action(p: np.ndarray, candidates: list[int], graph: WaypointGraph, current: int) -> tuple[int, int]:
    """(chosen candidate, next node to move to or STOP).

    An adjacent choice is moved to directly; a non-adjacent (visited) choice
    yields the first hop of the shortest path toward it.
    """
    choice = argmax_candidate(p, candidates)
    if choice == STOP:
        return STOP, STOP
    if choice in graph.adj[current]:
        return choice, choice
    path = graph.shortest_path(current, choice)
    return choice, path[1]
