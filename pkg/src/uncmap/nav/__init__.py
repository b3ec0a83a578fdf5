"""Desk-scale navigation harness over synthetic hub-and-arm scenes."""

from .episode import (Episode, PerceptionCache, PerceptionConfig, SweepRow, evaluate, metrics, perceive,
                      run_episode)
from .graph import WaypointGraph
from .policy import STOP, ContractError, PolicyConfig, candidate_set, nn_action, score_candidates
from .scene import COMPLEX, SIMPLE, SyntheticScene, gen_scene

__all__ = [
    "COMPLEX", "SIMPLE", "STOP", "ContractError", "Episode", "PerceptionCache", "PerceptionConfig",
    "PolicyConfig", "SweepRow", "SyntheticScene", "WaypointGraph", "candidate_set", "evaluate", "gen_scene", "metrics",
    "nn_action", "perceive", "run_episode", "score_candidates",
]
