"""Synthetic hub-and-arm scenes with controllable landmark ambiguity."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..geometry import look_camera
from ..io import Frame
from ..rng import stage_rng
from ..world import Box, World, ray_cast
from .graph import WaypointGraph

SIMPLE = "simple"
COMPLEX = "complex"
DIFFICULTIES = (SIMPLE, COMPLEX)

WALL, FLOOR = 0, 1
TARGET_CLASSES = (2, 3, 4, 5)
ANTIPODE = {2: 3, 3: 2, 4: 5, 5: 4}

CAMERA_HEIGHT = 1.0
ARM_LENGTH = 1.0
DECOY_ARM_LENGTH = 1.6  # duplicates sit deeper, so they are seen at coarser resolution
LANDMARK_OFFSET = 0.6   # landmark center beyond its arm node
LANDMARK_HALF = 0.3
CORRIDOR_HALF = 0.85  # walls sit outside the default query radius around arm nodes
DECOY_TEXTURE = 1.0
DECOY_CELL = 0.08
PILLAR_HALF = 0.03


@dataclass
class Landmark:
    node: int
    label: int
    decoy: bool = False


@dataclass
class SyntheticScene:
    seed: int
    difficulty: str
    world: World
    graph: WaypointGraph
    start: int
    goal: int
    target: int
    landmarks: list[Landmark]
    n_duplicates: int
    n_occluders: int
    qualifier: str = "unambiguous"
    meta: dict = field(default_factory=dict)

    def panorama(self, node: int, size: int, k_views: int = 4) -> list[Frame]:
        """K level views at evenly spaced headings from a node."""
        pos = self.graph.position(node)
        return [ray_cast(self.world, look_camera(pos, 2 * np.pi * k / k_views, size, size))
                for k in range(k_views)]


def _arm_dir(k: int) -> np.ndarray:
    a = k * np.pi / 2
    return np.array([np.cos(a), np.sin(a), 0.0])


def _landmark_box(k: int, label: int, color, rng, texture=0.0, cell=0.04, arm=ARM_LENGTH) -> Box:
    d = _arm_dir(k)
    c = d * (arm + LANDMARK_OFFSET)
    lo = c - LANDMARK_HALF
    hi = c + LANDMARK_HALF
    lo[2], hi[2] = CAMERA_HEIGHT - 0.5, CAMERA_HEIGHT + 0.5
    ramp = np.zeros((3, 3))
    ramp[:, 2] = rng.uniform(-0.1, 0.1, 3)
    return Box(lo, hi, label, color, ramp=ramp, texture=texture, cell=cell, salt=int(rng.integers(1 << 30)))


def gen_scene(seed: int, difficulty: str = SIMPLE) -> SyntheticScene:
    """Hub at the origin (start), four arms ending at landmark nodes.

    simple: open floor, four landmarks of distinct classes, no occluders.
    complex: walled corridors along each arm, two high-contrast duplicates of
    the target class at the end of longer arms, and two thin wall-class
    pillars flanking the goal inside its query region.
    """
    if difficulty not in DIFFICULTIES:
        raise ValueError(f"difficulty must be one of {DIFFICULTIES}, got {difficulty!r}")
    rng = stage_rng(seed, "scene", difficulty)
    target = int(rng.choice(TARGET_CLASSES))
    arms = rng.permutation(4)
    goal_arm = int(arms[0])
    decoy_arms = [int(k) for k in arms[1:3]] if difficulty == COMPLEX else []
    arm_len = [DECOY_ARM_LENGTH if k in decoy_arms else ARM_LENGTH for k in range(4)]
    graph = WaypointGraph()
    hub = graph.add_node((0.0, 0.0, CAMERA_HEIGHT))
    arm_nodes = [graph.add_node(_arm_dir(k) * arm_len[k] + np.array([0, 0, CAMERA_HEIGHT])) for k in range(4)]
    for n in arm_nodes:
        graph.add_edge(hub, n)

    boxes = [Box([-6.0, -6.0, -0.2], [6.0, 6.0, 0.0], FLOOR, rng.uniform(0.3, 0.5, 3), texture=0.03,
                 cell=0.25, salt=int(rng.integers(1 << 30)))]
    colors = rng.uniform(0.2, 0.9, (4, 3))
    landmarks = []
    ortho = tuple(c for c in TARGET_CLASSES if c not in (target, ANTIPODE[target]))
    n_dup = n_occ = 0
    if difficulty == SIMPLE:
        others = [c for c in TARGET_CLASSES if c != target]
        labels = {goal_arm: target}
        for k, lab in zip(arms[1:], rng.permutation(others)):
            labels[int(k)] = int(lab)
        for k in range(4):
            boxes.append(_landmark_box(k, labels[k], colors[k], rng))
            landmarks.append(Landmark(arm_nodes[k], labels[k]))
    else:
        for k in range(4):
            if k == goal_arm:
                boxes.append(_landmark_box(k, target, colors[k], rng))
                landmarks.append(Landmark(arm_nodes[k], target))
            elif k in decoy_arms:
                boxes.append(_landmark_box(k, target, colors[k], rng, texture=DECOY_TEXTURE, cell=DECOY_CELL,
                                           arm=arm_len[k]))
                landmarks.append(Landmark(arm_nodes[k], target, decoy=True))
                n_dup += 1
            else:
                lab = int(rng.choice(ortho))
                boxes.append(_landmark_box(k, lab, colors[k], rng))
                landmarks.append(Landmark(arm_nodes[k], lab))
        wall_color = rng.uniform(0.55, 0.75, 3)
        for k in range(4):
            d = _arm_dir(k)
            lat = np.array([-d[1], d[0], 0.0])
            for side in (-1, 1):
                a = d * 0.7 + lat * side * CORRIDOR_HALF
                b = d * (arm_len[k] + LANDMARK_OFFSET + LANDMARK_HALF) + lat * side * (CORRIDOR_HALF + 0.1)
                lo = np.minimum(a, b)
                hi = np.maximum(a, b)
                lo[2], hi[2] = 0.0, 2.0
                boxes.append(Box(lo, hi, WALL, wall_color, cell=0.2))
        d = _arm_dir(goal_arm)
        lat = np.array([-d[1], d[0], 0.0])
        for side in (-1, 1):
            c = d * (ARM_LENGTH + 0.15) + lat * side * 0.33
            lo = c - PILLAR_HALF
            hi = c + PILLAR_HALF
            lo[2], hi[2] = 0.0, 2.0
            boxes.append(Box(lo, hi, WALL, rng.uniform(0.2, 0.4, 3), cell=0.2))
            n_occ += 1
    qualifier = "unambiguous" if difficulty == SIMPLE else "among-duplicates"
    return SyntheticScene(seed, difficulty, World(boxes), graph, hub, arm_nodes[goal_arm], target,
                          landmarks, n_dup, n_occ, qualifier)
