"""Shared environment primitives: actions, events, vertices, grid helpers."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

# Grid directions in the fixed tie-break order used by every deterministic rule.
UP, DOWN, LEFT, RIGHT = (-1, 0), (1, 0), (0, -1), (0, 1)
DIR_ORDER = (UP, DOWN, LEFT, RIGHT)
DIR_NAMES = ("up", "down", "left", "right")

# Angle convention: 0 = right, pi/2 = up (row decreases), pi = left, 3pi/2 = down.
DIR_ANGLES = {RIGHT: 0.0, UP: math.pi / 2, LEFT: math.pi, DOWN: 3 * math.pi / 2}


def angle_to_dir(theta: float) -> tuple[int, int]:
    """Snap an angle to the nearest of the four grid directions."""
    k = int(round((theta % (2 * math.pi)) / (math.pi / 2))) % 4
    return (RIGHT, UP, LEFT, DOWN)[k]


def dir_to_angle(d: tuple[int, int]) -> float:
    return DIR_ANGLES[d]


@dataclass(frozen=True)
class MoveAction:
    """Continuous movement command: heading in [0, 2pi) and speed in [0, 1]."""

    direction: float
    speed: float

    def encoded(self) -> np.ndarray:
        out = np.zeros(6)
        out[0] = (self.direction % (2 * math.pi)) / (2 * math.pi)
        out[1] = min(max(self.speed, 0.0), 1.0)
        return out


# Discrete bomber actions.
A_UP, A_DOWN, A_LEFT, A_RIGHT, A_BOMB, A_NOOP = range(6)
DISCRETE_DIRS = {A_UP: UP, A_DOWN: DOWN, A_LEFT: LEFT, A_RIGHT: RIGHT}


def encode_discrete(action: int) -> np.ndarray:
    out = np.zeros(6)
    out[int(action)] = 1.0
    return out


# Vertex identifiers: agents by global index, objects by slot index.
Vertex = tuple  # ("agent", i) | ("object", slot)


def agent_vertex(i: int) -> Vertex:
    return ("agent", i)


def object_vertex(slot: int) -> Vertex:
    return ("object", slot)


EVENT_KINDS = (
    "kill-enemy-agent",
    "pick-up-extra-bomb",
    "kill-prey",
    "wound-prey",
    "pick-up-blast-power",
)

EVENT_WEIGHTS = {
    "kill-enemy-agent": 100.0,
    "pick-up-extra-bomb": 25.0,
    "kill-prey": 100.0,
    "wound-prey": 50.0,
    "pick-up-blast-power": 25.0,
}


@dataclass(frozen=True)
class Event:
    """Something scoring-relevant that happened during one step, bound to a graph edge."""

    kind: str
    edge: tuple  # (actor vertex, target vertex)
    weight: float

    @classmethod
    def make(cls, kind: str, actor: Vertex, target: Vertex) -> "Event":
        return cls(kind, (actor, target), EVENT_WEIGHTS[kind])


def chebyshev(a: tuple[int, int], b: tuple[int, int]) -> int:
    return max(abs(a[0] - b[0]), abs(a[1] - b[1]))


def in_bounds(pos: tuple[int, int], d: int) -> bool:
    return 0 <= pos[0] < d and 0 <= pos[1] < d


def bfs_first_step(start, goals, blocked, d: int) -> Optional[tuple[int, int]]:
    """Direction of the first move on a shortest path from start to any goal.

    Neighbor expansion follows DIR_ORDER, so equal-length paths resolve
    deterministically.  Returns None when no goal is reachable.
    """
    goals = set(goals)
    if start in goals:
        return None
    prev: dict = {start: None}
    frontier = [start]
    while frontier:
        nxt = []
        for cell in frontier:
            for d2 in DIR_ORDER:
                cand = (cell[0] + d2[0], cell[1] + d2[1])
                if cand in prev or not in_bounds(cand, d):
                    continue
                if cand in goals:
                    prev[cand] = cell
                    cur = cand
                    while prev[cur] != start:
                        cur = prev[cur]
                    return (cur[0] - start[0], cur[1] - start[1])
                if cand in blocked:
                    continue
                prev[cand] = cell
                nxt.append(cand)
        frontier = nxt
    return None


def connected_component(seed_cell, blocked, d: int) -> set:
    """All cells reachable from seed_cell through unblocked 4-neighborhood moves."""
    seen = {seed_cell}
    frontier = [seed_cell]
    while frontier:
        cell = frontier.pop()
        for d2 in DIR_ORDER:
            cand = (cell[0] + d2[0], cell[1] + d2[1])
            if cand not in seen and in_bounds(cand, d) and cand not in blocked:
                seen.add(cand)
                frontier.append(cand)
    return seen


def rng_digest(gen: np.random.Generator) -> str:
    """Short stable digest of a generator's internal state."""
    import hashlib
    import json

    state = gen.bit_generator.state
    blob = json.dumps(state, sort_keys=True, default=int)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]
