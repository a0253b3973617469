"""Vertex and edge type assignment.

Vertices are ordered canonically: agents by index first, then object slots.
Column j of the relevance graph refers to agent j for j < n_agents and to
object slot j - n_agents otherwise.  Edge types are a pure symmetric function
of the endpoint types.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import SchemaError

# Predator-prey vertex types.
PP_PRED_T1, PP_PRED_T2, PP_PREY, PP_WALL = 0, 1, 2, 3
PP_TYPE_NAMES = {PP_PRED_T1: "predator-t1", PP_PRED_T2: "predator-t2", PP_PREY: "prey", PP_WALL: "wall"}
# Edges: 0 same-team predators, 1 cross-team predators, 2 predator/object-or-prey.
PP_EDGE_TYPES = (0, 1, 2)

# Bomber vertex types (ally/enemy are relative to the observing team).
BM_ALLY, BM_ENEMY, BM_BOMB, BM_KICK, BM_POWER, BM_EXTRA, BM_WALL = range(7)
BM_TYPE_NAMES = {
    BM_ALLY: "ally",
    BM_ENEMY: "enemy",
    BM_BOMB: "placed-bomb",
    BM_KICK: "kick-item",
    BM_POWER: "blast-power-item",
    BM_EXTRA: "extra-bomb-item",
    BM_WALL: "wall",
}
BM_EDGE_TYPES = (0, 1)


def pp_edge_type(a: int, b: int) -> int:
    if a in (PP_PRED_T1, PP_PRED_T2) and b in (PP_PRED_T1, PP_PRED_T2):
        return 0 if a == b else 1
    return 2


def bomber_edge_type(a: int, b: int) -> int:
    return 0 if a in (BM_ALLY, BM_ENEMY) and b in (BM_ALLY, BM_ENEMY) else 1


@dataclass
class TypeAssignment:
    """Per-column vertex types, presence mask, and the (rows x cols) edge-type table."""

    n_agents: int
    vertex_types: np.ndarray  # (cols,) type id; defined for every allocated vertex
    present: np.ndarray  # (cols,) bool
    edge_types: np.ndarray  # (n_agents, cols)
    type_names: dict
    edge_type_ids: tuple

    @property
    def n_cols(self) -> int:
        return self.vertex_types.size

    def column_of(self, vertex) -> int:
        kind, idx = vertex
        return idx if kind == "agent" else self.n_agents + idx


def assign_types(env, state, perspective_team=None) -> TypeAssignment:
    """Label every agent and object slot with a vertex type and build the edge-type table."""
    if env.name == "predator-prey":
        return _assign_pp(env, state)
    if env.name == "bomber":
        return _assign_bomber(env, state, 0 if perspective_team is None else perspective_team)
    raise SchemaError(f"no type schema for environment {env.name!r}")


def _assign_pp(env, state) -> TypeAssignment:
    n_agents = env.n_agents
    cols = n_agents + env.cfg.max_objects
    vt = np.full(cols, -1, dtype=np.int64)
    present = np.zeros(cols, dtype=bool)
    for i, p in enumerate(state.predators):
        vt[i] = PP_PRED_T1 if p.team == 1 else PP_PRED_T2
        present[i] = p.alive
    for j, q in enumerate(state.preys):
        vt[env.n_predators + j] = PP_PREY
        present[env.n_predators + j] = q.alive
    for s, desc in enumerate(state.object_slots):
        if desc is not None:
            if desc[0] != "wall":
                raise SchemaError(f"unknown predator-prey object kind {desc[0]!r}")
            vt[n_agents + s] = PP_WALL
            present[n_agents + s] = True
    edge = _edge_table(vt, n_agents, pp_edge_type)
    return TypeAssignment(n_agents, vt, present, edge, PP_TYPE_NAMES, PP_EDGE_TYPES)


_BOMBER_OBJECT_TYPES = {
    "rigid": BM_WALL,
    "wood": BM_WALL,
    "bomb": BM_BOMB,
    "extra-bomb": BM_EXTRA,
    "blast-power": BM_POWER,
    "kick": BM_KICK,
}


def _assign_bomber(env, state, team: int) -> TypeAssignment:
    n_agents = env.n_agents
    cols = n_agents + env.cfg.max_objects
    vt = np.full(cols, -1, dtype=np.int64)
    present = np.zeros(cols, dtype=bool)
    for i, a in enumerate(state.agents):
        vt[i] = BM_ALLY if a.team == team else BM_ENEMY
        present[i] = a.alive
    for s, desc in enumerate(state.object_slots):
        if desc is not None:
            if desc[0] not in _BOMBER_OBJECT_TYPES:
                raise SchemaError(f"unknown bomber object kind {desc[0]!r}")
            vt[n_agents + s] = _BOMBER_OBJECT_TYPES[desc[0]]
            present[n_agents + s] = True
    edge = _edge_table(vt, n_agents, bomber_edge_type)
    return TypeAssignment(n_agents, vt, present, edge, BM_TYPE_NAMES, BM_EDGE_TYPES)


def _edge_table(vt: np.ndarray, n_agents: int, fn) -> np.ndarray:
    cols = vt.size
    out = np.zeros((n_agents, cols), dtype=np.int64)
    for i in range(n_agents):
        for j in range(cols):
            if vt[i] >= 0 and vt[j] >= 0:
                out[i, j] = fn(int(vt[i]), int(vt[j]))
            else:
                out[i, j] = -1
    return out
