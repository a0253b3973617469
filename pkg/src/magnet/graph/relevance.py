"""The relevance graph: a learned weight matrix over agents and objects."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..autodiff import Tensor
from ..errors import InputError
from .schema import TypeAssignment


@dataclass
class RelevanceGraph:
    """Weights (n_agents x n_cols) plus the type assignment they were produced under.

    Row i holds agent i's outgoing edge weights; column j covers agent j
    (j < n_agents) or object slot j - n_agents.  Absent-object columns and the
    agent diagonal are exactly zero.
    """

    weights: Tensor
    types: TypeAssignment
    timestamp: int = 0

    @property
    def values(self) -> np.ndarray:
        return self.weights.data

    @property
    def n_agents(self) -> int:
        return self.types.n_agents

    @property
    def n_cols(self) -> int:
        return self.types.n_cols

    def detached(self) -> "RelevanceGraph":
        return RelevanceGraph(self.weights.detach(), self.types, self.timestamp)

    def weight_of(self, v, u) -> float:
        row = v[1] if v[0] == "agent" else None
        if row is None:
            raise InputError("graph rows are agents; first edge endpoint must be an agent vertex")
        return float(self.values[row, self.types.column_of(u)])


def output_mask(types: TypeAssignment) -> np.ndarray:
    """1 everywhere except absent-object columns and the agent self-diagonal."""
    n, cols = types.n_agents, types.n_cols
    mask = np.ones((n, cols))
    for j in range(n, cols):
        if not types.present[j]:
            mask[:, j] = 0.0
    mask[np.arange(n), np.arange(n)] = 0.0
    return mask


def random_graph_values(n_agents: int, n_cols: int, rng) -> np.ndarray:
    """Initial graph at episode start: uniform in [-0.1, 0.1]."""
    return rng.generator.uniform(-0.1, 0.1, size=(n_agents, n_cols))


def select_graph(graphs, mode: str, team_agents: list[int]) -> dict:
    """Route graphs to agents: one shared team graph or per-agent graphs.

    ``graphs`` is a single RelevanceGraph in shared mode, or a dict
    agent -> RelevanceGraph in individual mode.
    """
    if mode == "shared":
        if isinstance(graphs, dict):
            raise InputError("shared mode takes a single team-level graph")
        return {i: graphs for i in team_agents}
    if mode == "individual":
        if not isinstance(graphs, dict):
            raise InputError("individual mode takes a dict of per-agent graphs")
        missing = [i for i in team_agents if i not in graphs]
        if missing:
            raise InputError(f"no graph for agents {missing}")
        return {i: graphs[i] for i in team_agents}
    raise InputError(f"unknown graph sharing mode {mode!r}")
