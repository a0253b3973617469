"""Decision making by typed message passing along the relevance graph.

Every present vertex gets an information vector from a per-type init network.
Each round, every edge carries a typed message scaled by its graph weight, and
every vertex folds its incoming message sum into its information vector with a
per-type LSTM cell.  After the final round, agent vertices map their vectors
(plus pooled local features) to actions.

Message-round indices are internal to one decision and independent of
environment time; LSTM cell state lives for the rounds of one decision only.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..autodiff import (
    MLP,
    LSTMCell,
    Tensor,
    concat,
    gather_rows,
    grad_enabled,
    no_grad,
    reshape,
    scatter_rows,
    tanh,
)
from ..envs.core import MoveAction
from ..errors import ConsistencyError, ContractError, InputError
from ..graph.relevance import RelevanceGraph
from ..graph.schema import TypeAssignment
from ..rng import RngStream


@dataclass
class VertexSet:
    """Present vertices in canonical order with their observations."""

    cols: np.ndarray  # (V,) graph column per local vertex
    col_to_local: dict
    vtypes: np.ndarray  # (V,)
    obs: np.ndarray  # (V, obs_dim) flattened local observations
    pooled: np.ndarray  # (V, pooled_dim) channel-mean features
    n_agents: int = 0  # columns below this index are agents


def collect_observations(env, state, types: TypeAssignment) -> VertexSet:
    """Gather local observations for every present vertex."""
    vertices = env.present_vertices(state)
    cols = np.array([types.column_of(v) for v in vertices], dtype=np.int64)
    order = np.argsort(cols)
    cols = cols[order]
    vertices = [vertices[int(i)] for i in order]
    obs = np.stack([env.observe_local(state, v).reshape(-1) for v in vertices])
    k2 = env.cfg.local_window ** 2
    pooled = obs.reshape(len(vertices), k2, -1).mean(axis=1)
    return VertexSet(
        cols=cols,
        col_to_local={int(c): i for i, c in enumerate(cols)},
        vtypes=types.vertex_types[cols],
        obs=obs,
        pooled=pooled,
        n_agents=types.n_agents,
    )


class TypedNetBank:
    """Parameter banks keyed by vertex/edge type, shared across same-type vertices."""

    def __init__(
        self,
        vertex_type_ids,
        edge_type_ids,
        obs_dim: int,
        pooled_dim: int,
        hidden_width: int,
        action_dim: int,
        rng: RngStream,
        init_hidden: tuple = (64,),
        msg_hidden: tuple = (32,),
        choice_hidden: tuple = (64,),
        name: str = "bank",
    ):
        self.hidden_width = hidden_width
        self.action_dim = action_dim
        self.obs_dim = obs_dim
        self.init_nets = {
            t: MLP(obs_dim, list(init_hidden), hidden_width, rng.child(f"init{t}"), name=f"{name}.init{t}")
            for t in vertex_type_ids
        }
        self.msg_nets = {
            c: MLP(hidden_width, list(msg_hidden), hidden_width, rng.child(f"msg{c}"), name=f"{name}.msg{c}")
            for c in edge_type_ids
        }
        self.update_cells = {
            t: LSTMCell(hidden_width, hidden_width, rng.child(f"up{t}"), name=f"{name}.up{t}")
            for t in vertex_type_ids
        }
        self.choice_net = MLP(
            hidden_width + pooled_dim, list(choice_hidden), action_dim, rng.child("choice"), name=f"{name}.choice"
        )

    def parameters(self):
        ps = []
        for net in list(self.init_nets.values()) + list(self.msg_nets.values()) + list(self.update_cells.values()):
            ps += net.parameters()
        return ps + self.choice_net.parameters()

    def named_parameters(self) -> dict:
        return {p.name: p for p in self.parameters()}


@dataclass
class EdgeArrays:
    """Directed message routes grouped by edge type."""

    src: dict  # etype -> (Ek,) local source indices
    dst: dict  # etype -> (Ek,) local destination indices
    flat_w: dict  # etype -> (Ek,) flat indices into the weight matrix
    n_vertices: int


def build_edges(graph: RelevanceGraph, vset: VertexSet) -> EdgeArrays:
    """Directed edges: agent rows send to every present vertex; objects send
    back to agents along the same matrix entry."""
    types = graph.types
    n_agents = types.n_agents
    n_cols = types.n_cols
    by_type: dict = {}
    for li, col in enumerate(vset.cols):
        col = int(col)
        if col >= n_agents:
            continue
        row = col
        for lj, col_u in enumerate(vset.cols):
            col_u = int(col_u)
            if col_u == row:
                continue
            et = int(types.edge_types[row, col_u])
            flat = row * n_cols + col_u
            e = by_type.setdefault(et, ([], [], []))
            e[0].append(li)
            e[1].append(lj)
            e[2].append(flat)
            if col_u >= n_agents:  # object echoes back along the same entry
                e[0].append(lj)
                e[1].append(li)
                e[2].append(flat)
    return EdgeArrays(
        src={t: np.array(v[0], dtype=np.int64) for t, v in by_type.items()},
        dst={t: np.array(v[1], dtype=np.int64) for t, v in by_type.items()},
        flat_w={t: np.array(v[2], dtype=np.int64) for t, v in by_type.items()},
        n_vertices=len(vset.cols),
    )


def init_info(bank: TypedNetBank, vset: VertexSet) -> Tensor:
    """Initial information vectors, one per present vertex (round 0)."""
    if vset.obs.shape[1] != bank.obs_dim:
        raise InputError(f"observation width {vset.obs.shape[1]} != bank width {bank.obs_dim}")
    v = len(vset.cols)
    parts = []
    for t in np.unique(vset.vtypes):
        rows = np.nonzero(vset.vtypes == t)[0]
        if int(t) not in bank.init_nets:
            raise ConsistencyError(f"no init network for vertex type {int(t)}")
        mu_t = bank.init_nets[int(t)](Tensor(vset.obs[rows]))
        parts.append(scatter_rows(mu_t, rows, v))
    out = parts[0]
    for p in parts[1:]:
        out = out + p
    return out


def aggregate_messages(bank: TypedNetBank, graph: RelevanceGraph, edges: EdgeArrays, mu: Tensor) -> Tensor:
    """Per-vertex sum of incoming weighted typed messages."""
    v = edges.n_vertices
    flat_weights = reshape(graph.weights, (graph.n_agents * graph.n_cols, 1))
    inbox = None
    for et, src in edges.src.items():
        msg = bank.msg_nets[et](gather_rows(mu, src))
        w = gather_rows(flat_weights, edges.flat_w[et])
        bucket = _segment(msg * w, edges.dst[et], v)
        inbox = bucket if inbox is None else inbox + bucket
    if inbox is None:
        inbox = Tensor(np.zeros((v, bank.hidden_width)))
    return inbox


def _fast_round(bank: TypedNetBank, w_flat: np.ndarray, edges: EdgeArrays,
                mu: np.ndarray, cell: np.ndarray, vtypes: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Numpy-only round used when gradients are off (rollouts)."""
    v = edges.n_vertices
    inbox = np.zeros((v, bank.hidden_width))
    for et, src in edges.src.items():
        msg = bank.msg_nets[et](Tensor(mu[src])).data
        msg *= w_flat[edges.flat_w[et]][:, None]
        np.add.at(inbox, edges.dst[et], msg)
    mu_next = np.empty_like(mu)
    cell_next = np.empty_like(cell)
    for t in np.unique(vtypes):
        rows = np.nonzero(vtypes == t)[0]
        h_n, c_n = bank.update_cells[int(t)](Tensor(inbox[rows]), Tensor(mu[rows]), Tensor(cell[rows]))
        mu_next[rows] = h_n.data
        cell_next[rows] = c_n.data
    return mu_next, cell_next


def message_round(bank: TypedNetBank, graph: RelevanceGraph, edges: EdgeArrays,
                  mu: Tensor, cell: Tensor, vset: VertexSet) -> tuple[Tensor, Tensor]:
    """One message generation + information update round."""
    if mu.data.shape[0] != edges.n_vertices:
        raise ConsistencyError(
            f"information vectors cover {mu.data.shape[0]} vertices, graph context has {edges.n_vertices}"
        )
    if not grad_enabled():
        m, c = _fast_round(bank, graph.weights.data.reshape(-1), edges, mu.data, cell.data, vset.vtypes)
        return Tensor(m), Tensor(c)
    v = edges.n_vertices
    inbox = aggregate_messages(bank, graph, edges, mu)
    mu_parts, cell_parts = [], []
    for t in np.unique(vset.vtypes):
        rows = np.nonzero(vset.vtypes == t)[0]
        h_next, c_next = bank.update_cells[int(t)](
            gather_rows(inbox, rows), gather_rows(mu, rows), gather_rows(cell, rows)
        )
        mu_parts.append(scatter_rows(h_next, rows, v))
        cell_parts.append(scatter_rows(c_next, rows, v))
    mu_next, cell_next = mu_parts[0], cell_parts[0]
    for p in mu_parts[1:]:
        mu_next = mu_next + p
    for p in cell_parts[1:]:
        cell_next = cell_next + p
    return mu_next, cell_next


def _segment(t: Tensor, ids, n: int) -> Tensor:
    from ..autodiff import segment_sum

    return segment_sum(t, ids, n)


def choose_actions(bank: TypedNetBank, mu: Tensor, vset: VertexSet, agent_ids,
                   env_kind: str, sigma: float = 0.0, rng: RngStream | None = None):
    """Map final information vectors of the given agents to executable actions.

    Returns (actions dict, mean tensor (n, action_dim)) — the tensor is the
    differentiable policy output; the executed actions add exploration noise.
    """
    rows = []
    for a in agent_ids:
        if a not in vset.col_to_local:
            raise ContractError(f"agent {a} is not a present vertex")
        if a >= vset.n_agents:
            raise ContractError(f"vertex column {a} is an object, not an agent")
        rows.append(vset.col_to_local[a])
    rows = np.array(rows, dtype=np.int64)
    head_in = concat([gather_rows(mu, rows), Tensor(vset.pooled[rows])], axis=1)
    out = bank.choice_net(head_in)
    if env_kind == "predator-prey":
        mean = tanh(out)
        noise = np.zeros_like(mean.data)
        if sigma > 0.0:
            if rng is None:
                raise InputError("exploration noise needs an RngStream")
            noise = rng.generator.normal(0.0, sigma, size=mean.data.shape)
        vals = mean.data + noise
        actions = {}
        for i, a in enumerate(agent_ids):
            direction = ((vals[i, 0] + 1.0) * math.pi) % (2 * math.pi)
            speed = float(np.clip((vals[i, 1] + 1.0) / 2.0, 0.0, 1.0))
            actions[a] = MoveAction(direction=float(direction), speed=speed)
        return actions, mean
    if env_kind == "bomber":
        logits = out
        scores = logits.data.copy()
        if sigma > 0.0:
            if rng is None:
                raise InputError("exploration noise needs an RngStream")
            u = np.clip(rng.generator.random(scores.shape), 1e-12, 1 - 1e-12)
            scores = scores + sigma * (-np.log(-np.log(u)))
        actions = {a: int(np.argmax(scores[i])) for i, a in enumerate(agent_ids)}
        return actions, logits
    raise InputError(f"no action head for environment kind {env_kind!r}")


class MessagePassingActor:
    """Full decision pipeline: init, T message rounds, action heads."""

    def __init__(self, bank: TypedNetBank, rounds: int = 5, env_kind: str = "predator-prey"):
        if rounds < 0:
            raise InputError("round count must be >= 0")
        self.bank = bank
        self.rounds = rounds
        self.env_kind = env_kind

    def parameters(self):
        return self.bank.parameters()

    def forward(self, graph: RelevanceGraph, vset: VertexSet, agent_ids,
                sigma: float = 0.0, rng: RngStream | None = None):
        """Returns (actions, mean tensor, final mu).  Differentiable back to the
        bank parameters and the graph weights."""
        edges = build_edges(graph, vset)
        mu = init_info(self.bank, vset)
        cell = Tensor(np.zeros_like(mu.data))
        for _ in range(self.rounds):
            mu, cell = message_round(self.bank, graph, edges, mu, cell, vset)
        actions, mean = choose_actions(self.bank, mu, vset, agent_ids, self.env_kind, sigma, rng)
        return actions, mean, mu


def actor_forward(actor: MessagePassingActor, graph: RelevanceGraph, vset: VertexSet,
                  agent_ids, sigma: float = 0.0, rng: RngStream | None = None):
    return actor.forward(graph, vset, agent_ids, sigma=sigma, rng=rng)


class AggregateMLPActor:
    """Plain aggregation head used when message passing is ablated: the
    flattened graph plus the agent's pooled features feed one dense stack."""

    def __init__(self, n_agents: int, n_cols: int, pooled_dim: int, action_dim: int,
                 rng: RngStream, hidden: tuple = (128, 128, 32), env_kind: str = "predator-prey",
                 name: str = "agg"):
        self.in_dim = n_agents * n_cols + pooled_dim
        self.net = MLP(self.in_dim, list(hidden), action_dim, rng.child("net"), name=f"{name}.net")
        self.env_kind = env_kind
        self.action_dim = action_dim

    def parameters(self):
        return self.net.parameters()

    def forward(self, graph: RelevanceGraph, vset: VertexSet, agent_ids,
                sigma: float = 0.0, rng: RngStream | None = None):
        rows = np.array([vset.col_to_local[a] for a in agent_ids], dtype=np.int64)
        flat = reshape(graph.weights, (1, graph.n_agents * graph.n_cols))
        n = len(agent_ids)
        graph_block = concat([flat] * n, axis=0) if n > 1 else flat
        head_in = concat([graph_block, Tensor(vset.pooled[rows])], axis=1)
        out = self.net(head_in)
        if self.env_kind == "predator-prey":
            mean = tanh(out)
            vals = mean.data.copy()
            if sigma > 0.0:
                vals = vals + rng.generator.normal(0.0, sigma, size=vals.shape)
            actions = {}
            for i, a in enumerate(agent_ids):
                direction = ((vals[i, 0] + 1.0) * math.pi) % (2 * math.pi)
                speed = float(np.clip((vals[i, 1] + 1.0) / 2.0, 0.0, 1.0))
                actions[a] = MoveAction(direction=float(direction), speed=speed)
            return actions, mean, None
        scores = out.data.copy()
        if sigma > 0.0:
            u = np.clip(rng.generator.random(scores.shape), 1e-12, 1 - 1e-12)
            scores = scores + sigma * (-np.log(-np.log(u)))
        return {a: int(np.argmax(scores[i])) for i, a in enumerate(agent_ids)}, out, None


def mlp_aggregate_fallback(actor: AggregateMLPActor, graph: RelevanceGraph, vset: VertexSet,
                           agent_ids, sigma: float = 0.0, rng: RngStream | None = None):
    return actor.forward(graph, vset, agent_ids, sigma=sigma, rng=rng)
