"""Graph generation: assemble recent history and map it to the next relevance graph.

Input assembly keeps a short ring of (state, action) pairs plus the previously
generated graph.  At episode start the three state slots all hold the initial
state, the action slots are zero, and the previous graph is a small seeded
random matrix.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..autodiff import (
    MLP,
    ConvPoolEncoder,
    Dense,
    SelfAttentionEncoder,
    Tensor,
    concat,
    pad_last,
    relu,
    tanh,
)
from ..errors import DimensionError, InputError
from ..rng import RngStream
from .relevance import RelevanceGraph, output_mask, random_graph_values
from .schema import TypeAssignment

ACTION_WIDTH = 6


@dataclass
class GGNInput:
    """The three most recent states, two most recent joint actions, previous graph."""

    states: tuple  # (X(t), X(t-1), X(t-2)) numpy (D, D, M)
    actions: tuple  # (a(t-1), a(t-2)) numpy (n_agents, ACTION_WIDTH)
    prev_graph: np.ndarray  # (n_agents, n_cols), gradient-detached


class HistoryBuffer:
    """Ring of recent states/actions feeding graph generation."""

    def __init__(self, n_agents: int, n_cols: int, rng: RngStream):
        self.n_agents = n_agents
        self.n_cols = n_cols
        self._rng = rng
        self.states: list[np.ndarray] = []
        self.actions: list[np.ndarray] = []
        self.graphs: list[np.ndarray] = []

    def start_episode(self, initial_state: np.ndarray) -> None:
        self.states = [initial_state]
        self.actions = []
        self.graphs = [random_graph_values(self.n_agents, self.n_cols, self._rng)]

    def push(self, state: np.ndarray, joint_action: np.ndarray, graph_values: np.ndarray) -> None:
        self.states.append(state)
        self.actions.append(joint_action)
        self.graphs.append(graph_values)
        if len(self.states) > 3:
            self.states = self.states[-3:]
            self.actions = self.actions[-2:]
            self.graphs = self.graphs[-1:]


def build_ggn_input(buffer: HistoryBuffer, detach_graph: bool = True) -> GGNInput:
    """Assemble the generator input, duplicating early-episode slots as needed."""
    if not buffer.states:
        raise InputError("history buffer is empty; call start_episode first")
    s = buffer.states
    states = (s[-1], s[-2] if len(s) >= 2 else s[-1], s[-3] if len(s) >= 3 else s[0])
    zeros = np.zeros((buffer.n_agents, ACTION_WIDTH))
    a = buffer.actions
    actions = (a[-1] if len(a) >= 1 else zeros, a[-2] if len(a) >= 2 else zeros)
    prev = buffer.graphs[-1]
    return GGNInput(states=states, actions=actions, prev_graph=prev.copy() if detach_graph else prev)


class GraphGenerator:
    """Maps a GGNInput to the next relevance graph.

    The core is either a dense stack over the concatenated features or a
    self-attention encoder over one token per input source (3 states, 2 action
    sets, previous graph).
    """

    def __init__(
        self,
        grid: int,
        channels: int,
        n_agents: int,
        n_cols: int,
        rng: RngStream,
        mode: str = "mlp",
        conv_kernels: int = 4,
        conv_size: int = 5,
        core_hidden: tuple = (128, 32, 32),
        head_hidden: int = 32,
        attn_width: int = 32,
        attn_heads: int = 2,
        dropout_rate: float = 0.2,
        feature_width: int | None = None,
        name: str = "ggn",
    ):
        if mode not in ("mlp", "self-attention"):
            raise InputError(f"unknown graph generator mode {mode!r}")
        self.mode = mode
        self.n_agents = n_agents
        self.n_cols = n_cols
        self.grid = grid
        self.channels = channels
        self.encoder = ConvPoolEncoder(grid, channels, conv_kernels, conv_size, rng.child("conv"), name=f"{name}.enc")
        self.feature_width = feature_width or self.encoder.out_dim
        if self.feature_width < self.encoder.out_dim:
            raise InputError("feature_width smaller than the conv encoder output")
        act_flat = n_agents * ACTION_WIDTH
        graph_flat = n_agents * n_cols
        out_dim = n_agents * n_cols
        if mode == "mlp":
            in_dim = 3 * self.feature_width + 2 * act_flat + graph_flat
            self.fc = Dense(in_dim, core_hidden[0], rng.child("fc"), name=f"{name}.fc")
            self.core = MLP(core_hidden[0], list(core_hidden[1:]), core_hidden[-1], rng.child("core"), name=f"{name}.core")
        else:
            self.proj_state = Dense(self.feature_width, attn_width, rng.child("ps"), name=f"{name}.ps")
            self.proj_action = Dense(act_flat, attn_width, rng.child("pa"), name=f"{name}.pa")
            self.proj_graph = Dense(graph_flat, attn_width, rng.child("pg"), name=f"{name}.pg")
            self.attn = SelfAttentionEncoder(attn_width, attn_heads, 2 * attn_width, rng.child("sa"), name=f"{name}.sa")
            self.core_out = 6 * attn_width
        core_out = core_hidden[-1] if mode == "mlp" else self.core_out
        self.head = MLP(core_out, [head_hidden], out_dim, rng.child("head"), name=f"{name}.head",
                        dropout_rate=dropout_rate, out_init="small")
        self.name = name

    def parameters(self):
        ps = self.encoder.parameters() + self.head.parameters()
        if self.mode == "mlp":
            ps += self.fc.parameters() + self.core.parameters()
        else:
            ps += (
                self.proj_state.parameters()
                + self.proj_action.parameters()
                + self.proj_graph.parameters()
                + self.attn.parameters()
            )
        return ps

    def named_parameters(self) -> dict:
        return {p.name: p for p in self.parameters()}

    def forward(self, ggn_input: GGNInput, types: TypeAssignment, rng: RngStream | None = None,
                train_mode: bool = False, timestamp: int = 0) -> RelevanceGraph:
        """Full pipeline: encode states, fuse with actions and previous graph, squash, mask."""
        for k, st in enumerate(ggn_input.states):
            if st.shape != (self.grid, self.grid, self.channels):
                raise DimensionError(
                    f"{self.name}: state {k} has shape {st.shape}, expected {(self.grid, self.grid, self.channels)}"
                )
        if ggn_input.prev_graph.shape != (self.n_agents, self.n_cols):
            raise DimensionError(
                f"{self.name}: previous graph shape {ggn_input.prev_graph.shape} != {(self.n_agents, self.n_cols)}"
            )
        stacked = Tensor(np.stack(ggn_input.states))
        feats3 = self.encoder(stacked)  # (3, feat)
        feats3 = pad_last(feats3, self.feature_width)
        acts = [Tensor(a.reshape(1, -1)) for a in ggn_input.actions]
        prev = Tensor(ggn_input.prev_graph.reshape(1, -1))

        if self.mode == "mlp":
            flat_states = feats3.reshape(1, 3 * self.feature_width)
            joined = concat([flat_states] + acts + [prev], axis=1)
            h = relu(self.fc(joined))
            h = self.core(h)
        else:
            tokens = concat(
                [self.proj_state(feats3), self.proj_action(concat(acts, axis=0)), self.proj_graph(prev)],
                axis=0,
            )
            encoded = self.attn(tokens)  # (6, attn_width)
            h = encoded.reshape(1, self.core_out)

        raw = self.head(h, rng=rng, train_mode=train_mode)
        squashed = tanh(raw.reshape(self.n_agents, self.n_cols))
        masked = squashed * output_mask(types)
        return RelevanceGraph(weights=masked, types=types, timestamp=timestamp)


def ggn_forward(ggn: GraphGenerator, ggn_input: GGNInput, types: TypeAssignment, **kw) -> RelevanceGraph:
    return ggn.forward(ggn_input, types, **kw)
