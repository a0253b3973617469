"""Training losses for the graph generation stage.

The base loss penalises change between consecutive graphs (squared Frobenius
norm of the difference).  The event-heuristic variant adds, for every scoring
event, a squared pull of the involved edge weight toward the event's weight.
Event weights (25..100) are normalised by ``event_scale`` so targets fall
inside the graph's [-1, 1] output range.
"""
from __future__ import annotations

import numpy as np

from ..autodiff import Tensor, gather_rows, reshape
from ..errors import DimensionError, InputError

DEFAULT_EVENT_SCALE = 100.0


def graph_temporal_loss(w_t: Tensor, w_prev) -> Tensor:
    """Sum of squared differences between consecutive graph weights."""
    prev = w_prev if isinstance(w_prev, Tensor) else Tensor(w_prev)
    if w_t.data.shape != prev.data.shape:
        raise DimensionError(f"graph shapes differ: {w_t.data.shape} vs {prev.data.shape}")
    diff = w_t - prev
    return (diff * diff).sum()


def event_edge_index(event, n_agents: int, n_cols: int) -> int:
    """Flat index of the graph entry an event binds to."""
    v, u = event.edge
    if v[0] != "agent" or not 0 <= v[1] < n_agents:
        raise InputError(f"event actor {v} is not a valid agent row")
    col = u[1] if u[0] == "agent" else n_agents + u[1]
    if not 0 <= col < n_cols:
        raise InputError(f"event target {u} falls outside the graph columns")
    return v[1] * n_cols + col


def graph_heuristic_loss(w_t: Tensor, w_prev, events, event_scale: float = DEFAULT_EVENT_SCALE) -> Tensor:
    """Temporal loss plus squared pulls of event edges toward normalised event weights."""
    loss = graph_temporal_loss(w_t, w_prev)
    if not events:
        return loss
    n_agents, n_cols = w_t.data.shape
    idx = [event_edge_index(ev, n_agents, n_cols) for ev in events]
    targets = np.array([[ev.weight / event_scale] for ev in events])
    flat = reshape(w_t, (n_agents * n_cols, 1))
    picked = gather_rows(flat, idx)
    diff = picked - Tensor(targets)
    return loss + (diff * diff).sum()
