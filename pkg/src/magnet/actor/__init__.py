"""Message-passing decision stage and its ablation fallback."""
from .message_passing import (
    AggregateMLPActor,
    EdgeArrays,
    MessagePassingActor,
    TypedNetBank,
    VertexSet,
    actor_forward,
    aggregate_messages,
    build_edges,
    choose_actions,
    collect_observations,
    init_info,
    message_round,
    mlp_aggregate_fallback,
)
