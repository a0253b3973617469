"""Relevance-graph generation: types, network, and losses."""
from .schema import (
    BM_TYPE_NAMES,
    PP_TYPE_NAMES,
    TypeAssignment,
    assign_types,
    bomber_edge_type,
    pp_edge_type,
)
from .relevance import RelevanceGraph, output_mask, random_graph_values, select_graph
from .ggn import ACTION_WIDTH, GGNInput, GraphGenerator, HistoryBuffer, build_ggn_input, ggn_forward
from .losses import DEFAULT_EVENT_SCALE, event_edge_index, graph_heuristic_loss, graph_temporal_loss
