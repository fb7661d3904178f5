"""Proposal-graph referring-expression grounding engine."""

from ._core import (
    Box,
    ExpressionRepr,
    GrounderError,
    GroundingOutput,
    MetricsReport,
    Model,
    ProposalGraph,
    ProposalNode,
    SceneConfig,
    __version__,
    evaluate,
    generate,
    giou,
    iou,
    oracle_referred_index,
    read_graphs,
    to_corners,
    top_n,
    write_graphs,
)

__all__ = [
    "Box",
    "ExpressionRepr",
    "GrounderError",
    "GroundingOutput",
    "MetricsReport",
    "Model",
    "ProposalGraph",
    "ProposalNode",
    "SceneConfig",
    "__version__",
    "evaluate",
    "generate",
    "giou",
    "iou",
    "oracle_referred_index",
    "read_graphs",
    "to_corners",
    "top_n",
    "write_graphs",
]
