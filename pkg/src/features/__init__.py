"""그래프 특징 모듈"""

from .graph_builder import (
    GraphSample,
    FeatureError,
    NODE_FEATURE_NAMES,
    local_degree_profile,
    diagonal_dominance_feats,
    position_embedding,
    build_graph,
)

__all__ = [
    "GraphSample",
    "FeatureError",
    "NODE_FEATURE_NAMES",
    "local_degree_profile",
    "diagonal_dominance_feats",
    "position_embedding",
    "build_graph",
]
