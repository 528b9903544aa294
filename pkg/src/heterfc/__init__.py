"""Word-level heterogeneous evidence graphs for claim verification."""

from .corpus import (
    ClaimRecord,
    EvidenceItem,
    Kind,
    Label,
    Source,
    TableKind,
    TrainingInstance,
    augment,
    parse_claims,
    serialize,
)
from .graph import EvidenceGraph, GraphConfig, Granularity, RelId, build_graph
from .linearize import WordToken, evidence_words, linearize_cell, tokenize
from .model import ModelConfig, forward, init_params
from .train import Metrics, TrainConfig, evaluate, train

__all__ = [
    "ClaimRecord", "EvidenceItem", "Kind", "Label", "Source", "TableKind",
    "TrainingInstance", "augment", "parse_claims", "serialize",
    "EvidenceGraph", "GraphConfig", "Granularity", "RelId", "build_graph",
    "WordToken", "evidence_words", "linearize_cell", "tokenize",
    "ModelConfig", "forward", "init_params",
    "Metrics", "TrainConfig", "evaluate", "train",
]

__version__ = "0.1.0"
