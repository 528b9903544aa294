"""Word-level heterogeneous evidence graph construction and export.

Three relations: R_S (sliding-window edges inside sentence evidence),
R_T (the same windowing over linearized table cells) and R_E (links between
occurrences of a shared non-stopword across different evidence pieces).
"""
from __future__ import annotations

import enum
import json
import logging
from dataclasses import dataclass, field
from importlib import resources

from .corpus import Kind, TrainingInstance
from .errors import EmptyGraph
from .linearize import WordToken, evidence_words

log = logging.getLogger(__name__)


class RelId(enum.IntEnum):
    R_S = 0  # intra-sentence
    R_T = 1  # intra-table
    R_E = 2  # inter-evidence


class Granularity(str, enum.Enum):
    WORD = "WORD"
    TOKEN = "TOKEN"


def default_stopwords() -> frozenset[str]:
    text = resources.files("heterfc.data").joinpath("stopwords_en.txt").read_text("utf-8")
    return parse_stopwords(text)


def parse_stopwords(text: str) -> frozenset[str]:
    words = set()
    for line in text.splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            words.add(line)
    return frozenset(words)


@dataclass(frozen=True)
class GraphConfig:
    window: int = 2
    stopwords: frozenset[str] = field(default_factory=default_stopwords)
    heterogeneous: bool = True
    fully_connected: bool = False
    granularity: Granularity = Granularity.WORD

    def __post_init__(self):
        if self.window < 1:
            raise ValueError("window must be >= 1")


@dataclass(frozen=True)
class EvidenceGraph:
    nodes: tuple[tuple[WordToken, int], ...]       # (token, evidence_index)
    spans: tuple[tuple[int, int], ...]             # inclusive [i, j] per evidence
    edges: dict[RelId, tuple[tuple[int, int], ...]]
    # span index -> index into the instance's evidence list (spans can be
    # fewer than evidence items when something tokenizes to nothing)
    source_indices: tuple[int, ...] = ()

    @property
    def num_nodes(self) -> int:
        return len(self.nodes)

    @property
    def num_evidence(self) -> int:
        return len(self.spans)


def intra_edges(span_len: int, w: int, *, fully_connected: bool = False) -> list[tuple[int, int]]:
    """Directed window edges local to one span: all (i, j), i != j, |i-j| <= w."""
    pairs = []
    for i in range(span_len):
        hi = span_len if fully_connected else min(span_len, i + w + 1)
        for j in (range(span_len) if fully_connected else range(max(0, i - w), hi)):
            if i != j:
                pairs.append((i, j))
    return pairs


def inter_edges(span_tokens: list[list[WordToken]],
                stopwords: frozenset[str]) -> list[tuple[int, int]]:
    """Pair every two occurrences of a shared non-stopword in distinct spans.

    Returned indices are global (offsets accumulated over spans); both
    directions are emitted.
    """
    occurrences: dict[str, list[tuple[int, int]]] = {}  # norm -> [(span, global idx)]
    offset = 0
    for span_idx, toks in enumerate(span_tokens):
        for t in toks:
            if t.norm and t.norm not in stopwords:
                occurrences.setdefault(t.norm, []).append((span_idx, offset + t.position))
        offset += len(toks)
    pairs = []
    for occ in occurrences.values():
        for a in range(len(occ)):
            for b in range(a + 1, len(occ)):
                if occ[a][0] != occ[b][0]:
                    u, v = occ[a][1], occ[b][1]
                    pairs.append((u, v))
                    pairs.append((v, u))
    return pairs


def _all_cross_span_pairs(span_lens: list[int]) -> list[tuple[int, int]]:
    offsets = [0]
    for n in span_lens:
        offsets.append(offsets[-1] + n)
    pairs = []
    for a in range(len(span_lens)):
        for b in range(a + 1, len(span_lens)):
            for u in range(offsets[a], offsets[a + 1]):
                for v in range(offsets[b], offsets[b + 1]):
                    pairs.append((u, v))
                    pairs.append((v, u))
    return pairs


def build_graph(instance: TrainingInstance, cfg: GraphConfig,
                token_source=None) -> EvidenceGraph:
    """Build the evidence graph for one training instance.

    Claim words are not graph nodes; only evidence words are. Evidence that
    tokenizes to nothing is dropped with a warning. ``token_source``, when
    given, supplies per-evidence token lists (used for TOKEN granularity,
    where nodes are subwords provided by the embedding file's manifest).
    """
    span_tokens: list[list[WordToken]] = []
    span_kinds: list[Kind] = []
    source_indices: list[int] = []
    for ev_idx, item in enumerate(instance.evidence):
        if token_source is not None:
            toks = token_source(instance, ev_idx)
        else:
            toks = evidence_words(item)
        if not toks:
            log.warning("claim %s: evidence %s has no tokens, dropped",
                        instance.claim_id, item.id)
            continue
        span_tokens.append(toks)
        span_kinds.append(item.kind)
        source_indices.append(ev_idx)
    if not span_tokens:
        raise EmptyGraph(f"claim {instance.claim_id!r}: no evidence survives tokenization")

    nodes: list[tuple[WordToken, int]] = []
    spans: list[tuple[int, int]] = []
    edges: dict[RelId, list[tuple[int, int]]] = {r: [] for r in RelId}
    offset = 0
    for span_idx, (toks, kind) in enumerate(zip(span_tokens, span_kinds)):
        nodes.extend((t, span_idx) for t in toks)
        spans.append((offset, offset + len(toks) - 1))
        rel = RelId.R_S if kind is Kind.SENTENCE else RelId.R_T
        edges[rel].extend((offset + i, offset + j) for i, j in
                          intra_edges(len(toks), cfg.window,
                                      fully_connected=cfg.fully_connected))
        offset += len(toks)

    if cfg.fully_connected:
        edges[RelId.R_E].extend(_all_cross_span_pairs([len(t) for t in span_tokens]))
    else:
        edges[RelId.R_E].extend(inter_edges(span_tokens, cfg.stopwords))

    if not cfg.heterogeneous:
        merged = edges[RelId.R_S] + edges[RelId.R_T] + edges[RelId.R_E]
        edges = {RelId.R_S: merged, RelId.R_T: [], RelId.R_E: []}

    return EvidenceGraph(
        nodes=tuple(nodes),
        spans=tuple(spans),
        edges={r: tuple(e) for r, e in edges.items()},
        source_indices=tuple(source_indices),
    )


# --- export / import --------------------------------------------------------

_DOT_COLORS = {RelId.R_S: "blue", RelId.R_T: "darkgreen", RelId.R_E: "red"}


def export_graph(g: EvidenceGraph, fmt: str = "json") -> bytes:
    fmt = fmt.lower()
    if fmt == "json":
        doc = {
            "nodes": [{"surface": t.surface, "norm": t.norm, "evidence_index": ev}
                      for t, ev in g.nodes],
            "edges": {r.name: [list(p) for p in g.edges[r]] for r in RelId},
        }
        return json.dumps(doc, ensure_ascii=False, indent=1).encode("utf-8")
    if fmt == "dot":
        lines = ["graph evidence {"]
        for idx, (t, ev) in enumerate(g.nodes):
            lines.append(f'  n{idx} [label="{t.surface}" group={ev}];')
        for r in RelId:
            seen = set()
            for u, v in g.edges[r]:
                key = (min(u, v), max(u, v))
                if key in seen:
                    continue
                seen.add(key)
                lines.append(f"  n{key[0]} -- n{key[1]} [color={_DOT_COLORS[r]}];")
        lines.append("}")
        return ("\n".join(lines) + "\n").encode("utf-8")
    raise ValueError(f"unknown export format {fmt!r}")


def import_graph(data: bytes) -> EvidenceGraph:
    """Inverse of the JSON export."""
    doc = json.loads(data.decode("utf-8"))
    nodes = []
    spans: list[tuple[int, int]] = []
    pos_in_span = 0
    for idx, n in enumerate(doc["nodes"]):
        ev = n["evidence_index"]
        if ev == len(spans):
            spans.append((idx, idx))
            pos_in_span = 0
        else:
            spans[ev] = (spans[ev][0], idx)
            pos_in_span += 1
        nodes.append((WordToken(n["surface"], n["norm"], pos_in_span), ev))
    edges = {r: tuple(tuple(p) for p in doc["edges"][r.name]) for r in RelId}
    return EvidenceGraph(nodes=tuple(nodes), spans=tuple(spans), edges=edges,
                         source_indices=tuple(range(len(spans))))
