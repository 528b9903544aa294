"""Initial embeddings for nodes, claims and sequences.

Three interchangeable providers:

* HASHED  — deterministic per-word vectors from a seeded hash PRNG.
* TABLE   — a trainable per-norm embedding matrix (built from the dataset).
* FILE    — precomputed contextual vectors loaded from an ``.hfce`` blob
            written by the offline exporter, with a JSON manifest carrying
            the subword-to-word alignment.

HASHED/TABLE claim and sequence vectors are mean pools followed by a
trainable d x d projection owned by the model parameters; FILE vectors are
returned exactly as stored.
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass

import numpy as np

from .corpus import Source, TrainingInstance
from .errors import BadEmbeddingFile, MissingKey
from .graph import EvidenceGraph, Granularity
from .linearize import WordToken, tokenize

MAGIC = b"HFCE"
VERSION = 1

UNK = "<unk>"


# --- hashed provider primitives ---------------------------------------------

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK = (1 << 64) - 1
_SPLITMIX_GAMMA = 0x9E3779B97F4A7C15
_XS_MULT = 0x2545F4914F6CDD1D


def _fnv1a64(data: bytes) -> int:
    h = _FNV_OFFSET
    for byte in data:
        h ^= byte
        h = (h * _FNV_PRIME) & _MASK
    return h


def hashed_embedding(norm: str, d: int, seed: int) -> np.ndarray:
    """Deterministic vector for a word: FNV-1a state driving xorshift64*.

    Each component is uniform on (-1/sqrt(d), 1/sqrt(d)).
    """
    state = _fnv1a64(norm.encode("utf-8")) ^ (seed & _MASK)
    if state == 0:
        state = _SPLITMIX_GAMMA
    inv = 1.0 / np.sqrt(d)
    out = np.empty(d, dtype=np.float64)
    x = state
    for i in range(d):
        x ^= (x >> 12)
        x = (x << 25) & _MASK
        x ^= (x >> 27)
        word = (x * _XS_MULT) & _MASK
        u = (word >> 11) / float(1 << 53)
        out[i] = (2.0 * u - 1.0) * inv
    return out


# --- EmbeddingFile ------------------------------------------------------------

def write_embedding_file(path: str, dim: int, records: dict[str, np.ndarray]) -> None:
    """Write the keyed binary vector store (magic HFCE, little-endian)."""
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<IIQ", VERSION, dim, len(records)))
        for key, vec in records.items():
            kb = key.encode("utf-8")
            v = np.asarray(vec, dtype="<f4")
            if v.shape != (dim,):
                raise BadEmbeddingFile(f"vector for {key!r} has shape {v.shape}, want ({dim},)")
            fh.write(struct.pack("<H", len(kb)))
            fh.write(kb)
            fh.write(v.tobytes())


def read_embedding_file(path: str) -> tuple[int, dict[str, np.ndarray]]:
    with open(path, "rb") as fh:
        head = fh.read(20)
        if len(head) < 20 or head[:4] != MAGIC:
            raise BadEmbeddingFile("bad magic or truncated header")
        version, dim, count = struct.unpack("<IIQ", head[4:])
        if version != VERSION:
            raise BadEmbeddingFile(f"unsupported version {version}")
        records: dict[str, np.ndarray] = {}
        for _ in range(count):
            lb = fh.read(2)
            if len(lb) < 2:
                raise BadEmbeddingFile("truncated record")
            (klen,) = struct.unpack("<H", lb)
            kb = fh.read(klen)
            vb = fh.read(4 * dim)
            if len(kb) < klen or len(vb) < 4 * dim:
                raise BadEmbeddingFile("truncated record")
            key = kb.decode("utf-8")
            if key in records:
                raise BadEmbeddingFile(f"duplicate key {key!r}")
            records[key] = np.frombuffer(vb, dtype="<f4").copy()
    return dim, records


# --- providers ----------------------------------------------------------------

@dataclass
class HashedProvider:
    dim: int
    seed: int = 0

    def __post_init__(self):
        self._cache: dict[str, np.ndarray] = {}

    def vector(self, norm: str) -> np.ndarray:
        v = self._cache.get(norm)
        if v is None:
            v = hashed_embedding(norm, self.dim, self.seed)
            self._cache[norm] = v
        return v


class TableProvider:
    """Trainable embedding table over the dataset vocabulary (plus <unk>)."""

    def __init__(self, dim: int, vocab: list[str]):
        self.dim = dim
        self.index = {UNK: 0}
        for w in vocab:
            if w not in self.index:
                self.index[w] = len(self.index)

    @property
    def vocab_size(self) -> int:
        return len(self.index)

    def row(self, norm: str) -> int:
        return self.index.get(norm, 0)


class FileProvider:
    """Precomputed contextual vectors plus subword alignment manifest.

    Key namespaces: ``w:<norm>``, ``c:<claim_id>:<ev_idx>:<tok_idx>``,
    ``cls:<claim_id>``, ``seq:<claim_id>:<source>``. The manifest maps each
    claim's evidence ids to their export indices and each subword token to
    its word index.
    """

    def __init__(self, path: str, manifest_path: str | None = None):
        self.dim, self.records = read_embedding_file(path)
        self.manifest = None
        if manifest_path is not None:
            with open(manifest_path, "r", encoding="utf-8") as fh:
                self.manifest = json.load(fh)

    def get(self, key: str) -> np.ndarray:
        v = self.records.get(key)
        if v is None:
            raise MissingKey(key)
        return v

    def _claim_entry(self, claim_id: str) -> dict:
        if self.manifest is None:
            raise MissingKey(f"manifest required for claim {claim_id!r}")
        entry = self.manifest.get("claims", {}).get(claim_id)
        if entry is None:
            raise MissingKey(f"manifest entry for claim {claim_id!r}")
        return entry

    def export_index(self, claim_id: str, evidence_id: str) -> int:
        entry = self._claim_entry(claim_id)
        idx = entry.get("evidence", {}).get(evidence_id)
        if idx is None:
            raise MissingKey(f"manifest evidence index for {claim_id}/{evidence_id}")
        return int(idx)

    def alignment(self, claim_id: str, export_idx: int) -> list[dict]:
        entry = self._claim_entry(claim_id)
        al = entry.get("alignment", {}).get(str(export_idx))
        if al is None:
            raise MissingKey(f"manifest alignment for {claim_id}/{export_idx}")
        return al

    def subword_tokens(self, instance: TrainingInstance, ev_idx: int) -> list[WordToken]:
        """Per-evidence subword tokens for TOKEN-granularity graphs."""
        export_idx = self.export_index(instance.claim_id, instance.evidence[ev_idx].id)
        al = self.alignment(instance.claim_id, export_idx)
        return [WordToken(surface=rec["text"], norm=rec["text"].lower(), position=pos)
                for pos, rec in enumerate(al)]


Provider = HashedProvider | TableProvider | FileProvider


# --- embedding assembly ---------------------------------------------------------

def node_embeddings(instance: TrainingInstance, graph: EvidenceGraph,
                    provider: Provider, *, granularity: Granularity = Granularity.WORD,
                    dtype=np.float64):
    """Initial node matrix H0 as [N x d].

    For HASHED this is a constant ndarray. For TABLE it returns the row
    indices (the trainable gather happens in the model, so gradients reach
    the table). For FILE/WORD each word row is the mean of its contextual
    subword vectors per the manifest alignment.
    """
    if isinstance(provider, HashedProvider):
        return np.stack([provider.vector(t.norm) for t, _ in graph.nodes]).astype(dtype)
    if isinstance(provider, TableProvider):
        return np.asarray([provider.row(t.norm) for t, _ in graph.nodes], dtype=np.int64)
    # FILE provider
    # evidence_index in the graph counts surviving spans; map back to items
    if granularity is Granularity.TOKEN:
        rows = []
        for span_idx, (i, j) in enumerate(graph.spans):
            item = instance.evidence[graph.source_indices[span_idx]]
            export_idx = provider.export_index(instance.claim_id, item.id)
            for tok_pos in range(j - i + 1):
                rows.append(provider.get(
                    f"c:{instance.claim_id}:{export_idx}:{tok_pos}"))
        return np.stack(rows).astype(dtype)
    rows = []
    for span_idx, (i, j) in enumerate(graph.spans):
        item = instance.evidence[graph.source_indices[span_idx]]
        export_idx = provider.export_index(instance.claim_id, item.id)
        align = provider.alignment(instance.claim_id, export_idx)
        by_word: dict[int, list[np.ndarray]] = {}
        for rec in align:
            by_word.setdefault(int(rec["word"]), []).append(
                provider.get(f"c:{instance.claim_id}:{export_idx}:{int(rec['tok'])}"))
        for word_pos in range(j - i + 1):
            subs = by_word.get(word_pos)
            if not subs:
                raise MissingKey(
                    f"no subwords aligned to word {word_pos} of "
                    f"{instance.claim_id}/{item.id}")
            rows.append(np.mean(np.stack(subs).astype(dtype), axis=0))
    return np.stack(rows).astype(dtype)


def claim_pool(instance: TrainingInstance, provider: Provider, dtype=np.float64):
    """Mean claim-word vector (HASHED) or row indices (TABLE) or cls lookup (FILE)."""
    if isinstance(provider, FileProvider):
        return provider.get(f"cls:{instance.claim_id}").astype(dtype)
    toks = tokenize(instance.claim_text)
    if not toks:
        raise MissingKey(f"claim {instance.claim_id!r} has no tokens")
    if isinstance(provider, HashedProvider):
        return np.mean([provider.vector(t.norm) for t in toks], axis=0).astype(dtype)
    return np.asarray([provider.row(t.norm) for t in toks], dtype=np.int64)


def sequence_pool(instance: TrainingInstance, provider: Provider, dtype=np.float64):
    """Mean over claim + all evidence words (HASHED/TABLE) or seq lookup (FILE)."""
    if isinstance(provider, FileProvider):
        return provider.get(
            f"seq:{instance.claim_id}:{instance.source.value}").astype(dtype)
    from .linearize import evidence_words
    toks = tokenize(instance.claim_text)
    for item in instance.evidence:
        toks = toks + evidence_words(item)
    if not toks:
        raise MissingKey(f"claim {instance.claim_id!r} yields no tokens")
    if isinstance(provider, HashedProvider):
        return np.mean([provider.vector(t.norm) for t in toks], axis=0).astype(dtype)
    return np.asarray([provider.row(t.norm) for t in toks], dtype=np.int64)


def build_vocab(records, extra: list[str] | None = None) -> list[str]:
    """Norm vocabulary over all claims and evidence in dataset order."""
    from .linearize import evidence_words
    seen: dict[str, None] = {}
    for rec in records:
        for t in tokenize(rec.claim_text):
            seen.setdefault(t.norm)
        for item in list(rec.retrieved) + list(rec.golden):
            for t in evidence_words(item):
                seen.setdefault(t.norm)
    if extra:
        for w in extra:
            seen.setdefault(w)
    return list(seen)
