"""HeterFC forward pass and multitask loss on top of the tape engine.

Pipeline: initial node matrix -> k relational graph-convolution layers ->
per-evidence max||mean readout -> claim-conditioned attention over evidence ->
fusion MLP over graph and sequence representations -> class probabilities.
The loss couples veracity cross-entropy with a binary relevance loss on the
raw attention scores.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import tensor as T
from .corpus import NUM_CLASSES, TrainingInstance
from .embed import (
    FileProvider,
    HashedProvider,
    Provider,
    TableProvider,
    claim_pool,
    node_embeddings,
    sequence_pool,
)
from .errors import ShapeMismatch
from .graph import EvidenceGraph, Granularity, RelId
from .tensor import Tensor

EPS_PROB = 1e-12


@dataclass(frozen=True)
class ModelConfig:
    dim: int
    k: int = 2
    relations: tuple[RelId, ...] = (RelId.R_S, RelId.R_T, RelId.R_E)
    attn_hidden: int | None = None
    fusion_hidden: int | None = None
    num_classes: int = NUM_CLASSES
    rgcn_activation: str = "sigmoid"  # "relu" available for experimentation
    provider_kind: str = "HASHED"     # HASHED | TABLE | FILE
    vocab_size: int = 0               # TABLE only
    granularity: Granularity = Granularity.WORD

    @property
    def d_a(self) -> int:
        return self.attn_hidden or self.dim

    @property
    def d_f(self) -> int:
        return self.fusion_hidden or self.dim


def param_shapes(cfg: ModelConfig) -> dict[str, tuple[int, ...]]:
    d, da, df, c = cfg.dim, cfg.d_a, cfg.d_f, cfg.num_classes
    shapes: dict[str, tuple[int, ...]] = {}
    for layer in range(cfg.k):
        for rel in cfg.relations:
            shapes[f"rgcn.{layer}.{rel.name}"] = (d, d)
        shapes[f"rgcn.{layer}.self"] = (d, d)
    shapes["attn.W0"] = (3 * d, da)
    shapes["attn.b0"] = (1, da)
    shapes["attn.W1"] = (da, 1)
    shapes["attn.b1"] = (1, 1)
    shapes["fusion.W0"] = (3 * d, df)
    shapes["fusion.b0"] = (1, df)
    shapes["fusion.W1"] = (df, c)
    shapes["fusion.b1"] = (1, c)
    if cfg.provider_kind in ("HASHED", "TABLE"):
        shapes["embed.proj_claim"] = (d, d)
        shapes["embed.proj_seq"] = (d, d)
    if cfg.provider_kind == "TABLE":
        shapes["embed.table"] = (cfg.vocab_size, d)
    return shapes


def init_params(cfg: ModelConfig, seed: int = 0, dtype=np.float64) -> dict[str, Tensor]:
    """Glorot-uniform init, deterministic in parameter-name order."""
    rng = np.random.default_rng(seed)
    params: dict[str, Tensor] = {}
    for name, shape in param_shapes(cfg).items():
        if name.endswith(("b0", "b1")):
            data = np.zeros(shape)
        else:
            fan_in, fan_out = shape[0], shape[-1]
            a = np.sqrt(6.0 / (fan_in + fan_out))
            data = rng.uniform(-a, a, size=shape)
        params[name] = Tensor(data.astype(dtype), requires_grad=True)
    return params


def is_embed_param(name: str) -> bool:
    return name.startswith("embed.")


# --- forward pieces -----------------------------------------------------------

def _edge_arrays(graph: EvidenceGraph, rel: RelId):
    edges = graph.edges.get(rel, ())
    if not edges:
        return None
    arr = np.asarray(edges, dtype=np.int64)
    src, dst = arr[:, 0], arr[:, 1]
    deg = np.bincount(dst, minlength=graph.num_nodes).astype(np.float64)
    inv = np.zeros_like(deg)
    np.divide(1.0, deg, out=inv, where=deg > 0)
    return src, dst, inv


def rgcn_layer(h: Tensor, graph: EvidenceGraph, weights: dict[RelId, Tensor],
               self_weight: Tensor, activation: str = "sigmoid",
               edge_cache: dict | None = None) -> Tensor:
    """One layer of relational graph convolution.

    Per relation: average the features of each node's neighbors under that
    relation, transform with the relation matrix, sum across relations, add
    the self transform and squash. Nodes without neighbors under a relation
    contribute nothing for it.
    """
    if h.shape[0] != graph.num_nodes:
        raise ShapeMismatch(f"H has {h.shape[0]} rows, graph has {graph.num_nodes}")
    z = T.matmul(h, self_weight)
    for rel, w in weights.items():
        cached = edge_cache.get(rel) if edge_cache is not None else _edge_arrays(graph, rel)
        if cached is None:
            continue
        src, dst, inv_deg = cached
        msg = T.gather_rows(h, src)
        agg = T.scatter_add(msg, dst, graph.num_nodes)
        avg = T.scale_rows(agg, inv_deg)
        z = T.add(z, T.matmul(avg, w))
    return T.sigmoid(z) if activation == "sigmoid" else T.relu(z)


def propagate(h0: Tensor, graph: EvidenceGraph, params: dict[str, Tensor],
              cfg: ModelConfig) -> Tensor:
    edge_cache = {rel: _edge_arrays(graph, rel) for rel in cfg.relations}
    h = h0
    for layer in range(cfg.k):
        weights = {rel: params[f"rgcn.{layer}.{rel.name}"] for rel in cfg.relations}
        h = rgcn_layer(h, graph, weights, params[f"rgcn.{layer}.self"],
                       cfg.rgcn_activation, edge_cache)
    return h


def readout(h: Tensor, spans) -> Tensor:
    """Per-span max||mean pooling: [M x 2d]."""
    return T.concat([T.segment_max(h, spans), T.segment_mean(h, spans)], axis=1)


def attention(c: Tensor, ev: Tensor, params: dict[str, Tensor]):
    """Claim-conditioned evidence scoring.

    Returns (g, alpha, o_g): raw scores [1 x M], softmax weights [1 x M] and
    the attention-weighted evidence sum [1 x 2d].
    """
    m = ev.shape[0]
    x = T.concat([T.broadcast_row(c, m), ev], axis=1)
    hidden = T.relu(T.add(T.matmul(x, params["attn.W0"]), params["attn.b0"]))
    g_col = T.add(T.matmul(hidden, params["attn.W1"]), params["attn.b1"])
    g = T.reshape(g_col, (1, m))
    alpha = T.softmax(g, axis=1)
    o_g = T.matmul(alpha, ev)
    return g, alpha, o_g


def fuse_predict(o_g: Tensor, o_t: Tensor, params: dict[str, Tensor]) -> Tensor:
    x = T.concat([o_g, o_t], axis=1)
    hidden = T.relu(T.add(T.matmul(x, params["fusion.W0"]), params["fusion.b0"]))
    logits = T.add(T.matmul(hidden, params["fusion.W1"]), params["fusion.b1"])
    return T.softmax(logits, axis=1)


def loss_c(p_hat: Tensor, label: int, num_classes: int = NUM_CLASSES) -> Tensor:
    onehot = np.zeros((1, num_classes), dtype=p_hat.dtype)
    onehot[0, label] = 1.0
    picked = T.sum_all(T.mul(p_hat, Tensor(onehot)))
    return T.neg(T.log(T.clip(picked, EPS_PROB, 1.0)))


def loss_e(g: Tensor, labels) -> Tensor:
    """Mean binary cross-entropy of sigmoid(g) against relevance labels."""
    t = np.asarray(labels, dtype=g.dtype).reshape(1, -1)
    if t.shape != g.shape:
        raise ShapeMismatch(f"labels {t.shape} vs scores {g.shape}")
    s = T.clip(T.sigmoid(g), EPS_PROB, 1.0 - EPS_PROB)
    pos = T.mul(T.log(s), Tensor(t))
    negterm = T.mul(T.log(T.add(T.smul(s, -1.0), Tensor(np.ones_like(t)))),
                    Tensor(1.0 - t))
    return T.neg(T.mean_all(T.add(pos, negterm)))


def total_loss(lc: Tensor, le: Tensor, beta: float) -> Tensor:
    return T.add(lc, T.smul(le, beta))


# --- full forward ---------------------------------------------------------------

@dataclass
class ForwardOutput:
    p_hat: np.ndarray          # [C]
    alpha: np.ndarray          # [M]
    g: np.ndarray              # [M]
    o_g: np.ndarray
    o_t: np.ndarray
    loss_c: float = float("nan")
    loss_e: float = float("nan")
    loss: float = float("nan")
    loss_tensor: Tensor | None = field(default=None, repr=False)


def _claim_vector(instance, provider, params, dtype) -> Tensor:
    pooled = claim_pool(instance, provider, dtype=dtype)
    if isinstance(provider, FileProvider):
        return Tensor(pooled.reshape(1, -1))
    if isinstance(provider, TableProvider):
        rows = T.gather_rows(params["embed.table"], pooled)
        mean = T.segment_mean(rows, [(0, len(pooled) - 1)])
        return T.matmul(mean, params["embed.proj_claim"])
    return T.matmul(Tensor(pooled.reshape(1, -1)), params["embed.proj_claim"])


def _sequence_vector(instance, provider, params, dtype) -> Tensor:
    pooled = sequence_pool(instance, provider, dtype=dtype)
    if isinstance(provider, FileProvider):
        return Tensor(pooled.reshape(1, -1))
    if isinstance(provider, TableProvider):
        rows = T.gather_rows(params["embed.table"], pooled)
        mean = T.segment_mean(rows, [(0, len(pooled) - 1)])
        return T.matmul(mean, params["embed.proj_seq"])
    return T.matmul(Tensor(pooled.reshape(1, -1)), params["embed.proj_seq"])


def node_matrix(instance: TrainingInstance, graph: EvidenceGraph,
                provider: Provider, params: dict[str, Tensor],
                cfg: ModelConfig, dtype) -> Tensor:
    h0 = node_embeddings(instance, graph, provider,
                         granularity=cfg.granularity, dtype=dtype)
    if isinstance(provider, TableProvider):
        return T.gather_rows(params["embed.table"], h0)
    return Tensor(np.ascontiguousarray(h0, dtype=dtype))


def forward(instance: TrainingInstance, graph: EvidenceGraph,
            params: dict[str, Tensor], provider: Provider,
            cfg: ModelConfig, *, beta: float = 1.2,
            with_loss: bool = True, h0_override: Tensor | None = None) -> ForwardOutput:
    dtype = next(iter(params.values())).dtype
    h0 = h0_override if h0_override is not None else node_matrix(
        instance, graph, provider, params, cfg, dtype)
    h = propagate(h0, graph, params, cfg)
    ev = readout(h, graph.spans)
    c = _claim_vector(instance, provider, params, dtype)
    g, alpha, o_g = attention(c, ev, params)
    o_t = _sequence_vector(instance, provider, params, dtype)
    p_hat = fuse_predict(o_g, o_t, params)

    out = ForwardOutput(
        p_hat=p_hat.data.reshape(-1).copy(),
        alpha=alpha.data.reshape(-1).copy(),
        g=g.data.reshape(-1).copy(),
        o_g=o_g.data.reshape(-1).copy(),
        o_t=o_t.data.reshape(-1).copy(),
    )
    if with_loss:
        labels = [instance.evidence_labels[i] for i in graph.source_indices]
        lc = loss_c(p_hat, int(instance.label), cfg.num_classes)
        le = loss_e(g, labels)
        lt = total_loss(lc, le, beta)
        out.loss_c = lc.item()
        out.loss_e = le.item()
        out.loss = lt.item()
        out.loss_tensor = lt
    return out
