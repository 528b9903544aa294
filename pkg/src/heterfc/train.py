"""Training loop, metrics, checkpointing and the influence diagnostic."""
from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass, field, asdict

import numpy as np

from . import model as M
from . import tensor as T
from .corpus import ClaimRecord, Label, NUM_CLASSES, Source, TrainingInstance, augment
from .embed import FileProvider, HashedProvider, TableProvider, build_vocab
from .errors import ConfigMismatch, CorruptCheckpoint
from .graph import EvidenceGraph, Granularity, GraphConfig, RelId, build_graph
from .model import ModelConfig, forward, init_params, is_embed_param
from .tensor import Tensor

CKPT_MAGIC = b"HFCK"
CKPT_VERSION = 1


@dataclass
class TrainConfig:
    dim: int = 32
    k: int = 2
    window: int = 2
    beta: float = 1.2
    lr_model: float = 1e-3
    lr_embed: float = 1e-5
    epochs: int = 50
    batch_size: int = 8
    warmup_frac: float = 0.2
    seed: int = 0
    provider: str = "HASHED"              # HASHED | TABLE | FILE
    embedding_file: str | None = None     # FILE provider
    manifest_file: str | None = None
    heterogeneous: bool = True
    fully_connected: bool = False
    granularity: str = "WORD"
    rgcn_activation: str = "sigmoid"
    dtype: str = "f32"                    # f32 | f64 (verification mode)
    attn_hidden: int | None = None
    fusion_hidden: int | None = None
    strict: bool = False

    def __post_init__(self):
        if not (0.0 <= self.warmup_frac < 1.0):
            raise ValueError("warmup_frac must be in [0, 1)")
        if self.lr_model <= 0 or self.lr_embed <= 0:
            raise ValueError("learning rates must be positive")

    @property
    def np_dtype(self):
        return np.float64 if self.dtype == "f64" else np.float32

    def graph_config(self, stopwords=None) -> GraphConfig:
        kw = {"window": self.window,
              "heterogeneous": self.heterogeneous,
              "fully_connected": self.fully_connected,
              "granularity": Granularity(self.granularity)}
        if stopwords is not None:
            kw["stopwords"] = stopwords
        return GraphConfig(**kw)

    def relations(self) -> tuple[RelId, ...]:
        return (RelId.R_S, RelId.R_T, RelId.R_E) if self.heterogeneous else (RelId.R_S,)

    def model_config(self, vocab_size: int = 0) -> ModelConfig:
        return ModelConfig(
            dim=self.dim, k=self.k, relations=self.relations(),
            attn_hidden=self.attn_hidden, fusion_hidden=self.fusion_hidden,
            rgcn_activation=self.rgcn_activation, provider_kind=self.provider,
            vocab_size=vocab_size, granularity=Granularity(self.granularity),
        )


@dataclass
class Metrics:
    label_accuracy: float
    feverous_score: float
    confusion: list[list[int]]
    mean_loss_c: float
    mean_loss_e: float
    n_claims: int

    def to_json(self) -> dict:
        return asdict(self)


def lr_at(step: int, total_steps: int, peak: float, warmup_frac: float) -> float:
    """Linear warmup to ``peak`` over the first warmup fraction, then linear decay to 0."""
    if total_steps <= 0:
        return 0.0
    w = warmup_frac * total_steps
    if step <= w:
        return peak * (step / w) if w > 0 else peak
    return peak * (total_steps - step) / (total_steps - w)


class AdamState:
    """Standard bias-corrected Adam over named parameter tensors."""

    def __init__(self, params: dict[str, Tensor],
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.t = 0
        self.m = {k: np.zeros_like(p.data) for k, p in params.items()}
        self.v = {k: np.zeros_like(p.data) for k, p in params.items()}


def adam_step(params: dict[str, Tensor], state: AdamState,
              lr_model: float, lr_embed: float) -> None:
    """One update; parameters whose name marks them as embedding-side use lr_embed."""
    state.t += 1
    b1, b2, eps = state.beta1, state.beta2, state.eps
    bc1 = 1.0 - b1 ** state.t
    bc2 = 1.0 - b2 ** state.t
    for name, p in params.items():
        g = p.grad
        if g is None:
            continue
        m = state.m[name]
        v = state.v[name]
        m *= b1
        m += (1 - b1) * g
        v *= b2
        v += (1 - b2) * g * g
        lr = lr_embed if is_embed_param(name) else lr_model
        p.data -= lr * (m / bc1) / (np.sqrt(v / bc2) + eps)


def make_provider(cfg: TrainConfig, records: list[ClaimRecord] | None = None):
    if cfg.provider == "HASHED":
        return HashedProvider(dim=cfg.dim, seed=cfg.seed)
    if cfg.provider == "TABLE":
        if records is None:
            raise ValueError("TABLE provider needs the dataset to build its vocabulary")
        return TableProvider(dim=cfg.dim, vocab=build_vocab(records))
    if cfg.provider == "FILE":
        if not cfg.embedding_file:
            raise ValueError("FILE provider needs embedding_file")
        prov = FileProvider(cfg.embedding_file, cfg.manifest_file)
        if prov.dim != cfg.dim:
            raise ConfigMismatch(
                f"embedding file dim {prov.dim} != configured dim {cfg.dim}")
        return prov
    raise ValueError(f"unknown provider {cfg.provider!r}")


@dataclass
class PreparedInstance:
    instance: TrainingInstance
    graph: EvidenceGraph


def prepare_instances(records: list[ClaimRecord], cfg: TrainConfig,
                      provider=None, stopwords=None) -> list[PreparedInstance]:
    gcfg = cfg.graph_config(stopwords)
    token_source = None
    if gcfg.granularity is Granularity.TOKEN:
        if not isinstance(provider, FileProvider):
            raise ValueError("TOKEN granularity requires the FILE provider")
        token_source = provider.subword_tokens
    out = []
    for rec in records:
        for inst in augment(rec):
            out.append(PreparedInstance(inst, build_graph(inst, gcfg, token_source)))
    return out


def train(records: list[ClaimRecord], cfg: TrainConfig,
          stopwords=None, log_stream=None):
    """Train on the augmented instance set; returns (params, provider, log)."""
    if not records:
        raise ValueError("empty dataset")
    provider = make_provider(cfg, records)
    prepared = prepare_instances(records, cfg, provider, stopwords)
    vocab_size = provider.vocab_size if isinstance(provider, TableProvider) else 0
    mcfg = cfg.model_config(vocab_size)
    params = init_params(mcfg, seed=cfg.seed, dtype=cfg.np_dtype)
    state = AdamState(params)
    rng = np.random.default_rng(cfg.seed)

    n = len(prepared)
    steps_per_epoch = (n + cfg.batch_size - 1) // cfg.batch_size
    total_steps = cfg.epochs * steps_per_epoch
    log: list[dict] = []
    step = 0
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        sum_lc = sum_le = 0.0
        correct = 0
        for start in range(0, n, cfg.batch_size):
            batch = [prepared[i] for i in order[start:start + cfg.batch_size]]
            step += 1
            lr_scale = lr_at(step, total_steps, 1.0, cfg.warmup_frac)
            T.reset_tape()
            batch_losses = []
            for pi in batch:
                out = forward(pi.instance, pi.graph, params, provider, mcfg,
                              beta=cfg.beta)
                batch_losses.append(out.loss_tensor)
                sum_lc += out.loss_c
                sum_le += out.loss_e
                if int(np.argmax(out.p_hat)) == int(pi.instance.label):
                    correct += 1
            total = T.smul(_sum_tensors(batch_losses), 1.0 / len(batch))
            for p in params.values():
                p.zero_grad()
            T.backward(total)
            adam_step(params, state,
                      cfg.lr_model * lr_scale, cfg.lr_embed * lr_scale)
        entry = {
            "epoch": epoch,
            "mean_loss_c": sum_lc / n,
            "mean_loss_e": sum_le / n,
            "train_acc": correct / n,
            "lr": cfg.lr_model * lr_at(step, total_steps, 1.0, cfg.warmup_frac),
        }
        log.append(entry)
        if log_stream is not None:
            log_stream.write(json.dumps(entry) + "\n")
    return params, provider, log


def _sum_tensors(ts):
    acc = ts[0]
    for t in ts[1:]:
        acc = T.add(acc, t)
    return acc


def evaluate(records: list[ClaimRecord], params: dict[str, Tensor],
             cfg: TrainConfig, provider=None, stopwords=None) -> Metrics:
    """Evaluate on each claim's retrieved evidence set.

    feverous_score additionally requires every golden id to have been
    retrieved.
    """
    if provider is None:
        provider = make_provider(cfg, records)
    gcfg = cfg.graph_config(stopwords)
    token_source = provider.subword_tokens if (
        gcfg.granularity is Granularity.TOKEN and isinstance(provider, FileProvider)) else None
    mcfg = cfg.model_config(
        provider.vocab_size if isinstance(provider, TableProvider) else 0)
    confusion = [[0] * NUM_CLASSES for _ in range(NUM_CLASSES)]
    hits = fever_hits = 0
    sum_lc = sum_le = 0.0
    for rec in records:
        instances = augment(rec)
        inst = next((i for i in instances if i.source is Source.RETRIEVED),
                    instances[0])
        g = build_graph(inst, gcfg, token_source)
        T.reset_tape()
        out = forward(inst, g, params, provider, mcfg, beta=cfg.beta)
        T.reset_tape()
        pred = int(np.argmax(out.p_hat))
        confusion[int(rec.label)][pred] += 1
        sum_lc += out.loss_c
        sum_le += out.loss_e
        correct = pred == int(rec.label)
        hits += correct
        retrieved_ids = {e.id for e in rec.retrieved}
        full_retrieval = all(e.id in retrieved_ids for e in rec.golden)
        fever_hits += correct and full_retrieval
    n = len(records)
    return Metrics(
        label_accuracy=hits / n,
        feverous_score=fever_hits / n,
        confusion=confusion,
        mean_loss_c=sum_lc / n,
        mean_loss_e=sum_le / n,
        n_claims=n,
    )


# --- checkpointing ---------------------------------------------------------

def config_digest(cfg: TrainConfig) -> bytes:
    blob = json.dumps(asdict(cfg), sort_keys=True).encode("utf-8")
    return hashlib.sha256(blob).digest()


def checkpoint_save(params: dict[str, Tensor], cfg: TrainConfig, path: str) -> None:
    cfg_json = json.dumps(asdict(cfg), sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(CKPT_MAGIC)
        fh.write(struct.pack("<I", CKPT_VERSION))
        fh.write(hashlib.sha256(cfg_json).digest())
        fh.write(struct.pack("<I", len(cfg_json)))
        fh.write(cfg_json)
        fh.write(struct.pack("<I", len(params)))
        for name, p in params.items():
            nb = name.encode("utf-8")
            fh.write(struct.pack("<H", len(nb)))
            fh.write(nb)
            shape = p.data.shape
            fh.write(struct.pack("<B", len(shape)))
            fh.write(struct.pack(f"<{len(shape)}I", *shape))
            fh.write(np.ascontiguousarray(p.data, dtype="<f4").tobytes())


def checkpoint_load(path: str, expected_cfg: TrainConfig | None = None):
    """Read a checkpoint; returns (params, cfg). Verifies digest and shapes."""
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as e:
        raise CorruptCheckpoint(str(e)) from e
    try:
        if data[:4] != CKPT_MAGIC:
            raise CorruptCheckpoint("bad magic")
        off = 4
        (version,) = struct.unpack_from("<I", data, off); off += 4
        if version != CKPT_VERSION:
            raise CorruptCheckpoint(f"unsupported version {version}")
        digest = data[off:off + 32]; off += 32
        (clen,) = struct.unpack_from("<I", data, off); off += 4
        cfg_json = data[off:off + clen]; off += clen
        if len(cfg_json) != clen or hashlib.sha256(cfg_json).digest() != digest:
            raise CorruptCheckpoint("config digest mismatch")
        cfg = TrainConfig(**json.loads(cfg_json))
        (count,) = struct.unpack_from("<I", data, off); off += 4
        params: dict[str, Tensor] = {}
        for _ in range(count):
            (nlen,) = struct.unpack_from("<H", data, off); off += 2
            name = data[off:off + nlen].decode("utf-8"); off += nlen
            (rank,) = struct.unpack_from("<B", data, off); off += 1
            shape = struct.unpack_from(f"<{rank}I", data, off); off += 4 * rank
            size = int(np.prod(shape)) if shape else 1
            buf = data[off:off + 4 * size]; off += 4 * size
            if len(buf) < 4 * size:
                raise CorruptCheckpoint("truncated parameter data")
            arr = np.frombuffer(buf, dtype="<f4").reshape(shape).astype(cfg.np_dtype)
            params[name] = Tensor(arr, requires_grad=True)
    except struct.error as e:
        raise CorruptCheckpoint(f"truncated checkpoint: {e}") from e
    if expected_cfg is not None:
        if config_digest(expected_cfg) != digest:
            raise ConfigMismatch("checkpoint was written with a different config")
    # shape verification against the declared config
    vocab = params["embed.table"].shape[0] if "embed.table" in params else 0
    want = M.param_shapes(cfg.model_config(vocab))
    if set(want) != set(params):
        raise CorruptCheckpoint("parameter set does not match config")
    for name, shape in want.items():
        if tuple(params[name].shape) != tuple(shape):
            raise CorruptCheckpoint(f"parameter {name} has shape "
                                    f"{params[name].shape}, want {shape}")
    return params, cfg


# --- influence diagnostic ----------------------------------------------------

def influence_test(params: dict[str, Tensor], instance: TrainingInstance,
                   cfg: TrainConfig, provider=None, stopwords=None,
                   source_evidence: int = 0, target_evidence: int = 1,
                   delta: float = 0.5) -> dict:
    """Perturb one evidence's node rows and measure the change in another's readout.

    Runs with inter-evidence edges on and off; with them off the cross-evidence
    difference must be exactly zero.
    """
    if provider is None:
        if cfg.provider != "HASHED":
            raise ValueError("pass a provider explicitly for non-HASHED configs")
        provider = HashedProvider(dim=cfg.dim, seed=cfg.seed)
    mcfg = cfg.model_config(
        provider.vocab_size if isinstance(provider, TableProvider) else 0)

    def readout_diff(graph: EvidenceGraph) -> float:
        dtype = next(iter(params.values())).dtype
        h0 = M.node_matrix(instance, graph, provider, params, mcfg, dtype)
        base = _evidence_vec(h0, graph, params, mcfg, target_evidence)
        lo, hi = graph.spans[source_evidence]
        pert = Tensor(h0.data.copy())
        pert.data[lo:hi + 1] += delta
        bumped = _evidence_vec(pert, graph, params, mcfg, target_evidence)
        return float(np.linalg.norm(base - bumped))

    gcfg = cfg.graph_config(stopwords)
    g_on = build_graph(instance, gcfg)
    edges_off = dict(g_on.edges)
    edges_off[RelId.R_E] = ()
    g_off = EvidenceGraph(nodes=g_on.nodes, spans=g_on.spans, edges=edges_off,
                          source_indices=g_on.source_indices)
    return {
        "delta_with_re": readout_diff(g_on),
        "delta_without_re": readout_diff(g_off),
        "num_re_edges": len(g_on.edges[RelId.R_E]),
    }


def _evidence_vec(h0: Tensor, graph: EvidenceGraph, params, mcfg,
                  target: int) -> np.ndarray:
    T.reset_tape()
    h = M.propagate(h0, graph, params, mcfg)
    ev = M.readout(h, graph.spans)
    T.reset_tape()
    return ev.data[target].copy()
