"""Command-line entry point.

Subcommands: build-graph, train, evaluate, inspect, influence,
export-embeddings-template. Exit codes: 0 success, 1 input error,
2 config/checkpoint error, 3 numeric failure (NaN detected).
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import fields
from pathlib import Path

import numpy as np

try:
    import tomllib  # py311+
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

from . import corpus, graph as graph_mod, train as train_mod
from .corpus import Source, augment, parse_claims
from .errors import ConfigMismatch, CorruptCheckpoint, HeterFCError, CorpusError
from .graph import build_graph, default_stopwords, export_graph, parse_stopwords
from .train import (
    Metrics,
    TrainConfig,
    checkpoint_load,
    checkpoint_save,
    evaluate,
    influence_test,
    make_provider,
    train,
)

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_CONFIG = 2
EXIT_NUMERIC = 3


def _color(msg: str, code: str) -> str:
    if os.environ.get("NO_COLOR") or not sys.stderr.isatty():
        return msg
    return f"\x1b[{code}m{msg}\x1b[0m"


def _fail(msg: str, code: int) -> int:
    print(_color(f"error: {msg}", "31"), file=sys.stderr)
    return code


def load_config(path: str | None, overrides: dict) -> TrainConfig:
    """TOML file values, overridden by any explicitly set CLI flags."""
    values: dict = {}
    if path:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
        names = {f.name for f in fields(TrainConfig)}
        for key, val in doc.items():
            if key not in names:
                raise ConfigMismatch(f"unknown config key {key!r}")
            values[key] = val
    values.update({k: v for k, v in overrides.items() if v is not None})
    return TrainConfig(**values)


def _load_stopwords(path: str | None):
    if path is None:
        return None
    return parse_stopwords(Path(path).read_text("utf-8"))


def _read_claims(path: str, strict: bool):
    with open(path, "rb") as fh:
        return parse_claims(fh, strict=strict)


def cmd_build_graph(args) -> int:
    cfg = load_config(args.config, _cfg_overrides(args))
    records = _read_claims(args.input, cfg.strict)
    stop = _load_stopwords(args.stopwords)
    gcfg = cfg.graph_config(stop)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    instances = [inst for rec in records for inst in augment(rec)]

    def emit(inst):
        g = build_graph(inst, gcfg)
        name = f"{inst.claim_id}.{inst.source.value.lower()}.{args.format}"
        (out_dir / name).write_bytes(export_graph(g, args.format))
        return name

    with ThreadPoolExecutor(max_workers=args.threads) as pool:
        names = list(pool.map(emit, instances))
    print(f"wrote {len(names)} graph files to {out_dir}")
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = load_config(args.config, _cfg_overrides(args))
    records = _read_claims(args.input, cfg.strict)
    stop = _load_stopwords(args.stopwords)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "train_log.jsonl", "w", encoding="utf-8") as log_fh:
        params, provider, log = train(records, cfg, stopwords=stop, log_stream=log_fh)
    if any(not np.isfinite(p.data).all() for p in params.values()):
        return _fail("non-finite parameters after training", EXIT_NUMERIC)
    checkpoint_save(params, cfg, str(out_dir / "model.hfck"))
    print(f"final epoch: {json.dumps(log[-1])}")
    print(f"checkpoint: {out_dir / 'model.hfck'}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    params, cfg = checkpoint_load(args.checkpoint)
    records = _read_claims(args.input, cfg.strict)
    stop = _load_stopwords(args.stopwords)
    provider = make_provider(cfg, records)
    metrics = evaluate(records, params, cfg, provider, stopwords=stop)
    if not np.isfinite([metrics.mean_loss_c, metrics.mean_loss_e]).all():
        return _fail("non-finite losses during evaluation", EXIT_NUMERIC)
    doc = metrics.to_json()
    if args.report:
        Path(args.report).write_text(json.dumps(doc, indent=2) + "\n", "utf-8")
    print(json.dumps(doc, indent=2))
    return EXIT_OK


def cmd_inspect(args) -> int:
    params, cfg = checkpoint_load(args.checkpoint)
    print(f"config: {json.dumps({'dim': cfg.dim, 'k': cfg.k, 'provider': cfg.provider})}")
    for name in sorted(params):
        p = params[name]
        print(f"{name:24s} shape={list(p.shape)!s:14s} "
              f"l2={float(np.linalg.norm(p.data)):.6g}")
    return EXIT_OK


def cmd_influence(args) -> int:
    params, cfg = checkpoint_load(args.checkpoint)
    records = _read_claims(args.input, cfg.strict)
    stop = _load_stopwords(args.stopwords)
    provider = make_provider(cfg, records)
    reports = []
    for rec in records:
        for inst in augment(rec):
            if inst.source is not Source.RETRIEVED or len(inst.evidence) < 2:
                continue
            rep = influence_test(params, inst, cfg, provider, stopwords=stop)
            rep["claim_id"] = rec.claim_id
            reports.append(rep)
            print(json.dumps(rep))
    if not reports:
        return _fail("no claim with >= 2 retrieved evidence items", EXIT_INPUT)
    return EXIT_OK


def cmd_export_template(args) -> int:
    """List every embedding key a FILE provider would need for these claims."""
    cfg = load_config(args.config, _cfg_overrides(args))
    records = _read_claims(args.input, cfg.strict)
    keys = []
    for rec in records:
        keys.append(f"cls:{rec.claim_id}")
        combined = list(rec.retrieved) + [e for e in rec.golden
                                          if e.id not in {r.id for r in rec.retrieved}]
        for inst in augment(rec):
            keys.append(f"seq:{rec.claim_id}:{inst.source.value}")
        for idx, item in enumerate(combined):
            keys.append(f"c:{rec.claim_id}:{idx}:<tok_idx per subword>")
    doc = {"dim": cfg.dim, "required_keys": keys}
    out = json.dumps(doc, indent=2) + "\n"
    if args.out:
        Path(args.out).write_text(out, "utf-8")
    else:
        sys.stdout.write(out)
    return EXIT_OK


def _cfg_overrides(args) -> dict:
    keys = ("dim", "k", "window", "beta", "epochs", "batch_size", "seed",
            "provider", "embedding_file", "manifest_file", "dtype", "strict",
            "lr_model", "lr_embed")
    return {k: getattr(args, k, None) for k in keys}


def _add_cfg_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="TOML config file")
    p.add_argument("--dim", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--window", type=int)
    p.add_argument("--beta", type=float)
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--lr-model", dest="lr_model", type=float)
    p.add_argument("--lr-embed", dest="lr_embed", type=float)
    p.add_argument("--provider", choices=["HASHED", "TABLE", "FILE"])
    p.add_argument("--embedding-file", dest="embedding_file")
    p.add_argument("--manifest-file", dest="manifest_file")
    p.add_argument("--dtype", choices=["f32", "f64"])
    p.add_argument("--strict", action="store_const", const=True, default=None)
    p.add_argument("--stopwords", help="stopword list file (one norm per line)")
    p.add_argument("--threads", type=int, default=1)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="heterfc")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-graph", help="export evidence graphs per instance")
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--format", choices=["json", "dot"], default="json")
    _add_cfg_flags(p)
    p.set_defaults(fn=cmd_build_graph)

    p = sub.add_parser("train", help="train a model")
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    _add_cfg_flags(p)
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("evaluate", help="evaluate a checkpoint")
    p.add_argument("--input", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--report")
    _add_cfg_flags(p)
    p.set_defaults(fn=cmd_evaluate)

    p = sub.add_parser("inspect", help="print checkpoint parameters")
    p.add_argument("--checkpoint", required=True)
    p.set_defaults(fn=cmd_inspect)

    p = sub.add_parser("influence", help="cross-evidence influence diagnostic")
    p.add_argument("--input", required=True)
    p.add_argument("--checkpoint", required=True)
    _add_cfg_flags(p)
    p.set_defaults(fn=cmd_influence)

    p = sub.add_parser("export-embeddings-template",
                       help="list the embedding keys an .hfce file must provide")
    p.add_argument("--input", required=True)
    p.add_argument("--out")
    _add_cfg_flags(p)
    p.set_defaults(fn=cmd_export_template)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except CorpusError as e:
        return _fail(str(e), EXIT_INPUT)
    except (ConfigMismatch, CorruptCheckpoint) as e:
        return _fail(str(e), EXIT_CONFIG)
    except FloatingPointError as e:
        return _fail(str(e), EXIT_NUMERIC)
    except (HeterFCError, OSError, ValueError) as e:
        return _fail(str(e), EXIT_INPUT)


if __name__ == "__main__":
    sys.exit(main())
