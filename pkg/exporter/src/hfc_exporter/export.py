"""Run a transformer encoder over claims and evidence, write an embedding file.

For each claim the encoder sees the claim paired with one evidence text at a
time; only the evidence-side hidden states are kept. Word pooling stays in
the consumer, so the manifest records which subword belongs to which word.
"""
import json
import os
import sys
from dataclasses import dataclass, field

import numpy as np
import torch

from heterfc.corpus import ClaimRecord, Source, parse_claims
from heterfc.embed import write_embedding_file
from heterfc.linearize import evidence_words, tokenize

TRUNCATION_POLICY = "evidence tail truncated (pair truncation: second sequence only)"


@dataclass
class ExportResult:
    dim: int
    n_claims: int
    n_keys: int
    skipped: list = field(default_factory=list)


def export_order(record: ClaimRecord):
    """Retrieved items first, then golden-only items, order preserved."""
    seen = {item.id for item in record.retrieved}
    extra = [g for g in record.golden if g.id not in seen]
    return list(record.retrieved) + extra


def _hidden(model, enc):
    with torch.no_grad():
        out = model(**enc)
    return out.last_hidden_state[0].numpy().astype(np.float32)


def _encode_claim(record, model, tokenizer, max_length):
    """Per-claim key/alignment payload; raises ValueError on lossy truncation."""
    claim_words = [t.surface for t in tokenize(record.claim_text)]
    if not claim_words:
        raise ValueError("claim has no words")
    keys = {}
    cid = record.claim_id

    enc = tokenizer(claim_words, is_split_into_words=True, truncation=True,
                    max_length=max_length, return_tensors="pt")
    keys[f"cls:{cid}"] = _hidden(model, enc)[0]

    evidence_idx = {}
    alignment = {}
    for export_idx, item in enumerate(export_order(record)):
        evidence_idx[item.id] = export_idx
        words = [t.surface for t in evidence_words(item)]
        if not words:
            alignment[str(export_idx)] = []
            continue
        enc = tokenizer(claim_words, words, is_split_into_words=True,
                        truncation="only_second", max_length=max_length,
                        return_tensors="pt")
        hidden = _hidden(model, enc)
        recs = []
        covered = set()
        for pos, (seq_id, word_id) in enumerate(zip(enc.sequence_ids(0),
                                                    enc.word_ids(0))):
            if seq_id != 1 or word_id is None:
                continue
            tok_idx = len(recs)
            keys[f"c:{cid}:{export_idx}:{tok_idx}"] = hidden[pos]
            recs.append({"tok": tok_idx, "word": int(word_id),
                         "text": enc.tokens(0)[pos]})
            covered.add(int(word_id))
        if covered != set(range(len(words))):
            raise ValueError(
                f"evidence {item.id!r}: truncation dropped "
                f"{len(words) - len(covered)} of {len(words)} words")
        alignment[str(export_idx)] = recs

    for source, items in ((Source.RETRIEVED, record.retrieved),
                          (Source.GOLDEN, record.golden)):
        if not items:
            continue
        words = list(claim_words)
        for item in items:
            words.extend(t.surface for t in evidence_words(item))
        enc = tokenizer(words, is_split_into_words=True, truncation=True,
                        max_length=max_length, return_tensors="pt")
        keys[f"seq:{cid}:{source.value}"] = _hidden(model, enc)[0]

    entry = {"evidence": evidence_idx, "alignment": alignment}
    return keys, entry


def export(records, model, tokenizer, out_path, manifest_path, *,
           model_name="unknown", max_length=256, log=sys.stderr) -> ExportResult:
    model.eval()
    dim = int(model.config.hidden_size)
    all_keys = {}
    claims = {}
    skipped = []
    for record in records:
        try:
            keys, entry = _encode_claim(record, model, tokenizer, max_length)
        except (ValueError, RuntimeError) as exc:
            skipped.append(record.claim_id)
            print(f"skipping claim {record.claim_id!r}: {exc}", file=log)
            continue
        all_keys.update(keys)
        claims[record.claim_id] = entry

    tmp = out_path + ".tmp"
    write_embedding_file(tmp, dim, all_keys)
    os.replace(tmp, out_path)

    manifest = {
        "model": model_name,
        "dim": dim,
        "truncation": f"{TRUNCATION_POLICY}, max_length={max_length}",
        "tokenizer": type(tokenizer).__name__,
        "claims": claims,
    }
    tmp = manifest_path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=1)
    os.replace(tmp, manifest_path)
    return ExportResult(dim=dim, n_claims=len(claims),
                        n_keys=len(all_keys), skipped=skipped)


def export_files(claims_path, model_id, out_path, manifest_path, *,
                 max_length=256, log=sys.stderr) -> ExportResult:
    from transformers import AutoModel, AutoTokenizer
    tokenizer = AutoTokenizer.from_pretrained(model_id)
    model = AutoModel.from_pretrained(model_id)
    with open(claims_path, "r", encoding="utf-8") as fh:
        records = parse_claims(fh)
    return export(records, model, tokenizer, out_path, manifest_path,
                  model_name=str(model_id), max_length=max_length, log=log)
