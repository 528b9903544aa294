"""Synthetic claim generator for smoke and learnability experiments.

Labels are decided by cross-evidence keyword agreement: SUPPORTED claims
share a positive marker word across their evidence, REFUTED claims share a
negative marker, and NOT_ENOUGH_INFO claims share no non-stopword at all.
"""
from __future__ import annotations

import numpy as np

from .corpus import ClaimRecord, EvidenceItem, Kind, Label, TableKind

_FILLERS = [
    "harbor", "violet", "meadow", "copper", "lantern", "orchid", "timber",
    "ember", "quartz", "willow", "falcon", "marble", "cinder", "juniper",
    "saffron", "cobalt", "thistle", "garnet", "alder", "ivory", "sable",
    "onyx", "tundra", "breeze", "summit", "canyon", "delta", "fjord",
]
_TOPICS = ["arcadia", "borealis", "cascadia", "drakmoor", "elysium",
           "fenwick", "galdora", "hyperion"]
_POS_MARKER = "veriton"
_NEG_MARKER = "falsum"


def _sentence(rng, topic: str, marker: str | None) -> str:
    words = list(rng.choice(_FILLERS, size=3, replace=False))
    if marker:
        words.insert(int(rng.integers(0, len(words) + 1)), marker)
    return f"{topic} " + " ".join(words)


def make_claim(rng: np.random.Generator, idx: int) -> ClaimRecord:
    label = Label(idx % 3)
    topic = _TOPICS[int(rng.integers(0, len(_TOPICS)))]
    marker = {Label.SUPPORTED: _POS_MARKER,
              Label.REFUTED: _NEG_MARKER,
              Label.NOT_ENOUGH_INFO: None}[label]
    # NEI: distinct topics and disjoint fillers so no non-stopword is shared
    fillers = list(rng.permutation(_FILLERS))
    if label is Label.NOT_ENOUGH_INFO:
        sent_words = fillers[:3]
        cell_val_words = fillers[3:5]
        sent = EvidenceItem(id="s0", kind=Kind.SENTENCE,
                            text=f"{topic} " + " ".join(sent_words), gold=True)
        cell = EvidenceItem(id="c0", kind=Kind.CELL,
                            cell_value=" ".join(cell_val_words),
                            row_header=fillers[5], column_header=fillers[6],
                            table_kind=TableKind.GENERAL, gold=True)
    else:
        sent = EvidenceItem(id="s0", kind=Kind.SENTENCE,
                            text=_sentence(rng, topic, marker), gold=True)
        cell = EvidenceItem(id="c0", kind=Kind.CELL,
                            cell_value=f"{marker} {fillers[0]}",
                            row_header=topic, column_header=fillers[1],
                            table_kind=TableKind.GENERAL, gold=True)
    evidence = (sent, cell)
    return ClaimRecord(
        claim_id=f"syn{idx}",
        claim_text=f"the report about {topic} holds",
        label=label,
        retrieved=evidence,
        golden=evidence,
    )


def make_dataset(n_claims: int = 64, seed: int = 7) -> list[ClaimRecord]:
    rng = np.random.default_rng(seed)
    return [make_claim(rng, i) for i in range(n_claims)]
