import numpy as np

from heterfc.corpus import ClaimRecord, EvidenceItem, Kind, Label, Source, TableKind, TrainingInstance


def sentence(id, text, gold=False):
    return EvidenceItem(id=id, kind=Kind.SENTENCE, text=text, gold=gold)


def cell(id, value, row, col, table_kind=TableKind.GENERAL, title="", gold=False):
    return EvidenceItem(id=id, kind=Kind.CELL, cell_value=value, row_header=row,
                        column_header=col, page_title=title,
                        table_kind=table_kind, gold=gold)


def instance(evidence, labels=None, claim="a test claim", label=Label.SUPPORTED,
             source=Source.RETRIEVED, claim_id="c1"):
    labels = tuple(labels) if labels is not None else tuple(1 for _ in evidence)
    return TrainingInstance(claim_id=claim_id, claim_text=claim, label=label,
                            evidence=tuple(evidence), evidence_labels=labels,
                            source=source)
