"""Claim/evidence data model, JSONL parsing and the two-set training augmentation.

The input format is self-contained JSONL: one claim object per line with all
evidence content inlined (both the retrieved list and the golden list), so no
external Wikipedia dump is needed.
"""
from __future__ import annotations

import enum
import json
import logging
from dataclasses import dataclass
from typing import IO, Iterable

from .errors import (
    CapExceeded,
    DuplicateEvidenceId,
    EmptyClaim,
    MalformedLine,
    MissingCellField,
    UnknownLabel,
)

log = logging.getLogger(__name__)

DEFAULT_MAX_SENTENCES = 5
DEFAULT_MAX_CELLS = 25


class Label(enum.IntEnum):
    SUPPORTED = 0
    REFUTED = 1
    NOT_ENOUGH_INFO = 2

    @classmethod
    def from_string(cls, s: str) -> "Label":
        try:
            return cls[s]
        except KeyError:
            raise UnknownLabel(f"unknown label {s!r}") from None


NUM_CLASSES = len(Label)


class Kind(str, enum.Enum):
    SENTENCE = "SENTENCE"
    CELL = "CELL"


class TableKind(str, enum.Enum):
    GENERAL = "GENERAL"
    INFOBOX = "INFOBOX"


class Source(str, enum.Enum):
    GOLDEN = "GOLDEN"
    RETRIEVED = "RETRIEVED"


@dataclass(frozen=True)
class EvidenceItem:
    id: str
    kind: Kind
    text: str = ""
    cell_value: str = ""
    row_header: str = ""
    column_header: str = ""
    page_title: str = ""
    table_kind: TableKind | None = None
    gold: bool = False

    def validate(self) -> None:
        if self.kind is Kind.SENTENCE:
            if not self.text:
                raise MissingCellField(f"sentence item {self.id!r} has empty text")
            if self.cell_value or self.row_header or self.column_header or self.table_kind:
                raise MissingCellField(f"sentence item {self.id!r} carries cell fields")
        else:
            missing = [n for n in ("cell_value", "row_header", "column_header")
                       if not getattr(self, n)]
            if missing or self.table_kind is None:
                raise MissingCellField(
                    f"cell item {self.id!r} missing {missing or ['table_kind']}")
            if self.text:
                raise MissingCellField(f"cell item {self.id!r} carries sentence text")

    def to_json(self) -> dict:
        d = {"id": self.id, "kind": self.kind.value}
        if self.kind is Kind.SENTENCE:
            d["text"] = self.text
        else:
            d["cell_value"] = self.cell_value
            d["row_header"] = self.row_header
            d["column_header"] = self.column_header
            if self.page_title:
                d["page_title"] = self.page_title
            d["table_kind"] = self.table_kind.value
        d["gold"] = self.gold
        return d

    @classmethod
    def from_json(cls, d: dict) -> "EvidenceItem":
        kind = Kind(d["kind"])
        tk = d.get("table_kind")
        item = cls(
            id=d["id"],
            kind=kind,
            text=d.get("text", ""),
            cell_value=d.get("cell_value", ""),
            row_header=d.get("row_header", ""),
            column_header=d.get("column_header", ""),
            page_title=d.get("page_title", ""),
            table_kind=TableKind(tk) if tk else None,
            gold=bool(d.get("gold", False)),
        )
        item.validate()
        return item


@dataclass(frozen=True)
class ClaimRecord:
    claim_id: str
    claim_text: str
    label: Label
    retrieved: tuple[EvidenceItem, ...]
    golden: tuple[EvidenceItem, ...]

    def to_json(self) -> dict:
        return {
            "claim_id": self.claim_id,
            "claim": self.claim_text,
            "label": self.label.name,
            "retrieved": [e.to_json() for e in self.retrieved],
            "golden": [e.to_json() for e in self.golden],
        }


@dataclass(frozen=True)
class TrainingInstance:
    claim_id: str
    claim_text: str
    label: Label
    evidence: tuple[EvidenceItem, ...]
    evidence_labels: tuple[int, ...]
    source: Source


def _check_unique_ids(items: Iterable[EvidenceItem], where: str) -> None:
    seen: set[str] = set()
    for it in items:
        if it.id in seen:
            raise DuplicateEvidenceId(f"duplicate evidence id {it.id!r} in {where}")
        seen.add(it.id)


def _build_record(obj: dict, *, strict: bool,
                  max_sentences: int, max_cells: int) -> ClaimRecord:
    label = Label.from_string(obj["label"])
    golden = tuple(EvidenceItem.from_json(d) for d in obj.get("golden", []))
    retrieved = tuple(EvidenceItem.from_json(d) for d in obj.get("retrieved", []))
    _check_unique_ids(golden, "golden")
    _check_unique_ids(retrieved, "retrieved")

    n_sent = sum(1 for e in retrieved if e.kind is Kind.SENTENCE)
    n_cell = sum(1 for e in retrieved if e.kind is Kind.CELL)
    if n_sent > max_sentences or n_cell > max_cells:
        if strict:
            raise CapExceeded(
                f"claim {obj['claim_id']!r}: {n_sent} sentences / {n_cell} cells "
                f"exceed caps ({max_sentences}/{max_cells})")
        log.warning("claim %s exceeds evidence caps; truncating", obj["claim_id"])
        kept: list[EvidenceItem] = []
        s = c = 0
        for e in retrieved:
            if e.kind is Kind.SENTENCE:
                s += 1
                if s > max_sentences:
                    continue
            else:
                c += 1
                if c > max_cells:
                    continue
            kept.append(e)
        retrieved = tuple(kept)

    # gold flags on retrieved items must mirror golden ids
    gold_ids = {e.id for e in golden}
    retrieved = tuple(
        e if e.gold == (e.id in gold_ids)
        else EvidenceItem(**{**e.__dict__, "gold": e.id in gold_ids})
        for e in retrieved
    )
    return ClaimRecord(
        claim_id=obj["claim_id"],
        claim_text=obj["claim"],
        label=label,
        retrieved=retrieved,
        golden=golden,
    )


def parse_claims(stream: IO[bytes] | IO[str], *, strict: bool = False,
                 max_sentences: int = DEFAULT_MAX_SENTENCES,
                 max_cells: int = DEFAULT_MAX_CELLS) -> list[ClaimRecord]:
    """Parse JSONL claims, validating every evidence-item invariant.

    In strict mode exceeding the sentence/cell caps is an error; otherwise the
    retrieved list is truncated in order with a warning.
    """
    records = []
    for line_no, raw in enumerate(stream, start=1):
        if isinstance(raw, bytes):
            raw = raw.decode("utf-8")
        if not raw.strip():
            continue
        try:
            obj = json.loads(raw)
        except json.JSONDecodeError as e:
            raise MalformedLine(line_no, str(e)) from e
        if not isinstance(obj, dict):
            raise MalformedLine(line_no, "not a JSON object")
        try:
            records.append(_build_record(obj, strict=strict,
                                         max_sentences=max_sentences,
                                         max_cells=max_cells))
        except KeyError as e:
            raise MalformedLine(line_no, f"missing field {e.args[0]!r}") from e
    return records


def serialize(records: Iterable[ClaimRecord], stream: IO[str]) -> None:
    for r in records:
        stream.write(json.dumps(r.to_json(), ensure_ascii=False) + "\n")


def augment(record: ClaimRecord) -> list[TrainingInstance]:
    """Expand one claim into its golden-set and retrieved-set instances.

    The golden instance carries all-positive relevance labels; the retrieved
    instance marks an item positive only when its id appears in the golden set.
    """
    if not record.golden and not record.retrieved:
        raise EmptyClaim(f"claim {record.claim_id!r} has no evidence at all")
    out = []
    if record.golden:
        out.append(TrainingInstance(
            claim_id=record.claim_id,
            claim_text=record.claim_text,
            label=record.label,
            evidence=record.golden,
            evidence_labels=tuple(1 for _ in record.golden),
            source=Source.GOLDEN,
        ))
    if record.retrieved:
        gold_ids = {e.id for e in record.golden}
        out.append(TrainingInstance(
            claim_id=record.claim_id,
            claim_text=record.claim_text,
            label=record.label,
            evidence=record.retrieved,
            evidence_labels=tuple(int(e.id in gold_ids) for e in record.retrieved),
            source=Source.RETRIEVED,
        ))
    return out
