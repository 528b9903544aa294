"""Cell-to-text templates and word tokenization.

The tokenization rule is deliberately fixed and simple (whitespace split plus
edge-punctuation stripping) because inter-evidence edge matching depends on
the normalization key being bit-reproducible.
"""
from __future__ import annotations

import unicodedata
from dataclasses import dataclass

from .corpus import EvidenceItem, Kind, TableKind
from .errors import MissingField


@dataclass(frozen=True)
class WordToken:
    surface: str
    norm: str
    position: int


def linearize_cell(item: EvidenceItem) -> str:
    """Render a table cell as a sentence-like string.

    General tables read "<col> for <row> is <value>"; infobox cells read
    "<col> : <row> of <title> is <value>".
    """
    if item.kind is not Kind.CELL:
        raise MissingField("linearize_cell expects a CELL item")
    for name in ("cell_value", "row_header", "column_header"):
        if not getattr(item, name):
            raise MissingField(f"cell item {item.id!r} has empty {name}")
    if item.table_kind is TableKind.GENERAL:
        return f"{item.column_header} for {item.row_header} is {item.cell_value}"
    if not item.page_title:
        raise MissingField(f"infobox cell {item.id!r} has empty page_title")
    return f"{item.column_header} : {item.row_header} of {item.page_title} is {item.cell_value}"


def _is_punct(ch: str) -> bool:
    return unicodedata.category(ch).startswith("P")


def _strip_edge_punct(tok: str) -> str:
    start, end = 0, len(tok)
    while start < end and _is_punct(tok[start]):
        start += 1
    while end > start and _is_punct(tok[end - 1]):
        end -= 1
    return tok[start:end]


def tokenize(text: str) -> list[WordToken]:
    """Split on Unicode whitespace, strip leading/trailing punctuation.

    Pure-punctuation pieces are dropped; positions are contiguous over the
    surviving tokens. norm is the lowercased stripped surface.
    """
    out: list[WordToken] = []
    for raw in text.split():
        surface = _strip_edge_punct(raw)
        if not surface:
            continue
        out.append(WordToken(surface=surface, norm=surface.lower(), position=len(out)))
    return out


def evidence_words(item: EvidenceItem) -> list[WordToken]:
    if item.kind is Kind.SENTENCE:
        return tokenize(item.text)
    return tokenize(linearize_cell(item))
