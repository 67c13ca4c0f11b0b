"""Snapshot corpus loading, record parsing and markdown chunking.

The snapshot layout is one directory per source page. Each directory holds a
``file-<page>.json`` metadata file whose ``content`` key names a markdown
file with the extracted page text and whose ``prescience`` key names a JSON
file with the structured product records. Either key may be absent.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path

logger = logging.getLogger(__name__)

DEFAULT_SECTION = "Specifications"
DEFAULT_MAX_TOKENS = 400

_HEADING_RE = re.compile(r"^#{1,6}\s", re.MULTILINE)
_PARA_SPLIT_RE = re.compile(r"\n\s*\n")


class CorpusError(Exception):
    """Fatal corpus problem (empty or unreadable root)."""


class RecordError(ValueError):
    """A structured record that cannot be turned into a component."""


@dataclass(frozen=True)
class SpecRow:
    """One specification-table row: section, entry label and raw value."""

    section: str
    entry: str
    raw_value: str


@dataclass
class StructuredComponent:
    """Structured description of one product from a page record."""

    product_name: str
    range_name: str
    categories: list[str] = field(default_factory=list)
    rows: list[SpecRow] = field(default_factory=list)
    price: float | None = None


@dataclass
class Document:
    id: str
    source_path: Path
    text: str | None = None
    structured: list[StructuredComponent] = field(default_factory=list)
    metadata: dict[str, str] = field(default_factory=dict)


@dataclass(frozen=True)
class Chunk:
    id: str
    doc_id: str
    text: str
    token_estimate: int


@dataclass
class Corpus:
    documents: list[Document]
    errors: list[str] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.documents)

    def __iter__(self):
        return iter(self.documents)


_RESERVED_KEYS = ("name", "range", "categories", "price")


def parse_structured(record: dict) -> StructuredComponent:
    """Turn one raw page record into a StructuredComponent.

    Compound keys "Section, Entry" split at the first comma; "Section.Entry"
    is accepted as a fallback separator; plain keys get the default section.
    A price field becomes an extra ("Specifications", "Price") row.
    """
    name = record.get("name")
    if not isinstance(name, str) or not name.strip():
        raise RecordError("record has no usable 'name' field")
    range_name = record.get("range") or name
    categories = record.get("categories") or []
    if isinstance(categories, str):
        categories = [categories]
    categories = [str(c) for c in categories if str(c).strip()]

    rows: list[SpecRow] = []
    for key, value in record.items():
        if key in _RESERVED_KEYS:
            continue
        section, entry = _split_key(str(key))
        if not entry:
            logger.warning("skipping row with empty entry label: %r", key)
            continue
        rows.append(SpecRow(section=section, entry=entry, raw_value=_stringify(value)))

    price = record.get("price")
    if price is not None:
        try:
            price = float(price)
        except (TypeError, ValueError):
            logger.warning("unparseable price %r on %r", price, name)
            price = None
        else:
            rows.append(SpecRow(DEFAULT_SECTION, "Price", _stringify(price)))

    return StructuredComponent(
        product_name=name.strip(),
        range_name=str(range_name).strip(),
        categories=categories,
        rows=rows,
        price=price,
    )


def _split_key(key: str) -> tuple[str, str]:
    if "," in key:
        section, _, entry = key.partition(",")
    elif "." in key:
        section, _, entry = key.partition(".")
    else:
        return DEFAULT_SECTION, key.strip()
    section = section.strip()
    return section or DEFAULT_SECTION, entry.strip()


def _stringify(value) -> str:
    if isinstance(value, float) and value.is_integer():
        return str(int(value))
    if isinstance(value, (list, tuple)):
        return ", ".join(str(v) for v in value)
    return str(value)


def load_corpus(root: str | Path) -> Corpus:
    """Load every page directory under root; collect per-document errors.

    Raises CorpusError when the root yields no loadable documents at all.
    """
    root = Path(root)
    if not root.is_dir():
        raise CorpusError(f"corpus root {root} is not a directory")
    documents: list[Document] = []
    errors: list[str] = []
    for sub in sorted(p for p in root.iterdir() if p.is_dir()):
        meta_files = sorted(sub.glob("file-*.json"))
        if not meta_files:
            errors.append(f"{sub.name}: no file-*.json metadata")
            continue
        try:
            documents.append(_load_document(sub, meta_files[0]))
        except Exception as exc:  # noqa: BLE001 - per-document isolation
            errors.append(f"{sub.name}: {exc}")
    if not documents:
        raise CorpusError(f"empty corpus at {root} ({len(errors)} errors)")
    for err in errors:
        logger.warning("corpus: %s", err)
    return Corpus(documents=documents, errors=errors)


def _load_document(sub: Path, meta_path: Path) -> Document:
    meta = json.loads(meta_path.read_text("utf-8"))
    if not isinstance(meta, dict):
        raise RecordError("metadata is not a JSON object")
    text = None
    content = meta.get("content")
    if content:
        text = (sub / content).read_text("utf-8")
    structured: list[StructuredComponent] = []
    prescience = meta.get("prescience")
    if prescience:
        records = json.loads((sub / prescience).read_text("utf-8"))
        if not isinstance(records, list):
            raise RecordError("structured data file is not a JSON list")
        for i, record in enumerate(records):
            try:
                structured.append(parse_structured(record))
            except RecordError as exc:
                logger.warning("%s record %d rejected: %s", sub.name, i, exc)
    if text is None and not structured:
        raise RecordError("document has neither text nor structured content")
    metadata = {
        k: str(v) for k, v in meta.items() if k not in ("content", "prescience")
    }
    return Document(
        id=sub.name,
        source_path=sub,
        text=text,
        structured=structured,
        metadata=metadata,
    )


def chunk_text(
    doc: Document,
    max_tokens: int = DEFAULT_MAX_TOKENS,
    include_spec_appendix: bool = True,
) -> list[Chunk]:
    """Split a document's markdown into chunks of at most max_tokens words.

    Splits at markdown headings first, then at paragraph breaks, finally by
    words for oversized paragraphs. Joining the chunk texts in id order
    reproduces the source text modulo whitespace. When include_spec_appendix
    is False, sections whose heading starts with "Specifications" (the plain
    text rendering of the spec table) are dropped.
    """
    if max_tokens <= 0:
        raise ValueError("max_tokens must be positive")
    text = doc.text or ""
    if not text.strip():
        return []
    segments = _split_at_headings(text)
    if not include_spec_appendix:
        segments = [
            s
            for s in segments
            if not re.match(r"#{1,6}\s*specifications\b", s.lstrip(), re.IGNORECASE)
        ]
    pieces: list[str] = []
    for segment in segments:
        if _tokens(segment) <= max_tokens:
            pieces.append(segment)
            continue
        pieces.extend(_split_paragraphs(segment, max_tokens))
    chunks = []
    for i, piece in enumerate(p for p in pieces if p.strip()):
        chunks.append(
            Chunk(
                id=f"{doc.id}:{i:04d}",
                doc_id=doc.id,
                text=piece,
                token_estimate=_tokens(piece),
            )
        )
    return chunks


def _tokens(text: str) -> int:
    return len(text.split())


def _split_at_headings(text: str) -> list[str]:
    starts = [m.start() for m in _HEADING_RE.finditer(text)]
    if not starts:
        return [text]
    bounds = ([0] if starts[0] != 0 else []) + starts + [len(text)]
    return [text[a:b] for a, b in zip(bounds, bounds[1:]) if text[a:b].strip()]


def _split_paragraphs(segment: str, max_tokens: int) -> list[str]:
    paragraphs = [p for p in _PARA_SPLIT_RE.split(segment) if p.strip()]
    pieces: list[str] = []
    acc: list[str] = []
    acc_tokens = 0
    for para in paragraphs:
        n = _tokens(para)
        if acc and acc_tokens + n > max_tokens:
            pieces.append("\n\n".join(acc))
            acc, acc_tokens = [], 0
        if n > max_tokens:
            if acc:
                pieces.append("\n\n".join(acc))
                acc, acc_tokens = [], 0
            pieces.extend(_split_words(para, max_tokens))
            continue
        acc.append(para)
        acc_tokens += n
    if acc:
        pieces.append("\n\n".join(acc))
    return pieces


def _split_words(para: str, max_tokens: int) -> list[str]:
    words = para.split()
    return [
        " ".join(words[i : i + max_tokens]) for i in range(0, len(words), max_tokens)
    ]
