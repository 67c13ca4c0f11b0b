"""Textual knowledge graph: entity extraction, merging and chunk voting.

Entities are extracted per chunk by the provider as "name :: description"
lines, merged by canonical name with concatenated descriptions, and linked
bipartitely to their originating chunks. Retrieval ranks entities by
description similarity to the question; each retrieved entity votes for its
chunks with a rank-derived weight.
"""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Optional

from specgraph.corpus import Chunk
from specgraph.llm import (
    PHASE_INDEXING,
    Provider,
    ProviderError,
    UsageLedger,
    chat_logged,
    make_tag,
)
from specgraph.normalize import CanonicalError, canonical_id
from specgraph.skg import RDF_TYPE, SPEC, UTKG_ENTITY, Graph, Literal
from specgraph.vecindex import EmbeddingIndex

logger = logging.getLogger(__name__)

DEFAULT_K_ENTITIES = 20
DEFAULT_K_CHUNKS = 5

Embedder = Callable[[list[str]], list[list[float]]]


@dataclass(frozen=True)
class Entity:
    id: str
    name: str
    description: str
    chunk_ids: tuple[str, ...]


@dataclass
class Mention:
    chunk_id: str
    name: str
    description: str


class EntityGraph:
    """Merged entities, their chunks and the description embedding index."""

    def __init__(self):
        self.entities: dict[str, Entity] = {}
        self.chunks: dict[str, Chunk] = {}
        self.index = EmbeddingIndex()

    def __len__(self) -> int:
        return len(self.entities)

    def add_chunks(self, chunks: Iterable[Chunk]) -> None:
        for chunk in chunks:
            self.chunks[chunk.id] = chunk

    def build_index(self, embedder: Embedder) -> None:
        ids = sorted(self.entities)
        if not ids:
            return
        vectors = embedder([self.entities[i].description for i in ids])
        for entity_id, vector in zip(ids, vectors):
            self.index.upsert(entity_id, vector)

    # -- persistence: entity and chunk records in one jsonl file -------------

    def save(self, records_path: str | Path, index_path: str | Path) -> None:
        lines = []
        for cid in sorted(self.chunks):
            c = self.chunks[cid]
            lines.append(
                json.dumps(
                    {
                        "type": "chunk",
                        "id": c.id,
                        "doc_id": c.doc_id,
                        "text": c.text,
                        "token_estimate": c.token_estimate,
                    },
                    ensure_ascii=False,
                )
            )
        for eid in sorted(self.entities):
            e = self.entities[eid]
            lines.append(
                json.dumps(
                    {
                        "type": "entity",
                        "id": e.id,
                        "name": e.name,
                        "description": e.description,
                        "chunk_ids": list(e.chunk_ids),
                    },
                    ensure_ascii=False,
                )
            )
        Path(records_path).write_text("\n".join(lines) + ("\n" if lines else ""), "utf-8")
        self.index.save(index_path)

    @classmethod
    def load(cls, records_path: str | Path, index_path: str | Path) -> "EntityGraph":
        graph = cls()
        for line in Path(records_path).read_text("utf-8").splitlines():
            if not line.strip():
                continue
            r = json.loads(line)
            if r["type"] == "chunk":
                graph.chunks[r["id"]] = Chunk(
                    id=r["id"],
                    doc_id=r["doc_id"],
                    text=r["text"],
                    token_estimate=r["token_estimate"],
                )
            else:
                graph.entities[r["id"]] = Entity(
                    id=r["id"],
                    name=r["name"],
                    description=r["description"],
                    chunk_ids=tuple(r["chunk_ids"]),
                )
        if Path(index_path).exists():
            graph.index = EmbeddingIndex.load(index_path)
        return graph


def build_extraction_prompt(chunk: Chunk) -> str:
    return "\n".join(
        [
            make_tag("entities", chunk.id),
            "Extract the named entities from the passage below.",
            "Reply with one line per entity in the form:",
            "name :: one-sentence description grounded in the passage",
            "Reply NONE when the passage names no entities.",
            "",
            "Passage:",
            chunk.text,
        ]
    )


def _parse_mentions(text: str) -> Optional[list[tuple[str, str]]]:
    """None = unparseable; [] = explicitly empty."""
    stripped = text.strip()
    if not stripped:
        return None
    if stripped.upper() == "NONE":
        return []
    mentions = []
    for line in stripped.splitlines():
        line = line.strip().strip("-* ")
        if not line:
            continue
        if "::" not in line:
            continue
        name, _, description = line.partition("::")
        name, description = name.strip(), description.strip()
        if name:
            mentions.append((name, description or name))
    return mentions or None


def extract_entities(
    chunk: Chunk,
    provider: Provider,
    ledger: Optional[UsageLedger] = None,
    phase: str = PHASE_INDEXING,
) -> list[tuple[str, str]]:
    """Provider-backed mention extraction; one retry on unparseable output."""
    if not chunk.text.strip():
        return []
    prompt = build_extraction_prompt(chunk)
    for attempt in range(2):
        try:
            text = chat_logged(
                provider,
                prompt,
                ledger=ledger,
                phase=phase,
                kind="entities",
                qid=chunk.id,
            )
        except ProviderError as exc:
            logger.warning("entity extraction failed on %s: %s", chunk.id, exc)
            return []
        mentions = _parse_mentions(text)
        if mentions is not None:
            return mentions
        logger.warning(
            "unparseable entity response on %s (attempt %d)", chunk.id, attempt + 1
        )
    return []


def merge_entities(mentions: Iterable[Mention]) -> list[Entity]:
    """Group mentions by canonical name; concatenate descriptions in chunk
    order; union chunk ids. Returns entities sorted by id."""
    grouped: dict[str, dict] = {}
    for mention in mentions:
        try:
            eid = canonical_id(mention.name)
        except CanonicalError:
            logger.warning("dropping mention with degenerate name %r", mention.name)
            continue
        slot = grouped.setdefault(
            eid, {"name": mention.name, "descriptions": [], "chunk_ids": []}
        )
        if mention.description and mention.description not in slot["descriptions"]:
            slot["descriptions"].append(mention.description)
        if mention.chunk_id not in slot["chunk_ids"]:
            slot["chunk_ids"].append(mention.chunk_id)
    out = []
    for eid in sorted(grouped):
        slot = grouped[eid]
        description = "\n".join(slot["descriptions"]) or slot["name"]
        out.append(
            Entity(
                id=eid,
                name=slot["name"],
                description=description,
                chunk_ids=tuple(slot["chunk_ids"]),
            )
        )
    return out


def build_entity_graph(
    chunks: list[Chunk],
    provider: Provider,
    embedder: Embedder,
    ledger: Optional[UsageLedger] = None,
    max_workers: int = 4,
) -> EntityGraph:
    """Extract per chunk (bounded parallelism), merge, embed, link."""
    graph = EntityGraph()
    graph.add_chunks(chunks)
    results: dict[str, list[tuple[str, str]]] = {}
    if chunks:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            futures = {
                chunk.id: pool.submit(extract_entities, chunk, provider, ledger)
                for chunk in chunks
            }
        results = {cid: fut.result() for cid, fut in futures.items()}
    mentions = [
        Mention(chunk.id, name, description)
        for chunk in chunks
        for name, description in results.get(chunk.id, [])
    ]
    for entity in merge_entities(mentions):
        graph.entities[entity.id] = entity
    graph.build_index(embedder)
    return graph


def retrieve_chunks(
    graph: EntityGraph,
    question: str,
    embedder: Embedder,
    k_entities: int = DEFAULT_K_ENTITIES,
    k_chunks: int = DEFAULT_K_CHUNKS,
    weighting: str = "reciprocal",
) -> list[Chunk]:
    """Entity-vote chunk ranking.

    The top k_entities by description similarity each vote for their chunks;
    the entity at rank r contributes 1/r ("reciprocal", default) or
    k_entities - r + 1 ("linear"). Chunks are returned by descending total
    weight with ascending-id tie-breaks.
    """
    if not graph.entities or not graph.chunks:
        return []
    [qvec] = embedder([question])
    ranked = graph.index.search(qvec, k_entities)
    scores: dict[str, float] = {}
    for rank, (entity_id, _sim) in enumerate(ranked, start=1):
        if weighting == "linear":
            weight = float(k_entities - rank + 1)
        else:
            weight = 1.0 / rank
        for chunk_id in graph.entities[entity_id].chunk_ids:
            scores[chunk_id] = scores.get(chunk_id, 0.0) + weight
    ordered = sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))
    return [graph.chunks[cid] for cid, _ in ordered[:k_chunks] if cid in graph.chunks]


def align(entity_graph: EntityGraph, skg_graph: Graph) -> Graph:
    """Name-based alignment: textual entities whose canonical id matches a
    symbolic node (Spec nodes excluded) type it UTKG_Entity and attach the
    aggregated description. Returns a new graph; never removes triples."""
    out = skg_graph.copy()
    for eid in sorted(entity_graph.entities):
        classes = out.node_classes(eid)
        if not classes or SPEC in classes:
            continue
        entity = entity_graph.entities[eid]
        out.add(eid, RDF_TYPE, UTKG_ENTITY)
        out.add(eid, "hasDescription", Literal(entity.description))
    return out
