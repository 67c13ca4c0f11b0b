"""Schema-grounded graph patterns for query-generation prompting.

Four pattern kinds are mined from the built graph, rendered to natural
language, embedded into a per-kind vector index, and converted to query
snippets at retrieval time:

  Spec          one per distinct (section, entry, value) combination
  Feature       one per derived feature node
  Category      one per (range, category) membership
  SingularNode  one per named node
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable

from specgraph.skg import (
    CATEGORY,
    FEATURE,
    PRODUCT_RANGE,
    SPEC,
    Graph,
    Literal,
)
from specgraph.vecindex import EmbeddingIndex

KINDS = ("Spec", "Feature", "Category", "SingularNode")

Embedder = Callable[[list[str]], list[list[float]]]


@dataclass(frozen=True)
class PatternInstance:
    kind: str
    node_ids: tuple[str, ...]
    linearization: str
    snippet: str

    @property
    def key(self) -> str:
        return f"{self.kind}:" + "/".join(self.node_ids)


def _display(graph: Graph, node: str) -> str:
    return graph.name_of(node) or node


def linearize(kind: str, node_ids: tuple[str, ...], graph: Graph) -> str:
    """Fixed natural-language template per pattern kind."""
    names = [_display(graph, n) for n in node_ids]
    if kind == "Spec":
        section, entry, value = names
        return (
            f"In the product specification, the {entry} entry in the "
            f"{section} section has the value {value}"
        )
    if kind == "Feature":
        return f"The product has {names[0]} feature"
    if kind == "Category":
        range_name, category = names
        return f"The product range {range_name} belongs to the {category} category."
    if kind == "SingularNode":
        return names[0]
    raise ValueError(f"unknown pattern kind {kind!r}")


def to_snippet(kind: str, node_ids: tuple[str, ...], graph: Graph) -> str:
    """Render the pattern as a parseable basic-graph-pattern fragment."""
    if kind == "Spec":
        section, entry, value = node_ids
        return (
            f"?p skg:hasSpec ?s . ?s skg:inSection skg:{section} . "
            f"?s skg:inEntry skg:{entry} . ?s skg:hasValue skg:{value} ."
        )
    if kind == "Feature":
        return f"?p skg:hasFeature skg:{node_ids[0]} ."
    if kind == "Category":
        range_id, category = node_ids
        return f"?p skg:variantOf skg:{range_id} . skg:{range_id} skg:belongs skg:{category} ."
    if kind == "SingularNode":
        node = node_ids[0]
        name = _display(graph, node).replace("\\", "\\\\").replace('"', '\\"')
        return f'skg:{node} skg:hasName "{name}" .'
    raise ValueError(f"unknown pattern kind {kind!r}")


def extract_patterns(graph: Graph) -> list[PatternInstance]:
    """Mine all distinct pattern instances from a built (enriched) graph."""
    instances: dict[tuple[str, tuple[str, ...]], PatternInstance] = {}

    def put(kind: str, node_ids: tuple[str, ...]):
        key = (kind, node_ids)
        if key in instances:
            return
        instances[key] = PatternInstance(
            kind=kind,
            node_ids=node_ids,
            linearization=linearize(kind, node_ids, graph),
            snippet=to_snippet(kind, node_ids, graph),
        )

    for spec in graph.nodes_of_class(SPEC):
        sections = [o for o in graph.objects(spec, "inSection") if isinstance(o, str)]
        entries = [o for o in graph.objects(spec, "inEntry") if isinstance(o, str)]
        values = [o for o in graph.objects(spec, "hasValue") if isinstance(o, str)]
        for section in sections:
            for entry in entries:
                for value in values:
                    put("Spec", (section, entry, value))

    for feature in graph.nodes_of_class(FEATURE):
        put("Feature", (feature,))

    for range_id in graph.nodes_of_class(PRODUCT_RANGE):
        for cat in graph.objects(range_id, "belongs"):
            if isinstance(cat, str) and CATEGORY in graph.node_classes(cat):
                put("Category", (range_id, cat))

    for triple in graph.match(None, "hasName", None):
        if isinstance(triple.object, Literal):
            put("SingularNode", (triple.subject,))

    return sorted(instances.values(), key=lambda p: (p.kind, p.node_ids))


class PatternIndex:
    """Per-kind exact vector indexes over pattern linearizations."""

    def __init__(self, embedder: Embedder | None = None):
        self.embedder = embedder
        self.patterns: dict[str, PatternInstance] = {}
        self._by_kind: dict[str, EmbeddingIndex] = {kind: EmbeddingIndex() for kind in KINDS}

    def __len__(self) -> int:
        return len(self.patterns)

    def kind_size(self, kind: str) -> int:
        return len(self._by_kind[kind])

    def add(self, pattern: PatternInstance, vector: list[float]) -> None:
        if any(
            p.linearization == pattern.linearization and p.kind == pattern.kind
            for p in self.patterns.values()
        ):
            return
        self.patterns[pattern.key] = pattern
        self._by_kind[pattern.kind].upsert(pattern.key, vector)

    def retrieve(self, question: str, k_per_type: int = 5) -> list[PatternInstance]:
        if self.embedder is None:
            raise ValueError("pattern index has no embedder attached")
        [qvec] = self.embedder([question])
        out: list[PatternInstance] = []
        for kind in KINDS:
            for key, _sim in self._by_kind[kind].search(qvec, k_per_type):
                out.append(self.patterns[key])
        return out

    def save(self, path: str | Path) -> None:
        records = []
        for key in sorted(self.patterns):
            p = self.patterns[key]
            records.append(
                {
                    "kind": p.kind,
                    "node_ids": list(p.node_ids),
                    "linearization": p.linearization,
                    "snippet": p.snippet,
                    "vector": self._by_kind[p.kind].vector(key),
                }
            )
        lines = [json.dumps(r, ensure_ascii=False) for r in records]
        Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), "utf-8")

    @classmethod
    def load(cls, path: str | Path, embedder: Embedder | None = None) -> "PatternIndex":
        index = cls(embedder)
        for line in Path(path).read_text("utf-8").splitlines():
            if not line.strip():
                continue
            r = json.loads(line)
            pattern = PatternInstance(
                kind=r["kind"],
                node_ids=tuple(r["node_ids"]),
                linearization=r["linearization"],
                snippet=r["snippet"],
            )
            index.add(pattern, r["vector"])
        return index


def index_patterns(
    patterns: Iterable[PatternInstance],
    embedder: Embedder,
    max_per_kind: int | None = None,
) -> PatternIndex:
    """Embed every pattern linearization once and build the per-kind indexes."""
    patterns = list(patterns)
    if max_per_kind is not None:
        trimmed: list[PatternInstance] = []
        per_kind: dict[str, int] = {}
        for p in patterns:
            n = per_kind.get(p.kind, 0)
            if n < max_per_kind:
                trimmed.append(p)
                per_kind[p.kind] = n + 1
        patterns = trimmed
    index = PatternIndex(embedder)
    if patterns:
        vectors = embedder([p.linearization for p in patterns])
        for pattern, vector in zip(patterns, vectors):
            index.add(pattern, vector)
    return index


def retrieve_patterns(
    index: PatternIndex, question: str, k_per_type: int = 5
) -> list[PatternInstance]:
    return index.retrieve(question, k_per_type=k_per_type)
