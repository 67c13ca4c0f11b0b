"""Symbolic knowledge graph: typed nodes, predicate edges, lookup indexes.

Nodes are canonical-id strings; literals are tagged values (string or
decimal) that only ever appear in object position. Three permutation
indexes (SPO / POS / OSP) back triple-pattern lookup for the rule engine
and the query engine.
"""

from __future__ import annotations

import logging
import re
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, NamedTuple, Union

from specgraph.corpus import Corpus, StructuredComponent
from specgraph.normalize import CanonicalError, canonical_id, parse_quantity

logger = logging.getLogger(__name__)

RDF_TYPE = "rdf:type"

# Ontology classes.
CATEGORY = "Category"
PRODUCT_RANGE = "ProductRange"
PRODUCT = "Product"
SPEC = "Spec"
SECTION = "Section"
ENTRY = "Entry"
VALUE = "Value"
FEATURE = "Feature"
UTKG_ENTITY = "UTKG_Entity"
SKG_ENTITY = "SKG_Entity"

CLASSES = frozenset(
    {
        CATEGORY,
        PRODUCT_RANGE,
        PRODUCT,
        SPEC,
        SECTION,
        ENTRY,
        VALUE,
        FEATURE,
        UTKG_ENTITY,
        SKG_ENTITY,
    }
)

PREDICATES = frozenset(
    {
        "hasName",
        "variantOf",
        "belongs",
        "hasDescription",
        "hasSpec",
        "inSection",
        "inEntry",
        "hasValue",
        "hasFeature",
        "hasNumericValue",
        "hasDim1",
        "hasDim2",
        "hasDim3",
        "hasUnit",
        "hasPrice",
    }
)

# Predicates whose node endpoints are auto-typed on insert.
_CLOSURE: dict[str, tuple[str, str]] = {
    "hasSpec": (PRODUCT, SPEC),
    "inSection": (SPEC, SECTION),
    "inEntry": (SPEC, ENTRY),
    "hasValue": (SPEC, VALUE),
    "hasFeature": (PRODUCT, FEATURE),
}


class SchemaViolation(Exception):
    """Triple uses a predicate the ontology does not declare."""


@dataclass(frozen=True)
class Literal:
    """Tagged literal object: a display string or a decimal number."""

    value: Union[str, float]

    @property
    def is_numeric(self) -> bool:
        return isinstance(self.value, float)

    def __repr__(self) -> str:  # keeps test diffs readable
        return f"Literal({self.value!r})"


Term = Union[str, Literal]


class Triple(NamedTuple):
    subject: str
    predicate: str
    object: Term


@dataclass(frozen=True)
class Ontology:
    classes: frozenset[str] = CLASSES
    predicates: frozenset[str] = PREDICATES

    def allows(self, predicate: str) -> bool:
        return predicate == RDF_TYPE or predicate in self.predicates


def default_ontology() -> Ontology:
    return Ontology()


def str_form(term: Term) -> str:
    """Canonical string rendering used by filters, REGEX and display."""
    if isinstance(term, Literal):
        if isinstance(term.value, float):
            return format_decimal(term.value)
        return term.value
    return term


def format_decimal(value: float) -> str:
    if value == int(value) and abs(value) < 1e15:
        return str(int(value))
    return repr(value)


class Graph:
    """In-memory triple set with SPO / POS / OSP permutation indexes."""

    def __init__(self, ontology: Ontology | None = None):
        self.ontology = ontology or default_ontology()
        self._spo: dict[str, dict[str, set[Term]]] = defaultdict(lambda: defaultdict(set))
        self._pos: dict[str, dict[Term, set[str]]] = defaultdict(lambda: defaultdict(set))
        self._osp: dict[Term, dict[str, set[str]]] = defaultdict(lambda: defaultdict(set))
        self._size = 0

    def __len__(self) -> int:
        return self._size

    def __contains__(self, triple: Triple) -> bool:
        s, p, o = triple
        return o in self._spo.get(s, {}).get(p, ())

    def triples(self) -> Iterator[Triple]:
        for s, po in self._spo.items():
            for p, objs in po.items():
                for o in objs:
                    yield Triple(s, p, o)

    def copy(self) -> "Graph":
        clone = Graph(self.ontology)
        for t in self.triples():
            clone._add_raw(t)
        return clone

    def insert(self, triple: Triple) -> list[Triple]:
        """Insert a triple (set semantics); returns triples actually added.

        Inserting one of the five structural predicates auto-types its node
        endpoints, so the returned list may contain extra rdf:type triples.
        """
        s, p, o = triple
        if not self.ontology.allows(p):
            raise SchemaViolation(f"predicate {p!r} not declared in ontology")
        added: list[Triple] = []
        if self._add_raw(triple):
            added.append(triple)
        closure = _CLOSURE.get(p)
        if closure:
            domain, range_ = closure
            for node, cls in ((s, domain), (o, range_)):
                if isinstance(node, str):
                    t = Triple(node, RDF_TYPE, cls)
                    if self._add_raw(t):
                        added.append(t)
        return added

    def add(self, subject: str, predicate: str, object_: Term) -> list[Triple]:
        return self.insert(Triple(subject, predicate, object_))

    def _add_raw(self, triple: Triple) -> bool:
        s, p, o = triple
        if o in self._spo[s][p]:
            return False
        self._spo[s][p].add(o)
        self._pos[p][o].add(s)
        self._osp[o][s].add(p)
        self._size += 1
        return True

    def match(
        self,
        subject: str | None = None,
        predicate: str | None = None,
        object_: Term | None = None,
    ) -> Iterator[Triple]:
        """Yield the triples unifying with an (s?, p?, o?) pattern."""
        s, p, o = subject, predicate, object_
        if s is not None and p is not None:
            for obj in self._spo.get(s, {}).get(p, ()):
                if o is None or obj == o:
                    yield Triple(s, p, obj)
        elif p is not None and o is not None:
            for subj in self._pos.get(p, {}).get(o, ()):
                yield Triple(subj, p, o)
        elif s is not None and o is not None:
            for pred in self._osp.get(o, {}).get(s, ()):
                yield Triple(s, pred, o)
        elif s is not None:
            for pred, objs in self._spo.get(s, {}).items():
                for obj in objs:
                    yield Triple(s, pred, obj)
        elif p is not None:
            for obj, subjs in self._pos.get(p, {}).items():
                for subj in subjs:
                    yield Triple(subj, p, obj)
        elif o is not None:
            for subj, preds in self._osp.get(o, {}).items():
                for pred in preds:
                    yield Triple(subj, pred, o)
        else:
            yield from self.triples()

    def count(
        self,
        subject: str | None = None,
        predicate: str | None = None,
        object_: Term | None = None,
    ) -> int:
        s, p, o = subject, predicate, object_
        if s is not None and p is not None and o is not None:
            return 1 if Triple(s, p, o) in self else 0
        if s is not None and p is not None:
            return len(self._spo.get(s, {}).get(p, ()))
        if p is not None and o is not None:
            return len(self._pos.get(p, {}).get(o, ()))
        if s is not None and o is not None:
            return len(self._osp.get(o, {}).get(s, ()))
        if s is not None:
            return sum(len(v) for v in self._spo.get(s, {}).values())
        if p is not None:
            return sum(len(v) for v in self._pos.get(p, {}).values())
        if o is not None:
            return sum(len(v) for v in self._osp.get(o, {}).values())
        return self._size

    def objects(self, subject: str, predicate: str) -> list[Term]:
        return sorted(self._spo.get(subject, {}).get(predicate, ()), key=str_form)

    def subjects(self, predicate: str, object_: Term) -> list[str]:
        return sorted(self._pos.get(predicate, {}).get(object_, ()))

    def node_classes(self, node: str) -> set[str]:
        return {o for o in self._spo.get(node, {}).get(RDF_TYPE, ()) if isinstance(o, str)}

    def nodes_of_class(self, cls: str) -> list[str]:
        return sorted(self._pos.get(RDF_TYPE, {}).get(cls, ()))

    def name_of(self, node: str) -> str | None:
        names = [
            o.value
            for o in self._spo.get(node, {}).get("hasName", ())
            if isinstance(o, Literal) and isinstance(o.value, str)
        ]
        return min(names) if names else None

    def stats(self) -> dict[str, dict[str, int]]:
        classes: dict[str, int] = defaultdict(int)
        predicates: dict[str, int] = defaultdict(int)
        for s, p, o in self.triples():
            predicates[p] += 1
            if p == RDF_TYPE and isinstance(o, str):
                classes[o] += 1
        return {
            "classes": dict(sorted(classes.items())),
            "predicates": dict(sorted(predicates.items())),
        }

    # -- serialization ----------------------------------------------------

    def save(self, path: str | Path) -> None:
        lines = sorted(_triple_line(t) for t in self.triples())
        Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), "utf-8")

    @classmethod
    def load(cls, path: str | Path, ontology: Ontology | None = None) -> "Graph":
        graph = cls(ontology)
        for i, line in enumerate(Path(path).read_text("utf-8").splitlines(), 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            graph._add_raw(_parse_line(line, i))
        return graph


def _escape(text: str) -> str:
    return text.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n")


def _unescape(text: str) -> str:
    return (
        text.replace("\\n", "\n").replace('\\"', '"').replace("\\\\", "\\")
    )


def _triple_line(triple: Triple) -> str:
    s, p, o = triple
    if isinstance(o, Literal):
        if isinstance(o.value, float):
            obj = f'"{repr(o.value)}"^^decimal'
        else:
            obj = f'"{_escape(o.value)}"'
    else:
        obj = f"<{o}>"
    return f"<{s}> <{p}> {obj} ."


_LINE_RE = re.compile(
    r'^<([^>]*)>\s+<([^>]*)>\s+(?:<([^>]*)>|"((?:[^"\\]|\\.)*)"(\^\^decimal)?)\s*\.$'
)


def _parse_line(line: str, lineno: int) -> Triple:
    m = _LINE_RE.match(line)
    if not m:
        raise ValueError(f"bad graph line {lineno}: {line!r}")
    s, p, node_o, lit, dec = m.groups()
    if node_o is not None:
        return Triple(s, p, node_o)
    if dec:
        return Triple(s, p, Literal(float(lit)))
    return Triple(s, p, Literal(_unescape(lit)))


# -- construction from a corpus -------------------------------------------


def build_skg(corpus: Corpus | Iterable[StructuredComponent], ontology: Ontology | None = None) -> Graph:
    """Populate a graph from the corpus' structured components.

    Per component: a Product node (named), variantOf its ProductRange,
    belongs edges from the range to its categories, and one unnamed Spec
    node per table row carrying inSection / inEntry / hasValue edges plus
    numeric annotations. Standalone products double as their own range with
    a cyclic variantOf edge. Price rows keep a decimal-literal value so the
    rule engine can lift it onto the product.
    """
    graph = Graph(ontology)
    if isinstance(corpus, Corpus):
        components = [c for doc in corpus for c in doc.structured]
    else:
        components = list(corpus)
    for component in components:
        try:
            _add_component(graph, component)
        except CanonicalError as exc:
            logger.warning("skipping component %r: %s", component.product_name, exc)
    return graph


def _add_component(graph: Graph, component: StructuredComponent) -> None:
    pid = canonical_id(component.product_name)
    graph.add(pid, RDF_TYPE, PRODUCT)
    graph.add(pid, "hasName", Literal(component.product_name))
    rid = canonical_id(component.range_name) if component.range_name else pid
    graph.add(rid, RDF_TYPE, PRODUCT_RANGE)
    if rid != pid:
        graph.add(rid, "hasName", Literal(component.range_name))
    graph.add(pid, "variantOf", rid)
    for cat in component.categories:
        try:
            cid = canonical_id(cat)
        except CanonicalError:
            logger.warning("skipping unusable category %r", cat)
            continue
        graph.add(cid, RDF_TYPE, CATEGORY)
        graph.add(cid, "hasName", Literal(cat))
        graph.add(rid, "belongs", cid)

    for k, row in enumerate(component.rows):
        if not row.entry.strip() or not row.section.strip():
            logger.warning("skipping malformed row %d on %r", k, component.product_name)
            continue
        spec_id = f"{pid}__spec{k}"
        graph.add(pid, "hasSpec", spec_id)
        sec_id = canonical_id(row.section)
        graph.add(spec_id, "inSection", sec_id)
        graph.add(sec_id, "hasName", Literal(row.section))
        try:
            ent_id = canonical_id(row.entry)
        except CanonicalError:
            logger.warning("skipping row with degenerate entry %r", row.entry)
            continue
        graph.add(spec_id, "inEntry", ent_id)
        graph.add(ent_id, "hasName", Literal(row.entry))
        _add_values(graph, spec_id, ent_id, row.raw_value)


def _add_values(graph: Graph, spec_id: str, ent_id: str, raw_value: str) -> None:
    fragments = [f.strip() for f in raw_value.split(",") if f.strip()]
    quantity = None
    for fragment in fragments:
        if quantity is None:
            quantity = parse_quantity(fragment)
        if ent_id == "price":
            q = parse_quantity(fragment)
            if q is not None and q.value is not None:
                graph.add(spec_id, "hasValue", Literal(q.value))
                continue
        try:
            vid = canonical_id(fragment)
        except CanonicalError:
            logger.warning("skipping unusable value fragment %r", fragment)
            continue
        graph.add(spec_id, "hasValue", vid)
        graph.add(vid, "hasName", Literal(fragment))
    if quantity is None:
        return
    if quantity.value is not None:
        graph.add(spec_id, "hasNumericValue", Literal(quantity.value))
    if quantity.dims is not None:
        for i, dim in enumerate(quantity.dims[:3], start=1):
            graph.add(spec_id, f"hasDim{i}", Literal(dim))
    if quantity.unit:
        graph.add(spec_id, "hasUnit", Literal(quantity.unit))


def schema_text(ontology: Ontology | None = None) -> str:
    """Human-readable schema summary used to ground query generation."""
    return """Node classes (rdf:type objects, skgt: prefix):
  skgt:Category       wide product category, e.g. skg:smartphones
  skgt:ProductRange   a product family, e.g. skg:orbit_s25
  skgt:Product        an individual product variant; standalone products
                      carry both Product and ProductRange types with a
                      cyclic skg:variantOf edge
  skgt:Spec           one specification-table row; the only unnamed class
  skgt:Section        specification table section (skg:display, ...)
  skgt:Entry          specification entry label (skg:battery_capacity, ...)
  skgt:Value          specification value (skg:yes, skg:5000_mah, ...)
  skgt:Feature        derived capability flag (skg:5g_support, ...)
  skgt:UTKG_Entity    node aligned with a textual-graph entity
  skgt:SKG_Entity     every typed symbolic node

Predicates (skg: prefix unless noted):
  rdf:type (alias a)        node classification
  skg:hasName               display name string literal (all classes but Spec)
  skg:variantOf             Product -> ProductRange
  skg:belongs               ProductRange -> Category (variants inherit it)
  skg:hasSpec               Product -> Spec
  skg:inSection             Spec -> Section (exactly one)
  skg:inEntry               Spec -> Entry (exactly one)
  skg:hasValue              Spec -> Value (one per comma-split fragment)
  skg:hasFeature            Product -> Feature
  skg:hasNumericValue       Spec -> decimal literal when the value parses
  skg:hasDim1/hasDim2/hasDim3  joint dimensional components (e.g. resolution)
  skg:hasUnit               Spec -> normalized lowercase unit string
  skg:hasDescription        aligned entities' textual description
  skg:hasPrice              Product -> decimal literal price

Numeric and price handling:
  - Filter numbers through skg:hasNumericValue on the Spec node, e.g.
    ?p skg:hasSpec ?s . ?s skg:inEntry skg:battery_capacity .
    ?s skg:hasNumericValue ?n . FILTER(?n > 4000)
  - Prices are GBP decimal literals on the product:
    ?p skg:hasPrice ?price . FILTER(?price < 500)
  - Dimensional values (e.g. resolution WxH) use skg:hasDim1 / skg:hasDim2.
"""
