"""SPARQL-subset parser and executor over the symbolic graph.

Supported surface: SELECT [DISTINCT] over variables or COUNT/MIN/MAX/AVG
aggregates, a basic graph pattern with FILTER expressions (comparisons,
&&/||/!, REGEX, IN, str()), GROUP BY, ORDER BY and LIMIT. OPTIONAL, UNION,
property paths and subqueries are deliberately outside the subset; the
query-generation prompt instructs the model to stay within it.

Execution joins patterns in ascending match-count order, applies filters,
then DISTINCT, GROUP BY aggregation, ORDER BY and LIMIT in that order.
Numeric comparisons apply to decimal literals only; rows whose comparison
mixes numeric and non-numeric operands are filtered out rather than raising.
"""

from __future__ import annotations

import re
import time
from dataclasses import dataclass, field
from typing import Optional, Union

from specgraph.datalog import expand_name
from specgraph.skg import Graph, Literal, Term, str_form

MAX_CONTEXT_ROWS = 100
DEFAULT_TIMEOUT = 5.0

_TYPE_ERROR = object()  # comparison over mismatched operand kinds


class SparqlError(Exception):
    pass


class SparqlParseError(SparqlError):
    def __init__(self, message: str, line: int = 0, col: int = 0):
        super().__init__(f"{message} (line {line}, column {col})" if line else message)
        self.line = line
        self.col = col


class SparqlTimeout(SparqlError):
    pass


@dataclass(frozen=True)
class Var:
    name: str

    def __repr__(self) -> str:
        return f"?{self.name}"


PatternTerm = Union[Var, str, Literal]


@dataclass(frozen=True)
class TriplePattern:
    subject: PatternTerm
    predicate: PatternTerm
    object: PatternTerm

    def vars(self) -> set[Var]:
        return {t for t in (self.subject, self.predicate, self.object) if isinstance(t, Var)}


@dataclass(frozen=True)
class StrOf:
    var: Var


Operand = Union[Var, StrOf, str, Literal]


@dataclass(frozen=True)
class Comparison:
    op: str  # < <= = != >= >
    left: Operand
    right: Operand


@dataclass(frozen=True)
class RegexExpr:
    target: Operand
    pattern: str


@dataclass(frozen=True)
class InExpr:
    target: Operand
    options: tuple[PatternTerm, ...]


@dataclass(frozen=True)
class BoolExpr:
    op: str  # && || !
    args: tuple["FilterNode", ...]


FilterNode = Union[Comparison, RegexExpr, InExpr, BoolExpr]

AGG_FUNCS = ("COUNT", "MIN", "MAX", "AVG")


@dataclass(frozen=True)
class Aggregate:
    func: str
    var: Optional[Var]  # None = COUNT(*)
    alias: str


@dataclass
class Query:
    select: list[Union[Var, Aggregate]]
    distinct: bool = False
    patterns: list[TriplePattern] = field(default_factory=list)
    filters: list[FilterNode] = field(default_factory=list)
    group_by: list[Var] = field(default_factory=list)
    order_by: list[tuple[str, bool]] = field(default_factory=list)  # (column, desc)
    limit: Optional[int] = None

    @property
    def has_aggregates(self) -> bool:
        return any(isinstance(item, Aggregate) for item in self.select)

    def header(self) -> list[str]:
        return [f"?{item.name}" if isinstance(item, Var) else f"?{item.alias}" for item in self.select]


@dataclass
class ResultTable:
    header: list[str]
    rows: list[tuple]

    def __len__(self) -> int:
        return len(self.rows)


@dataclass
class CandidateOutcome:
    query_text: str
    status: str  # ok | failed | too_large | empty
    result: Optional[ResultTable] = None
    error: Optional[str] = None


# -- lexer -------------------------------------------------------------------

_KEYWORDS = {
    "SELECT",
    "DISTINCT",
    "WHERE",
    "FILTER",
    "PREFIX",
    "GROUP",
    "ORDER",
    "BY",
    "ASC",
    "DESC",
    "LIMIT",
    "IN",
    "REGEX",
    "STR",
    "AS",
    "COUNT",
    "MIN",
    "MAX",
    "AVG",
    "A",
}

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<comment>\#[^\n]*)
  | (?P<string>"(?:[^"\\]|\\.)*")
  | (?P<iri><[^>\s]*>)
  | (?P<var>\?[A-Za-z_][A-Za-z0-9_]*)
  | (?P<number>-?\d+(?:\.\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*(?::[A-Za-z0-9_]*)?)
  | (?P<op><=|>=|!=|&&|\|\||[{}().,*=<>!])
    """,
    re.VERBOSE,
)


@dataclass
class _Token:
    kind: str
    value: str
    line: int
    col: int


def _tokenize(text: str) -> list[_Token]:
    tokens: list[_Token] = []
    line, col, pos = 1, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m:
            raise SparqlParseError(f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup or ""
        value = m.group()
        if kind == "name" and value.upper() in _KEYWORDS and ":" not in value:
            tokens.append(_Token("kw", value.upper(), line, col))
        elif kind not in ("ws", "comment"):
            tokens.append(_Token(kind, value, line, col))
        newlines = value.count("\n")
        if newlines:
            line += newlines
            col = len(value) - value.rfind("\n")
        else:
            col += len(value)
        pos = m.end()
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.pos = 0

    def peek(self) -> Optional[_Token]:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def at(self, value: str) -> bool:
        tok = self.peek()
        return tok is not None and tok.value == value

    def next(self, expect: Optional[str] = None) -> _Token:
        tok = self.peek()
        if tok is None:
            last = self.tokens[-1] if self.tokens else _Token("", "", 1, 1)
            raise SparqlParseError("unexpected end of query", last.line, last.col)
        if expect is not None and tok.value != expect:
            raise SparqlParseError(f"expected {expect!r}, found {tok.value!r}", tok.line, tok.col)
        self.pos += 1
        return tok

    def error(self, message: str):
        tok = self.peek() or self.tokens[-1]
        raise SparqlParseError(message, tok.line, tok.col)

    # -- grammar ------------------------------------------------------------

    def parse_query(self) -> Query:
        while self.at("PREFIX"):
            self.next()
            self.next()  # prefix name (with or without colon form)
            tok = self.peek()
            if tok and tok.kind == "iri":
                self.next()
        self.next("SELECT")
        distinct = False
        if self.at("DISTINCT"):
            self.next()
            distinct = True
        select = self.parse_projection()
        self.next("WHERE")
        patterns, filters = self.parse_group()
        group_by: list[Var] = []
        order_by: list[tuple[str, bool]] = []
        limit: Optional[int] = None
        while self.peek() is not None:
            if self.at("GROUP"):
                self.next()
                self.next("BY")
                while self.peek() and self.peek().kind == "var":
                    group_by.append(Var(self.next().value[1:]))
                if not group_by:
                    self.error("GROUP BY needs at least one variable")
            elif self.at("ORDER"):
                self.next()
                self.next("BY")
                order_by = self._order_keys()
            elif self.at("LIMIT"):
                self.next()
                tok = self.next()
                if tok.kind != "number" or "." in tok.value or int(tok.value) < 0:
                    raise SparqlParseError("LIMIT needs a nonnegative integer", tok.line, tok.col)
                limit = int(tok.value)
            else:
                self.error(f"unexpected trailing token {self.peek().value!r}")
        query = Query(select, distinct, patterns, filters, group_by, order_by, limit)
        _validate(query)
        return query

    def parse_projection(self) -> list[Union[Var, Aggregate]]:
        items: list[Union[Var, Aggregate]] = []
        while True:
            tok = self.peek()
            if tok is None:
                self.error("unterminated projection")
            if tok.kind == "var":
                items.append(Var(self.next().value[1:]))
            elif tok.value == "(" or tok.value in AGG_FUNCS:
                items.append(self.parse_aggregate())
            else:
                break
        if not items:
            self.error("projection requires at least one variable or aggregate")
        return items

    def parse_aggregate(self) -> Aggregate:
        wrapped = False
        if self.at("("):
            self.next()
            wrapped = True
        tok = self.next()
        if tok.value not in AGG_FUNCS:
            raise SparqlParseError(f"unknown aggregate {tok.value!r}", tok.line, tok.col)
        func = tok.value
        self.next("(")
        var: Optional[Var] = None
        if self.at("*"):
            self.next()
            if func != "COUNT":
                self.error("only COUNT accepts *")
        else:
            vtok = self.next()
            if vtok.kind != "var":
                raise SparqlParseError("aggregate argument must be a variable", vtok.line, vtok.col)
            var = Var(vtok.value[1:])
        self.next(")")
        alias = f"{func.lower()}_{var.name}" if var else func.lower()
        if wrapped:
            if self.at("AS"):
                self.next()
                atok = self.next()
                if atok.kind != "var":
                    raise SparqlParseError("AS needs a variable alias", atok.line, atok.col)
                alias = atok.value[1:]
            self.next(")")
        return Aggregate(func, var, alias)

    def parse_group(self) -> tuple[list[TriplePattern], list[FilterNode]]:
        self.next("{")
        patterns: list[TriplePattern] = []
        filters: list[FilterNode] = []
        while not self.at("}"):
            if self.peek() is None:
                self.error("unterminated group: missing '}'")
            if self.at("FILTER"):
                self.next()
                self.next("(")
                filters.append(self.parse_filter_expr())
                self.next(")")
                if self.at("."):
                    self.next()
                continue
            patterns.append(self.parse_pattern())
            if self.at("."):
                self.next()
            elif not self.at("}") and not self.at("FILTER"):
                self.error("expected '.', FILTER or '}' after triple pattern")
        self.next("}")
        return patterns, filters

    def parse_pattern(self) -> TriplePattern:
        s = self.parse_term()
        p = self.parse_term(predicate=True)
        o = self.parse_term()
        return TriplePattern(s, p, o)

    def parse_term(self, predicate: bool = False) -> PatternTerm:
        tok = self.next()
        if tok.kind == "var":
            return Var(tok.value[1:])
        if tok.kind == "string":
            return Literal(_unquote(tok.value))
        if tok.kind == "number":
            return Literal(float(tok.value))
        if tok.kind == "kw" and tok.value == "A" and predicate:
            return "rdf:type"
        if tok.kind == "name":
            return expand_name(tok.value)
        raise SparqlParseError(f"unexpected term {tok.value!r}", tok.line, tok.col)

    def parse_filter_expr(self) -> FilterNode:
        return self.parse_or()

    def parse_or(self) -> FilterNode:
        node = self.parse_and()
        while self.at("||"):
            self.next()
            node = BoolExpr("||", (node, self.parse_and()))
        return node

    def parse_and(self) -> FilterNode:
        node = self.parse_unary()
        while self.at("&&"):
            self.next()
            node = BoolExpr("&&", (node, self.parse_unary()))
        return node

    def parse_unary(self) -> FilterNode:
        if self.at("!"):
            self.next()
            return BoolExpr("!", (self.parse_unary(),))
        if self.at("("):
            self.next()
            node = self.parse_filter_expr()
            self.next(")")
            return node
        if self.at("REGEX"):
            self.next()
            self.next("(")
            target = self.parse_operand()
            self.next(",")
            tok = self.next()
            if tok.kind != "string":
                raise SparqlParseError("REGEX pattern must be a string", tok.line, tok.col)
            node = RegexExpr(target, _unquote(tok.value))
            # tolerate (and ignore) a flags argument
            if self.at(","):
                self.next()
                self.next()
            self.next(")")
            return node
        left = self.parse_operand()
        if self.at("IN"):
            self.next()
            self.next("(")
            options = [self.parse_term()]
            while self.at(","):
                self.next()
                options.append(self.parse_term())
            self.next(")")
            return InExpr(left, tuple(options))
        tok = self.peek()
        if tok is None or tok.value not in ("<", "<=", "=", "!=", ">=", ">"):
            self.error("expected a comparison operator, IN or REGEX")
        op = self.next().value
        right = self.parse_operand()
        return Comparison(op, left, right)

    def parse_operand(self) -> Operand:
        if self.at("STR"):
            self.next()
            self.next("(")
            tok = self.next()
            if tok.kind != "var":
                raise SparqlParseError("str() takes a variable", tok.line, tok.col)
            self.next(")")
            return StrOf(Var(tok.value[1:]))
        return self.parse_term()

    def _order_keys(self) -> list[tuple[str, bool]]:
        keys: list[tuple[str, bool]] = []
        while True:
            tok = self.peek()
            if tok is None:
                break
            if tok.value in ("ASC", "DESC"):
                desc = tok.value == "DESC"
                self.next()
                self.next("(")
                vtok = self.next()
                if vtok.kind != "var":
                    raise SparqlParseError("ORDER BY key must be a variable", vtok.line, vtok.col)
                self.next(")")
                keys.append((f"?{vtok.value[1:]}", desc))
            elif tok.kind == "var":
                self.next()
                keys.append((f"?{tok.value[1:]}", False))
            else:
                break
        if not keys:
            self.error("ORDER BY needs at least one key")
        return keys


def _unquote(token: str) -> str:
    return token[1:-1].replace('\\"', '"').replace("\\n", "\n").replace("\\\\", "\\")


def _filter_vars(node: FilterNode) -> set[Var]:
    if isinstance(node, BoolExpr):
        out: set[Var] = set()
        for arg in node.args:
            out |= _filter_vars(arg)
        return out

    def operand_vars(op: Operand) -> set[Var]:
        if isinstance(op, Var):
            return {op}
        if isinstance(op, StrOf):
            return {op.var}
        return set()

    if isinstance(node, Comparison):
        return operand_vars(node.left) | operand_vars(node.right)
    if isinstance(node, RegexExpr):
        return operand_vars(node.target)
    return operand_vars(node.target)


def _validate(query: Query) -> None:
    bound: set[Var] = set()
    for pattern in query.patterns:
        bound |= pattern.vars()
    for item in query.select:
        if isinstance(item, Var) and item not in bound:
            raise SparqlParseError(f"projected variable ?{item.name} not bound in pattern")
        if isinstance(item, Aggregate) and item.var is not None and item.var not in bound:
            raise SparqlParseError(f"aggregate variable ?{item.var.name} not bound in pattern")
    for f in query.filters:
        for v in _filter_vars(f):
            if v not in bound:
                raise SparqlParseError(f"filter variable ?{v.name} not bound in pattern")
    for v in query.group_by:
        if v not in bound:
            raise SparqlParseError(f"GROUP BY variable ?{v.name} not bound in pattern")
    if query.has_aggregates:
        group = set(query.group_by)
        for item in query.select:
            if isinstance(item, Var) and item not in group:
                raise SparqlParseError(
                    f"?{item.name} must appear in GROUP BY alongside aggregates"
                )
    elif query.group_by:
        raise SparqlParseError("GROUP BY requires at least one aggregate in the projection")
    header = set(query.header())
    for column, _ in query.order_by:
        if column not in header:
            raise SparqlParseError(f"ORDER BY column {column} is not projected")


def parse_query(text: str) -> Query:
    parser = _Parser(text)
    query = parser.parse_query()
    return query


def parse_bgp_fragment(text: str) -> list[TriplePattern]:
    """Parse a bare sequence of triple patterns (prompt snippet grammar)."""
    parser = _Parser(text)
    patterns: list[TriplePattern] = []
    while parser.peek() is not None:
        patterns.append(parser.parse_pattern())
        if parser.at("."):
            parser.next()
    return patterns


# -- execution ----------------------------------------------------------------

Binding = dict[Var, Term]


def _pattern_lookup(pattern: TriplePattern, binding: Binding):
    def resolve(term: PatternTerm):
        if isinstance(term, Var):
            return binding.get(term)
        return term

    return resolve(pattern.subject), resolve(pattern.predicate), resolve(pattern.object)


def _extend(pattern: TriplePattern, triple, binding: Binding) -> Optional[Binding]:
    out = None
    for term, value in zip((pattern.subject, pattern.predicate, pattern.object), triple):
        if isinstance(term, Var):
            bound = binding.get(term) if out is None else out.get(term, binding.get(term))
            if bound is None:
                if out is None:
                    out = dict(binding)
                out[term] = value
            elif bound != value:
                return None
        elif term != value:
            return None
    return out if out is not None else dict(binding)


def execute(graph: Graph, query: Query, timeout: float = DEFAULT_TIMEOUT) -> ResultTable:
    """Evaluate a parsed query; raises SparqlTimeout past the deadline."""
    deadline = time.monotonic() + timeout if timeout else None

    def check_deadline():
        if deadline is not None and time.monotonic() > deadline:
            raise SparqlTimeout(f"query exceeded {timeout:.1f}s")

    def static_count(pat: TriplePattern) -> int:
        if isinstance(pat.subject, Literal) or isinstance(pat.predicate, Literal):
            return 0  # can never match; handled below
        s = pat.subject if isinstance(pat.subject, str) else None
        p = pat.predicate if isinstance(pat.predicate, str) else None
        o = pat.object if not isinstance(pat.object, Var) else None
        return graph.count(s, p, o)

    ordered = sorted(query.patterns, key=static_count)
    bindings: list[Binding] = [{}]
    for pattern in ordered:
        if isinstance(pattern.subject, Literal) or isinstance(pattern.predicate, Literal):
            bindings = []
            break
        new: list[Binding] = []
        for binding in bindings:
            check_deadline()
            s, p, o = _pattern_lookup(pattern, binding)
            if isinstance(s, Literal) or isinstance(p, Literal):
                continue
            for triple in graph.match(s, p, o):
                ext = _extend(pattern, triple, binding)
                if ext is not None:
                    new.append(ext)
        bindings = new
        if not bindings:
            break

    rows = [b for b in bindings if _filters_pass(query.filters, b)]
    check_deadline()

    if query.has_aggregates:
        table_rows = _aggregate_rows(query, rows)
    else:
        projected = [tuple(b[v] for v in query.select) for b in rows]  # type: ignore[index]
        if query.distinct:
            projected = _dedupe(projected)
        table_rows = projected

    table_rows = _order_rows(query, table_rows)
    if query.limit is not None:
        table_rows = table_rows[: query.limit]
    return ResultTable(header=query.header(), rows=table_rows)


def _dedupe(rows: list[tuple]) -> list[tuple]:
    seen = set()
    out = []
    for row in rows:
        if row not in seen:
            seen.add(row)
            out.append(row)
    return out


def _aggregate_rows(query: Query, rows: list[Binding]) -> list[tuple]:
    needed = list(query.group_by)
    for item in query.select:
        if isinstance(item, Aggregate) and item.var is not None and item.var not in needed:
            needed.append(item.var)
    if query.distinct:
        slim = _dedupe([tuple(b.get(v) for v in needed) for b in rows])
        rows = [dict(zip(needed, values)) for values in slim]

    if query.group_by:
        groups: dict[tuple, list[Binding]] = {}
        for b in rows:
            key = tuple(b[v] for v in query.group_by)
            groups.setdefault(key, []).append(b)
        group_items = list(groups.items())
    else:
        group_items = [((), rows)]
        if not rows:
            group_items = [((), [])]

    out = []
    for key, members in group_items:
        row = []
        key_map = dict(zip(query.group_by, key))
        for item in query.select:
            if isinstance(item, Var):
                row.append(key_map[item])
            else:
                row.append(_aggregate(item, members))
        out.append(tuple(row))
    return out


def _aggregate(agg: Aggregate, members: list[Binding]):
    if agg.func == "COUNT":
        if agg.var is None:
            return Literal(float(len(members)))
        return Literal(float(sum(1 for b in members if agg.var in b)))
    values = [b[agg.var] for b in members if agg.var in b]
    if agg.func == "AVG":
        nums = [v.value for v in values if isinstance(v, Literal) and v.is_numeric]
        if not nums:
            return None
        return Literal(sum(nums) / len(nums))
    if not values:
        return None
    keyed = sorted(values, key=_term_sort_key)
    return keyed[0] if agg.func == "MIN" else keyed[-1]


def _term_sort_key(term) -> tuple:
    """Numerics before strings, then text, then term type (node < literal)."""
    if term is None:
        return (2, 0.0, "", 0)
    if isinstance(term, Literal) and term.is_numeric:
        return (0, term.value, str_form(term), 1)
    return (1, 0.0, str_form(term), 1 if isinstance(term, Literal) else 0)


def _order_rows(query: Query, rows: list[tuple]) -> list[tuple]:
    header = query.header()
    # final deterministic tie-break over the whole row
    rows = sorted(rows, key=lambda row: tuple(_term_sort_key(c) for c in row))
    for column, desc in reversed(query.order_by):
        idx = header.index(column)
        rows.sort(key=lambda row: _term_sort_key(row[idx]), reverse=desc)
    return rows


# -- filter evaluation --------------------------------------------------------


def _operand_value(op: Operand, binding: Binding):
    if isinstance(op, Var):
        return binding[op]
    if isinstance(op, StrOf):
        return str_form(binding[op.var])
    return op


def _comparable(value):
    """Map a term to ('num', float) or ('str', str)."""
    if isinstance(value, Literal):
        if value.is_numeric:
            return ("num", value.value)
        return ("str", value.value)
    return ("str", value)


def _eval_comparison(node: Comparison, binding: Binding):
    lkind, lval = _comparable(_operand_value(node.left, binding))
    rkind, rval = _comparable(_operand_value(node.right, binding))
    if lkind != rkind:
        return _TYPE_ERROR
    if node.op == "=":
        return lval == rval
    if node.op == "!=":
        return lval != rval
    if node.op == "<":
        return lval < rval
    if node.op == "<=":
        return lval <= rval
    if node.op == ">":
        return lval > rval
    return lval >= rval


def eval_filter(node: FilterNode, binding: Binding):
    """Three-valued evaluation: True, False or _TYPE_ERROR (row dropped)."""
    if isinstance(node, Comparison):
        return _eval_comparison(node, binding)
    if isinstance(node, RegexExpr):
        target = _operand_value(node.target, binding)
        text = target if isinstance(target, str) else str_form(target)
        return re.search(node.pattern, text, re.IGNORECASE) is not None
    if isinstance(node, InExpr):
        target = _operand_value(node.target, binding)
        return any(target == opt for opt in node.options)
    if node.op == "!":
        inner = eval_filter(node.args[0], binding)
        return _TYPE_ERROR if inner is _TYPE_ERROR else not inner
    if node.op == "&&":
        left = eval_filter(node.args[0], binding)
        right = eval_filter(node.args[1], binding)
        if left is False or right is False:
            return False
        if left is _TYPE_ERROR or right is _TYPE_ERROR:
            return _TYPE_ERROR
        return True
    left = eval_filter(node.args[0], binding)
    right = eval_filter(node.args[1], binding)
    if left is True or right is True:
        return True
    if left is _TYPE_ERROR or right is _TYPE_ERROR:
        return _TYPE_ERROR
    return False


def _filters_pass(filters: list[FilterNode], binding: Binding) -> bool:
    return all(eval_filter(f, binding) is True for f in filters)


# -- candidate handling --------------------------------------------------------


def run_candidate(
    graph: Graph,
    query_text: str,
    timeout: float = DEFAULT_TIMEOUT,
    max_rows: int = MAX_CONTEXT_ROWS,
) -> CandidateOutcome:
    """Parse and execute one generated query, classifying the outcome."""
    try:
        query = parse_query(query_text)
        table = execute(graph, query, timeout=timeout)
    except SparqlError as exc:
        return CandidateOutcome(query_text, "failed", error=str(exc))
    except RecursionError as exc:  # pragma: no cover - defensive
        return CandidateOutcome(query_text, "failed", error=str(exc))
    if len(table) > max_rows:
        return CandidateOutcome(query_text, "too_large", result=table)
    if len(table) == 0:
        return CandidateOutcome(query_text, "empty", result=table)
    return CandidateOutcome(query_text, "ok", result=table)


def validate_candidates(
    outcomes: list[CandidateOutcome], keep_empty_fallback: bool = True
) -> list[CandidateOutcome]:
    """Discard failed and oversized candidates; keep empty ones only when
    nothing succeeded (or never, when keep_empty_fallback is False)."""
    kept = [o for o in outcomes if o.status == "ok"]
    if kept or not keep_empty_fallback:
        return kept
    return [o for o in outcomes if o.status == "empty"]


def format_markdown(outcome: CandidateOutcome, graph: Optional[Graph] = None) -> str:
    """Render a kept outcome as the generating query plus a Markdown table."""
    if outcome.status not in ("ok", "empty") or outcome.result is None:
        raise ValueError(f"cannot format a {outcome.status} outcome")
    table = outcome.result
    lines = ["```sparql", outcome.query_text.strip(), "```", ""]
    lines.append("| " + " | ".join(table.header) + " |")
    lines.append("| " + " | ".join("---" for _ in table.header) + " |")
    for row in table.rows:
        cells = [_display(cell, graph) for cell in row]
        lines.append("| " + " | ".join(cells) + " |")
    return "\n".join(lines)


def _display(cell, graph: Optional[Graph]) -> str:
    if cell is None:
        return ""
    if isinstance(cell, Literal):
        return str_form(cell).replace("|", "\\|")
    if graph is not None:
        name = graph.name_of(cell)
        if name:
            return name.replace("|", "\\|")
    return str(cell).replace("|", "\\|")
