"""Datalog enrichment rules: parsing and semi-naive fixpoint evaluation.

Rule syntax (one rule per statement, terminated by "."):

    [?p, skg:hasFeature, ?f], [?f, rdf:type, skgt:Feature] :-
        [?p, skg:hasSpec, ?s], [?s, skg:inEntry, ?f],
        [?s, skg:hasValue, skg:yes], FILTER(?x != skg:foo) .

Atoms are bracketed subject/predicate/object terms; "a" aliases rdf:type.
FILTER supports =, !=, REGEX(str(?v), "pat") with case-insensitive
substring semantics, and ?v IN (c1, c2, ...). Prefixes skg: / skgt: / rdf:
are fixed built-ins over the canonical-id and class-name spaces.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from importlib import resources
from typing import Iterable, Union

from specgraph.skg import RDF_TYPE, Graph, Literal, Term, Triple, str_form


class RuleParseError(Exception):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{message} (line {line}, column {col})")
        self.line = line
        self.col = col


class UnsafeRuleError(Exception):
    """A head variable does not occur in any body atom."""


@dataclass(frozen=True)
class Var:
    name: str

    def __repr__(self) -> str:
        return f"?{self.name}"


AtomTerm = Union[Var, str, Literal]


@dataclass(frozen=True)
class Atom:
    subject: AtomTerm
    predicate: AtomTerm
    object: AtomTerm

    def vars(self) -> set[Var]:
        return {t for t in (self.subject, self.predicate, self.object) if isinstance(t, Var)}


@dataclass(frozen=True)
class StrOf:
    var: Var


Operand = Union[Var, StrOf, str, Literal]


@dataclass(frozen=True)
class Comparison:
    op: str  # "=" or "!="
    left: Operand
    right: Operand


@dataclass(frozen=True)
class RegexFilter:
    target: Operand
    pattern: str


@dataclass(frozen=True)
class InFilter:
    target: Operand
    options: tuple[AtomTerm, ...]


FilterExpr = Union[Comparison, RegexFilter, InFilter]


@dataclass(frozen=True)
class Rule:
    head: tuple[Atom, ...]
    body: tuple[Atom, ...]
    filters: tuple[FilterExpr, ...]

    def check_safe(self) -> None:
        bound = set()
        for atom in self.body:
            bound |= atom.vars()
        for atom in self.head:
            missing = atom.vars() - bound
            if missing:
                raise UnsafeRuleError(
                    f"head variable {sorted(v.name for v in missing)} unbound in body"
                )
        for f in self.filters:
            for v in _filter_vars(f):
                if v not in bound:
                    raise UnsafeRuleError(f"filter variable ?{v.name} unbound in body")


def _filter_vars(f: FilterExpr) -> set[Var]:
    def operand_vars(op: Operand) -> set[Var]:
        if isinstance(op, Var):
            return {op}
        if isinstance(op, StrOf):
            return {op.var}
        return set()

    if isinstance(f, Comparison):
        return operand_vars(f.left) | operand_vars(f.right)
    if isinstance(f, RegexFilter):
        return operand_vars(f.target)
    return operand_vars(f.target)


# -- parsing ---------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<comment>\#[^\n]*)
  | (?P<string>"(?:[^"\\]|\\.)*")
  | (?P<implies>:-)
  | (?P<neq>!=)
  | (?P<var>\?[A-Za-z_][A-Za-z0-9_]*)
  | (?P<number>-?\d+(?:\.\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*(?::[A-Za-z0-9_]+)?)
  | (?P<punct>[\[\],().=])
    """,
    re.VERBOSE,
)


def _tokenize(text: str) -> list[tuple[str, str, int, int]]:
    tokens = []
    line, col = 1, 1
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m:
            raise RuleParseError(f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup
        value = m.group()
        if kind not in ("ws", "comment"):
            tokens.append((kind, value, line, col))
        newlines = value.count("\n")
        if newlines:
            line += newlines
            col = len(value) - value.rfind("\n")
        else:
            col += len(value)
        pos = m.end()
    return tokens


def expand_name(name: str) -> str:
    """Expand a prefixed name to its internal node/class/predicate form."""
    if name == "a":
        return RDF_TYPE
    if name == "rdf:type":
        return RDF_TYPE
    if name.startswith("skg:"):
        return name[4:]
    if name.startswith("skgt:"):
        return name[5:]
    return name


class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.pos = 0

    def done(self) -> bool:
        return self.pos >= len(self.tokens)

    def peek(self):
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def next(self, expect: str | None = None):
        tok = self.peek()
        if tok is None:
            last = self.tokens[-1] if self.tokens else ("", "", 1, 1)
            raise RuleParseError("unexpected end of input", last[2], last[3])
        if expect is not None and tok[1] != expect:
            raise RuleParseError(f"expected {expect!r}, found {tok[1]!r}", tok[2], tok[3])
        self.pos += 1
        return tok

    def error(self, message: str):
        tok = self.peek() or self.tokens[-1]
        raise RuleParseError(message, tok[2], tok[3])

    def parse_rules(self) -> list[Rule]:
        rules = []
        while not self.done():
            rules.append(self.parse_rule())
        return rules

    def parse_rule(self) -> Rule:
        head = [self.parse_atom()]
        while self.peek() and self.peek()[1] == ",":
            self.next(",")
            head.append(self.parse_atom())
        self.next(":-")
        body: list[Atom] = []
        filters: list[FilterExpr] = []
        while True:
            tok = self.peek()
            if tok is None:
                self.error("expected atom, FILTER or '.'")
            if tok[1] == "[":
                body.append(self.parse_atom())
            elif tok[1] == "FILTER":
                self.next()
                self.next("(")
                filters.append(self.parse_filter())
                self.next(")")
            else:
                self.error(f"expected atom or FILTER, found {tok[1]!r}")
            tok = self.peek()
            if tok and tok[1] == ",":
                self.next(",")
                continue
            self.next(".")
            break
        rule = Rule(tuple(head), tuple(body), tuple(filters))
        return rule

    def parse_atom(self) -> Atom:
        self.next("[")
        s = self.parse_term()
        self.next(",")
        p = self.parse_term()
        self.next(",")
        o = self.parse_term()
        self.next("]")
        return Atom(s, p, o)

    def parse_term(self) -> AtomTerm:
        kind, value, line, col = self.next()
        if kind == "var":
            return Var(value[1:])
        if kind == "string":
            return Literal(_unquote(value))
        if kind == "number":
            return Literal(float(value))
        if kind == "name":
            return expand_name(value)
        raise RuleParseError(f"unexpected term {value!r}", line, col)

    def parse_operand(self) -> Operand:
        tok = self.peek()
        if tok and tok[0] == "name" and tok[1] == "str":
            self.next()
            self.next("(")
            var = self.parse_term()
            if not isinstance(var, Var):
                self.error("str() takes a variable")
            self.next(")")
            return StrOf(var)
        return self.parse_term()

    def parse_filter(self) -> FilterExpr:
        tok = self.peek()
        if tok and tok[0] == "name" and tok[1] == "REGEX":
            self.next()
            self.next("(")
            target = self.parse_operand()
            self.next(",")
            kind, value, line, col = self.next()
            if kind != "string":
                raise RuleParseError("REGEX pattern must be a string", line, col)
            self.next(")")
            return RegexFilter(target, _unquote(value))
        left = self.parse_operand()
        tok = self.peek()
        if tok and tok[1] == "IN":
            self.next()
            self.next("(")
            options = [self.parse_term()]
            while self.peek() and self.peek()[1] == ",":
                self.next(",")
                options.append(self.parse_term())
            self.next(")")
            return InFilter(left, tuple(options))
        if tok and tok[1] in ("=", "!="):
            op = self.next()[1]
            right = self.parse_operand()
            return Comparison(op, left, right)
        self.error("expected comparison, IN or REGEX filter")
        raise AssertionError  # unreachable


def _unquote(token: str) -> str:
    body = token[1:-1]
    return body.replace('\\"', '"').replace("\\n", "\n").replace("\\\\", "\\")


def parse_rules(text: str) -> list[Rule]:
    """Parse rule text; syntax errors carry line and column."""
    return _Parser(text).parse_rules()


# -- printing (round-trip support) ------------------------------------------


def term_to_text(term: AtomTerm) -> str:
    if isinstance(term, Var):
        return f"?{term.name}"
    if isinstance(term, Literal):
        if isinstance(term.value, float):
            return str_form(term)
        escaped = term.value.replace("\\", "\\\\").replace('"', '\\"')
        return f'"{escaped}"'
    if term == RDF_TYPE:
        return "a"
    if term and term[0].isupper():
        return f"skgt:{term}"
    return f"skg:{term}"


def _operand_to_text(op: Operand) -> str:
    if isinstance(op, StrOf):
        return f"str(?{op.var.name})"
    return term_to_text(op)


def _filter_to_text(f: FilterExpr) -> str:
    if isinstance(f, Comparison):
        return f"FILTER({_operand_to_text(f.left)} {f.op} {_operand_to_text(f.right)})"
    if isinstance(f, RegexFilter):
        return f'FILTER(REGEX({_operand_to_text(f.target)}, "{f.pattern}"))'
    opts = ", ".join(term_to_text(o) for o in f.options)
    return f"FILTER({_operand_to_text(f.target)} IN ({opts}))"


def rule_to_text(rule: Rule) -> str:
    def atom(a: Atom) -> str:
        return f"[{term_to_text(a.subject)}, {term_to_text(a.predicate)}, {term_to_text(a.object)}]"

    head = ", ".join(atom(a) for a in rule.head)
    parts = [atom(a) for a in rule.body] + [_filter_to_text(f) for f in rule.filters]
    return f"{head} :- {', '.join(parts)} ."


def rules_to_text(rules: Iterable[Rule]) -> str:
    return "\n".join(rule_to_text(r) for r in rules) + "\n"


# -- evaluation --------------------------------------------------------------

Binding = dict[Var, Term]


def _unify(atom: Atom, triple: Triple, binding: Binding) -> Binding | None:
    out = binding
    for pattern, value in zip((atom.subject, atom.predicate, atom.object), triple):
        if isinstance(pattern, Var):
            bound = out.get(pattern)
            if bound is None:
                if out is binding:
                    out = dict(binding)
                out[pattern] = value
            elif bound != value:
                return None
        elif pattern != value:
            return None
    return out if out is not binding else dict(binding)


def _match_atom(graph: Graph, atom: Atom, binding: Binding) -> Iterable[Binding]:
    def resolve(term: AtomTerm):
        if isinstance(term, Var):
            return binding.get(term)
        return term

    s, p, o = resolve(atom.subject), resolve(atom.predicate), resolve(atom.object)
    if isinstance(s, Literal):
        return
    if p is not None and isinstance(p, Literal):
        return
    for triple in graph.match(s, p if isinstance(p, str) else None, o):
        if isinstance(p, str) and triple.predicate != p:
            continue
        ext = _unify(atom, triple, binding)
        if ext is not None:
            yield ext


def _eval_operand(op: Operand, binding: Binding) -> Term | str:
    if isinstance(op, Var):
        return binding[op]
    if isinstance(op, StrOf):
        return str_form(binding[op.var])
    return op


def eval_filter(f: FilterExpr, binding: Binding) -> bool:
    if isinstance(f, Comparison):
        left = _eval_operand(f.left, binding)
        right = _eval_operand(f.right, binding)
        equal = left == right
        return equal if f.op == "=" else not equal
    if isinstance(f, RegexFilter):
        target = _eval_operand(f.target, binding)
        text = target if isinstance(target, str) else str_form(target)
        return re.search(f.pattern, text, re.IGNORECASE) is not None
    target = _eval_operand(f.target, binding)
    return any(target == opt for opt in f.options)


def _instantiate(atom: Atom, binding: Binding) -> Triple | None:
    def value(term: AtomTerm) -> Term:
        return binding[term] if isinstance(term, Var) else term

    s, p, o = value(atom.subject), value(atom.predicate), value(atom.object)
    if isinstance(s, Literal) or isinstance(p, Literal) or not isinstance(p, str):
        return None
    return Triple(s, p, o)


def _rule_matches(
    rule: Rule, graph: Graph, delta: set[Triple] | None
) -> Iterable[Binding]:
    """Bindings satisfying the body; with delta, at least one atom must hit it."""
    positions = range(len(rule.body)) if delta is not None else [None]
    seen: set[tuple] = set()
    for delta_pos in positions:
        stack = [(0, {})]
        while stack:
            idx, binding = stack.pop()
            if idx == len(rule.body):
                if all(eval_filter(f, binding) for f in rule.filters):
                    key = tuple(sorted((v.name, binding[v]) for v in binding))
                    if key not in seen:
                        seen.add(key)
                        yield binding
                continue
            atom = rule.body[idx]
            if delta is not None and idx == delta_pos:
                for triple in delta:
                    ext = _unify(atom, triple, binding)
                    if ext is not None:
                        stack.append((idx + 1, ext))
            else:
                for ext in _match_atom(graph, atom, binding):
                    stack.append((idx + 1, ext))


def apply_rules(graph: Graph, rules: Iterable[Rule]) -> Graph:
    """Evaluate rules to the least fixpoint; returns a new enriched graph.

    Semi-naive iteration: after the seeding pass, a rule body only re-fires
    when at least one of its atoms matches a triple derived in the previous
    round (including auto-typing closure triples).
    """
    rules = list(rules)
    for rule in rules:
        rule.check_safe()
    out = graph.copy()
    delta: set[Triple] | None = None  # None = seed pass over the full graph
    while True:
        derived: set[Triple] = set()
        for rule in rules:
            for binding in _rule_matches(rule, out, delta):
                for head_atom in rule.head:
                    triple = _instantiate(head_atom, binding)
                    if triple is not None and triple not in out:
                        derived.add(triple)
        if not derived:
            break
        delta = set()
        for triple in derived:
            delta.update(out.insert(triple))
        if not delta:
            break
    return out


def default_rules() -> list[Rule]:
    """The enrichment rule set shipped with the package."""
    text = resources.files("specgraph.data").joinpath("default_rules.dlog").read_text("utf-8")
    return parse_rules(text)
