"""Retrieval orchestration: seven strategies over the two retrievers.

Every provider call and retriever invocation lands in the usage ledger, so
an answer's trace is the ledger slice for its question id and usage totals
are exact sums over trace events.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

from specgraph import llm, sparql
from specgraph.llm import (
    PHASE_QUERYING,
    LedgerEvent,
    Provider,
    ProviderError,
    TokenUsage,
    UsageLedger,
    make_tag,
)
from specgraph.patterns import PatternIndex
from specgraph.skg import Graph, schema_text
from specgraph.tkg import EntityGraph, retrieve_chunks

logger = logging.getLogger(__name__)


class Strategy(str, Enum):
    TKG_ONLY = "tkg_only"
    SKG_ONLY = "skg_only"
    CONCAT = "concat"
    SKG_TKG_FALLBACK = "skg_tkg_fallback"
    ROUTER = "router"
    ROUTER_TKG_FALLBACK = "router_tkg_fallback"
    AGENTIC = "agentic"


SYMBOLIC_STRATEGIES = {
    Strategy.SKG_ONLY,
    Strategy.CONCAT,
    Strategy.SKG_TKG_FALLBACK,
    Strategy.ROUTER,
    Strategy.ROUTER_TKG_FALLBACK,
    Strategy.AGENTIC,
}
SEMANTIC_STRATEGIES = {
    Strategy.TKG_ONLY,
    Strategy.CONCAT,
    Strategy.SKG_TKG_FALLBACK,
    Strategy.ROUTER,
    Strategy.ROUTER_TKG_FALLBACK,
    Strategy.AGENTIC,
}


class ConfigurationError(Exception):
    """A strategy was requested without its indexes built."""


@dataclass(frozen=True)
class ContextBlock:
    source: str  # "symbolic" | "semantic"
    text: str


@dataclass
class RetrievalContext:
    blocks: list[ContextBlock] = field(default_factory=list)

    @property
    def empty(self) -> bool:
        return not self.blocks

    def texts(self) -> list[str]:
        return [b.text for b in self.blocks]

    def extend(self, other: "RetrievalContext") -> None:
        self.blocks.extend(other.blocks)


@dataclass
class AnswerRecord:
    qid: str
    question: str
    strategy: Strategy
    context: RetrievalContext
    answer: str
    symbolic_answer: Optional[list[str]]
    trace: list[LedgerEvent]
    usage: dict[str, TokenUsage]

    def to_dict(self) -> dict:
        return {
            "qid": self.qid,
            "question": self.question,
            "strategy": self.strategy.value,
            "answer": self.answer,
            "symbolic_answer": self.symbolic_answer,
            "context": [
                {"source": b.source, "text": b.text} for b in self.context.blocks
            ],
            "trace": [e.to_line() for e in self.trace],
            "usage": {
                phase: {
                    "prompt_tokens": u.prompt_tokens,
                    "completion_tokens": u.completion_tokens,
                    "total": u.total,
                }
                for phase, u in self.usage.items()
            },
        }


@dataclass
class EngineConfig:
    k_per_type: int = 5
    n_candidates: int = 3
    k_entities: int = 20
    k_chunks: int = 5
    max_rows: int = sparql.MAX_CONTEXT_ROWS
    query_timeout: float = sparql.DEFAULT_TIMEOUT
    keep_empty_fallback: bool = True
    vote_weighting: str = "reciprocal"
    agent_max_steps: int = 6


_ACTION_RE = re.compile(
    r"^\s*(RETRIEVE_SYMBOLIC|RETRIEVE_SEMANTIC|ANSWER|REVISE|STOP)\b[:\s]*(.*)$",
    re.IGNORECASE | re.DOTALL,
)


class Engine:
    """Question-answering engine over the built indexes."""

    def __init__(
        self,
        graph: Optional[Graph] = None,
        pattern_index: Optional[PatternIndex] = None,
        entity_graph: Optional[EntityGraph] = None,
        provider: Optional[Provider] = None,
        ledger: Optional[UsageLedger] = None,
        config: Optional[EngineConfig] = None,
    ):
        self.graph = graph
        self.pattern_index = pattern_index
        self.entity_graph = entity_graph
        self.provider = provider
        self.ledger = ledger or UsageLedger()
        self.config = config or EngineConfig()
        self._schema = schema_text()

    # -- retrievers -----------------------------------------------------------

    def symbolic_retrieve(self, question: str, qid: str = "q") -> RetrievalContext:
        """Pattern-grounded query generation, execution and validation."""
        cfg = self.config
        self.ledger.record(PHASE_QUERYING, "retrieve_symbolic", qid, None, question)
        try:
            retrieved = self.pattern_index.retrieve(question, k_per_type=cfg.k_per_type)
            snippets = [f"# {p.linearization}\n{p.snippet}" for p in retrieved]
            prompt = llm.build_sparql_prompt(question, snippets, self._schema, qid=qid)
            candidates = llm.generate_sparql_candidates(
                question,
                prompt,
                self.provider,
                n=cfg.n_candidates,
                ledger=self.ledger,
                qid=qid,
            )
        except ProviderError as exc:
            self.ledger.record(PHASE_QUERYING, "provider_error", qid, None, str(exc))
            return RetrievalContext()
        outcomes = [
            sparql.run_candidate(
                self.graph, text, timeout=cfg.query_timeout, max_rows=cfg.max_rows
            )
            for text in candidates
        ]
        for outcome in outcomes:
            self.ledger.record(
                PHASE_QUERYING, f"candidate_{outcome.status}", qid, None, outcome.query_text
            )
        kept = sparql.validate_candidates(outcomes, keep_empty_fallback=cfg.keep_empty_fallback)
        blocks = [
            ContextBlock("symbolic", sparql.format_markdown(o, self.graph)) for o in kept
        ]
        return RetrievalContext(blocks)

    def semantic_retrieve(self, question: str, qid: str = "q") -> RetrievalContext:
        """Entity-vote chunk retrieval; one block per chunk in rank order."""
        self.ledger.record(PHASE_QUERYING, "retrieve_semantic", qid, None, question)
        chunks = retrieve_chunks(
            self.entity_graph,
            question,
            self.provider.embed,
            k_entities=self.config.k_entities,
            k_chunks=self.config.k_chunks,
            weighting=self.config.vote_weighting,
        )
        return RetrievalContext([ContextBlock("semantic", c.text) for c in chunks])

    # -- strategies -------------------------------------------------------------

    def _check_built(self, strategy: Strategy) -> None:
        if self.provider is None:
            raise ConfigurationError("no provider configured")
        if strategy in SYMBOLIC_STRATEGIES and (
            self.graph is None or self.pattern_index is None
        ):
            raise ConfigurationError(f"{strategy.value} needs the symbolic graph and pattern index")
        if strategy in SEMANTIC_STRATEGIES and self.entity_graph is None:
            raise ConfigurationError(f"{strategy.value} needs the entity graph")

    def answer(
        self,
        question: str,
        strategy: Strategy | str,
        qid: str = "q",
        want_symbolic: bool = False,
    ) -> AnswerRecord:
        strategy = Strategy(strategy)
        self._check_built(strategy)
        start = self.ledger.mark()

        answer_text: Optional[str] = None
        if strategy is Strategy.TKG_ONLY:
            context = self.semantic_retrieve(question, qid)
        elif strategy is Strategy.SKG_ONLY:
            context = self.symbolic_retrieve(question, qid)
        elif strategy is Strategy.CONCAT:
            context = self.symbolic_retrieve(question, qid)
            context.extend(self.semantic_retrieve(question, qid))
        elif strategy is Strategy.SKG_TKG_FALLBACK:
            context = self.symbolic_retrieve(question, qid)
            if context.empty:
                context = self.semantic_retrieve(question, qid)
        elif strategy is Strategy.ROUTER:
            verdict = llm.route(question, self.provider, qid=qid, ledger=self.ledger)
            if verdict == llm.SYMBOLIC:
                context = self.symbolic_retrieve(question, qid)
            else:
                context = self.semantic_retrieve(question, qid)
        elif strategy is Strategy.ROUTER_TKG_FALLBACK:
            verdict = llm.route(question, self.provider, qid=qid, ledger=self.ledger)
            if verdict == llm.SYMBOLIC:
                context = self.symbolic_retrieve(question, qid)
                if context.empty:
                    context = self.semantic_retrieve(question, qid)
            else:
                context = self.semantic_retrieve(question, qid)
        else:
            context, answer_text = self.agentic_loop(
                question, qid=qid, max_steps=self.config.agent_max_steps
            )

        if answer_text is None:
            answer_text = llm.generate_answer(
                question, context.texts(), self.provider, qid=qid, ledger=self.ledger
            )

        symbolic_answer = None
        if want_symbolic:
            symbolic_answer = llm.extract_symbolic_answer(
                answer_text, self.provider, qid=qid, ledger=self.ledger
            )

        trace = self.ledger.events_since(start, qid)
        usage = {PHASE_QUERYING: _sum_usage(trace)}
        return AnswerRecord(
            qid=qid,
            question=question,
            strategy=strategy,
            context=context,
            answer=answer_text,
            symbolic_answer=symbolic_answer,
            trace=trace,
            usage=usage,
        )

    # -- agentic loop -------------------------------------------------------------

    def agentic_loop(
        self, question: str, qid: str = "q", max_steps: int = 6
    ) -> tuple[RetrievalContext, str]:
        """Bounded action loop: retrieve / answer / revise / stop with
        self-reflection after ANSWER. Returns accumulated context and the
        best answer so far (or a no-answer notice)."""
        context = RetrievalContext()
        answer: Optional[str] = None
        for step in range(1, max_steps + 1):
            prompt = self._agent_prompt(question, context, answer, qid, step)
            try:
                text = llm.chat_logged(
                    self.provider,
                    prompt,
                    ledger=self.ledger,
                    phase=PHASE_QUERYING,
                    kind="agent",
                    qid=f"{qid}#s{step}",
                )
            except ProviderError as exc:
                self.ledger.record(PHASE_QUERYING, "provider_error", qid, None, str(exc))
                break
            action = _ACTION_RE.match(text.strip())
            if not action:
                self.ledger.record(PHASE_QUERYING, "agent_unparseable", qid, None, text[:120])
                continue
            verb = action.group(1).upper()
            payload = action.group(2).strip()
            if verb == "STOP":
                break
            if verb == "RETRIEVE_SYMBOLIC":
                context.extend(self.symbolic_retrieve(payload or question, qid))
            elif verb == "RETRIEVE_SEMANTIC":
                context.extend(self.semantic_retrieve(payload or question, qid))
            elif verb == "REVISE":
                answer = payload
            elif verb == "ANSWER":
                answer = payload
                if self._reflect(question, answer, qid, step):
                    return context, answer
        if answer is None:
            answer = llm.NO_EVIDENCE_NOTICE + " No answer was produced within the step budget."
        return context, answer

    def _agent_prompt(
        self,
        question: str,
        context: RetrievalContext,
        answer: Optional[str],
        qid: str,
        step: int,
    ) -> str:
        parts = [
            make_tag("agent", f"{qid}#s{step}"),
            f"You are answering: {question}",
            f"Step {step}. Evidence blocks so far: {len(context.blocks)}.",
        ]
        for i, block in enumerate(context.blocks, 1):
            parts.append(f"[{i}|{block.source}] {block.text[:400]}")
        if answer is not None:
            parts.append(f"Current draft answer: {answer}")
        parts += [
            "Choose exactly one action and reply with that line only:",
            "RETRIEVE_SYMBOLIC: <structured question>",
            "RETRIEVE_SEMANTIC: <descriptive question>",
            "ANSWER: <final answer>",
            "REVISE: <improved answer>",
            "STOP",
        ]
        return "\n".join(parts)

    def _reflect(self, question: str, answer: str, qid: str, step: int) -> bool:
        prompt = "\n".join(
            [
                make_tag("reflect", f"{qid}#s{step}"),
                f"Question: {question}",
                f"Proposed answer: {answer}",
                "Is this answer complete and grounded? Reply ACCEPT, REVISE or CONTINUE.",
            ]
        )
        try:
            text = llm.chat_logged(
                self.provider,
                prompt,
                ledger=self.ledger,
                phase=PHASE_QUERYING,
                kind="reflect",
                qid=f"{qid}#s{step}",
            )
        except ProviderError:
            return True  # accept rather than loop on a failing provider
        return bool(re.search(r"\bACCEPT\b", text, re.IGNORECASE))


def _sum_usage(events: list[LedgerEvent]) -> TokenUsage:
    total = TokenUsage()
    for event in events:
        if event.usage is not None:
            total = total + event.usage
    return total


def serialize_trace(record: AnswerRecord) -> str:
    """Line-delimited trace: timestamp, event kind, payload digest."""
    return "\n".join(e.to_line() for e in record.trace) + ("\n" if record.trace else "")
