"""Benchmark loading, answer scoring and report assembly.

Scores: set-based list matching against gold product lists, claim-level
factual correctness against gold text (both directions, via the provider),
pairwise judging in both position orders, and per-phase token usage.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional

from specgraph.llm import (
    PHASE_QUERYING,
    Provider,
    ProviderError,
    TokenUsage,
    UsageLedger,
    chat_logged,
    make_tag,
    usage_report,
)
from specgraph.normalize import canonical_id
from specgraph.orchestrator import AnswerRecord, Engine, Strategy

logger = logging.getLogger(__name__)

CATEGORIES = ("Inverse", "MultiCondition", "GroupComparison", "Reasoning")


class BenchmarkError(Exception):
    pass


@dataclass
class QAItem:
    id: str
    question: str
    answer_text: Optional[str] = None
    answer_list: Optional[list[str]] = None
    objective: bool = True
    category: str = "Inverse"

    def __post_init__(self):
        if self.answer_text is None and self.answer_list is None:
            raise BenchmarkError(f"item {self.id}: needs answer_text or answer_list")
        if self.category not in CATEGORIES:
            raise BenchmarkError(f"item {self.id}: unknown category {self.category!r}")
        if self.answer_list is not None:
            self.answer_list = [canonical_id(n) for n in self.answer_list]


def load_benchmark(path: str | Path) -> list[QAItem]:
    raw = json.loads(Path(path).read_text("utf-8"))
    if not isinstance(raw, list) or not raw:
        raise BenchmarkError(f"benchmark file {path} must be a nonempty JSON list")
    items = []
    for record in raw:
        items.append(
            QAItem(
                id=str(record["id"]),
                question=record["question"],
                answer_text=record.get("answer_text"),
                answer_list=record.get("answer_list"),
                objective=bool(record.get("objective", True)),
                category=record.get("category", "Inverse"),
            )
        )
    return items


# -- list match ------------------------------------------------------------------


def list_match(predicted: Iterable[str], gold: Iterable[str]) -> tuple[float, float, float]:
    """Set precision/recall/F1 over canonical names."""
    pred = set(predicted)
    gold = set(gold)
    hits = len(pred & gold)
    precision = hits / len(pred) if pred else 0.0
    recall = hits / len(gold) if gold else 0.0
    f1 = _harmonic(precision, recall)
    return precision, recall, f1


def _harmonic(p: float, r: float) -> float:
    return 2 * p * r / (p + r) if (p + r) > 0 else 0.0


def collapse_to_ranges(predicted: Iterable[str], gold: Iterable[str], graph) -> set[str]:
    """Map predicted variant ids onto their range id when the gold list names
    the range (variantOf lookup); leaves everything else untouched."""
    gold = set(gold)
    out = set()
    for name in predicted:
        if name in gold or graph is None:
            out.add(name)
            continue
        ranges = [r for r in graph.objects(name, "variantOf") if isinstance(r, str)]
        hit = next((r for r in ranges if r in gold), None)
        out.add(hit if hit is not None else name)
    return out


# -- factual correctness -----------------------------------------------------------


def _decompose(text: str, provider: Provider, qid: str, role: str, ledger) -> Optional[list[str]]:
    prompt = "\n".join(
        [
            make_tag(f"claims_{role}", qid),
            "Decompose the text below into short atomic factual claims,",
            "one claim per line, nothing else.",
            "",
            "Text:",
            text,
        ]
    )
    try:
        response = chat_logged(
            provider, prompt, ledger=ledger, phase=PHASE_QUERYING, kind=f"claims_{role}", qid=qid
        )
    except ProviderError:
        return None
    claims = [line.strip().strip("-* ") for line in response.splitlines()]
    claims = [c for c in claims if c]
    return claims or None


def _verdicts(
    claims: list[str], reference: str, provider: Provider, qid: str, role: str, ledger
) -> Optional[list[bool]]:
    numbered = "\n".join(f"{i}. {c}" for i, c in enumerate(claims, 1))
    prompt = "\n".join(
        [
            make_tag(f"verdict_{role}", qid),
            "For each numbered claim, reply YES if the reference text supports it",
            "and NO otherwise. One YES or NO per line, in order, nothing else.",
            "",
            "Reference:",
            reference,
            "",
            "Claims:",
            numbered,
        ]
    )
    try:
        response = chat_logged(
            provider, prompt, ledger=ledger, phase=PHASE_QUERYING, kind=f"verdict_{role}", qid=qid
        )
    except ProviderError:
        return None
    verdicts = []
    for line in response.splitlines():
        token = line.strip().upper().strip(".")
        token = re.sub(r"^\d+[.)]?\s*", "", token)
        if token.startswith("YES"):
            verdicts.append(True)
        elif token.startswith("NO"):
            verdicts.append(False)
    if len(verdicts) < len(claims):
        return None
    return verdicts[: len(claims)]


def factual_correctness(
    answer: str,
    gold_text: str,
    provider: Provider,
    qid: str = "q",
    ledger: Optional[UsageLedger] = None,
) -> Optional[tuple[float, float, float]]:
    """Claim-level support in both directions; None = skip (unparseable)."""
    if not answer.strip():
        return (0.0, 0.0, 0.0)
    answer_claims = _decompose(answer, provider, qid, "answer", ledger)
    gold_claims = _decompose(gold_text, provider, qid, "gold", ledger)
    if answer_claims is None or gold_claims is None:
        logger.warning("claim decomposition unparseable on %s; skipping item", qid)
        return None
    answer_verdicts = _verdicts(answer_claims, gold_text, provider, qid, "answer", ledger)
    gold_verdicts = _verdicts(gold_claims, answer, provider, qid, "gold", ledger)
    if answer_verdicts is None or gold_verdicts is None:
        logger.warning("claim verdicts unparseable on %s; skipping item", qid)
        return None
    precision = sum(answer_verdicts) / len(answer_claims)
    recall = sum(gold_verdicts) / len(gold_claims)
    return precision, recall, _harmonic(precision, recall)


# -- pairwise judge -----------------------------------------------------------------


@dataclass
class JudgeResult:
    wins_a: int = 0
    wins_b: int = 0
    decided: int = 0

    def win_rate_a(self) -> float:
        return self.wins_a / self.decided if self.decided else 0.0

    def win_rate_b(self) -> float:
        return self.wins_b / self.decided if self.decided else 0.0


def _judge_prompt(question: str, first: str, second: str, qid: str) -> str:
    return "\n".join(
        [
            make_tag("judge", qid),
            "Pick the better answer to the question. Judge grounding,",
            "completeness and precision; ignore verbosity.",
            "",
            f"Question: {question}",
            "",
            "Answer A:",
            first,
            "",
            "Answer B:",
            second,
            "",
            "Reply with exactly one letter: A or B.",
        ]
    )


_VERDICT_RE = re.compile(r"\b([AB])\b")


def pairwise_judge(
    answer_a: str,
    answer_b: str,
    question: str,
    provider: Provider,
    qid: str = "q",
    ledger: Optional[UsageLedger] = None,
) -> JudgeResult:
    """Two judge calls with swapped positions; unparseable = no contest."""
    result = JudgeResult()
    for order, (first, second) in enumerate(((answer_a, answer_b), (answer_b, answer_a))):
        tag_qid = f"{qid}#{'ab' if order == 0 else 'ba'}"
        try:
            text = chat_logged(
                provider,
                _judge_prompt(question, first, second, tag_qid),
                ledger=ledger,
                phase=PHASE_QUERYING,
                kind="judge",
                qid=tag_qid,
            )
        except ProviderError:
            continue
        m = _VERDICT_RE.search(text)
        if not m:
            continue
        picked_first = m.group(1) == "A"
        result.decided += 1
        if (order == 0) == picked_first:
            result.wins_a += 1
        else:
            result.wins_b += 1
    return result


# -- benchmark runner ----------------------------------------------------------------


@dataclass
class StrategyReport:
    strategy: str
    items: dict[str, dict] = field(default_factory=dict)
    lm: Optional[tuple[float, float, float]] = None
    obj_lm_f1: Optional[float] = None
    fc: Optional[tuple[float, float, float]] = None
    laaj: Optional[float] = None
    by_category: dict[str, float] = field(default_factory=dict)
    by_objectivity: dict[str, float] = field(default_factory=dict)
    usage: dict[str, dict] = field(default_factory=dict)


@dataclass
class MetricReport:
    strategies: dict[str, StrategyReport] = field(default_factory=dict)
    usage_totals: dict[str, dict] = field(default_factory=dict)

    def to_json(self) -> str:
        def triple(t):
            if t is None:
                return None
            return {"precision": t[0], "recall": t[1], "f1": t[2]}

        payload = {
            "usage_totals": self.usage_totals,
            "strategies": {
                name: {
                    "list_match": triple(rep.lm),
                    "objective_lm_f1": rep.obj_lm_f1,
                    "factual_correctness": triple(rep.fc),
                    "laaj_win_rate": rep.laaj,
                    "by_category": rep.by_category,
                    "by_objectivity": rep.by_objectivity,
                    "usage": rep.usage,
                    "items": rep.items,
                }
                for name, rep in self.strategies.items()
            },
        }
        return json.dumps(payload, indent=2, ensure_ascii=False)

    def to_markdown(self) -> str:
        lines = [
            "| Strategy | FC (F1) | LM (F1) | LaaJ | Obj. LM (F1) | Query tokens |",
            "| --- | --- | --- | --- | --- | --- |",
        ]
        for name, rep in self.strategies.items():
            fc = f"{rep.fc[2]:.3f}" if rep.fc else "-"
            lm = f"{rep.lm[2]:.3f}" if rep.lm else "-"
            laaj = f"{rep.laaj:.3f}" if rep.laaj is not None else "-"
            obj = f"{rep.obj_lm_f1:.3f}" if rep.obj_lm_f1 is not None else "-"
            tokens = rep.usage.get("querying", {}).get("total", 0)
            lines.append(f"| {name} | {fc} | {lm} | {laaj} | {obj} | {tokens} |")
        indexing = self.usage_totals.get("indexing", {}).get("total", 0)
        lines.append("")
        lines.append(f"Indexing tokens (shared across strategies): {indexing}")
        return "\n".join(lines)


def _mean(values: list[float]) -> Optional[float]:
    return sum(values) / len(values) if values else None


def run_benchmark(
    items: list[QAItem] | str | Path,
    engine: Engine,
    strategies: list[Strategy | str],
    repeats: int = 1,
    include_fc: bool = True,
    include_judge: bool = False,
    match_range_level: bool = False,
) -> MetricReport:
    """Answer every item under every strategy and aggregate the metrics.

    Per-item failures are recorded and skipped; list-match aggregates cover
    only items with a gold list, factual correctness only items with gold
    text, and objective aggregates only objective items.
    """
    if isinstance(items, (str, Path)):
        items = load_benchmark(items)
    if not items:
        raise BenchmarkError("no benchmark items")
    strategies = [Strategy(s) for s in strategies]
    report = MetricReport()
    records: dict[tuple[str, str], AnswerRecord] = {}

    for strategy in strategies:
        srep = StrategyReport(strategy=strategy.value)
        query_usage = TokenUsage()
        for item in items:
            entry: dict = {"repeats": repeats, "lm": [], "fc": []}
            for rep in range(repeats):
                try:
                    record = engine.answer(
                        item.question,
                        strategy,
                        qid=item.id,
                        want_symbolic=item.answer_list is not None,
                    )
                except Exception as exc:  # noqa: BLE001 - keep the run going
                    logger.warning("item %s failed under %s: %s", item.id, strategy.value, exc)
                    entry.setdefault("errors", []).append(str(exc))
                    continue
                if rep == 0:
                    records[(strategy.value, item.id)] = record
                query_usage = query_usage + record.usage[PHASE_QUERYING]
                if item.answer_list is not None:
                    predicted = record.symbolic_answer or []
                    if match_range_level:
                        predicted = collapse_to_ranges(predicted, item.answer_list, engine.graph)
                    entry["lm"].append(list_match(predicted, item.answer_list))
                if include_fc and item.answer_text:
                    fc = factual_correctness(
                        record.answer,
                        item.answer_text,
                        engine.provider,
                        qid=item.id,
                        ledger=engine.ledger,
                    )
                    if fc is not None:
                        entry["fc"].append(fc)
            srep.items[item.id] = entry

        lm_f1s = {
            item.id: _mean([t[2] for t in srep.items[item.id]["lm"]])
            for item in items
            if srep.items[item.id]["lm"]
        }
        lm_ps = [
            _mean([t[0] for t in srep.items[i.id]["lm"]]) for i in items if srep.items[i.id]["lm"]
        ]
        lm_rs = [
            _mean([t[1] for t in srep.items[i.id]["lm"]]) for i in items if srep.items[i.id]["lm"]
        ]
        if lm_f1s:
            srep.lm = (_mean(lm_ps), _mean(lm_rs), _mean(list(lm_f1s.values())))
            obj = [lm_f1s[i.id] for i in items if i.id in lm_f1s and i.objective]
            srep.obj_lm_f1 = _mean(obj)
            for category in CATEGORIES:
                values = [lm_f1s[i.id] for i in items if i.id in lm_f1s and i.category == category]
                if values:
                    srep.by_category[category] = _mean(values)
            for flag, label in ((True, "objective"), (False, "subjective")):
                values = [lm_f1s[i.id] for i in items if i.id in lm_f1s and i.objective is flag]
                if values:
                    srep.by_objectivity[label] = _mean(values)
        fc_triples = [t for item in items for t in srep.items[item.id]["fc"]]
        if fc_triples:
            srep.fc = (
                _mean([t[0] for t in fc_triples]),
                _mean([t[1] for t in fc_triples]),
                _mean([t[2] for t in fc_triples]),
            )
        srep.usage = {
            "querying": {
                "prompt_tokens": query_usage.prompt_tokens,
                "completion_tokens": query_usage.completion_tokens,
                "total": query_usage.total,
            }
        }
        report.strategies[strategy.value] = srep

    if include_judge and len(strategies) >= 2:
        _run_judging(items, strategies, records, engine, report)

    totals = usage_report(engine.ledger)
    report.usage_totals = {
        phase: {
            "prompt_tokens": u.prompt_tokens,
            "completion_tokens": u.completion_tokens,
            "total": u.total,
        }
        for phase, u in totals.items()
    }
    return report


def _run_judging(items, strategies, records, engine: Engine, report: MetricReport) -> None:
    wins: dict[str, int] = {s.value: 0 for s in strategies}
    decided: dict[str, int] = {s.value: 0 for s in strategies}
    for i, sa in enumerate(strategies):
        for sb in strategies[i + 1 :]:
            for item in items:
                ra = records.get((sa.value, item.id))
                rb = records.get((sb.value, item.id))
                if ra is None or rb is None:
                    continue
                result = pairwise_judge(
                    ra.answer,
                    rb.answer,
                    item.question,
                    engine.provider,
                    qid=f"{item.id}.{sa.value}.{sb.value}",
                    ledger=engine.ledger,
                )
                wins[sa.value] += result.wins_a
                wins[sb.value] += result.wins_b
                decided[sa.value] += result.decided
                decided[sb.value] += result.decided
    for name, rep in report.strategies.items():
        rep.laaj = wins[name] / decided[name] if decided.get(name) else None
