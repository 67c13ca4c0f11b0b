"""Provider abstraction, prompt assembly and usage accounting.

Two provider implementations share one contract: an HTTP client speaking a
standard chat/embeddings API, and a deterministic scripted mock keyed by a
machine-readable tag line embedded in every assembled prompt. The whole
test suite runs on the mock, offline.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import re
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Protocol

logger = logging.getLogger(__name__)

SYMBOLIC = "symbolic"
SEMANTIC = "semantic"

PHASE_INDEXING = "indexing"
PHASE_QUERYING = "querying"

# (temperature, seed) triples used for candidate sampling.
DEFAULT_SAMPLING = ((0.2, 11), (0.7, 13), (1.0, 17))

DEFAULT_EMBED_DIM = 64


@dataclass(frozen=True)
class TokenUsage:
    prompt_tokens: int = 0
    completion_tokens: int = 0

    def __post_init__(self):
        if self.prompt_tokens < 0 or self.completion_tokens < 0:
            raise ValueError("token counts must be nonnegative")

    @property
    def total(self) -> int:
        return self.prompt_tokens + self.completion_tokens

    def __add__(self, other: "TokenUsage") -> "TokenUsage":
        return TokenUsage(
            self.prompt_tokens + other.prompt_tokens,
            self.completion_tokens + other.completion_tokens,
        )


@dataclass(frozen=True)
class ChatExchange:
    prompt: str
    temperature: float
    seed: int
    response: str
    usage: TokenUsage


@dataclass
class LedgerEvent:
    ts: float
    phase: str
    kind: str
    qid: str
    usage: Optional[TokenUsage]
    detail: str = ""

    def digest(self) -> str:
        return hashlib.sha1(self.detail.encode("utf-8")).hexdigest()[:12]

    def to_line(self) -> str:
        return f"{self.ts:.6f}\t{self.phase}\t{self.kind}\t{self.qid}\t{self.digest()}"


class UsageLedger:
    """Thread-safe event log; totals are exact regardless of interleaving."""

    def __init__(self):
        self._lock = threading.Lock()
        self.events: list[LedgerEvent] = []

    def record(
        self,
        phase: str,
        kind: str,
        qid: str,
        usage: Optional[TokenUsage],
        detail: str = "",
    ) -> LedgerEvent:
        event = LedgerEvent(time.time(), phase, kind, qid, usage, detail)
        with self._lock:
            self.events.append(event)
        return event

    def totals(self, phase: str) -> TokenUsage:
        total = TokenUsage()
        with self._lock:
            for event in self.events:
                if event.phase == phase and event.usage is not None:
                    total = total + event.usage
        return total

    def events_for(self, qid: str) -> list[LedgerEvent]:
        with self._lock:
            return [e for e in self.events if e.qid == qid]

    def mark(self) -> int:
        with self._lock:
            return len(self.events)

    def events_since(self, mark: int, qid: str) -> list[LedgerEvent]:
        """Events for one question recorded after the mark (base qid match,
        so step-suffixed tags like q1#s2 stay attached to q1)."""
        with self._lock:
            return [
                e for e in self.events[mark:] if e.qid.split("#")[0] == qid
            ]


def usage_report(ledger: UsageLedger) -> dict[str, TokenUsage]:
    """Per-phase totals over every recorded exchange."""
    return {
        PHASE_INDEXING: ledger.totals(PHASE_INDEXING),
        PHASE_QUERYING: ledger.totals(PHASE_QUERYING),
    }


class ProviderError(Exception):
    pass


class Provider(Protocol):
    def chat(self, prompt: str, temperature: float = 0.0, seed: int = 0) -> tuple[str, TokenUsage]:
        ...

    def embed(self, texts: list[str]) -> list[list[float]]:
        ...


# -- prompt tagging -----------------------------------------------------------

_TAG_RE = re.compile(r"\[\[tag:\s*kind=(\S+)\s+qid=(\S+)\s*\]\]")


def make_tag(kind: str, qid: str) -> str:
    return f"[[tag: kind={kind} qid={qid}]]"


def parse_tag(prompt: str) -> tuple[str, str]:
    m = _TAG_RE.search(prompt)
    if not m:
        return "", ""
    return m.group(1), m.group(2)


# -- deterministic hash embeddings ---------------------------------------------


def hash_embed(texts: list[str], dim: int = DEFAULT_EMBED_DIM) -> list[list[float]]:
    """Bag-of-words vectors with sha256 token hashing; stable across runs."""
    out = []
    for text in texts:
        vec = [0.0] * dim
        for token in re.findall(r"[a-z0-9]+", text.lower()):
            idx = int.from_bytes(hashlib.sha256(token.encode()).digest()[:4], "big") % dim
            vec[idx] += 1.0
        out.append(vec)
    return out


# -- providers -----------------------------------------------------------------


class MockProvider:
    """Scripted provider: responses looked up by the prompt's tag line.

    The script maps "kind:qid" to a response string, or to a list of strings
    consumed sequentially (last one repeats). "kind:*" acts as a per-kind
    fallback and "*" as the global one; with string-valued scripts every
    call is a pure function of the prompt.
    """

    def __init__(
        self,
        script: dict[str, object] | None = None,
        embed_dim: int = DEFAULT_EMBED_DIM,
        fallback: str = "",
    ):
        self.script = dict(script or {})
        self.embed_dim = embed_dim
        self.fallback = fallback
        self._cursors: dict[str, int] = {}
        self._lock = threading.Lock()

    @classmethod
    def from_file(cls, path: str | Path, **kwargs) -> "MockProvider":
        return cls(json.loads(Path(path).read_text("utf-8")), **kwargs)

    def _lookup(self, kind: str, qid: str) -> str:
        for key in (f"{kind}:{qid}", f"{kind}:*", "*"):
            if key in self.script:
                value = self.script[key]
                if isinstance(value, list):
                    with self._lock:
                        i = self._cursors.get(key, 0)
                        self._cursors[key] = i + 1
                    return str(value[min(i, len(value) - 1)]) if value else self.fallback
                return str(value)
        return self.fallback

    def chat(self, prompt: str, temperature: float = 0.0, seed: int = 0) -> tuple[str, TokenUsage]:
        kind, qid = parse_tag(prompt)
        response = self._lookup(kind, qid)
        usage = TokenUsage(len(prompt.split()), len(response.split()))
        return response, usage

    def embed(self, texts: list[str]) -> list[list[float]]:
        return hash_embed(texts, self.embed_dim)


@dataclass
class ProviderConfig:
    endpoint: str = "http://localhost:8000/v1"
    chat_model: str = "chat-model"
    embed_model: str = "embed-model"
    api_key_env: str = "SPECGRAPH_API_KEY"
    timeout: float = 60.0
    max_in_flight: int = 4
    sampling: tuple[tuple[float, int], ...] = DEFAULT_SAMPLING

    @classmethod
    def from_file(cls, path: str | Path) -> "ProviderConfig":
        raw = json.loads(Path(path).read_text("utf-8"))
        sampling = tuple(tuple(pair) for pair in raw.pop("sampling", DEFAULT_SAMPLING))
        return cls(sampling=sampling, **raw)


class HttpProvider:
    """Thin client for an OpenAI-style chat/embeddings endpoint."""

    def __init__(self, config: ProviderConfig):
        self.config = config

    def _headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        key = os.environ.get(self.config.api_key_env, "")
        if key:
            headers["Authorization"] = f"Bearer {key}"
        return headers

    def _post(self, path: str, payload: dict) -> dict:
        import requests

        url = self.config.endpoint.rstrip("/") + path
        last_error: Exception | None = None
        for attempt in range(2):  # one retry on transport failure
            try:
                resp = requests.post(
                    url, json=payload, headers=self._headers(), timeout=self.config.timeout
                )
                resp.raise_for_status()
                return resp.json()
            except requests.RequestException as exc:
                last_error = exc
                logger.warning("provider call failed (attempt %d): %s", attempt + 1, exc)
        raise ProviderError(f"provider call to {url} failed: {last_error}")

    def chat(self, prompt: str, temperature: float = 0.0, seed: int = 0) -> tuple[str, TokenUsage]:
        data = self._post(
            "/chat/completions",
            {
                "model": self.config.chat_model,
                "messages": [{"role": "user", "content": prompt}],
                "temperature": temperature,
                "seed": seed,
            },
        )
        try:
            text = data["choices"][0]["message"]["content"]
        except (KeyError, IndexError) as exc:
            raise ProviderError(f"malformed chat response: {exc}") from exc
        usage = data.get("usage", {})
        return text, TokenUsage(
            int(usage.get("prompt_tokens", 0)), int(usage.get("completion_tokens", 0))
        )

    def embed(self, texts: list[str]) -> list[list[float]]:
        if not texts:
            return []
        data = self._post("/embeddings", {"model": self.config.embed_model, "input": texts})
        try:
            return [item["embedding"] for item in data["data"]]
        except (KeyError, TypeError) as exc:
            raise ProviderError(f"malformed embeddings response: {exc}") from exc


def chat_logged(
    provider: Provider,
    prompt: str,
    *,
    ledger: Optional[UsageLedger],
    phase: str,
    kind: str,
    qid: str,
    temperature: float = 0.0,
    seed: int = 0,
) -> str:
    """Single provider call with its ledger/trace record."""
    text, usage = provider.chat(prompt, temperature=temperature, seed=seed)
    exchange = ChatExchange(
        prompt=prompt, temperature=temperature, seed=seed, response=text, usage=usage
    )
    if ledger is not None:
        ledger.record(phase, kind, qid, exchange.usage, detail=exchange.response[:200])
    return exchange.response


# -- prompt assembly ------------------------------------------------------------

_PERSONA = (
    "You are an expert in SPARQL, RDF, OWL and related semantic-web standards, "
    "generating precise queries over a product knowledge graph."
)

_GENERATION_RULES = """Query generation rules:
- Generate exactly one SELECT query; no OPTIONAL, UNION, property paths or subqueries.
- Use only triple patterns, FILTER (comparisons, &&, ||, !, REGEX, IN, str()),
  DISTINCT, GROUP BY with COUNT/MIN/MAX/AVG, ORDER BY and LIMIT.
- Project explicit variables; prefer returning skg:hasName values for readability.
- Node identifiers are lowercase with underscores (skg: prefix); classes use skgt:.
- Apply numeric constraints through skg:hasNumericValue or skg:hasPrice decimals.
- Add LIMIT 100 when the result set could be large."""

_DOMAIN_DESCRIPTION = (
    "The knowledge graph describes an online shop catalog: products and their "
    "variants, product ranges, categories, specification-table rows (section, "
    "entry, values), derived capability features, prices in GBP, and numeric "
    "measurements with normalized units."
)

_OUTPUT_FORMAT = (
    "Return the final query inside a single fenced code block marked sparql, "
    "with no other code blocks in the reply."
)


def build_sparql_prompt(question: str, snippets: list[str], schema: str, qid: str = "q") -> str:
    """Assemble the query-generation prompt: persona, rules, domain, schema,
    output format, then the retrieved snippets and the question."""
    parts = [
        make_tag("sparql", qid),
        f"Persona: {_PERSONA}",
        "",
        _GENERATION_RULES,
        "",
        f"Domain: {_DOMAIN_DESCRIPTION}",
        "",
        "Schema:",
        schema.rstrip(),
        "",
        f"Output format: {_OUTPUT_FORMAT}",
        "",
        "Relevant graph patterns:",
    ]
    if snippets:
        parts.extend(snippets)
    else:
        parts.append("(none retrieved)")
    parts += ["", f"Question: {question}"]
    return "\n".join(parts)


_FENCE_RE = re.compile(r"```(?:sparql)?\s*\n(.*?)```", re.DOTALL | re.IGNORECASE)


def extract_fenced_query(text: str) -> Optional[str]:
    m = _FENCE_RE.search(text)
    if not m:
        return None
    body = m.group(1).strip()
    return body or None


def wrap_fenced_query(query: str) -> str:
    return f"```sparql\n{query}\n```"


def generate_sparql_candidates(
    question: str,
    prompt: str,
    provider: Provider,
    n: int = 3,
    sampling: tuple[tuple[float, int], ...] = DEFAULT_SAMPLING,
    ledger: Optional[UsageLedger] = None,
    qid: str = "q",
) -> list[str]:
    """Sample n completions and keep the extractable fenced queries."""
    candidates = []
    for i in range(n):
        temperature, seed = sampling[i % len(sampling)]
        try:
            text = chat_logged(
                provider,
                prompt,
                ledger=ledger,
                phase=PHASE_QUERYING,
                kind="sparql",
                qid=qid,
                temperature=temperature,
                seed=seed,
            )
        except ProviderError as exc:
            logger.warning("candidate generation failed: %s", exc)
            continue
        query = extract_fenced_query(text)
        if query:
            candidates.append(query)
    return candidates


_ROUTE_FEWSHOT = """Examples:
Question: Which products under 500 GBP have at least a 5000 mAh battery?
Verdict: SYMBOLIC
Question: What makes the foldable range feel premium in everyday use?
Verdict: SEMANTIC
Question: List all tablets with S Pen support.
Verdict: SYMBOLIC
Question: Is the base model a good fit for someone upgrading an older phone?
Verdict: SEMANTIC"""


def build_route_prompt(question: str, qid: str = "q") -> str:
    return "\n".join(
        [
            make_tag("route", qid),
            "Choose the retrieval method for the question below.",
            "SYMBOLIC runs an exact structured query over the product graph:",
            "best for filtering, counting, exhaustive listing and numeric constraints.",
            "SEMANTIC retrieves descriptive text passages by similarity:",
            "best for open-ended, comparative or recommendation questions.",
            "",
            _ROUTE_FEWSHOT,
            "",
            f"Question: {question}",
            "Reply with exactly one word: SYMBOLIC or SEMANTIC.",
        ]
    )


def route(
    question: str,
    provider: Provider,
    qid: str = "q",
    ledger: Optional[UsageLedger] = None,
) -> str:
    """Binary retrieval routing; unparseable verdicts default to semantic."""
    prompt = build_route_prompt(question, qid)
    try:
        text = chat_logged(
            provider, prompt, ledger=ledger, phase=PHASE_QUERYING, kind="route", qid=qid
        )
    except ProviderError:
        return SEMANTIC
    m = re.search(r"\b(SYMBOLIC|SEMANTIC)\b", text, re.IGNORECASE)
    if not m:
        return SEMANTIC
    return SYMBOLIC if m.group(1).upper() == "SYMBOLIC" else SEMANTIC


NO_EVIDENCE_NOTICE = "No evidence was retrieved from the indexes."


def build_answer_prompt(question: str, context_blocks: list[str], qid: str = "q") -> str:
    parts = [
        make_tag("answer", qid),
        "Answer the question using only the evidence below.",
        "",
    ]
    if context_blocks:
        for i, block in enumerate(context_blocks, 1):
            parts += [f"Evidence {i}:", block, ""]
    else:
        parts += [NO_EVIDENCE_NOTICE, ""]
    parts += [
        f"Question: {question}",
        "Give a concise, grounded answer; when the evidence lists products,",
        "name them all explicitly.",
    ]
    return "\n".join(parts)


def generate_answer(
    question: str,
    context_blocks: list[str],
    provider: Provider,
    qid: str = "q",
    ledger: Optional[UsageLedger] = None,
) -> str:
    prompt = build_answer_prompt(question, context_blocks, qid)
    return chat_logged(
        provider, prompt, ledger=ledger, phase=PHASE_QUERYING, kind="answer", qid=qid
    )


def build_extract_prompt(answer: str, qid: str = "q") -> str:
    return "\n".join(
        [
            make_tag("extract", qid),
            "List every product name mentioned in the answer below,",
            "one name per line, nothing else. Reply NONE if there are none.",
            "",
            "Answer:",
            answer,
        ]
    )


def extract_symbolic_answer(
    answer: str,
    provider: Provider,
    qid: str = "q",
    ledger: Optional[UsageLedger] = None,
) -> list[str]:
    """Extract a canonical product-name list from a generated answer."""
    from specgraph.normalize import CanonicalError, canonical_id

    if not answer.strip():
        return []
    prompt = build_extract_prompt(answer, qid)
    try:
        text = chat_logged(
            provider, prompt, ledger=ledger, phase=PHASE_QUERYING, kind="extract", qid=qid
        )
    except ProviderError:
        return []
    names: list[str] = []
    for line in text.splitlines():
        line = line.strip().strip("-* ")
        if not line or line.upper() == "NONE":
            continue
        try:
            cid = canonical_id(line)
        except CanonicalError:
            continue
        if cid not in names:
            names.append(cid)
    return names
