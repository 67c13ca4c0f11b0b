"""Command-line entry point: fixture, build, query, eval, inspect.

Artifacts live under one directory with fixed names so commands compose:

    skg.nt             enriched symbolic graph (line-oriented triples)
    tkg.jsonl          entity and chunk records
    entity_index.vec   entity description vectors
    patterns.jsonl     pattern records with vectors
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from specgraph import datalog, evaluation, sparql
from specgraph.corpus import chunk_text, load_corpus
from specgraph.fixture import gen_fixture_corpus
from specgraph.llm import (
    HttpProvider,
    MockProvider,
    Provider,
    ProviderConfig,
    UsageLedger,
    usage_report,
)
from specgraph.orchestrator import Engine, EngineConfig, Strategy
from specgraph.patterns import PatternIndex, extract_patterns, index_patterns
from specgraph.skg import Graph, build_skg
from specgraph.tkg import EntityGraph, align, build_entity_graph

logger = logging.getLogger(__name__)

GRAPH_FILE = "skg.nt"
TKG_FILE = "tkg.jsonl"
ENTITY_INDEX_FILE = "entity_index.vec"
PATTERNS_FILE = "patterns.jsonl"

ALL_TARGETS = ("skg", "tkg", "patterns")


def make_provider(args) -> Provider:
    if args.provider == "mock":
        if getattr(args, "mock_script", None):
            return MockProvider.from_file(args.mock_script, embed_dim=args.embed_dim)
        # bare mock: extraction finds nothing rather than warning per chunk
        return MockProvider({"entities:*": "NONE"}, embed_dim=args.embed_dim)
    config = (
        ProviderConfig.from_file(args.provider_config)
        if getattr(args, "provider_config", None)
        else ProviderConfig()
    )
    return HttpProvider(config)  # the "real" provider: a chat/embeddings API


def build_artifacts(
    corpus_root: str | Path,
    artifacts_dir: str | Path,
    provider: Provider,
    targets: tuple[str, ...] = ALL_TARGETS,
    rules_path: str | None = None,
    max_tokens: int = 400,
    include_spec_appendix: bool = True,
    max_patterns_per_kind: int | None = None,
    max_workers: int = 4,
    ledger: UsageLedger | None = None,
) -> dict[str, Path]:
    """Run the indexing pipeline and write the requested artifact files."""
    artifacts = Path(artifacts_dir)
    artifacts.mkdir(parents=True, exist_ok=True)
    ledger = ledger or UsageLedger()
    corpus = load_corpus(corpus_root)
    written: dict[str, Path] = {}

    graph = None
    if "skg" in targets or "patterns" in targets:
        graph = build_skg(corpus)
        rules = (
            datalog.parse_rules(Path(rules_path).read_text("utf-8"))
            if rules_path
            else datalog.default_rules()
        )
        graph = datalog.apply_rules(graph, rules)

    entity_graph = None
    if "tkg" in targets:
        chunks = [
            chunk
            for doc in corpus
            for chunk in chunk_text(doc, max_tokens, include_spec_appendix)
        ]
        entity_graph = build_entity_graph(
            chunks, provider, provider.embed, ledger=ledger, max_workers=max_workers
        )
        entity_graph.save(artifacts / TKG_FILE, artifacts / ENTITY_INDEX_FILE)
        written["tkg"] = artifacts / TKG_FILE
        written["entity_index"] = artifacts / ENTITY_INDEX_FILE

    if graph is not None:
        if entity_graph is not None:
            graph = align(entity_graph, graph)
        if "skg" in targets:
            graph.save(artifacts / GRAPH_FILE)
            written["skg"] = artifacts / GRAPH_FILE
        if "patterns" in targets:
            index = index_patterns(
                extract_patterns(graph), provider.embed, max_per_kind=max_patterns_per_kind
            )
            index.save(artifacts / PATTERNS_FILE)
            written["patterns"] = artifacts / PATTERNS_FILE
    return written


def load_engine(
    artifacts_dir: str | Path,
    provider: Provider,
    config: EngineConfig | None = None,
    ledger: UsageLedger | None = None,
) -> Engine:
    artifacts = Path(artifacts_dir)
    graph = None
    pattern_index = None
    entity_graph = None
    if (artifacts / GRAPH_FILE).exists():
        graph = Graph.load(artifacts / GRAPH_FILE)
    if (artifacts / PATTERNS_FILE).exists():
        pattern_index = PatternIndex.load(artifacts / PATTERNS_FILE, embedder=provider.embed)
    if (artifacts / TKG_FILE).exists():
        entity_graph = EntityGraph.load(artifacts / TKG_FILE, artifacts / ENTITY_INDEX_FILE)
    return Engine(
        graph=graph,
        pattern_index=pattern_index,
        entity_graph=entity_graph,
        provider=provider,
        ledger=ledger,
        config=config,
    )


# -- commands -------------------------------------------------------------------


def cmd_fixture(args) -> int:
    try:
        corpus = gen_fixture_corpus(args.products, args.seed, args.out)
    except (OSError, ValueError) as exc:
        print(f"fixture generation failed: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {len(corpus)} product pages to {args.out}")
    return 0


def cmd_build(args) -> int:
    provider = make_provider(args)
    targets = tuple(t.strip() for t in args.targets.split(",") if t.strip())
    unknown = set(targets) - set(ALL_TARGETS)
    if unknown:
        print(f"unknown build targets: {sorted(unknown)}", file=sys.stderr)
        return 2
    ledger = UsageLedger()
    try:
        written = build_artifacts(
            args.corpus,
            args.artifacts,
            provider,
            targets=targets,
            rules_path=args.rules,
            max_tokens=args.max_tokens,
            include_spec_appendix=not args.exclude_spec_appendix,
            max_patterns_per_kind=args.max_patterns_per_kind,
            max_workers=args.max_workers,
            ledger=ledger,
        )
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"build failed: {exc}", file=sys.stderr)
        return 1
    for name, path in sorted(written.items()):
        print(f"{name}: {path}")
    totals = usage_report(ledger)["indexing"]
    print(f"indexing tokens: prompt={totals.prompt_tokens} completion={totals.completion_tokens}")
    return 0


def cmd_query(args) -> int:
    provider = make_provider(args)
    config = EngineConfig(k_chunks=args.k_chunks, k_entities=args.k_entities)
    engine = load_engine(args.artifacts, provider, config=config)
    try:
        record = engine.answer(
            args.question, args.strategy, qid=args.qid, want_symbolic=args.symbolic
        )
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"query failed: {exc}", file=sys.stderr)
        return 1
    if args.json:
        print(json.dumps(record.to_dict(), indent=2, ensure_ascii=False))
        return 0
    print(record.answer)
    if record.symbolic_answer is not None:
        print("\nsymbolic answer:")
        for name in record.symbolic_answer:
            print(f"  - {name}")
    usage = record.usage["querying"]
    print(
        f"\nquerying tokens: prompt={usage.prompt_tokens} "
        f"completion={usage.completion_tokens} total={usage.total}"
    )
    return 0


def cmd_eval(args) -> int:
    provider = make_provider(args)
    engine = load_engine(args.artifacts, provider)
    strategies = [s.strip() for s in args.strategies.split(",") if s.strip()]
    try:
        strategies = [Strategy(s) for s in strategies]
    except ValueError:
        valid = ", ".join(s.value for s in Strategy)
        print(f"unknown strategy; valid names: {valid}", file=sys.stderr)
        return 2
    try:
        report = evaluation.run_benchmark(
            args.dataset,
            engine,
            strategies,
            repeats=args.repeats,
            include_fc=not args.no_fc,
            include_judge=args.judge,
            match_range_level=args.match_range_level,
        )
    except evaluation.BenchmarkError as exc:
        print(f"eval failed: {exc}", file=sys.stderr)
        return 1
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(report.to_json(), "utf-8")
    (out / "report.md").write_text(report.to_markdown() + "\n", "utf-8")
    print(report.to_markdown())
    print(f"\nreports written to {out}")
    return 0


def cmd_inspect(args) -> int:
    artifacts = Path(args.artifacts)
    graph_path = artifacts / GRAPH_FILE
    if args.what in ("stats", "sparql", "rules") and not graph_path.exists():
        print(f"no graph at {graph_path}; run build first", file=sys.stderr)
        return 1
    if args.what == "stats":
        graph = Graph.load(graph_path)
        stats = graph.stats()
        print(f"triples: {len(graph)}")
        print("classes:")
        for cls, n in stats["classes"].items():
            print(f"  {cls}: {n}")
        print("predicates:")
        for pred, n in stats["predicates"].items():
            print(f"  {pred}: {n}")
        return 0
    if args.what == "sparql":
        graph = Graph.load(graph_path)
        text = Path(args.query).read_text("utf-8") if Path(args.query).is_file() else args.query
        outcome = sparql.run_candidate(graph, text)
        if outcome.status == "failed":
            print(f"query failed: {outcome.error}", file=sys.stderr)
            return 1
        print(sparql.format_markdown(outcome, graph))
        return 0
    if args.what == "rules":
        graph = Graph.load(graph_path)
        rules = (
            datalog.parse_rules(Path(args.rules).read_text("utf-8"))
            if args.rules
            else datalog.default_rules()
        )
        enriched = datalog.apply_rules(graph, rules)
        print(f"rules: {len(rules)}")
        print(f"base triples: {len(graph)}")
        print(f"derived triples: {len(enriched) - len(graph)}")
        return 0
    if args.what == "patterns":
        path = artifacts / PATTERNS_FILE
        if not path.exists():
            print(f"no pattern file at {path}; run build first", file=sys.stderr)
            return 1
        index = PatternIndex.load(path)
        counts: dict[str, int] = {}
        for pattern in index.patterns.values():
            counts[pattern.kind] = counts.get(pattern.kind, 0) + 1
        for kind in sorted(counts):
            print(f"{kind}: {counts[kind]}")
        print(f"total: {len(index)}")
        return 0
    print(f"unknown inspect subcommand {args.what!r}", file=sys.stderr)
    return 2


def _add_provider_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--provider", choices=("mock", "real"), default="mock")
    parser.add_argument("--mock-script", help="JSON script file for the mock provider")
    parser.add_argument("--provider-config", help="JSON provider configuration file")
    parser.add_argument("--embed-dim", type=int, default=64)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="specgraph",
        description="Hybrid semantic/symbolic QA over product-spec corpora",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fixture", help="generate a synthetic snapshot corpus")
    p.add_argument("--products", type=int, default=10)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fixture)

    p = sub.add_parser("build", help="build graph, entity and pattern artifacts")
    p.add_argument("--corpus", required=True)
    p.add_argument("--artifacts", required=True)
    p.add_argument("--targets", default=",".join(ALL_TARGETS))
    p.add_argument("--rules", help="rule file overriding the default set")
    p.add_argument("--units", help="unit alias table overriding the default")
    p.add_argument("--max-tokens", type=int, default=400)
    p.add_argument("--exclude-spec-appendix", action="store_true")
    p.add_argument(
        "--max-patterns-per-kind",
        type=int,
        default=None,
        help="cap the pattern index size per kind on large graphs",
    )
    p.add_argument(
        "--max-workers",
        type=int,
        default=4,
        help="in-flight cap for per-chunk extraction calls",
    )
    _add_provider_args(p)
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("query", help="answer one question")
    p.add_argument("--artifacts", required=True)
    p.add_argument("--question", required=True)
    p.add_argument("--strategy", choices=[s.value for s in Strategy], default="skg_tkg_fallback")
    p.add_argument("--qid", default="q")
    p.add_argument("--symbolic", action="store_true", help="also extract a product list")
    p.add_argument("--json", action="store_true")
    p.add_argument("--k-chunks", type=int, default=5)
    p.add_argument("--k-entities", type=int, default=20)
    _add_provider_args(p)
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("eval", help="run the benchmark and write reports")
    p.add_argument("--artifacts", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--strategies", default="skg_tkg_fallback")
    p.add_argument("--repeats", type=int, default=1)
    p.add_argument("--out", required=True)
    p.add_argument("--judge", action="store_true")
    p.add_argument("--no-fc", action="store_true")
    p.add_argument(
        "--match-range-level",
        action="store_true",
        help="collapse predicted variants onto their range when the gold list names ranges",
    )
    _add_provider_args(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("inspect", help="diagnostics over built artifacts")
    p.add_argument("what", choices=("stats", "sparql", "rules", "patterns"))
    p.add_argument("--artifacts", required=True)
    p.add_argument("--query", help="query text or file (inspect sparql)")
    p.add_argument("--rules", help="rule file (inspect rules)")
    p.set_defaults(func=cmd_inspect)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    if getattr(args, "units", None):
        from specgraph import normalize

        normalize.set_default_unit_aliases(normalize.load_unit_aliases(args.units))
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
