"""Shared fixtures: the synthetic corpus, built graphs and a scripted
end-to-end engine whose expected answers are derived by brute-force triple
scans rather than by the engine under test. A terminal-summary hook prints
one verdict line per acceptance criterion."""

from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

import oracles
from specgraph.cli import build_artifacts, load_engine
from specgraph.corpus import chunk_text, load_corpus
from specgraph.datalog import apply_rules, default_rules
from specgraph.fixture import gen_fixture_corpus
from specgraph.llm import MockProvider, UsageLedger, wrap_fenced_query
from specgraph.skg import build_skg

FIXTURE_PRODUCTS = 10
FIXTURE_SEED = 7


@pytest.fixture(scope="session")
def corpus_dir(tmp_path_factory) -> Path:
    root = tmp_path_factory.mktemp("corpus")
    gen_fixture_corpus(FIXTURE_PRODUCTS, FIXTURE_SEED, root)
    return root


@pytest.fixture(scope="session")
def corpus(corpus_dir):
    return load_corpus(corpus_dir)


@pytest.fixture(scope="session")
def base_graph(corpus):
    return build_skg(corpus)


@pytest.fixture(scope="session")
def enriched_graph(base_graph):
    return apply_rules(base_graph, default_rules())


def _gold_sets(enriched_graph):
    """Brute-force the three list answers straight off the triple list."""
    triples = list(enriched_graph.triples())
    s_pen = oracles.scan_products_with_spec_value(triples, "s_pen_support", "yes")
    battery_5g = oracles.scan_products_numeric(
        triples, "battery_capacity", lambda v: v > 4500
    ) & oracles.scan_products_with_feature(triples, "5g_support")
    cheap_smartphones = oracles.scan_products_priced(
        triples, lambda v: v < 700
    ) & oracles.scan_members_of_category(triples, "smartphones")
    names = oracles.display_names(triples, s_pen | battery_5g | cheap_smartphones)
    return {
        "q1": sorted(names[n] for n in s_pen),
        "q2": sorted(names[n] for n in battery_5g),
        "q3": sorted(names[n] for n in cheap_smartphones),
    }


E2E_QUERIES = {
    "q1": (
        "SELECT ?name WHERE { ?p skg:hasSpec ?s . ?s skg:inEntry skg:s_pen_support . "
        "?s skg:hasValue skg:yes . ?p skg:hasName ?name } ORDER BY ?name"
    ),
    "q2": (
        "SELECT ?name WHERE { ?p skg:hasFeature skg:5g_support . ?p skg:hasSpec ?s . "
        "?s skg:inEntry skg:battery_capacity . ?s skg:hasNumericValue ?n . "
        "?p skg:hasName ?name . FILTER(?n > 4500) } ORDER BY ?name"
    ),
    "q3": (
        "SELECT ?name WHERE { ?p skg:belongs skg:smartphones . ?p skg:hasPrice ?price . "
        "?p skg:hasName ?name . FILTER(?price < 700) } ORDER BY ?name"
    ),
    "q5": (
        "SELECT ?name WHERE { ?r rdf:type skgt:ProductRange . ?r skg:belongs skg:smartphones . "
        "?r skg:hasName ?name } ORDER BY ?name"
    ),
}


def build_e2e_script(corpus, gold) -> dict:
    """Mock script for the whole pipeline: per-chunk entity extraction plus
    per-question query, answer and extraction responses."""
    script: dict = {}
    for doc in corpus:
        name = doc.structured[0].product_name if doc.structured else doc.id
        for chunk in chunk_text(doc):
            head = " ".join(chunk.text.split()[:14])
            script[f"entities:{chunk.id}"] = f"{name} :: {head}"
    for qid, query in E2E_QUERIES.items():
        script[f"sparql:{qid}"] = wrap_fenced_query(query)
    script["sparql:q4"] = "I cannot express this as a structured query."
    for qid in ("q1", "q2", "q3"):
        listing = "; ".join(gold[qid])
        script[f"answer:{qid}"] = f"The matching products are: {listing}."
        script[f"extract:{qid}"] = "\n".join(gold[qid])
    script["answer:q4"] = "The compact base model is the easiest to use one-handed."
    script["answer:q5"] = (
        "The flagship range targets performance while the budget range trades "
        "display refresh for price."
    )
    for qid in ("q4", "q5"):
        script[f"claims_answer:{qid}"] = "claim a1\nclaim a2"
        script[f"claims_gold:{qid}"] = "claim g1\nclaim g2"
        script[f"verdict_answer:{qid}"] = "YES\nYES"
    script["verdict_gold:q4"] = "YES\nYES"
    script["verdict_gold:q5"] = "YES\nNO"
    return script


BENCHMARK_QUESTIONS = {
    "q1": ("Which products support S Pen?", "Inverse", True),
    "q2": (
        "Which products have 5G support and a battery larger than 4500 mAh?",
        "MultiCondition",
        True,
    ),
    "q3": ("Which smartphones cost less than 700 GBP?", "Inverse", True),
    "q4": (
        "Which product feels best for everyday one-handed use?",
        "Reasoning",
        False,
    ),
    "q5": ("How do the smartphone ranges differ?", "GroupComparison", True),
}


def build_benchmark_items(gold) -> list[dict]:
    items = []
    for qid, (question, category, objective) in BENCHMARK_QUESTIONS.items():
        item = {
            "id": qid,
            "question": question,
            "category": category,
            "objective": objective,
        }
        if qid in gold:
            item["answer_list"] = gold[qid]
        else:
            item["answer_text"] = f"A grounded reference answer for {qid}."
        items.append(item)
    return items


@pytest.fixture(scope="session")
def e2e_data(corpus, enriched_graph):
    """Gold sets (brute-forced), the mock script and the benchmark items."""
    gold = _gold_sets(enriched_graph)
    assert gold["q1"] and gold["q2"] and gold["q3"], "fixture lost its gold coverage"
    script = build_e2e_script(corpus, gold)
    return {"gold": gold, "script": script, "items": build_benchmark_items(gold)}


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    verdicts = {}
    for status, flag in (("passed", "PASS"), ("failed", "FAIL"), ("error", "FAIL")):
        for report in terminalreporter.stats.get(status, []):
            nodeid = getattr(report, "nodeid", "")
            if "test_acceptance.py::test_criterion_" in nodeid:
                name = nodeid.split("::test_criterion_")[1]
                number = int(name.split("_")[0])
                label = name.split("_", 1)[1] if "_" in name else name
                verdicts[number] = (flag, label)
    if not verdicts:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for number in sorted(verdicts):
        flag, label = verdicts[number]
        terminalreporter.write_line(f"criterion {number} ({label}): {flag}")


@pytest.fixture()
def e2e(tmp_path, corpus_dir, e2e_data):
    """A freshly built engine with its own ledger and scripted provider.

    The build runs in well under a second, so every test gets clean usage
    accounting from indexing through querying.
    """
    provider = MockProvider(e2e_data["script"])
    ledger = UsageLedger()
    artifacts = tmp_path / "artifacts"
    build_artifacts(corpus_dir, artifacts, provider, ledger=ledger)
    engine = load_engine(artifacts, provider, ledger=ledger)
    return {
        "engine": engine,
        "ledger": ledger,
        "provider": provider,
        "artifacts": artifacts,
        **e2e_data,
    }
