"""Entity extraction, merging, chunk voting and alignment tests."""

from __future__ import annotations

from specgraph.corpus import Chunk
from specgraph.llm import MockProvider, UsageLedger, hash_embed
from specgraph.skg import Literal, Triple
from specgraph.tkg import (
    EntityGraph,
    Entity,
    Mention,
    align,
    build_entity_graph,
    extract_entities,
    merge_entities,
    retrieve_chunks,
)


def _chunk(cid: str, text: str = "some text") -> Chunk:
    return Chunk(id=cid, doc_id=cid.split(":")[0], text=text, token_estimate=len(text.split()))


def test_extract_entities_scripted():
    provider = MockProvider({"entities:c1": "Galaxy S25 :: a phone\nS Pen :: a stylus"})
    mentions = extract_entities(_chunk("c1"), provider)
    assert mentions == [("Galaxy S25", "a phone"), ("S Pen", "a stylus")]


def test_extract_entities_empty_chunk_skips_provider():
    provider = MockProvider({"entities:*": "ShouldNot :: appear"})
    assert extract_entities(_chunk("c1", "   "), provider) == []


def test_extract_entities_none_marker():
    provider = MockProvider({"entities:c1": "NONE"})
    assert extract_entities(_chunk("c1"), provider) == []


def test_extract_entities_malformed_retries_then_empty():
    provider = MockProvider({"entities:c1": ["no separators here", "still wrong"]})
    ledger = UsageLedger()
    assert extract_entities(_chunk("c1"), provider, ledger=ledger) == []
    assert len(ledger.events) == 2  # the retry is recorded


def test_merge_entities_across_chunks():
    mentions = [
        Mention("c1", "Galaxy S25", "first view"),
        Mention("c2", "Galaxy S25", "second view"),
    ]
    [entity] = merge_entities(mentions)
    assert entity.id == "galaxy_s25"
    assert entity.chunk_ids == ("c1", "c2")
    assert entity.description == "first view\nsecond view"


def test_merge_single_mention_identity():
    [entity] = merge_entities([Mention("c1", "Solo", "desc")])
    assert entity.name == "Solo"
    assert entity.description == "desc"
    assert entity.chunk_ids == ("c1",)


def test_merge_case_and_article_variants():
    mentions = [
        Mention("c1", "The Galaxy S25", "a"),
        Mention("c2", "galaxy s25", "b"),
    ]
    [entity] = merge_entities(mentions)
    assert entity.id == "galaxy_s25"
    assert entity.chunk_ids == ("c1", "c2")


def test_merge_idempotent():
    mentions = [
        Mention("c1", "A Phone", "x"),
        Mention("c2", "a phone", "y"),
        Mention("c1", "Charger", "z"),
    ]
    merged = merge_entities(mentions)
    re_expanded = [
        Mention(cid, e.name, e.description) for e in merged for cid in e.chunk_ids
    ]
    again = merge_entities(re_expanded)
    assert {e.id for e in again} == {e.id for e in merged}
    assert {e.chunk_ids for e in again} == {e.chunk_ids for e in merged}


def _voting_graph() -> EntityGraph:
    graph = EntityGraph()
    graph.add_chunks([_chunk("c1", "alpha alpha"), _chunk("c2", "beta beta")])
    graph.entities["e1"] = Entity("e1", "E1", "battery battery battery", ("c1", "c2"))
    graph.entities["e2"] = Entity("e2", "E2", "battery display", ("c2",))
    graph.entities["e3"] = Entity("e3", "E3", "unrelated topic", ("c1",))
    graph.build_index(hash_embed)
    return graph


def test_vote_weights_hand_computed():
    graph = _voting_graph()
    # ranking for this question: e1 (pure battery) first, then e2, then e3
    chunks = retrieve_chunks(graph, "battery", hash_embed, k_entities=2, k_chunks=2)
    # scores: c1 = 1/1 = 1.0, c2 = 1/1 + 1/2 = 1.5
    assert [c.id for c in chunks] == ["c2", "c1"]
    top1 = retrieve_chunks(graph, "battery", hash_embed, k_entities=2, k_chunks=1)
    assert [c.id for c in top1] == ["c2"]


def test_vote_scores_exact():
    graph = _voting_graph()
    ranked = graph.index.search(hash_embed(["battery"])[0], 3)
    scores: dict[str, float] = {}
    for rank, (eid, _) in enumerate(ranked, 1):
        for cid in graph.entities[eid].chunk_ids:
            scores[cid] = scores.get(cid, 0.0) + 1.0 / rank
    chunks = retrieve_chunks(graph, "battery", hash_embed, k_entities=3, k_chunks=10)
    expected = [cid for cid, _ in sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))]
    assert [c.id for c in chunks] == expected


def test_single_entity_single_chunk():
    graph = EntityGraph()
    graph.add_chunks([_chunk("c9", "hello world")])
    graph.entities["only"] = Entity("only", "Only", "hello", ("c9",))
    graph.build_index(hash_embed)
    [chunk] = retrieve_chunks(graph, "hello", hash_embed)
    assert chunk.id == "c9"


def test_k_chunks_larger_than_universe():
    graph = _voting_graph()
    chunks = retrieve_chunks(graph, "battery", hash_embed, k_entities=3, k_chunks=50)
    assert {c.id for c in chunks} == {"c1", "c2"}


def test_linear_weighting_option():
    graph = _voting_graph()
    chunks = retrieve_chunks(
        graph, "battery", hash_embed, k_entities=2, k_chunks=2, weighting="linear"
    )
    # weights: rank1 -> 2, rank2 -> 1; c2 = 2 + 1 = 3, c1 = 2
    assert [c.id for c in chunks] == ["c2", "c1"]


def test_empty_entity_graph_retrieval():
    assert retrieve_chunks(EntityGraph(), "anything", hash_embed) == []


def test_align_matches_and_excludes_spec(base_graph):
    entity_graph = EntityGraph()
    product = base_graph.nodes_of_class("Product")[0]
    spec = base_graph.nodes_of_class("Spec")[0]
    entity_graph.entities[product] = Entity(product, product, "a matching entity", ("c1",))
    entity_graph.entities[spec] = Entity(spec, spec, "matches a spec id", ("c1",))
    entity_graph.entities["no_such_node"] = Entity("no_such_node", "X", "d", ("c1",))
    out = align(entity_graph, base_graph)
    assert "UTKG_Entity" in out.node_classes(product)
    assert Triple(product, "hasDescription", Literal("a matching entity")) in out
    assert "UTKG_Entity" not in out.node_classes(spec)
    assert out.node_classes("no_such_node") == set()
    # never removes triples; input graph untouched
    assert set(base_graph.triples()) <= set(out.triples())
    assert "UTKG_Entity" not in base_graph.node_classes(product)


def test_align_no_matches_is_identity(base_graph):
    entity_graph = EntityGraph()
    entity_graph.entities["zzz_nothing"] = Entity("zzz_nothing", "Z", "d", ("c1",))
    out = align(entity_graph, base_graph)
    assert set(out.triples()) == set(base_graph.triples())


def test_build_entity_graph_and_roundtrip(tmp_path):
    chunks = [_chunk("d:0000", "Orbit Alpha is a phone"), _chunk("d:0001", "Orbit Alpha again")]
    provider = MockProvider(
        {
            "entities:d:0000": "Orbit Alpha :: a compact phone",
            "entities:d:0001": "Orbit Alpha :: praised battery life",
        }
    )
    graph = build_entity_graph(chunks, provider, hash_embed)
    assert set(graph.entities) == {"orbit_alpha"}
    entity = graph.entities["orbit_alpha"]
    assert entity.chunk_ids == ("d:0000", "d:0001")
    assert "compact phone" in entity.description and "battery life" in entity.description

    records = tmp_path / "tkg.jsonl"
    index = tmp_path / "ent.vec"
    graph.save(records, index)
    loaded = EntityGraph.load(records, index)
    assert set(loaded.entities) == set(graph.entities)
    assert set(loaded.chunks) == set(graph.chunks)
    assert loaded.index.keys() == graph.index.keys()
