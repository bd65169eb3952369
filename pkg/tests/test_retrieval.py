from __future__ import annotations

import random
import string

import numpy as np
import pytest

from ranweave.retrieval import (
    CHUNK_OVERLAP,
    CHUNK_SIZE,
    VectorStore,
    chunk_document,
    chunk_spans,
    cosine,
    embed,
    k_schedule,
    reconstruct,
)


def test_chunk_spans_for_1000_chars():
    assert chunk_spans(1000) == [(0, 500), (450, 950), (900, 1000)]


def test_chunk_short_document_single_span():
    assert chunk_spans(300) == [(0, 300)]


def test_chunk_empty_document():
    assert chunk_spans(0) == []
    assert chunk_document("doc", "") == []


def test_chunk_rejects_bad_overlap():
    with pytest.raises(ValueError):
        chunk_spans(100, size=50, overlap=50)
    with pytest.raises(ValueError):
        chunk_spans(100, size=50, overlap=60)


def test_consecutive_chunks_overlap_exactly():
    for length in (500, 501, 949, 950, 951, 1360, 4321):
        spans = chunk_spans(length)
        for (s1, e1), (s2, e2) in zip(spans, spans[1:]):
            assert e1 - s2 == CHUNK_OVERLAP
            assert e1 - s1 <= CHUNK_SIZE


def test_reconstruction_roundtrip_random_documents():
    rng = random.Random(7)
    alphabet = string.ascii_letters + string.digits + " \n"
    for _ in range(50):
        text = "".join(rng.choice(alphabet) for _ in range(rng.randint(1, 3000)))
        chunks = chunk_document("doc", text)
        assert reconstruct(chunks) == text


def test_embed_is_deterministic():
    first = embed("steer traffic away from congested cells")
    second = embed("steer traffic away from congested cells")
    assert np.array_equal(first, second)


def test_embed_empty_is_zero_vector():
    vector = embed("")
    assert not np.any(vector)


def test_embed_is_normalized():
    vector = embed("energy saving during off-peak windows")
    assert abs(float(np.linalg.norm(vector)) - 1.0) <= 1e-9


def test_cosine_self_similarity_is_one():
    vector = embed("slice isolation")
    assert cosine(vector, vector) == pytest.approx(1.0)


def test_cosine_zero_vector_convention():
    assert cosine(embed(""), embed("anything")) == 0.0


def test_cosine_dimension_mismatch():
    with pytest.raises(ValueError):
        cosine(np.zeros(4), np.zeros(5))


def test_cosine_is_symmetric():
    a, b = embed("alpha beta gamma"), embed("gamma delta epsilon")
    assert cosine(a, b) == pytest.approx(cosine(b, a))
    assert -1.0 <= cosine(a, b) <= 1.0


def test_k_schedule_start_interior_and_cap():
    assert k_schedule(1) == 10
    assert k_schedule(3) == 30
    assert k_schedule(5) == 50
    assert k_schedule(20) == 50
    with pytest.raises(ValueError):
        k_schedule(0)


def test_k_schedule_is_nondecreasing():
    values = [k_schedule(i) for i in range(1, 60)]
    assert values == sorted(values)
    assert max(values) == 50


def test_query_returns_whole_store_when_small():
    store = VectorStore()
    store.add_document("a", "alpha bravo charlie delta")
    assert len(store.query("alpha", iteration=1)) == len(store)


def test_query_identical_text_ranks_first():
    store = VectorStore()
    store.add_document("target", "beam weights maximise downlink signal quality")
    store.add_document("noise1", "admission control for surging slices")
    store.add_document("noise2", "sleep schedule for underutilised cells")
    top = store.query("beam weights maximise downlink signal quality", iteration=1)[0]
    assert top.doc_id == "target"


def test_query_tie_break_by_doc_then_offset():
    store = VectorStore()
    store.add_document("b", "identical words here")
    store.add_document("a", "identical words here")
    results = store.query("identical words here", iteration=1)
    assert [c.doc_id for c in results[:2]] == ["a", "b"]


def test_query_stability_under_unrelated_insert():
    store = VectorStore()
    store.add_document("one", "traffic steering for mobility robustness")
    store.add_document("two", "energy saving power control at night")
    before = [(c.doc_id, c.start) for c in store.query("traffic steering", iteration=1)]
    store.add_document("zzz", "0xDEADBEEF 0xCAFEBABE unrelated hexdump")
    after = [(c.doc_id, c.start) for c in store.query("traffic steering", iteration=1)]
    filtered = [item for item in after if item[0] != "zzz"]
    assert filtered == before


def test_query_respects_k_schedule():
    store = VectorStore()
    for index in range(30):
        store.add_document(f"doc{index:02d}", f"document number {index} about networks")
    assert len(store.query("networks", iteration=1)) == 10
    assert len(store.query("networks", iteration=2)) == 20
    assert len(store.query("networks", iteration=5)) == 30


def test_store_loads_bundled_knowledge(bundle):
    store = VectorStore()
    count = store.add_directory(bundle.knowledge_dir)
    assert count >= 4
    results = store.query("conflict classes for policy coordination", iteration=1)
    assert results
