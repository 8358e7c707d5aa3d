import json
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_doc
from kgsum.data import (
    CorpusFormatError,
    MentionSpan,
    document_to_record,
    load_corpus,
    parse_record,
    truncate_document,
    validate_document,
    write_corpus,
)
from kgsum.synthetic import fact_corpus, random_document


def long_record(n_tokens=1500):
    tokens = [f"t{i}" for i in range(n_tokens)]

    def sp(a, b):
        return {"start": a, "end": b}

    return {
        "doc_id": "long",
        "tokens": tokens,
        "paragraphs": [[0, 700], [700, n_tokens]],
        "sentences": [[0, 10], [10, 700], [700, 1010], [1010, n_tokens]],
        "triples": [
            {"subject": sp(0, 2), "predicate": sp(2, 3), "object": sp(3, 5), "sentence": 0},
            {"subject": sp(1020, 1022), "predicate": sp(1022, 1023), "object": sp(1023, 1030), "sentence": 3},
        ],
        "coref_chains": [[sp(0, 2), sp(400, 401), sp(1100, 1101)], [sp(1200, 1201), sp(1300, 1301)]],
        "reference_summary": ["t0 t1 t5"],
        "reference_tokens": ["t0", "t1", "t5"],
    }


def write_lines(path, records):
    path.write_text("".join(json.dumps(r) + "\n" for r in records))


def test_truncation_to_1024_drops_out_of_range_triples(tmp_path):
    path = tmp_path / "c.jsonl"
    write_lines(path, [long_record()])
    (doc,) = load_corpus(path, truncate_len=1024)
    assert len(doc.tokens) == 1024
    assert len(doc.triples) == 1
    assert doc.triples[0].subject.key == (0, 2)
    # chains are clipped, and a chain with no remaining mention disappears
    assert [[m.key for m in c] for c in doc.coref_chains] == [[(0, 2), (400, 401)]]
    assert doc.paragraphs == ((0, 700), (700, 1024))
    assert validate_document(doc) == []


def test_triple_past_512_is_dropped_and_document_kept(tmp_path):
    path = tmp_path / "c.jsonl"
    write_lines(path, [long_record()])
    (doc,) = load_corpus(path, truncate_len=512)
    assert len(doc.tokens) == 512
    assert all(sp.end <= 512 for t in doc.triples for sp in t.spans)
    assert len(doc.triples) == 1


def test_empty_file_gives_empty_corpus(tmp_path):
    path = tmp_path / "empty.jsonl"
    path.write_text("")
    assert load_corpus(path) == []


def test_malformed_line_reports_line_number(tmp_path):
    path = tmp_path / "bad.jsonl"
    good = document_to_record(fact_corpus(1)[0])
    path.write_text(json.dumps(good) + "\n{not json\n")
    with pytest.raises(CorpusFormatError) as err:
        load_corpus(path)
    assert err.value.line_no == 2
    assert "line 2" in str(err.value)
    skipped = []
    docs = load_corpus(path, strict=False, skipped=skipped)
    assert len(docs) == 1 and len(skipped) == 1


def test_missing_field_is_rejected_with_doc_id():
    rec = document_to_record(fact_corpus(1)[0])
    del rec["triples"]
    with pytest.raises(CorpusFormatError) as err:
        parse_record(rec, line_no=7)
    assert err.value.line_no == 7 and err.value.doc_id == rec["doc_id"]


def test_out_of_range_span_skips_document(tmp_path, caplog):
    rec = document_to_record(fact_corpus(1)[0])
    rec["triples"][0]["object"] = {"start": 500, "end": 502}
    path = tmp_path / "c.jsonl"
    write_lines(path, [rec, document_to_record(fact_corpus(2, seed=9)[1])])
    skipped = []
    docs = load_corpus(path, skipped=skipped)
    assert len(docs) == 1
    assert "span-out-of-range" in skipped[0] and rec["doc_id"] in skipped[0]


def test_well_formed_fixture_validates(john_doc, fed_doc):
    assert validate_document(john_doc) == []
    assert validate_document(fed_doc) == []


def test_empty_mention_gives_one_empty_span_diagnostic(john_doc):
    import dataclasses

    bad = dataclasses.replace(john_doc, coref_chains=((MentionSpan(3, 3, ""),),))
    problems = validate_document(bad)
    assert len(problems) == 1 and problems[0].startswith("empty-span")


def test_overlapping_paragraphs_detected():
    doc = make_doc("p", ["a b c .", "d e f ."], paragraphs=[(0, 5), (4, 8)])
    problems = validate_document(doc)
    assert len(problems) == 1 and problems[0].startswith("paragraph-overlap")


def test_identical_triple_spans_detected():
    doc = make_doc("p", ["a b c ."], triples=[((0, 1), (0, 1), (2, 3), 0)])
    assert any(p.startswith("identical-spans") for p in validate_document(doc))


def test_roundtrip_through_file_is_deterministic(tmp_path):
    docs = fact_corpus(5, seed=3)
    path = tmp_path / "c.jsonl"
    write_corpus(docs, path)
    assert load_corpus(path) == docs
    assert load_corpus(path) == load_corpus(path)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10_000), n=st.integers(1, 60))
def test_truncation_is_idempotent_and_valid(seed, n):
    doc = random_document(random.Random(seed))
    once = truncate_document(doc, n)
    assert truncate_document(once, n) == once
    assert validate_document(once) == [] or validate_document(doc) != []
    for t in once.triples:
        assert all(sp.end <= len(once.tokens) for sp in t.spans)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000), n=st.integers(1, 60))
def test_load_of_truncated_equals_truncated_load(tmp_path_factory, seed, n):
    doc = random_document(random.Random(seed), doc_id=f"d{seed}")
    tmp = tmp_path_factory.mktemp("trunc")
    write_corpus([doc], tmp / "a.jsonl")
    write_corpus([truncate_document(doc, n)], tmp / "b.jsonl")
    loaded = load_corpus(tmp / "a.jsonl", truncate_len=n)
    assert loaded == load_corpus(tmp / "b.jsonl", truncate_len=n)
