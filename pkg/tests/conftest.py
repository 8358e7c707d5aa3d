from __future__ import annotations

import sys
from pathlib import Path

import pytest
import torch

sys.path.insert(0, str(Path(__file__).parent))

from kgsum.data import AnnotatedDocument, MentionSpan, Triple  # noqa: E402

torch.set_num_threads(1)


def span(tokens, start, end):
    return MentionSpan(start, end, " ".join(tokens[start:end]))


def make_doc(doc_id, sentences, triples=(), chains=(), reference="", paragraphs=None,
             ref_triples=(), ref_chains=()):
    """Build a document from whitespace sentences; spans are (start, end) token offsets."""
    tokens, sent_spans = [], []
    for s in sentences:
        start = len(tokens)
        tokens.extend(s.split())
        sent_spans.append((start, len(tokens)))
    if paragraphs is None:
        paragraphs = [(0, len(tokens))] if tokens else []
    ref_sents = [s.strip() for s in reference.split("|")] if reference else []
    ref_tokens = " ".join(ref_sents).split()

    def tri(spec, toks):
        (a, b), (c, d), (e, f), sent = spec
        return Triple(span(toks, a, b), span(toks, c, d), span(toks, e, f), sent)

    return AnnotatedDocument(
        doc_id=doc_id,
        tokens=tuple(tokens),
        paragraphs=tuple(tuple(p) for p in paragraphs),
        sentences=tuple(sent_spans),
        triples=tuple(tri(t, tokens) for t in triples),
        coref_chains=tuple(tuple(span(tokens, a, b) for a, b in ch) for ch in chains),
        reference_summary=tuple(ref_sents),
        reference_tokens=tuple(ref_tokens),
        reference_triples=tuple(tri(t, ref_tokens) for t in ref_triples),
        reference_coref_chains=tuple(tuple(span(ref_tokens, a, b) for a, b in ch) for ch in ref_chains),
    )


@pytest.fixture
def fed_doc():
    """The worked cloze example: one reference triple and a four-sentence salient context."""
    return make_doc(
        "fed",
        [
            "Federal Reserve signals positivity about the market .",
            "Fed increases benchmark interest rate again this May .",
            "American economy keeps the high growth rate .",
            "Jerome H. Powell discussed potential risks .",
        ],
        triples=[((0, 2), (2, 3), (3, 4), 0), ((17, 19), (19, 20), (20, 24), 2), ((25, 28), (28, 29), (29, 31), 3)],
        chains=[[(0, 2), (8, 9)]],
        reference="Federal Reserve increases interest rates .",
        ref_triples=[((0, 2), (2, 3), (3, 5), 0)],
    )


@pytest.fixture
def john_doc():
    return make_doc(
        "john",
        ["john likes the red car .", "he drives it to work ."],
        triples=[((0, 1), (1, 2), (2, 5), 0), ((6, 7), (7, 8), (8, 9), 1)],
        chains=[[(0, 1), (6, 7)], [(2, 5), (8, 9)]],
        reference="john drives a red car .",
        paragraphs=[(0, 6), (6, 12)],
    )


def tiny_vocab(docs, size=None):
    from kgsum.vocab import Vocab

    toks = sorted({t for d in docs for t in d.tokens} | {t for d in docs for t in d.reference_tokens})
    if size is not None:
        toks = (toks + [f"filler{i}" for i in range(size)])[: size - 4]
    return Vocab(toks)


def tiny_model(variant, vocab_size, hidden=8, heads=2, head_dim=4, embed=8, dtype=torch.float32, seed=0):
    from kgsum.model import ModelConfig, SummarizationModel

    torch.manual_seed(seed)
    cfg = ModelConfig(vocab_size=vocab_size, variant=variant, embed_dim=embed, hidden_dim=hidden,
                      decoder_dim=hidden, num_heads=heads, head_dim=head_dim, num_layers=2)
    return SummarizationModel(cfg).to(dtype)


def tiny_batch(docs, vocab, variant, dtype=torch.float32, min_nodes=1):
    from kgsum.features import build_examples, collate

    return collate(build_examples(docs, vocab, variant, min_nodes), dtype=dtype)


def mixed_docs():
    """Two paragraph-structured fact docs plus one doc whose graph is fully pruned."""
    import random as _random

    from kgsum.synthetic import fact_document

    rng = _random.Random(5)
    docs = [fact_document(rng, f"d{i}", n_paragraphs=2, others_per_paragraph=1) for i in range(2)]
    docs.append(make_doc("bare", ["nothing happens here ."], reference="nothing"))
    return docs


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    results = getattr(module, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number in range(1, 12):
        terminalreporter.write_line(results.get(number, f"FAIL criterion {number:2d}: not run"))
