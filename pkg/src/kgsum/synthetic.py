"""Synthetic annotated corpora for smoke runs, toy experiments and tests.

``fact_corpus`` writes short news-like documents: every paragraph holds a few
``subject verb object .`` facts. One entity (the topic) has a fact in every
paragraph and is linked by a coreference chain; the reference summary
restates the topic's facts in document order.
"""

from __future__ import annotations

import random
from typing import Sequence

from .cloze import ARGUMENT_PAIR, ClozeQuestion
from .data import AnnotatedDocument, MentionSpan, Triple
from .text import BLANK

ENTITIES = [
    "acme", "borealis", "cobalt", "delta", "ember", "fjord", "granite", "harbor", "indigo", "juniper",
    "kestrel", "lumen", "meridian", "nimbus", "onyx", "pioneer", "quartz", "raven", "summit", "tundra",
    "umbra", "vertex", "willow", "xenon", "yarrow", "zephyr",
]
VERBS = [
    "acquires", "builds", "sells", "funds", "closes", "opens", "sues", "hires", "expands", "delays",
    "launches", "cancels", "buys", "approves", "rejects",
]
OBJECTS = [
    "factories", "bridges", "software", "satellites", "vaccines", "ships", "railways", "patents",
    "mines", "stores", "studios", "farms", "turbines", "servers", "clinics", "bonds", "drones", "ports",
    "reactors", "schools",
]
FILLER = ["officials", "said", "on", "monday", "that", "markets", "were", "calm", "analysts", "noted", "growth"]


def _span(tokens: Sequence[str], start: int, end: int) -> MentionSpan:
    return MentionSpan(start, end, " ".join(tokens[start:end]))


def fact_document(
    rng: random.Random,
    doc_id: str,
    n_paragraphs: int = 3,
    others_per_paragraph: int = 2,
    filler_prob: float = 0.0,
    pronoun_prob: float = 0.0,
) -> AnnotatedDocument:
    """One document whose reference lists the topic entity's facts."""
    entities = rng.sample(ENTITIES, 1 + n_paragraphs * others_per_paragraph)
    topic, others = entities[0], entities[1:]
    tokens: list[str] = []
    sentences, paragraphs, triples = [], [], []
    topic_mentions: list[MentionSpan] = []
    topic_facts: list[tuple[str, str]] = []
    for p in range(n_paragraphs):
        p_start = len(tokens)
        facts = [(topic, True)] + [(others[p * others_per_paragraph + k], False) for k in range(others_per_paragraph)]
        rng.shuffle(facts)
        for subj, is_topic in facts:
            if filler_prob and rng.random() < filler_prob:
                s0 = len(tokens)
                tokens.extend(rng.sample(FILLER, 4) + ["."])
                sentences.append((s0, len(tokens)))
            verb, obj = rng.choice(VERBS), rng.choice(OBJECTS)
            s0 = len(tokens)
            surface = subj
            if is_topic and topic_mentions and pronoun_prob and rng.random() < pronoun_prob:
                surface = "it"
            tokens.extend([surface, verb, obj, "."])
            sentences.append((s0, len(tokens)))
            t = Triple(_span(tokens, s0, s0 + 1), _span(tokens, s0 + 1, s0 + 2), _span(tokens, s0 + 2, s0 + 3),
                       len(sentences) - 1)
            triples.append(t)
            if is_topic:
                topic_mentions.append(t.subject)
                topic_facts.append((verb, obj))
        paragraphs.append((p_start, len(tokens)))
    ref_sents = [f"{topic} {v} {o} ." for v, o in topic_facts]
    ref_tokens = " ".join(ref_sents).split()
    ref_triples = []
    for i in range(len(topic_facts)):
        b = 4 * i
        ref_triples.append(Triple(_span(ref_tokens, b, b + 1), _span(ref_tokens, b + 1, b + 2),
                                  _span(ref_tokens, b + 2, b + 3), i))
    ref_chain = tuple(_span(ref_tokens, 4 * i, 4 * i + 1) for i in range(len(topic_facts)))
    return AnnotatedDocument(
        doc_id=doc_id,
        tokens=tuple(tokens),
        paragraphs=tuple(paragraphs),
        sentences=tuple(sentences),
        triples=tuple(triples),
        coref_chains=(tuple(topic_mentions),),
        reference_summary=tuple(ref_sents),
        reference_tokens=tuple(ref_tokens),
        reference_triples=tuple(ref_triples),
        reference_coref_chains=(ref_chain,),
    )


def fact_corpus(n: int, seed: int = 0, prefix: str = "doc", **kwargs) -> list[AnnotatedDocument]:
    rng = random.Random(seed)
    return [fact_document(rng, f"{prefix}{i:04d}", **kwargs) for i in range(n)]


def first_token_corpus(n: int, seed: int = 0) -> list[AnnotatedDocument]:
    """Tiny documents for the first-token policy-gradient task."""
    rng = random.Random(seed)
    vocab = ["a", "b", "c", "d", "e", "f", "g", "h"]
    docs = []
    for i in range(n):
        toks = [rng.choice(vocab) for _ in range(6)]
        ref = ["a"] + [rng.choice(vocab) for _ in range(2)]
        docs.append(AnnotatedDocument(
            doc_id=f"ft{i:03d}", tokens=tuple(toks), paragraphs=((0, 6),), sentences=((0, 6),),
            reference_summary=(" ".join(ref),), reference_tokens=tuple(ref),
        ))
    return docs


def random_document(rng: random.Random, doc_id: str = "rand", max_triples: int = 10) -> AnnotatedDocument:
    """Random tokens, triples and coreference chains (for graph-builder cross-checks)."""
    n_sent = rng.randint(1, 6)
    tokens, sentences = [], []
    words = ["w%d" % i for i in range(12)]
    for _ in range(n_sent):
        s0 = len(tokens)
        tokens.extend(rng.choice(words) for _ in range(rng.randint(4, 9)))
        sentences.append((s0, len(tokens)))
    cut = sorted(rng.sample(range(1, n_sent), rng.randint(0, n_sent - 1))) if n_sent > 1 else []
    bounds = [0] + cut + [n_sent]
    paragraphs = tuple((sentences[a][0], sentences[b - 1][1]) for a, b in zip(bounds[:-1], bounds[1:]))

    def rand_span(s, e):
        a = rng.randrange(s, e)
        b = rng.randint(a + 1, min(e, a + 3))
        return _span(tokens, a, b)

    triples = []
    arg_spans = []
    for _ in range(rng.randint(0, max_triples)):
        si = rng.randrange(n_sent)
        s, e = sentences[si]
        while True:
            parts = [rand_span(s, e) for _ in range(3)]
            if rng.random() < 0.3 and arg_spans:
                same = [sp for sp in arg_spans if s <= sp.start and sp.end <= e]
                if same:
                    parts[0] = rng.choice(same)
            if len({p.key for p in parts}) == 3:
                break
        triples.append(Triple(*parts, source_sentence=si))
        arg_spans.extend([parts[0], parts[2]])
    chains = []
    pool = list({sp.key: sp for sp in arg_spans}.values())
    rng.shuffle(pool)
    while len(pool) >= 2 and rng.random() < 0.7:
        k = rng.randint(2, min(4, len(pool)))
        chain, pool = pool[:k], pool[k:]
        if rng.random() < 0.5:
            s, e = sentences[rng.randrange(n_sent)]
            chain.append(rand_span(s, e))
        chains.append(tuple(chain))
    ref = [rng.choice(words + ["the", "of"]) for _ in range(rng.randint(0, 8))]
    return AnnotatedDocument(
        doc_id=doc_id, tokens=tuple(tokens), paragraphs=paragraphs, sentences=tuple(sentences),
        triples=tuple(triples), coref_chains=tuple(chains),
        reference_summary=(" ".join(ref),), reference_tokens=tuple(ref),
    )


def separable_qa_bank(n: int, seed: int = 0) -> list[tuple[list[str], ClozeQuestion]]:
    """Questions whose correct answer appears in the context and whose distractors do not."""
    rng = random.Random(seed)
    samples = []
    for i in range(n):
        names = rng.sample(ENTITIES, 4)
        objs = rng.sample(OBJECTS, 4)
        verb = rng.choice(VERBS)
        context = rng.sample(FILLER, 3) + [names[0], verb, objs[0], "."] + rng.sample(FILLER, 3)
        pairs = [(names[0], objs[0]), (names[1], objs[1]), (names[2], objs[2]), (names[3], objs[3])]
        order = list(range(4))
        rng.shuffle(order)
        q = ClozeQuestion(
            kind=ARGUMENT_PAIR,
            question_text=f"{BLANK} {verb} {BLANK} .",
            candidates=[", ".join(pairs[j]) for j in order],
            correct_index=order.index(0),
            source_doc=f"qa{i:04d}",
        )
        samples.append((context, q))
    return samples
