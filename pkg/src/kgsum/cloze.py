"""Multiple-choice cloze questions built from reference summaries.

Questions blank out argument pairs, predicates, or co-occurring entity pairs of
the reference; distractors are mined from the salient context of the source.
A QA scorer reads a (system) summary and assigns probabilities to the four
candidates; the mean probability of the correct answers is the cloze reward.
"""

from __future__ import annotations

import abc
import json
import logging
import math
import random
import zlib
from collections import Counter
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import torch
from torch import nn

from .data import AnnotatedDocument, MentionSpan, Triple
from .rouge import rouge_l, rouge_n
from .text import BLANK, content_words, n_words, stopwords

logger = logging.getLogger(__name__)

ARGUMENT_PAIR, PREDICATE, ENTITY_PAIR = "argument_pair", "predicate", "entity_pair"
KINDS = (ARGUMENT_PAIR, PREDICATE, ENTITY_PAIR)
NUM_CANDIDATES = 4
MAX_QUESTION_ARG_WORDS = 5
RECALL_THRESHOLD = 0.6
PAIR_SEP = ", "


@dataclass
class ClozeQuestion:
    kind: str
    question_text: str
    candidates: list[str]
    correct_index: int
    source_doc: str = ""

    @property
    def answer(self) -> str:
        return self.candidates[self.correct_index]

    @property
    def blanks(self) -> int:
        return self.question_text.split().count(BLANK)

    def to_record(self) -> dict:
        return {
            "doc_id": self.source_doc,
            "kind": self.kind,
            "question_text": self.question_text,
            "candidates": list(self.candidates),
            "correct_index": self.correct_index,
        }

    @classmethod
    def from_record(cls, rec: dict) -> "ClozeQuestion":
        return cls(rec["kind"], rec["question_text"], list(rec["candidates"]), int(rec["correct_index"]), rec.get("doc_id", ""))


def validate_question(q: ClozeQuestion) -> list[str]:
    problems = []
    if q.kind not in KINDS:
        problems.append(f"unknown kind {q.kind!r}")
    if len(q.candidates) != NUM_CANDIDATES:
        problems.append(f"expected {NUM_CANDIDATES} candidates, got {len(q.candidates)}")
    if len({c.lower() for c in q.candidates}) != len(q.candidates):
        problems.append("candidates not pairwise distinct")
    if not 0 <= q.correct_index < len(q.candidates):
        problems.append(f"correct_index {q.correct_index} out of range")
    want = 1 if q.kind == PREDICATE else 2
    if q.blanks != want:
        problems.append(f"{q.kind} question needs {want} blanks, has {q.blanks}")
    return problems


@dataclass
class SalientContext:
    sentences: list[int]
    text: list[str]

    def to_record(self, doc_id: str) -> dict:
        return {"doc_id": doc_id, "sentence_indices": list(self.sentences)}


# ---------------------------------------------------------------------------
# salient context


def _joined(sentences: Sequence[Sequence[str]], picked: Iterable[int]) -> list[str]:
    out: list[str] = []
    for i in sorted(picked):
        out.extend(sentences[i])
    return out


def greedy_rouge2_selection(sentences: Sequence[Sequence[str]], reference: Sequence[str]) -> list[int]:
    """Forward selection maximising ROUGE-2 F1 of the joined sentences.

    Stops as soon as no remaining sentence increases the score; ties go to
    the earlier sentence.
    """
    picked: list[int] = []
    best = 0.0
    while True:
        choice, choice_score = None, best
        for i in range(len(sentences)):
            if i in picked:
                continue
            score = rouge_n(_joined(sentences, picked + [i]), reference, 2).f1
            if score > choice_score + 1e-12:
                choice, choice_score = i, score
        if choice is None:
            return sorted(picked)
        picked.append(choice)
        best = choice_score


def select_salient_context(
    doc: AnnotatedDocument,
    reference: Sequence[str] | None = None,
    reference_sentences: Sequence[Sequence[str]] | None = None,
    recall_threshold: float = RECALL_THRESHOLD,
) -> SalientContext:
    sentences = [doc.sentence_tokens(i) for i in range(len(doc.sentences))]
    ref = list(doc.reference_tokens if reference is None else reference)
    if reference_sentences is None:
        reference_sentences = [s.split() for s in doc.reference_summary]
    picked = set(greedy_rouge2_selection(sentences, ref))
    for i, sent in enumerate(sentences):
        if i not in picked and any(rouge_l(sent, r).recall > recall_threshold for r in reference_sentences if r):
            picked.add(i)
    order = sorted(picked)
    return SalientContext(order, _joined(sentences, order))


# ---------------------------------------------------------------------------
# fluency


class FluencyScorer(abc.ABC):
    @abc.abstractmethod
    def perplexity(self, tokens: Sequence[str]) -> float:
        ...


class NgramFluencyScorer(FluencyScorer):
    """Add-k smoothed bigram language model over lowercased tokens."""

    def __init__(self, k: float = 0.1):
        self.k = k
        self.unigrams: Counter = Counter()
        self.bigrams: Counter = Counter()

    def fit(self, token_lists: Iterable[Sequence[str]]) -> "NgramFluencyScorer":
        for toks in token_lists:
            seq = ["<s>"] + [t.lower() for t in toks] + ["</s>"]
            self.unigrams.update(seq[:-1])
            self.bigrams.update(zip(seq[:-1], seq[1:]))
        return self

    def perplexity(self, tokens):
        seq = ["<s>"] + [t.lower() for t in tokens] + ["</s>"]
        V = len(self.unigrams) + 1
        logp = 0.0
        for a, b in zip(seq[:-1], seq[1:]):
            logp += math.log((self.bigrams[(a, b)] + self.k) / (self.unigrams[a] + self.k * V))
        return math.exp(-logp / (len(seq) - 1))


class ConstantFluencyScorer(FluencyScorer):
    """Every question equally fluent; ranking falls back to lexicographic order."""

    def perplexity(self, tokens):
        return 1.0


# ---------------------------------------------------------------------------
# question construction


def _blank_out(tokens: Sequence[str], offset: int, spans: Sequence[MentionSpan]) -> list[str]:
    out, i = [], offset
    starts = {sp.start: sp for sp in spans}
    end = offset + len(tokens)
    while i < end:
        sp = starts.get(i)
        if sp is not None:
            out.append(BLANK)
            i = sp.end
        else:
            out.append(tokens[i - offset])
            i += 1
    return out


def _fill(question_tokens: Sequence[str], parts: Sequence[str]) -> list[str]:
    out, k = [], 0
    for tok in question_tokens:
        if tok == BLANK and k < len(parts):
            out.extend(parts[k].split())
            k += 1
        else:
            out.append(tok)
    return out


def _sentence_of(spans: Sequence[tuple[int, int]], position: int) -> tuple[int, int]:
    for s, e in spans:
        if s <= position < e:
            return (s, e)
    return spans[0] if spans else (0, 0)


@dataclass
class _Pools:
    subjects: list[str] = field(default_factory=list)
    objects: list[str] = field(default_factory=list)
    predicates: list[str] = field(default_factory=list)


def _pools(triples: Iterable[Triple], banned: set[str], stop) -> _Pools:
    pools = _Pools()
    for t in triples:
        words = content_words(" ".join(sp.surface for sp in t.spans).split(), stop)
        if words & banned:
            continue
        for lst, sp in ((pools.subjects, t.subject), (pools.objects, t.object), (pools.predicates, t.predicate)):
            if sp.surface and sp.surface not in lst:
                lst.append(sp.surface)
    return pools


class QuestionBuilder:
    """Builds the cloze bank for one document (deterministic given the seed)."""

    def __init__(self, doc: AnnotatedDocument, context: SalientContext,
                 fluency: FluencyScorer | None = None, seed: int = 0, stop=None):
        self.doc = doc
        self.context = context
        self.fluency = fluency or ConstantFluencyScorer()
        self.stop = stopwords() if stop is None else stop
        self.rng = random.Random(f"{seed}:{doc.doc_id}")
        ctx = set(context.sentences)
        self.context_triples = [t for t in doc.triples if t.source_sentence in ctx]
        others = sorted({t.source_sentence for t in doc.triples} - ctx)
        self.rng.shuffle(others)
        self.fallback_sentences = others
        self.diagnostics: list[str] = []
        self.ref_sentences = doc.reference_sentence_spans()

    # -- helpers ---------------------------------------------------------
    def _rank(self, question: list[str], options: list[tuple[str, ...]]) -> list[tuple[str, ...]]:
        scored = [(self.fluency.perplexity(_fill(question, opt)), PAIR_SEP.join(opt), opt) for opt in options]
        scored.sort(key=lambda x: (x[0], x[1]))
        return [opt for _, _, opt in scored]

    def _fallback_pools(self, banned: set[str]) -> _Pools:
        by_sentence: dict[int, list[Triple]] = {}
        for t in self.doc.triples:
            by_sentence.setdefault(t.source_sentence, []).append(t)
        merged = _Pools()
        for s in self.fallback_sentences:
            p = _pools(by_sentence.get(s, []), banned, self.stop)
            for attr in ("subjects", "objects", "predicates"):
                lst = getattr(merged, attr)
                lst.extend(x for x in getattr(p, attr) if x not in lst)
        return merged

    def _finish(self, kind, question, correct: tuple[str, ...], distractors: list[tuple[str, ...]]):
        seen = {PAIR_SEP.join(correct).lower()}
        unique = []
        for d in distractors:
            key = PAIR_SEP.join(d).lower()
            if key not in seen:
                seen.add(key)
                unique.append(d)
        text = " ".join(question)
        if len(unique) < NUM_CANDIDATES - 1:
            self.diagnostics.append(
                f"{self.doc.doc_id}: dropped {kind} question {text!r}: only {len(unique)} distractors"
            )
            return None
        options = [correct] + unique[: NUM_CANDIDATES - 1]
        order = list(range(NUM_CANDIDATES))
        self.rng.shuffle(order)
        candidates = [PAIR_SEP.join(options[i]) for i in order]
        return ClozeQuestion(kind, text, candidates, order.index(0), self.doc.doc_id)

    def _pair_question(self, kind, question, first: str, second: str, first_pool, second_pool, fallback_first, fallback_second):
        correct = (first, second)
        distractors: list[tuple[str, ...]] = []
        if first.lower() != second.lower():
            distractors.append((second, first))
        first_opts = [(x, second) for x in first_pool]
        second_opts = [(first, x) for x in second_pool]
        ranked_first = self._rank(question, first_opts)
        ranked_second = self._rank(question, second_opts)
        picks = []
        if ranked_first:
            picks.append(ranked_first.pop(0))
        if ranked_second:
            picks.append(ranked_second.pop(0))
        # one role may be short: top up from the other role's remaining options
        rest = self._rank(question, ranked_first + ranked_second)
        picks.extend(rest[: max(0, 2 - len(picks))])
        distractors.extend(picks)
        if len(distractors) < NUM_CANDIDATES - 1:
            extra = [(x, second) for x in fallback_first] + [(first, x) for x in fallback_second]
            have = {d for d in distractors}
            extra = [e for e in self._rank(question, extra) if e not in have]
            distractors.extend(extra[: NUM_CANDIDATES - 1 - len(distractors)])
        return self._finish(kind, question, correct, distractors)

    # -- public ----------------------------------------------------------
    def argument_pair(self, t: Triple):
        s, e = _sentence_of(self.ref_sentences, t.predicate.start)
        question = _blank_out(self.doc.reference_tokens[s:e], s, [t.subject, t.object])
        banned = content_words((t.subject.surface + " " + t.object.surface).split(), self.stop)
        pools = _pools(self.context_triples, banned, self.stop)
        fb = self._fallback_pools(banned)
        return self._pair_question(ARGUMENT_PAIR, question, t.subject.surface, t.object.surface,
                                   pools.subjects, pools.objects, fb.subjects, fb.objects)

    def predicate(self, t: Triple):
        s, e = _sentence_of(self.ref_sentences, t.predicate.start)
        question = _blank_out(self.doc.reference_tokens[s:e], s, [t.predicate])
        banned = content_words(t.predicate.surface.split(), self.stop)
        correct = (t.predicate.surface,)
        pools = _pools(self.context_triples, banned, self.stop)
        options = [(p,) for p in pools.predicates if p.lower() != t.predicate.surface.lower()]
        distractors = self._rank(question, options)[: NUM_CANDIDATES - 1]
        if len({d[0].lower() for d in distractors}) < NUM_CANDIDATES - 1:
            have = {d[0].lower() for d in distractors} | {t.predicate.surface.lower()}
            fb = [(p,) for p in self._fallback_pools(banned).predicates if p.lower() not in have]
            distractors.extend(self._rank(question, fb)[: NUM_CANDIDATES - 1 - len(distractors)])
        return self._finish(PREDICATE, question, correct, distractors)

    def entity_pair(self, a: MentionSpan, b: MentionSpan):
        s, e = _sentence_of(self.ref_sentences, a.start)
        question = _blank_out(self.doc.reference_tokens[s:e], s, [a, b])
        banned = content_words((a.surface + " " + b.surface).split(), self.stop)
        pools = _pools(self.context_triples, banned, self.stop)
        args = list(dict.fromkeys(pools.subjects + pools.objects))
        fb = self._fallback_pools(banned)
        fb_args = [x for x in dict.fromkeys(fb.subjects + fb.objects) if x not in args]
        return self._pair_question(ENTITY_PAIR, question, a.surface, b.surface, args, args, fb_args, fb_args)

    def build(self) -> list[ClozeQuestion]:
        questions = []
        triples = [
            t for t in self.doc.reference_triples
            if n_words(t.subject.surface) <= MAX_QUESTION_ARG_WORDS and n_words(t.object.surface) <= MAX_QUESTION_ARG_WORDS
        ]
        for t in triples:
            for q in (self.argument_pair(t), self.predicate(t)):
                if q is not None:
                    questions.append(q)
        if not triples:
            for a, b in reference_entity_pairs(self.doc):
                q = self.entity_pair(a, b)
                if q is not None:
                    questions.append(q)
        return questions


def reference_entity_pairs(doc: AnnotatedDocument) -> list[tuple[MentionSpan, MentionSpan]]:
    """Mentions of two different reference chains inside one reference sentence."""
    mentions = [(m, c) for c, chain in enumerate(doc.reference_coref_chains) for m in chain]
    mentions.sort(key=lambda mc: (mc[0].start, mc[0].end))
    pairs, seen = [], set()
    for s, e in doc.reference_sentence_spans():
        inside = [(m, c) for m, c in mentions if s <= m.start and m.end <= e]
        for i, (a, ca) in enumerate(inside):
            for b, cb in inside[i + 1:]:
                if ca == cb or b.start < a.end:
                    continue
                key = (a.surface.lower(), b.surface.lower())
                if key not in seen:
                    seen.add(key)
                    pairs.append((a, b))
    return pairs


def build_questions(
    doc: AnnotatedDocument,
    context: SalientContext,
    fluency: FluencyScorer | None = None,
    seed: int = 0,
    diagnostics: list[str] | None = None,
) -> list[ClozeQuestion]:
    """Argument-pair and predicate questions per short reference triple.

    Falls back to entity-pair questions when no reference triple qualifies.
    Questions with fewer than three distractors are dropped (see ``diagnostics``).
    """
    builder = QuestionBuilder(doc, context, fluency, seed)
    questions = builder.build()
    if diagnostics is not None:
        diagnostics.extend(builder.diagnostics)
    for msg in builder.diagnostics:
        logger.debug(msg)
    return questions


# ---------------------------------------------------------------------------
# QA scoring


class QaScorer(abc.ABC):
    @abc.abstractmethod
    def score(self, context: Sequence[str], question: ClozeQuestion) -> list[float]:
        """Probability of each of the four candidates given the context."""


class OracleQaScorer(QaScorer):
    def score(self, context, question):
        return [1.0 if i == question.correct_index else 0.0 for i in range(len(question.candidates))]


class UniformQaScorer(QaScorer):
    def score(self, context, question):
        return [1.0 / len(question.candidates)] * len(question.candidates)


class ScriptedQaScorer(QaScorer):
    """Returns fixed probability vectors keyed by question text (tests, reports)."""

    def __init__(self, script: Mapping[str, Sequence[float]]):
        self.script = dict(script)

    def score(self, context, question):
        return list(self.script[question.question_text])


def _bucket(token: str, buckets: int) -> int:
    return 1 + zlib.crc32(token.lower().encode("utf-8")) % (buckets - 1)


@dataclass
class QaConfig:
    buckets: int = 4096
    embed_dim: int = 32
    hidden_dim: int = 32
    lr: float = 5e-3
    epochs: int = 10
    batch_size: int = 16
    seed: int = 0
    heldout_fraction: float = 0.2


class MatchingQaScorer(nn.Module, QaScorer):
    """Hashed bag-of-embeddings candidate matcher over a GRU-read context.

    Each candidate gets five features: best soft match against context
    states, attention-read match, question/candidate compatibility, and the
    fraction / presence of its content words in the context. A linear layer
    (zero-initialised, so an untrained scorer is uniform) maps them to a logit.
    """

    N_FEATURES = 5

    def __init__(self, config: QaConfig | None = None):
        super().__init__()
        self.config = config or QaConfig()
        c = self.config
        self.embedding = nn.Embedding(c.buckets, c.embed_dim, padding_idx=0)
        self.context_rnn = nn.GRU(c.embed_dim, c.hidden_dim, batch_first=True, bidirectional=True)
        self.question_rnn = nn.GRU(c.embed_dim, c.hidden_dim, batch_first=True, bidirectional=True)
        self.candidate_proj = nn.Linear(c.embed_dim, 2 * c.hidden_dim)
        self.head = nn.Linear(self.N_FEATURES, 1)
        nn.init.zeros_(self.head.weight)
        nn.init.zeros_(self.head.bias)
        self._stop = stopwords()

    def _ids(self, tokens):
        return torch.tensor([_bucket(t, self.config.buckets) for t in tokens] or [0])

    def logits(self, context: Sequence[str], question: ClozeQuestion) -> torch.Tensor:
        ctx_states, _ = self.context_rnn(self.embedding(self._ids(context)).unsqueeze(0))
        ctx_states = ctx_states[0]  # Tc x 2h
        q_tokens = [t for t in question.question_text.split() if t != BLANK]
        _, q_h = self.question_rnn(self.embedding(self._ids(q_tokens)).unsqueeze(0))
        q_vec = torch.cat([q_h[0, 0], q_h[1, 0]])
        ctx_words = {t.lower() for t in context}
        feats = []
        for cand in question.candidates:
            toks = cand.replace(",", " ").split()
            c_vec = self.candidate_proj(self.embedding(self._ids(toks)).mean(0))
            sims = torch.cosine_similarity(ctx_states, c_vec.unsqueeze(0), dim=-1)
            read = torch.softmax(ctx_states @ c_vec, 0) @ ctx_states
            cw = content_words(toks, self._stop) or {t.lower() for t in toks}
            present = sum(w in ctx_words for w in cw) / max(len(cw), 1)
            feats.append(torch.stack([
                sims.max(),
                torch.cosine_similarity(read, c_vec, dim=0),
                torch.cosine_similarity(q_vec, c_vec, dim=0),
                torch.tensor(float(present)),
                torch.tensor(float(present == 1.0)),
            ]))
        return self.head(torch.stack(feats)).squeeze(-1)

    def score(self, context, question):
        with torch.no_grad():
            return torch.softmax(self.logits(context, question), 0).tolist()


def argmax_accuracy(probs: Sequence[float], correct: int, tol: float = 1e-12) -> float:
    """1 if the correct candidate is the unique argmax; ties share credit equally."""
    best = max(probs)
    top = [i for i, p in enumerate(probs) if p >= best - tol]
    return 1.0 / len(top) if correct in top else 0.0


def qa_accuracy(scorer: QaScorer, samples: Sequence[tuple[Sequence[str], ClozeQuestion]]) -> float:
    if not samples:
        return 0.0
    return sum(argmax_accuracy(scorer.score(ctx, q), q.correct_index) for ctx, q in samples) / len(samples)


def train_qa_scorer(
    samples: Sequence[tuple[Sequence[str], ClozeQuestion]],
    config: QaConfig | None = None,
    heldout: Sequence[tuple[Sequence[str], ClozeQuestion]] | None = None,
) -> tuple[MatchingQaScorer, dict]:
    """Fit the default scorer with 4-way cross-entropy; reports held-out accuracy.

    Without an explicit ``heldout`` set, a seeded ``heldout_fraction`` slice of
    ``samples`` is held out.
    """
    config = config or QaConfig()
    torch.manual_seed(config.seed)
    rng = random.Random(config.seed)
    samples = list(samples)
    if heldout is None:
        order = list(range(len(samples)))
        rng.shuffle(order)
        cut = int(len(samples) * config.heldout_fraction)
        heldout = [samples[i] for i in order[:cut]]
        train = [samples[i] for i in order[cut:]]
    else:
        train = samples
    scorer = MatchingQaScorer(config)
    opt = torch.optim.Adam(scorer.parameters(), lr=config.lr)
    history = []
    for epoch in range(config.epochs):
        rng.shuffle(train)
        total = 0.0
        for i in range(0, len(train), config.batch_size):
            chunk = train[i:i + config.batch_size]
            loss = sum(
                nn.functional.cross_entropy(scorer.logits(ctx, q).unsqueeze(0), torch.tensor([q.correct_index]))
                for ctx, q in chunk
            ) / len(chunk)
            opt.zero_grad()
            loss.backward()
            opt.step()
            total += loss.item() * len(chunk)
        history.append(total / max(len(train), 1))
    scorer.eval()
    report = {
        "train_loss": history,
        "train_accuracy": qa_accuracy(scorer, train),
        "heldout_accuracy": qa_accuracy(scorer, heldout),
        "heldout_size": len(heldout),
    }
    return scorer, report


def save_qa_scorer(scorer: MatchingQaScorer, path: str | Path) -> None:
    torch.save({"config": asdict(scorer.config), "state_dict": scorer.state_dict()}, path)


def load_qa_scorer(path: str | Path) -> MatchingQaScorer:
    blob = torch.load(path, map_location="cpu", weights_only=False)
    scorer = MatchingQaScorer(QaConfig(**blob["config"]))
    scorer.load_state_dict(blob["state_dict"])
    scorer.eval()
    return scorer


# ---------------------------------------------------------------------------
# rewards and evaluation


def cloze_reward(summary: Sequence[str], questions: Sequence[ClozeQuestion], qa: QaScorer) -> float:
    """Mean probability of the correct candidates with the summary as context."""
    if not questions:
        logger.warning("cloze reward requested with an empty question set; returning 0")
        return 0.0
    return sum(qa.score(summary, q)[q.correct_index] for q in questions) / len(questions)


@dataclass
class ClozeEvaluation:
    mean_probability: float
    accuracy: float
    per_summary: dict[str, tuple[float, float]]


def cloze_evaluate(
    summaries: Mapping[str, Sequence[str]],
    banks: Mapping[str, Sequence[ClozeQuestion]],
    qa: QaScorer,
) -> ClozeEvaluation:
    """One (probability, accuracy) per summary, then the average over summaries."""
    per = {}
    for doc_id, summary in summaries.items():
        questions = banks.get(doc_id) or []
        if not questions:
            continue
        probs = [qa.score(summary, q) for q in questions]
        p = sum(pr[q.correct_index] for pr, q in zip(probs, questions)) / len(questions)
        a = sum(argmax_accuracy(pr, q.correct_index) for pr, q in zip(probs, questions)) / len(questions)
        per[doc_id] = (p, a)
    if not per:
        return ClozeEvaluation(0.0, 0.0, {})
    return ClozeEvaluation(
        mean_probability=sum(p for p, _ in per.values()) / len(per),
        accuracy=sum(a for _, a in per.values()) / len(per),
        per_summary=per,
    )


# ---------------------------------------------------------------------------
# files


def write_bank(questions: Iterable[ClozeQuestion], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for q in questions:
            fh.write(json.dumps(q.to_record(), sort_keys=True) + "\n")


def read_bank(path: str | Path) -> dict[str, list[ClozeQuestion]]:
    banks: dict[str, list[ClozeQuestion]] = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                q = ClozeQuestion.from_record(json.loads(line))
                banks.setdefault(q.source_doc, []).append(q)
    return banks


def write_contexts(contexts: Mapping[str, SalientContext], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for doc_id, ctx in contexts.items():
            fh.write(json.dumps(ctx.to_record(doc_id), sort_keys=True) + "\n")


def read_contexts(path: str | Path) -> dict[str, list[int]]:
    out = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                rec = json.loads(line)
                out[rec["doc_id"]] = list(rec["sentence_indices"])
    return out
