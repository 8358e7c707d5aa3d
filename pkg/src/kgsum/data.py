"""Loading and validation of pre-annotated documents.

Annotation (OpenIE triples, coreference chains, tokenization) happens upstream;
this module only ingests the line-delimited corpus format and checks it.
"""

from __future__ import annotations

import abc
import json
import logging
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Iterator

logger = logging.getLogger(__name__)

DEFAULT_TRUNCATE_LEN = 1024


class CorpusFormatError(ValueError):
    """A corpus line could not be parsed into a document record."""

    def __init__(self, message: str, line_no: int | None = None, doc_id: str | None = None):
        where = []
        if line_no is not None:
            where.append(f"line {line_no}")
        if doc_id is not None:
            where.append(f"doc {doc_id!r}")
        prefix = f"[{', '.join(where)}] " if where else ""
        super().__init__(prefix + message)
        self.line_no = line_no
        self.doc_id = doc_id


@dataclass(frozen=True)
class MentionSpan:
    start: int
    end: int
    surface: str = ""

    def __len__(self) -> int:
        return self.end - self.start

    @property
    def key(self) -> tuple[int, int]:
        return (self.start, self.end)

    def within(self, n_tokens: int) -> bool:
        return 0 <= self.start < self.end <= n_tokens


@dataclass(frozen=True)
class Triple:
    subject: MentionSpan
    predicate: MentionSpan
    object: MentionSpan
    source_sentence: int = 0

    @property
    def spans(self) -> tuple[MentionSpan, MentionSpan, MentionSpan]:
        return (self.subject, self.predicate, self.object)


@dataclass(frozen=True)
class AnnotatedDocument:
    doc_id: str
    tokens: tuple[str, ...]
    paragraphs: tuple[tuple[int, int], ...] = ()
    sentences: tuple[tuple[int, int], ...] = ()
    triples: tuple[Triple, ...] = ()
    coref_chains: tuple[tuple[MentionSpan, ...], ...] = ()
    reference_summary: tuple[str, ...] = ()
    reference_tokens: tuple[str, ...] = ()
    # optional extension: annotations over reference_tokens
    reference_triples: tuple[Triple, ...] = ()
    reference_coref_chains: tuple[tuple[MentionSpan, ...], ...] = ()

    def span_text(self, start: int, end: int) -> str:
        return " ".join(self.tokens[start:end])

    def sentence_tokens(self, idx: int) -> list[str]:
        s, e = self.sentences[idx]
        return list(self.tokens[s:e])

    def reference_span_text(self, span: MentionSpan) -> str:
        return " ".join(self.reference_tokens[span.start:span.end])

    def reference_sentence_spans(self) -> list[tuple[int, int]]:
        """Token spans of reference sentences inside ``reference_tokens``.

        Falls back to a single span when the sentence strings do not
        whitespace-tokenize to the stored reference tokens.
        """
        n = len(self.reference_tokens)
        spans, pos = [], 0
        for sent in self.reference_summary:
            k = len(sent.split())
            spans.append((pos, pos + k))
            pos += k
        if pos != n or not spans:
            return [(0, n)] if n else []
        return [s for s in spans if s[1] > s[0]]


class AnnotationClient(abc.ABC):
    """Upstream annotator producing corpus records (CoreNLP or similar)."""

    @abc.abstractmethod
    def annotate(self, doc_id: str, text: str, reference: list[str]) -> dict:
        """Return a record in the corpus line format."""


# ---------------------------------------------------------------------------
# parsing


def _span(obj, tokens, line_no, doc_id, what) -> MentionSpan:
    try:
        start, end = int(obj["start"]), int(obj["end"])
    except (KeyError, TypeError, ValueError) as exc:
        raise CorpusFormatError(f"bad {what} span {obj!r}", line_no, doc_id) from exc
    return MentionSpan(start, end, " ".join(tokens[max(start, 0):max(end, 0)]))


def _triple(obj, tokens, line_no, doc_id) -> Triple:
    if not isinstance(obj, dict):
        raise CorpusFormatError(f"triple must be an object, got {obj!r}", line_no, doc_id)
    try:
        parts = [_span(obj[k], tokens, line_no, doc_id, k) for k in ("subject", "predicate", "object")]
    except KeyError as exc:
        raise CorpusFormatError(f"triple missing {exc}", line_no, doc_id) from exc
    return Triple(*parts, source_sentence=int(obj.get("sentence", 0)))


def _pairs(value, line_no, doc_id, what) -> tuple[tuple[int, int], ...]:
    try:
        return tuple((int(a), int(b)) for a, b in value)
    except (TypeError, ValueError) as exc:
        raise CorpusFormatError(f"bad {what} list", line_no, doc_id) from exc


REQUIRED_FIELDS = (
    "doc_id", "tokens", "paragraphs", "sentences", "triples",
    "coref_chains", "reference_summary", "reference_tokens",
)


def parse_record(record: dict, line_no: int | None = None) -> AnnotatedDocument:
    if not isinstance(record, dict):
        raise CorpusFormatError("record is not an object", line_no)
    doc_id = record.get("doc_id")
    missing = [f for f in REQUIRED_FIELDS if f not in record]
    if missing:
        raise CorpusFormatError(f"missing fields {missing}", line_no, doc_id)
    tokens = record["tokens"]
    if not isinstance(tokens, list) or not all(isinstance(t, str) for t in tokens):
        raise CorpusFormatError("tokens must be a list of strings", line_no, doc_id)
    ref_tokens = record["reference_tokens"]
    if not isinstance(ref_tokens, list):
        raise CorpusFormatError("reference_tokens must be a list", line_no, doc_id)
    chains = tuple(
        tuple(_span(m, tokens, line_no, doc_id, "mention") for m in chain)
        for chain in record["coref_chains"]
    )
    ref_chains = tuple(
        tuple(_span(m, ref_tokens, line_no, doc_id, "reference mention") for m in chain)
        for chain in record.get("reference_coref_chains", [])
    )
    return AnnotatedDocument(
        doc_id=str(doc_id),
        tokens=tuple(tokens),
        paragraphs=_pairs(record["paragraphs"], line_no, doc_id, "paragraph"),
        sentences=_pairs(record["sentences"], line_no, doc_id, "sentence"),
        triples=tuple(_triple(t, tokens, line_no, doc_id) for t in record["triples"]),
        coref_chains=chains,
        reference_summary=tuple(str(s) for s in record["reference_summary"]),
        reference_tokens=tuple(str(t) for t in ref_tokens),
        reference_triples=tuple(
            _triple(t, ref_tokens, line_no, doc_id) for t in record.get("reference_triples", [])
        ),
        reference_coref_chains=ref_chains,
    )


def _span_obj(span: MentionSpan) -> dict:
    return {"start": span.start, "end": span.end}


def _triple_obj(t: Triple) -> dict:
    return {
        "subject": _span_obj(t.subject),
        "predicate": _span_obj(t.predicate),
        "object": _span_obj(t.object),
        "sentence": t.source_sentence,
    }


def document_to_record(doc: AnnotatedDocument) -> dict:
    record = {
        "doc_id": doc.doc_id,
        "tokens": list(doc.tokens),
        "paragraphs": [list(p) for p in doc.paragraphs],
        "sentences": [list(s) for s in doc.sentences],
        "triples": [_triple_obj(t) for t in doc.triples],
        "coref_chains": [[_span_obj(m) for m in chain] for chain in doc.coref_chains],
        "reference_summary": list(doc.reference_summary),
        "reference_tokens": list(doc.reference_tokens),
    }
    if doc.reference_triples:
        record["reference_triples"] = [_triple_obj(t) for t in doc.reference_triples]
    if doc.reference_coref_chains:
        record["reference_coref_chains"] = [
            [_span_obj(m) for m in chain] for chain in doc.reference_coref_chains
        ]
    return record


# ---------------------------------------------------------------------------
# validation


def validate_document(doc: AnnotatedDocument) -> list[str]:
    """Check every structural invariant; returns one message per violation."""
    problems: list[str] = []
    n = len(doc.tokens)

    def check_span(span: MentionSpan, what: str, limit: int = n, source=doc.tokens):
        if span.start >= span.end:
            problems.append(f"empty-span: {what} ({span.start}, {span.end}) has start >= end")
            return
        if not span.within(limit):
            problems.append(f"span-out-of-range: {what} ({span.start}, {span.end}) outside [0, {limit})")
            return
        if span.surface != " ".join(source[span.start:span.end]):
            problems.append(f"surface-mismatch: {what} ({span.start}, {span.end}) surface {span.surface!r}")

    prev_end = 0
    for i, (s, e) in enumerate(doc.paragraphs):
        if s >= e:
            problems.append(f"empty-span: paragraph {i} ({s}, {e})")
        elif e > n or s < 0:
            problems.append(f"span-out-of-range: paragraph {i} ({s}, {e}) outside [0, {n})")
        if i > 0 and s < prev_end:
            problems.append(f"paragraph-overlap: paragraph {i} ({s}, {e}) starts before previous end {prev_end}")
        elif s > prev_end:
            problems.append(f"paragraph-gap: paragraph {i} ({s}, {e}) leaves tokens [{prev_end}, {s}) uncovered")
        prev_end = max(prev_end, e)
    for i, (s, e) in enumerate(doc.sentences):
        if s >= e:
            problems.append(f"empty-span: sentence {i} ({s}, {e})")
        elif s < 0 or e > n:
            problems.append(f"span-out-of-range: sentence {i} ({s}, {e}) outside [0, {n})")

    for i, t in enumerate(doc.triples):
        for role, span in zip(("subject", "predicate", "object"), t.spans):
            check_span(span, f"triple {i} {role}")
        keys = [sp.key for sp in t.spans]
        if len(set(keys)) < 3:
            problems.append(f"identical-spans: triple {i} has identical argument/predicate spans {keys}")
        if doc.sentences and not 0 <= t.source_sentence < len(doc.sentences):
            problems.append(f"bad-sentence-index: triple {i} sentence {t.source_sentence}")
    for c, chain in enumerate(doc.coref_chains):
        for m, span in enumerate(chain):
            check_span(span, f"coref chain {c} mention {m}")

    rn = len(doc.reference_tokens)
    for i, t in enumerate(doc.reference_triples):
        for role, span in zip(("subject", "predicate", "object"), t.spans):
            check_span(span, f"reference triple {i} {role}", rn, doc.reference_tokens)
    for c, chain in enumerate(doc.reference_coref_chains):
        for m, span in enumerate(chain):
            check_span(span, f"reference chain {c} mention {m}", rn, doc.reference_tokens)
    return problems


# ---------------------------------------------------------------------------
# truncation


def _clip_span(span: MentionSpan, tokens) -> MentionSpan:
    return MentionSpan(span.start, span.end, " ".join(tokens[span.start:span.end]))


def truncate_document(doc: AnnotatedDocument, truncate_len: int) -> AnnotatedDocument:
    """Cut the token sequence and drop annotation that no longer fits.

    Triples with any span past the cut are dropped; coreference chains keep
    their in-range mentions; paragraph and sentence spans are clipped.
    """
    if truncate_len <= 0:
        raise ValueError("truncate_len must be positive")
    n = min(len(doc.tokens), truncate_len)
    if n == len(doc.tokens):
        return doc
    tokens = doc.tokens[:n]

    def clip_pairs(pairs):
        return tuple((s, min(e, n)) for s, e in pairs if s < n)

    sentences = clip_pairs(doc.sentences)
    triples = tuple(
        Triple(*(_clip_span(sp, tokens) for sp in t.spans), source_sentence=t.source_sentence)
        for t in doc.triples
        if all(sp.end <= n for sp in t.spans) and t.source_sentence < max(len(sentences), 1)
    )
    chains = []
    for chain in doc.coref_chains:
        kept = tuple(m for m in chain if m.end <= n)
        if kept:
            chains.append(kept)
    return replace(
        doc,
        tokens=tokens,
        paragraphs=clip_pairs(doc.paragraphs),
        sentences=sentences,
        triples=triples,
        coref_chains=tuple(chains),
    )


# ---------------------------------------------------------------------------
# corpus IO


def iter_records(path: str | Path) -> Iterator[tuple[int, dict]]:
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                yield line_no, json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusFormatError(f"invalid JSON: {exc.msg}", line_no) from exc


def load_corpus(
    path: str | Path,
    truncate_len: int = DEFAULT_TRUNCATE_LEN,
    strict: bool = True,
    skipped: list[str] | None = None,
) -> list[AnnotatedDocument]:
    """Read a line-delimited corpus and truncate every document.

    Malformed lines raise :class:`CorpusFormatError` with the line number
    (or are recorded in ``skipped`` when ``strict`` is false). Documents whose
    spans are out of range are skipped with a logged diagnostic.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    docs: list[AnnotatedDocument] = []
    with open(path, encoding="utf-8") as fh:
        lines = list(enumerate(fh, start=1))
    for line_no, line in lines:
        if not line.strip():
            continue
        try:
            record = json.loads(line)
            doc = parse_record(record, line_no)
        except json.JSONDecodeError as exc:
            err = CorpusFormatError(f"invalid JSON: {exc.msg}", line_no)
            if strict:
                raise err from exc
            _skip(skipped, str(err))
            continue
        except CorpusFormatError as err:
            if strict:
                raise
            _skip(skipped, str(err))
            continue
        problems = validate_document(doc)
        if problems:
            msg = f"[line {line_no}, doc {doc.doc_id!r}] skipped: {problems[0]}"
            logger.warning(msg)
            _skip(skipped, msg)
            continue
        docs.append(truncate_document(doc, truncate_len))
    return docs


def _skip(skipped, msg):
    logger.warning(msg)
    if skipped is not None:
        skipped.append(msg)


def write_corpus(docs: Iterable[AnnotatedDocument], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for doc in docs:
            fh.write(json.dumps(document_to_record(doc)) + "\n")
