"""Knowledge-graph construction from OpenIE triples and coreference chains.

Entity arguments (subjects, objects) become entity nodes, collapsed along the
provided coreference chains; every triple adds its own predicate node wired
``subject -> predicate -> object``. Reverse edges and self-loops are added to
every graph.
"""

from __future__ import annotations

import dataclasses
import json
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .data import AnnotatedDocument, MentionSpan, Triple
from .text import is_content_word, n_words, stopwords

ENTITY = "entity"
PREDICATE = "predicate"

MAX_ARGUMENT_WORDS = 10
DEFAULT_MIN_NODES = 3


@dataclass
class Node:
    node_id: int
    kind: str
    mentions: list[MentionSpan]
    # chain index for coreferent entities, else None
    chain: int | None = None

    @property
    def mention_count(self) -> int:
        return len(self.mentions)

    @property
    def canonical_text(self) -> str:
        return self.mentions[0].surface if self.mentions else ""


@dataclass
class KnowledgeGraph:
    nodes: list[Node] = field(default_factory=list)
    edges: list[tuple[int, int]] = field(default_factory=list)
    paragraph_index: int | None = None

    def __len__(self) -> int:
        return len(self.nodes)

    @property
    def is_empty(self) -> bool:
        return not self.nodes

    def neighbors(self) -> list[list[int]]:
        """In-neighbors of each node: ``j`` in ``out[i]`` iff edge ``(j, i)``."""
        out: list[list[int]] = [[] for _ in self.nodes]
        for src, dst in self.edges:
            out[dst].append(src)
        return out

    def entity_nodes(self) -> list[Node]:
        return [n for n in self.nodes if n.kind == ENTITY]

    def predicate_nodes(self) -> list[Node]:
        return [n for n in self.nodes if n.kind == PREDICATE]


@dataclass
class SegGraphSet:
    subgraphs: list[KnowledgeGraph] = field(default_factory=list)
    cross_paragraph_entity_map: dict[str, list[tuple[int, int]]] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.subgraphs)

    @property
    def is_empty(self) -> bool:
        return all(g.is_empty for g in self.subgraphs)


# ---------------------------------------------------------------------------
# triple filtering


def _norm(span: MentionSpan) -> str:
    return span.surface.lower()


def _overlap(a: MentionSpan, b: MentionSpan) -> bool:
    return bool(set(a.surface.lower().split()) & set(b.surface.lower().split()))


def filter_triples(triples: Sequence[Triple], max_words: int = MAX_ARGUMENT_WORDS) -> list[Triple]:
    """Drop long-argument triples and keep the longer of near-duplicate pairs.

    Two triples are near-duplicates when predicate and one argument match
    (case-insensitive surface) and the remaining arguments share at least one
    lowercased token. The triple whose differing argument has more words
    survives; on equal length the one whose argument starts earlier wins.
    """
    kept = [t for t in triples if n_words(t.subject.surface) <= max_words and n_words(t.object.surface) <= max_words]

    def beats(u: Triple, v: Triple, iu: int, iv: int) -> bool:
        # does u eliminate v?
        if _norm(u.predicate) != _norm(v.predicate):
            return False
        if _norm(u.subject) == _norm(v.subject) and _norm(u.object) != _norm(v.object):
            a, b = u.object, v.object
        elif _norm(u.object) == _norm(v.object) and _norm(u.subject) != _norm(v.subject):
            a, b = u.subject, v.subject
        else:
            return False
        if not _overlap(a, b):
            return False
        la, lb = n_words(a.surface), n_words(b.surface)
        if la != lb:
            return la > lb
        return (a.start, iu) < (b.start, iv)

    out = []
    for iv, v in enumerate(kept):
        if not any(beats(u, v, iu, iv) for iu, u in enumerate(kept) if iu != iv):
            out.append(v)
    return out


def prepare_document(doc: AnnotatedDocument, max_words: int = MAX_ARGUMENT_WORDS) -> AnnotatedDocument:
    """The document with its triples passed through :func:`filter_triples`."""
    return dataclasses.replace(doc, triples=tuple(filter_triples(doc.triples, max_words)))


# ---------------------------------------------------------------------------
# graph building


def _chain_index(doc: AnnotatedDocument) -> dict[tuple[int, int], int]:
    index: dict[tuple[int, int], int] = {}
    for c, chain in enumerate(doc.coref_chains):
        for m in chain:
            index.setdefault(m.key, c)
    return index


def _assemble(triples: Iterable[Triple], chain_of: dict[tuple[int, int], int]) -> KnowledgeGraph:
    nodes: list[Node] = []
    edges: list[tuple[int, int]] = []
    by_key: dict[tuple, int] = {}

    def entity(span: MentionSpan) -> int:
        chain = chain_of.get(span.key)
        key = ("chain", chain) if chain is not None else ("span", span.key)
        idx = by_key.get(key)
        if idx is None:
            idx = len(nodes)
            by_key[key] = idx
            nodes.append(Node(idx, ENTITY, [], chain=chain))
        if all(m.key != span.key for m in nodes[idx].mentions):
            nodes[idx].mentions.append(span)
        return idx

    for t in triples:
        s = entity(t.subject)
        p = len(nodes)
        nodes.append(Node(p, PREDICATE, [t.predicate]))
        o = entity(t.object)
        edges.extend([(s, p), (p, o)])

    return KnowledgeGraph(nodes, _complete_edges(len(nodes), edges))


def _complete_edges(n: int, edges: Iterable[tuple[int, int]]) -> list[tuple[int, int]]:
    full = set()
    for a, b in edges:
        full.add((a, b))
        full.add((b, a))
    full.update((i, i) for i in range(n))
    return sorted(full)


def _components(n: int, edges: Iterable[tuple[int, int]]) -> list[list[int]]:
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for a, b in edges:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)
    groups: dict[int, list[int]] = defaultdict(list)
    for i in range(n):
        groups[find(i)].append(i)
    return list(groups.values())


def prune_small_components(graph: KnowledgeGraph, min_nodes: int) -> KnowledgeGraph:
    keep = sorted(i for comp in _components(len(graph.nodes), graph.edges) if len(comp) >= min_nodes for i in comp)
    remap = {old: new for new, old in enumerate(keep)}
    nodes = []
    for old in keep:
        n = graph.nodes[old]
        nodes.append(Node(remap[old], n.kind, list(n.mentions), chain=n.chain))
    edges = sorted((remap[a], remap[b]) for a, b in graph.edges if a in remap and b in remap)
    return KnowledgeGraph(nodes, edges, graph.paragraph_index)


def build_doc_graph(doc: AnnotatedDocument, min_nodes: int = DEFAULT_MIN_NODES) -> KnowledgeGraph:
    """Document-level graph; connected components below ``min_nodes`` are removed."""
    graph = _assemble(doc.triples, _chain_index(doc))
    return prune_small_components(graph, min_nodes)


def sentence_paragraphs(doc: AnnotatedDocument) -> list[int]:
    """Paragraph index of every sentence (by the sentence's first token); -1 if none."""
    out = []
    for s, _ in doc.sentences:
        para = -1
        for p, (ps, pe) in enumerate(doc.paragraphs):
            if ps <= s < pe:
                para = p
                break
        out.append(para)
    return out


def build_seg_graphs(doc: AnnotatedDocument) -> SegGraphSet:
    """One unpruned subgraph per paragraph plus the cross-paragraph entity map."""
    if not doc.paragraphs:
        return SegGraphSet()
    chain_of = _chain_index(doc)
    para_of_sentence = sentence_paragraphs(doc)
    per_para: list[list[Triple]] = [[] for _ in doc.paragraphs]
    for t in doc.triples:
        if 0 <= t.source_sentence < len(para_of_sentence):
            p = para_of_sentence[t.source_sentence]
        else:
            p = next((i for i, (ps, pe) in enumerate(doc.paragraphs) if ps <= t.predicate.start < pe), -1)
        if p >= 0:
            per_para[p].append(t)

    subgraphs = []
    entity_map: dict[str, list[tuple[int, int]]] = {}
    for p, triples in enumerate(per_para):
        g = _assemble(triples, chain_of)
        g.paragraph_index = p
        subgraphs.append(g)
        for node in g.nodes:
            if node.kind == ENTITY and node.chain is not None:
                entity_map.setdefault(f"chain:{node.chain}", []).append((p, node.node_id))
    return SegGraphSet(subgraphs, entity_map)


def label_node_salience(
    graph: KnowledgeGraph,
    reference_tokens: Sequence[str],
    doc_tokens: Sequence[str] | None = None,
    stop: frozenset[str] | set[str] | None = None,
) -> dict[int, int]:
    """Gold salience: 1 iff some content word of the node occurs in the reference.

    Matching is lowercase exact match, no stemming. Mention tokens come from
    ``doc_tokens`` when given, else from whitespace-splitting the surfaces.
    """
    stop = stopwords() if stop is None else stop
    ref = {t.lower() for t in reference_tokens}
    labels = {}
    for node in graph.nodes:
        hit = 0
        for m in node.mentions:
            toks = doc_tokens[m.start:m.end] if doc_tokens is not None else m.surface.split()
            if any(is_content_word(t, stop) and t.lower() in ref for t in toks):
                hit = 1
                break
        labels[node.node_id] = hit
    return labels


# ---------------------------------------------------------------------------
# dump format


def _mention_obj(m: MentionSpan) -> dict:
    return {"start": m.start, "end": m.end, "surface": m.surface}


def graph_to_record(graph: KnowledgeGraph, doc_id: str, salience: dict[int, int] | None = None) -> dict:
    salience = salience or {}
    record = {
        "doc_id": doc_id,
        "nodes": [
            {
                "id": n.node_id,
                "kind": n.kind,
                "mentions": [_mention_obj(m) for m in n.mentions],
                "count": n.mention_count,
                "salience": salience.get(n.node_id),
                **({"chain": n.chain} if n.chain is not None else {}),
            }
            for n in graph.nodes
        ],
        "edges": [[a, b] for a, b in graph.edges],
    }
    if graph.paragraph_index is not None:
        record["paragraph"] = graph.paragraph_index
    return record


def graph_from_record(record: dict) -> tuple[KnowledgeGraph, dict[int, int]]:
    nodes, salience = [], {}
    for obj in record["nodes"]:
        mentions = [MentionSpan(m["start"], m["end"], m.get("surface", "")) for m in obj["mentions"]]
        nodes.append(Node(int(obj["id"]), obj["kind"], mentions, chain=obj.get("chain")))
        if obj.get("salience") is not None:
            salience[int(obj["id"])] = int(obj["salience"])
    edges = [(int(a), int(b)) for a, b in record["edges"]]
    return KnowledgeGraph(nodes, edges, record.get("paragraph")), salience


def seg_to_record(seg: SegGraphSet, doc_id: str, saliences: list[dict[int, int]] | None = None) -> dict:
    saliences = saliences or [None] * len(seg.subgraphs)
    return {
        "doc_id": doc_id,
        "subgraphs": [graph_to_record(g, doc_id, s) for g, s in zip(seg.subgraphs, saliences)],
        "entity_map": {k: [list(e) for e in v] for k, v in seg.cross_paragraph_entity_map.items()},
    }


def seg_from_record(record: dict) -> tuple[SegGraphSet, list[dict[int, int]]]:
    graphs, saliences = [], []
    for sub in record["subgraphs"]:
        g, s = graph_from_record(sub)
        graphs.append(g)
        saliences.append(s)
    emap = {k: [tuple(e) for e in v] for k, v in record.get("entity_map", {}).items()}
    return SegGraphSet(graphs, emap), saliences


def dumps(record: dict) -> str:
    return json.dumps(record, sort_keys=True)


# ---------------------------------------------------------------------------
# corpus statistics


@dataclass
class GraphStats:
    """Corpus averages of document length and graph size.

    Document-graph counts are per document; segment-graph counts are per
    paragraph, pooled over every paragraph of the corpus.
    """

    documents: int = 0
    words: float = 0.0
    doc_arguments: float = 0.0
    doc_predicates: float = 0.0
    para_arguments: float = 0.0
    para_predicates: float = 0.0
    paragraphs: float = 0.0

    HEADER = ("documents", "words", "doc_arguments", "doc_predicates", "para_arguments", "para_predicates", "paragraphs")

    def row(self) -> list:
        return [getattr(self, k) for k in self.HEADER]


def corpus_stats(
    docs: Sequence[AnnotatedDocument],
    doc_graphs: Sequence[KnowledgeGraph] | None = None,
    seg_graphs: Sequence[SegGraphSet] | None = None,
    min_nodes: int = DEFAULT_MIN_NODES,
) -> GraphStats:
    if not docs:
        return GraphStats()
    doc_graphs = doc_graphs if doc_graphs is not None else [build_doc_graph(prepare_document(d), min_nodes) for d in docs]
    seg_graphs = seg_graphs if seg_graphs is not None else [build_seg_graphs(prepare_document(d)) for d in docs]
    n = len(docs)
    n_para = sum(len(d.paragraphs) for d in docs)
    sub = [g for s in seg_graphs for g in s.subgraphs]
    return GraphStats(
        documents=n,
        words=sum(len(d.tokens) for d in docs) / n,
        doc_arguments=sum(len(g.entity_nodes()) for g in doc_graphs) / n,
        doc_predicates=sum(len(g.predicate_nodes()) for g in doc_graphs) / n,
        para_arguments=sum(len(g.entity_nodes()) for g in sub) / max(n_para, 1),
        para_predicates=sum(len(g.predicate_nodes()) for g in sub) / max(n_para, 1),
        paragraphs=n_para / n,
    )
