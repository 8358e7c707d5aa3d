"""Turn documents and their graphs into padded tensor batches."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import torch

from .data import AnnotatedDocument
from .kg import (
    DEFAULT_MIN_NODES,
    KnowledgeGraph,
    SegGraphSet,
    build_doc_graph,
    build_seg_graphs,
    label_node_salience,
    prepare_document,
)
from .vocab import Vocab

NOGRAPH, DOCGRAPH, SEGGRAPH = "nograph", "docgraph", "seggraph"
VARIANTS = (NOGRAPH, DOCGRAPH, SEGGRAPH)


@dataclass
class GraphFeatures:
    node_spans: list[list[tuple[int, int]]]
    counts: list[int]
    edges: list[tuple[int, int]]
    labels: Optional[list[int]] = None
    subgraph: Optional[list[int]] = None  # seg mode: paragraph of each node
    share: Optional[list[int]] = None  # seg mode: node reused for initialisation
    num_subgraphs: int = 0

    @property
    def num_nodes(self) -> int:
        return len(self.node_spans)


@dataclass
class Example:
    doc_id: str
    src_tokens: list[str]
    src_ids: list[int]
    src_ext: list[int]
    oovs: list[str]
    reference: list[str]
    tgt_in: list[int]
    tgt_out: list[int]
    graph: Optional[GraphFeatures] = None
    extra: dict = field(default_factory=dict)


def doc_graph_features(graph: KnowledgeGraph, salience: dict[int, int] | None = None) -> GraphFeatures:
    return GraphFeatures(
        node_spans=[[m.key for m in n.mentions] for n in graph.nodes],
        counts=[n.mention_count for n in graph.nodes],
        edges=list(graph.edges),
        labels=[salience.get(n.node_id, 0) for n in graph.nodes] if salience is not None else None,
    )


def seg_graph_features(seg: SegGraphSet, saliences: Sequence[dict[int, int]] | None = None) -> GraphFeatures:
    spans, counts, edges, labels, sub = [], [], [], [], []
    offsets = []
    for p, g in enumerate(seg.subgraphs):
        off = len(spans)
        offsets.append(off)
        for n in g.nodes:
            spans.append([m.key for m in n.mentions])
            counts.append(n.mention_count)
            sub.append(p)
            labels.append(saliences[p].get(n.node_id, 0) if saliences is not None else 0)
        edges.extend((a + off, b + off) for a, b in g.edges)
    share = list(range(len(spans)))
    for entries in seg.cross_paragraph_entity_map.values():
        flat = sorted(offsets[p] + i for p, i in entries)
        for idx in flat[1:]:
            share[idx] = flat[0]
    return GraphFeatures(
        node_spans=spans,
        counts=counts,
        edges=edges,
        labels=labels if saliences is not None else None,
        subgraph=sub,
        share=share,
        num_subgraphs=len(seg.subgraphs),
    )


def make_example(
    doc: AnnotatedDocument,
    vocab: Vocab,
    graph: GraphFeatures | None = None,
    reference: Sequence[str] | None = None,
) -> Example:
    src = list(doc.tokens)
    src_ext, oovs = vocab.extend(src)
    ref = list(doc.reference_tokens if reference is None else reference)
    return Example(
        doc_id=doc.doc_id,
        src_tokens=src,
        src_ids=vocab.ids(src),
        src_ext=src_ext,
        oovs=oovs,
        reference=ref,
        tgt_in=[vocab.bos_id] + vocab.ids(ref),
        tgt_out=vocab.target_ids(ref, oovs) + [vocab.eos_id],
        graph=graph,
    )


def graph_features_for(doc: AnnotatedDocument, variant: str, min_nodes: int = DEFAULT_MIN_NODES) -> GraphFeatures | None:
    """Build the graph input (with gold salience labels) for one document."""
    doc = prepare_document(doc)
    if variant == DOCGRAPH:
        g = build_doc_graph(doc, min_nodes)
        return doc_graph_features(g, label_node_salience(g, doc.reference_tokens, doc.tokens))
    if variant == SEGGRAPH:
        seg = build_seg_graphs(doc)
        labels = [label_node_salience(g, doc.reference_tokens, doc.tokens) for g in seg.subgraphs]
        return seg_graph_features(seg, labels)
    if variant == NOGRAPH:
        return None
    raise ValueError(f"unknown variant {variant!r}")


def build_examples(docs: Sequence[AnnotatedDocument], vocab: Vocab, variant: str,
                   min_nodes: int = DEFAULT_MIN_NODES) -> list[Example]:
    return [make_example(d, vocab, graph_features_for(d, variant, min_nodes)) for d in docs]


@dataclass
class Batch:
    doc_ids: list[str]
    src_ids: torch.Tensor  # B x T
    src_ext: torch.Tensor
    src_mask: torch.Tensor
    lengths: torch.Tensor
    oovs: list[list[str]]
    max_oov: int
    tgt_in: torch.Tensor  # B x L
    tgt_out: torch.Tensor
    tgt_mask: torch.Tensor
    references: list[list[str]]
    # graph part (absent for nograph)
    pool: Optional[torch.Tensor] = None  # B x N x T
    counts: Optional[torch.Tensor] = None
    adjacency: Optional[torch.Tensor] = None  # B x N x N
    node_mask: Optional[torch.Tensor] = None
    labels: Optional[torch.Tensor] = None
    has_graph: Optional[torch.Tensor] = None
    node_subgraph: Optional[torch.Tensor] = None
    share: Optional[torch.Tensor] = None
    subgraph_mask: Optional[torch.Tensor] = None

    @property
    def size(self) -> int:
        return len(self.doc_ids)


def _pad(rows, value=0, dtype=torch.long):
    width = max((len(r) for r in rows), default=0)
    out = torch.full((len(rows), max(width, 1)), value, dtype=dtype)
    for i, r in enumerate(rows):
        if r:
            out[i, : len(r)] = torch.tensor(r, dtype=dtype)
    return out


def collate(examples: Sequence[Example], dtype=torch.float32) -> Batch:
    B = len(examples)
    src_ids = _pad([e.src_ids for e in examples])
    lengths = torch.tensor([len(e.src_ids) for e in examples])
    T = src_ids.size(1)
    src_mask = torch.arange(T).unsqueeze(0) < lengths.unsqueeze(1)
    tgt_len = torch.tensor([len(e.tgt_out) for e in examples])
    tgt_out = _pad([e.tgt_out for e in examples])
    batch = Batch(
        doc_ids=[e.doc_id for e in examples],
        src_ids=src_ids,
        src_ext=_pad([e.src_ext for e in examples]),
        src_mask=src_mask,
        lengths=lengths,
        oovs=[e.oovs for e in examples],
        max_oov=max((len(e.oovs) for e in examples), default=0),
        tgt_in=_pad([e.tgt_in for e in examples]),
        tgt_out=tgt_out,
        tgt_mask=torch.arange(tgt_out.size(1)).unsqueeze(0) < tgt_len.unsqueeze(1),
        references=[e.reference for e in examples],
    )
    graphs = [e.graph for e in examples]
    if all(g is None for g in graphs):
        return batch

    N = max(max((g.num_nodes for g in graphs if g is not None), default=0), 1)
    pool = torch.zeros(B, N, T, dtype=dtype)
    counts = torch.ones(B, N, dtype=torch.long)
    adjacency = torch.eye(N, dtype=torch.bool).repeat(B, 1, 1)
    node_mask = torch.zeros(B, N, dtype=torch.bool)
    labels = torch.zeros(B, N, dtype=dtype)
    subgraph = torch.zeros(B, N, dtype=torch.long)
    share = torch.arange(N).repeat(B, 1)
    P = max(max((g.num_subgraphs for g in graphs if g is not None), default=0), 1)
    subgraph_mask = torch.zeros(B, P, dtype=torch.bool)
    for b, g in enumerate(graphs):
        if g is None or g.num_nodes == 0:
            if g is not None and g.num_subgraphs:
                subgraph_mask[b, : g.num_subgraphs] = True
            continue
        n = g.num_nodes
        node_mask[b, :n] = True
        counts[b, :n] = torch.tensor(g.counts)
        for i, spans in enumerate(g.node_spans):
            idx = [k for s, e in spans for k in range(s, e) if k < T]
            if not idx:
                raise ValueError(f"node {i} of {examples[b].doc_id!r} has no in-range mention token")
            for k in idx:
                pool[b, i, k] += 1.0
            pool[b, i] /= len(idx)
        for src, dst in g.edges:
            adjacency[b, dst, src] = True
        if g.labels is not None:
            labels[b, :n] = torch.tensor(g.labels, dtype=dtype)
        if g.subgraph is not None:
            subgraph[b, :n] = torch.tensor(g.subgraph)
            share[b, :n] = torch.tensor(g.share)
            subgraph_mask[b, : g.num_subgraphs] = True
    batch.pool, batch.counts, batch.adjacency = pool, counts, adjacency
    batch.node_mask, batch.labels = node_mask, labels
    batch.has_graph = node_mask.any(1)
    if any(g is not None and g.subgraph is not None for g in graphs):
        batch.node_subgraph, batch.share, batch.subgraph_mask = subgraph, share, subgraph_mask
    return batch
