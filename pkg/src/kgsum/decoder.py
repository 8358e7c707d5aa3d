"""LSTM summary decoder attending to graph nodes and document tokens, with copy."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import torch
import torch.nn.functional as F
from torch import nn

from .encoders import EncoderStates, masked_softmax


class AdditiveAttention(nn.Module):
    """``softmax_i(u^T tanh(W_q q + W_k k_i [+ W_e e]))`` (Bahdanau-style)."""

    def __init__(self, query_dim: int, key_dim: int, attn_dim: int, extra_dim: int | None = None):
        super().__init__()
        self.W_query = nn.Linear(query_dim, attn_dim, bias=False)
        self.W_key = nn.Linear(key_dim, attn_dim, bias=True)
        self.W_extra = nn.Linear(extra_dim, attn_dim, bias=False) if extra_dim else None
        self.u = nn.Linear(attn_dim, 1, bias=False)

    def project_keys(self, keys: torch.Tensor) -> torch.Tensor:
        return self.W_key(keys)

    def forward(self, query, keys_proj, mask, extra=None):
        feat = keys_proj + self.W_query(query).unsqueeze(1)
        if extra is not None and self.W_extra is not None:
            feat = feat + self.W_extra(extra).unsqueeze(1)
        scores = self.u(torch.tanh(feat)).squeeze(-1)
        return masked_softmax(scores, mask)


def attend_graph(s_t, node_states, node_mask, attention: AdditiveAttention, keys_proj=None):
    """Additive attention over node states; returns ``(sum_i a_i v_i, a)``."""
    if keys_proj is None:
        keys_proj = attention.project_keys(node_states)
    attn = attention(s_t, keys_proj, node_mask)
    return torch.bmm(attn.unsqueeze(1), node_states).squeeze(1), attn


def combine_hierarchical(node_attn, subgraph_attn, node_subgraph):
    """Scale each node's weight by its subgraph's weight and renormalise over all nodes."""
    scaled = node_attn * torch.gather(subgraph_attn, 1, node_subgraph)
    total = scaled.sum(-1, keepdim=True)
    return scaled / total.clamp_min(1e-30)


def attend_graph_hierarchical(
    s_t, node_states, node_mask, node_subgraph, subgraph_states, subgraph_mask,
    node_attention: AdditiveAttention, subgraph_attention: AdditiveAttention,
    node_keys=None, subgraph_keys=None,
):
    if node_keys is None:
        node_keys = node_attention.project_keys(node_states)
    if subgraph_keys is None:
        subgraph_keys = subgraph_attention.project_keys(subgraph_states)
    a_v = node_attention(s_t, node_keys, node_mask)
    a_g = subgraph_attention(s_t, subgraph_keys, subgraph_mask)
    a_hat = combine_hierarchical(a_v, a_g, node_subgraph)
    ctx = torch.bmm(a_hat.unsqueeze(1), node_states).squeeze(1)
    return ctx, a_hat, a_g


def attend_document(s_t, token_states, token_mask, graph_context, attention: AdditiveAttention, keys_proj=None):
    """Additive attention over token states, also conditioned on the graph context.

    Returns ``(context, attention)``.
    """
    if keys_proj is None:
        keys_proj = attention.project_keys(token_states)
    attn = attention(s_t, keys_proj, token_mask, extra=graph_context)
    return torch.bmm(attn.unsqueeze(1), token_states).squeeze(1), attn


def mix_copy(p_vocab, p_copy, doc_attention, src_ext, extended_size: int):
    """``(1 - p_copy) * P_vocab`` plus ``p_copy * attention`` scattered onto source ids."""
    B, V = p_vocab.shape
    final = p_vocab.new_zeros(B, extended_size)
    final[:, :V] = (1.0 - p_copy) * p_vocab
    return final.scatter_add(1, src_ext, p_copy * doc_attention)


@dataclass
class StepDistribution:
    vocab_probs: torch.Tensor
    copy_prob: torch.Tensor
    doc_attention: torch.Tensor
    doc_context: torch.Tensor
    graph_attention: Optional[torch.Tensor]
    graph_context: torch.Tensor
    final: torch.Tensor
    subgraph_attention: Optional[torch.Tensor] = None


@dataclass
class DecoderState:
    hidden: torch.Tensor
    cell: torch.Tensor
    doc_context: torch.Tensor
    graph_context: torch.Tensor
    step: int = 0


@dataclass
class DecoderMemory:
    """Per-document encoder outputs with their attention keys precomputed."""

    enc: EncoderStates
    src_ext: torch.Tensor
    extended_size: int
    token_keys: torch.Tensor
    node_keys: Optional[torch.Tensor] = None
    subgraph_keys: Optional[torch.Tensor] = None


class Decoder(nn.Module):
    def __init__(self, embedding: nn.Embedding, hidden_dim: int, token_dim: int, graph_dim: int,
                 use_graph: bool, hierarchical: bool = False, attn_dim: int | None = None):
        super().__init__()
        self.embedding = embedding
        self.hidden_dim, self.token_dim, self.graph_dim = hidden_dim, token_dim, graph_dim
        self.use_graph, self.hierarchical = use_graph, hierarchical
        E = embedding.embedding_dim
        A = attn_dim or hidden_dim
        self.init_h = nn.Linear(token_dim, hidden_dim)
        self.init_c = nn.Linear(token_dim, hidden_dim)
        self.cell = nn.LSTMCell(E + token_dim + graph_dim, hidden_dim)
        if use_graph:
            self.graph_attention = AdditiveAttention(hidden_dim, graph_dim, A)
        if hierarchical:
            self.subgraph_attention = AdditiveAttention(hidden_dim, token_dim, A)
        # graph variants also condition token attention on the graph context
        self.doc_attention = AdditiveAttention(hidden_dim, token_dim, A, extra_dim=graph_dim if use_graph else None)
        feat = hidden_dim + token_dim + graph_dim
        # output weights are embedding @ out_proj, tied to the input embedding
        self.out_proj = nn.Linear(feat, E)
        self.out_bias = nn.Parameter(torch.zeros(embedding.num_embeddings))
        self.copy_gate = nn.Linear(feat + E, 1)

    @property
    def vocab_size(self) -> int:
        return self.embedding.num_embeddings

    def memory(self, enc: EncoderStates, src_ext, max_oov: int) -> DecoderMemory:
        mem = DecoderMemory(
            enc=enc,
            src_ext=src_ext,
            extended_size=self.vocab_size + max_oov,
            token_keys=self.doc_attention.project_keys(enc.token_states),
        )
        if self.use_graph and enc.node_states is not None:
            mem.node_keys = self.graph_attention.project_keys(enc.node_states)
            if self.hierarchical and enc.subgraph_states is not None:
                mem.subgraph_keys = self.subgraph_attention.project_keys(enc.subgraph_states)
        return mem

    def initial_state(self, enc: EncoderStates) -> DecoderState:
        B = enc.token_states.size(0)
        z = enc.token_states.new_zeros
        return DecoderState(
            hidden=torch.tanh(self.init_h(enc.final_state)),
            cell=self.init_c(enc.final_state),
            doc_context=z(B, self.token_dim),
            graph_context=z(B, self.graph_dim),
        )

    def input_ids(self, ext_ids: torch.Tensor, unk_id: int = 1) -> torch.Tensor:
        """Copied OOV tokens are fed back through the unknown-token embedding."""
        return torch.where(ext_ids >= self.vocab_size, torch.full_like(ext_ids, unk_id), ext_ids)

    def graph_step(self, s_t, mem: DecoderMemory):
        enc = mem.enc
        if not self.use_graph or enc.node_states is None:
            return s_t.new_zeros(s_t.size(0), self.graph_dim), None, None
        if self.hierarchical and enc.subgraph_states is not None:
            ctx, attn, sub_attn = attend_graph_hierarchical(
                s_t, enc.node_states, enc.node_mask, enc.node_subgraph,
                enc.subgraph_states, enc.subgraph_mask,
                self.graph_attention, self.subgraph_attention, mem.node_keys, mem.subgraph_keys,
            )
        else:
            ctx, attn = attend_graph(s_t, enc.node_states, enc.node_mask, self.graph_attention, mem.node_keys)
            sub_attn = None
        # documents without a graph keep a zero graph context
        ctx = ctx * enc.has_graph.unsqueeze(-1).to(ctx.dtype)
        return ctx, attn, sub_attn

    def step(self, prev_ids: torch.Tensor, state: DecoderState, mem: DecoderMemory):
        """One decoding step; ``prev_ids`` are in-vocabulary ids (B)."""
        if int(prev_ids.max()) >= self.vocab_size or int(prev_ids.min()) < 0:
            raise IndexError("previous token id outside the generation vocabulary")
        y = self.embedding(prev_ids)
        h, c = self.cell(torch.cat([y, state.doc_context, state.graph_context], -1), (state.hidden, state.cell))
        g_ctx, g_attn, sub_attn = self.graph_step(h, mem)
        d_ctx, d_attn = attend_document(
            h, mem.enc.token_states, mem.enc.token_mask,
            g_ctx if self.use_graph else None, self.doc_attention, mem.token_keys,
        )
        feat = torch.cat([h, d_ctx, g_ctx], -1)
        logits = F.linear(self.out_proj(feat), self.embedding.weight, self.out_bias)
        p_vocab = torch.softmax(logits, -1)
        p_copy = torch.sigmoid(self.copy_gate(torch.cat([feat, y], -1)))
        final = mix_copy(p_vocab, p_copy, d_attn, mem.src_ext, mem.extended_size)
        dist = StepDistribution(
            vocab_probs=p_vocab, copy_prob=p_copy.squeeze(-1), doc_attention=d_attn, doc_context=d_ctx,
            graph_attention=g_attn, graph_context=g_ctx, final=final, subgraph_attention=sub_attn,
        )
        return dist, DecoderState(h, c, d_ctx, g_ctx, state.step + 1)
