"""Document and graph encoders.

All modules work on padded batches: ``B`` documents, ``T`` tokens, ``N`` graph
nodes, ``P`` paragraph subgraphs. Padding positions are excluded through
boolean masks.
"""

from __future__ import annotations

import abc
from dataclasses import dataclass
from typing import Optional

import torch
from torch import nn
from torch.nn.utils.rnn import pack_padded_sequence, pad_packed_sequence

MAX_COUNT_BUCKET = 10


@dataclass(frozen=True)
class GraphEncoderConfig:
    num_heads: int = 4
    head_dim: int = 72
    num_layers: int = 2

    @property
    def node_dim(self) -> int:
        return self.num_heads * self.head_dim


class EmbeddingProvider(nn.Module, abc.ABC):
    """Maps token ids to vectors for the document encoder."""

    dim: int

    @abc.abstractmethod
    def embed(self, token_ids: torch.Tensor) -> torch.Tensor:
        ...

    def forward(self, token_ids: torch.Tensor) -> torch.Tensor:
        return self.embed(token_ids)


class LookupEmbedding(EmbeddingProvider):
    """Trainable lookup table; may wrap an existing (shared) ``nn.Embedding``."""

    def __init__(self, table: nn.Embedding):
        super().__init__()
        self.table = table
        self.dim = table.embedding_dim

    def embed(self, token_ids):
        return self.table(token_ids)


@dataclass
class EncoderStates:
    token_states: torch.Tensor  # B x T x d_h
    token_mask: torch.Tensor  # B x T
    final_state: torch.Tensor  # B x d_h
    node_states: Optional[torch.Tensor] = None  # B x N x d_v
    node_init: Optional[torch.Tensor] = None
    node_mask: Optional[torch.Tensor] = None
    masks: Optional[torch.Tensor] = None  # salience gates, B x N
    node_subgraph: Optional[torch.Tensor] = None  # B x N subgraph index (seg mode)
    subgraph_states: Optional[torch.Tensor] = None  # B x P x d_h
    subgraph_mask: Optional[torch.Tensor] = None
    has_graph: Optional[torch.Tensor] = None  # B


class DocumentEncoder(nn.Module):
    """Single-layer BiLSTM over provider embeddings."""

    def __init__(self, provider: EmbeddingProvider, hidden_dim: int = 256):
        super().__init__()
        if hidden_dim % 2:
            raise ValueError("hidden_dim must be even (split across directions)")
        self.provider = provider
        self.hidden_dim = hidden_dim
        self.rnn = nn.LSTM(provider.dim, hidden_dim // 2, batch_first=True, bidirectional=True)

    def forward(self, token_ids: torch.Tensor, lengths: torch.Tensor):
        """Returns ``(token_states B x T x d_h, final B x d_h)``."""
        if token_ids.size(1) == 0 or int(lengths.min()) <= 0:
            raise ValueError("cannot encode an empty token sequence")
        emb = self.provider.embed(token_ids)
        packed = pack_padded_sequence(emb, lengths.cpu(), batch_first=True, enforce_sorted=False)
        out, (h, _) = self.rnn(packed)
        out, _ = pad_packed_sequence(out, batch_first=True, total_length=token_ids.size(1))
        final = torch.cat([h[0], h[1]], dim=-1)
        return out, final


def encode_document(tokens: list[str], vocab, encoder: DocumentEncoder) -> torch.Tensor:
    """Convenience wrapper: one token list -> ``T x d_h`` states."""
    if not tokens:
        raise ValueError("cannot encode an empty token sequence")
    ids = torch.tensor([[vocab.id(t) for t in tokens]])
    states, _ = encoder(ids, torch.tensor([len(tokens)]))
    return states[0]


def masked_softmax(scores: torch.Tensor, mask: torch.Tensor, dim: int = -1) -> torch.Tensor:
    # rows with no valid entry come out all-zero (no NaN in forward or backward)
    mask = mask.expand_as(scores)
    any_valid = mask.any(dim=dim, keepdim=True)
    scores = scores.masked_fill(~mask, float("-inf")).masked_fill(~any_valid, 0.0)
    return torch.softmax(scores, dim=dim) * any_valid


class GraphAttentionLayer(nn.Module):
    """Multi-head dot-product attention over graph neighbourhoods with a residual.

    Per head, node ``i`` attends over its in-neighbours ``j`` with weights
    ``softmax_j(query(v_i) . key(v_j))``; the layer returns ``v_i`` plus the
    concatenated per-head weighted sums of ``value(v_j)``.
    """

    def __init__(self, node_dim: int, num_heads: int, head_dim: int):
        super().__init__()
        if num_heads * head_dim != node_dim:
            raise ValueError("node_dim must equal num_heads * head_dim")
        self.num_heads, self.head_dim = num_heads, head_dim
        bound = node_dim ** -0.5
        self.value_proj = nn.Parameter(torch.empty(num_heads, head_dim, node_dim).uniform_(-bound, bound))
        self.query_proj = nn.Parameter(torch.empty(num_heads, head_dim, node_dim).uniform_(-bound, bound))
        self.key_proj = nn.Parameter(torch.empty(num_heads, head_dim, node_dim).uniform_(-bound, bound))

    def forward(self, nodes: torch.Tensor, adjacency: torch.Tensor, return_attention: bool = False):
        # nodes: B x N x D, adjacency: B x N x N (adjacency[b, i, j] -> j in N(i))
        q = torch.einsum("hdk,bnk->bhnd", self.query_proj, nodes)
        k = torch.einsum("hdk,bnk->bhnd", self.key_proj, nodes)
        v = torch.einsum("hdk,bnk->bhnd", self.value_proj, nodes)
        scores = torch.einsum("bhid,bhjd->bhij", q, k)
        alpha = masked_softmax(scores, adjacency.unsqueeze(1))
        heads = torch.einsum("bhij,bhjd->bihd", alpha, v)
        out = nodes + heads.reshape(nodes.shape)
        return (out, alpha) if return_attention else out


class GraphEncoder(nn.Module):
    """Node initialisation, salience gate and the residual attention stack."""

    def __init__(self, token_dim: int, config: GraphEncoderConfig):
        super().__init__()
        self.config = config
        d = config.node_dim
        self.node_proj = nn.Linear(token_dim, d)
        self.count_embedding = nn.Embedding(MAX_COUNT_BUCKET + 1, d)
        self.salience_weight = nn.Parameter(torch.empty(d).uniform_(-d ** -0.5, d ** -0.5))
        self.layers = nn.ModuleList(
            GraphAttentionLayer(d, config.num_heads, config.head_dim) for _ in range(config.num_layers)
        )

    def init_nodes(self, token_states, pool, counts, share_index=None):
        """``proj(mean of mention token states) + count_embedding(min(count, 10))``.

        ``pool`` is a B x N x T row-normalised mention matrix. ``share_index``
        (B x N) redirects each node to the node whose initialisation it reuses.
        """
        mean = torch.bmm(pool, token_states)
        buckets = counts.clamp(min=1, max=MAX_COUNT_BUCKET)
        init = self.node_proj(mean) + self.count_embedding(buckets)
        if share_index is not None:
            init = torch.gather(init, 1, share_index.unsqueeze(-1).expand_as(init))
        return init

    def attend(self, nodes, adjacency):
        for layer in self.layers:
            nodes = layer(nodes, adjacency)
        return nodes

    def forward(self, token_states, pool, counts, adjacency, share_index=None):
        init = self.init_nodes(token_states, pool, counts, share_index)
        masked, gates = apply_salience_mask(init, self.salience_weight)
        return init, gates, self.attend(masked, adjacency)


def apply_salience_mask(nodes: torch.Tensor, weight: torch.Tensor):
    """Soft gate ``m = sigmoid(weight . v)``; returns ``(m * v, m)``."""
    gates = torch.sigmoid(nodes @ weight)
    return nodes * gates.unsqueeze(-1), gates


def graph_attention_stack(nodes: torch.Tensor, adjacency: torch.Tensor, layers) -> torch.Tensor:
    """Unbatched helper: ``nodes`` N x D, ``adjacency`` N x N."""
    x = nodes.unsqueeze(0)
    adj = adjacency.unsqueeze(0)
    for layer in layers:
        x = layer(x, adj)
    return x[0]


def masked_max_pool(node_states, node_subgraph, node_mask, num_subgraphs: int):
    """Elementwise max over the nodes of each subgraph -> B x P x D, plus emptiness mask."""
    B, N, D = node_states.shape
    member = (node_subgraph.unsqueeze(1) == torch.arange(num_subgraphs, device=node_states.device).view(1, -1, 1))
    member = member & node_mask.unsqueeze(1)  # B x P x N
    expanded = node_states.unsqueeze(1).expand(B, num_subgraphs, N, D)
    filled = expanded.masked_fill(~member.unsqueeze(-1), float("-inf"))
    pooled = filled.max(dim=2).values
    nonempty = member.any(dim=2)
    pooled = torch.where(nonempty.unsqueeze(-1), pooled, torch.zeros_like(pooled))
    return pooled, nonempty


class SegGraphEncoder(nn.Module):
    """Pools each paragraph subgraph and runs a BiLSTM across paragraphs."""

    def __init__(self, node_dim: int, hidden_dim: int):
        super().__init__()
        self.null_subgraph = nn.Parameter(torch.randn(node_dim) * 0.1)
        self.rnn = nn.LSTM(node_dim, hidden_dim // 2, batch_first=True, bidirectional=True)

    def forward(self, node_states, node_subgraph, node_mask, subgraph_mask):
        P = subgraph_mask.size(1)
        pooled, nonempty = masked_max_pool(node_states, node_subgraph, node_mask, P)
        seq = torch.where(nonempty.unsqueeze(-1), pooled, self.null_subgraph.expand_as(pooled))
        lengths = subgraph_mask.sum(1).clamp(min=1)
        packed = pack_padded_sequence(seq, lengths.cpu(), batch_first=True, enforce_sorted=False)
        out, _ = self.rnn(packed)
        out, _ = pad_packed_sequence(out, batch_first=True, total_length=P)
        return out, pooled
