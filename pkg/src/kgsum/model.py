"""The full summariser: encoders + decoder, teacher forcing and decoding."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import torch
from torch import nn

from .decoder import Decoder
from .encoders import (
    DocumentEncoder,
    EmbeddingProvider,
    EncoderStates,
    GraphEncoder,
    GraphEncoderConfig,
    LookupEmbedding,
    SegGraphEncoder,
)
from .features import DOCGRAPH, NOGRAPH, SEGGRAPH, VARIANTS, Batch

CHECKPOINT_VERSION = 1
LOG_FLOOR = 1e-12


@dataclass
class ModelConfig:
    vocab_size: int
    variant: str = DOCGRAPH
    embed_dim: int = 128
    hidden_dim: int = 256  # document encoder, 128 per direction
    decoder_dim: int = 256
    num_heads: int = 4
    head_dim: int = 72
    num_layers: int = 2
    attn_dim: Optional[int] = None

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}; expected one of {VARIANTS}")

    @property
    def graph(self) -> GraphEncoderConfig:
        return GraphEncoderConfig(self.num_heads, self.head_dim, self.num_layers)

    @property
    def node_dim(self) -> int:
        return self.num_heads * self.head_dim

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class ModelOutput:
    token_nll: torch.Tensor  # B x L, zero on padding
    tgt_mask: torch.Tensor
    gates: Optional[torch.Tensor] = None  # B x N
    node_mask: Optional[torch.Tensor] = None
    labels: Optional[torch.Tensor] = None
    steps: list = field(default_factory=list)


class SummarizationModel(nn.Module):
    def __init__(self, config: ModelConfig, provider: EmbeddingProvider | None = None):
        super().__init__()
        self.config = config
        self.embedding = nn.Embedding(config.vocab_size, config.embed_dim)
        nn.init.normal_(self.embedding.weight, std=config.embed_dim ** -0.5)
        self.provider = provider if provider is not None else LookupEmbedding(self.embedding)
        self.doc_encoder = DocumentEncoder(self.provider, config.hidden_dim)
        use_graph = config.variant != NOGRAPH
        if use_graph:
            self.graph_encoder = GraphEncoder(config.hidden_dim, config.graph)
        if config.variant == SEGGRAPH:
            self.seg_encoder = SegGraphEncoder(config.node_dim, config.hidden_dim)
        self.decoder = Decoder(
            self.embedding,
            hidden_dim=config.decoder_dim,
            token_dim=config.hidden_dim,
            graph_dim=config.node_dim,
            use_graph=use_graph,
            hierarchical=config.variant == SEGGRAPH,
            attn_dim=config.attn_dim,
        )

    @property
    def uses_graph(self) -> bool:
        return self.config.variant != NOGRAPH

    # ------------------------------------------------------------------
    def encode(self, batch: Batch) -> EncoderStates:
        token_states, final = self.doc_encoder(batch.src_ids, batch.lengths)
        enc = EncoderStates(token_states=token_states, token_mask=batch.src_mask, final_state=final)
        if not self.uses_graph or batch.pool is None:
            return enc
        seg = self.config.variant == SEGGRAPH
        share = batch.share if seg else None
        init, gates, nodes = self.graph_encoder(token_states, batch.pool.to(token_states.dtype),
                                                batch.counts, batch.adjacency, share)
        enc.node_init, enc.masks, enc.node_states = init, gates, nodes
        enc.node_mask, enc.has_graph = batch.node_mask, batch.has_graph
        if seg and batch.node_subgraph is not None:
            sub_states, _ = self.seg_encoder(nodes, batch.node_subgraph, batch.node_mask, batch.subgraph_mask)
            enc.subgraph_states = sub_states
            enc.subgraph_mask = batch.subgraph_mask
            enc.node_subgraph = batch.node_subgraph
        return enc

    def forward(self, batch: Batch, keep_steps: bool = False) -> ModelOutput:
        """Teacher-forced pass; returns per-token NLL under the copy-mixed distribution."""
        enc = self.encode(batch)
        dec = self.decoder
        mem = dec.memory(enc, batch.src_ext, batch.max_oov)
        state = dec.initial_state(enc)
        nll, steps = [], []
        for t in range(batch.tgt_in.size(1)):
            dist, state = dec.step(dec.input_ids(batch.tgt_in[:, t]), state, mem)
            p = dist.final.gather(1, batch.tgt_out[:, t : t + 1]).squeeze(1)
            nll.append(-torch.log(p.clamp_min(LOG_FLOOR)))
            if keep_steps:
                steps.append(dist)
        token_nll = torch.stack(nll, 1) * batch.tgt_mask.to(enc.token_states.dtype)
        out = ModelOutput(token_nll=token_nll, tgt_mask=batch.tgt_mask, steps=steps)
        if enc.masks is not None:
            out.gates, out.node_mask, out.labels = enc.masks, batch.node_mask, batch.labels
        return out

    # ------------------------------------------------------------------
    @torch.no_grad()
    def decode_greedy(self, batch: Batch, max_len: int = 120, min_len: int = 10, eos_id: int = 3):
        """Argmax decoding; the end symbol is suppressed before ``min_len`` tokens."""
        ids, _ = self._rollout(batch, max_len, min_len, eos_id, generator=None)
        return ids

    def decode_sample(self, batch: Batch, max_len: int = 120, generator: torch.Generator | None = None,
                      min_len: int = 0, eos_id: int = 3):
        """Ancestral sampling; returns token ids and per-step log-probabilities (B x L)."""
        if generator is None:
            generator = torch.Generator().manual_seed(0)
        return self._rollout(batch, max_len, min_len, eos_id, generator=generator)

    def _rollout(self, batch, max_len, min_len, eos_id, generator):
        dec = self.decoder
        enc = self.encode(batch)
        mem = dec.memory(enc, batch.src_ext, batch.max_oov)
        state = dec.initial_state(enc)
        B = batch.size
        prev = torch.full((B,), 2, dtype=torch.long)  # <bos>
        done = torch.zeros(B, dtype=torch.bool)
        outputs = [[] for _ in range(B)]
        logps = []
        for t in range(max_len):
            dist, state = dec.step(dec.input_ids(prev), state, mem)
            probs = dist.final
            if t < min_len:
                probs = probs.clone()
                probs[:, eos_id] = 0.0
                probs = probs / probs.sum(-1, keepdim=True)
            if generator is None:
                choice = probs.argmax(-1)
            else:
                choice = torch.multinomial(probs.detach(), 1, generator=generator).squeeze(1)
                lp = torch.log(probs.gather(1, choice.unsqueeze(1)).squeeze(1).clamp_min(LOG_FLOOR))
                logps.append(lp * (~done).to(lp.dtype))
            for b in range(B):
                if not done[b]:
                    if int(choice[b]) == eos_id:
                        done[b] = True
                    else:
                        outputs[b].append(int(choice[b]))
            if bool(done.all()):
                break
            prev = choice
        logp = torch.stack(logps, 1) if logps else None
        return outputs, logp

    @torch.no_grad()
    def decode_beam(self, batch: Batch, beam_size: int = 4, max_len: int = 120, min_len: int = 10, eos_id: int = 3):
        """Plain beam search, one document at a time (sum of log-probabilities)."""
        results = []
        for b in range(batch.size):
            results.append(self._beam_one(_select(batch, b), beam_size, max_len, min_len, eos_id))
        return results

    def _beam_one(self, batch, k, max_len, min_len, eos_id):
        dec = self.decoder
        enc = self.encode(batch)
        mem = dec.memory(enc, batch.src_ext, batch.max_oov)
        beams = [(0.0, [], dec.initial_state(enc), 2)]
        finished = []
        for t in range(max_len):
            candidates = []
            for score, toks, state, prev in beams:
                dist, new_state = dec.step(dec.input_ids(torch.tensor([prev])), state, mem)
                logp = torch.log(dist.final[0].clamp_min(LOG_FLOOR))
                if t < min_len:
                    logp[eos_id] = float("-inf")
                top = torch.topk(logp, k)
                for lp, idx in zip(top.values.tolist(), top.indices.tolist()):
                    candidates.append((score + lp, toks + [idx], new_state, idx))
            candidates.sort(key=lambda c: -c[0])
            beams = []
            for cand in candidates:
                if cand[3] == eos_id:
                    finished.append((cand[0], cand[1][:-1]))
                else:
                    beams.append(cand)
                if len(beams) == k:
                    break
            if len(finished) >= k or not beams:
                break
        finished.extend((s, toks) for s, toks, _, _ in beams)
        return max(finished, key=lambda f: f[0])[1]

    # ------------------------------------------------------------------
    def parameter_shapes(self) -> dict[str, list[int]]:
        return {name: list(p.shape) for name, p in self.named_parameters()}


def _select(batch: Batch, b: int) -> Batch:
    out = {}
    for name, value in vars(batch).items():
        if isinstance(value, torch.Tensor) and value.dim() > 0 and value.size(0) == batch.size:
            out[name] = value[b : b + 1]
        elif isinstance(value, list) and len(value) == batch.size:
            out[name] = value[b : b + 1]
        else:
            out[name] = value
    return Batch(**out)


def sequence_logprob(model: SummarizationModel, batch: Batch) -> torch.Tensor:
    """Sum of log-probabilities of ``batch.tgt_out`` under teacher forcing (B)."""
    out = model(batch)
    return -out.token_nll.sum(1)


# ---------------------------------------------------------------------------
# checkpoints


def save_checkpoint(path: str | Path, model: SummarizationModel, extra: dict | None = None) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    torch.save(
        {
            "format_version": CHECKPOINT_VERSION,
            "config": model.config.to_dict(),
            "shapes": model.parameter_shapes(),
            "state_dict": model.state_dict(),
            **(extra or {}),
        },
        path,
    )


def load_checkpoint(path: str | Path) -> tuple[SummarizationModel, dict]:
    blob = torch.load(path, map_location="cpu", weights_only=False)
    if blob.get("format_version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {blob.get('format_version')!r}")
    model = SummarizationModel(ModelConfig(**blob["config"]))
    model.load_state_dict(blob["state_dict"])
    return model, blob


def write_model_config(path: str | Path, config: ModelConfig) -> None:
    Path(path).write_text(json.dumps(config.to_dict(), indent=2, sort_keys=True), encoding="utf-8")
