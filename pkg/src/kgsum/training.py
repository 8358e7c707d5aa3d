"""Maximum-likelihood training and self-critical policy-gradient fine-tuning."""

from __future__ import annotations

import copy
import csv
import logging
import math
import random
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Optional, Sequence

import torch
import torch.nn.functional as F

from .cloze import ClozeQuestion, QaScorer, cloze_reward
from .features import Example, collate
from .model import LOG_FLOOR, ModelOutput, SummarizationModel, save_checkpoint
from .rouge import check_weights, rouge_n, rouge_reward
from .vocab import Vocab

logger = logging.getLogger(__name__)

LOG_FIELDS = ("stage", "epoch", "step", "loss_seq", "loss_mask", "mean_reward")


class TrainingDiverged(RuntimeError):
    pass


@dataclass
class TrainingConfig:
    lr_ml: float = 1e-3
    lr_rl: float = 1e-4
    grad_clip: float = 2.0
    batch_size: int = 32
    epochs: int = 20
    rl_epochs: int = 5
    rl_patience: int = 2
    seed: int = 0
    eval_every: int = 1
    target_loss: Optional[float] = None  # stop ML once train per-token loss drops below
    max_steps: Optional[int] = None
    max_len: int = 120
    min_len: int = 10

    def __post_init__(self):
        for name in ("lr_ml", "lr_rl", "grad_clip", "batch_size", "epochs", "rl_epochs"):
            if getattr(self, name) < 0 or (name in ("grad_clip", "batch_size") and getattr(self, name) <= 0):
                raise ValueError(f"{name} must be positive")


@dataclass
class RewardConfig:
    rouge1_weight: float = 0.0
    rouge2_weight: float = 0.75
    cloze_weight: float = 0.05

    def __post_init__(self):
        check_weights(self.rouge1_weight, self.rouge2_weight)
        if self.cloze_weight < 0:
            raise ValueError("cloze_weight must be non-negative")


# ---------------------------------------------------------------------------
# losses


def loss_seq_from_probs(target_probs: torch.Tensor, mask: torch.Tensor | None = None) -> torch.Tensor:
    """Mean over documents of the per-token NLL of the target probabilities (B x L)."""
    nll = -torch.log(target_probs.clamp_min(LOG_FLOOR))
    if mask is None:
        mask = torch.ones_like(nll, dtype=torch.bool)
    return _per_doc_mean(nll * mask.to(nll.dtype), mask)


def _per_doc_mean(token_nll, mask):
    lengths = mask.sum(1).clamp(min=1).to(token_nll.dtype)
    return (token_nll.sum(1) / lengths).mean()


def loss_seq(out: ModelOutput) -> torch.Tensor:
    return _per_doc_mean(out.token_nll, out.tgt_mask)


def loss_mask(gates: torch.Tensor, labels: torch.Tensor, node_mask: torch.Tensor | None = None) -> torch.Tensor:
    """Binary cross-entropy of salience gates, averaged over every node in the batch."""
    if node_mask is None:
        node_mask = torch.ones_like(gates, dtype=torch.bool)
    if not bool(node_mask.any()):
        return gates.sum() * 0.0
    g = gates[node_mask].clamp(LOG_FLOOR, 1 - 1e-12) if gates.dtype == torch.float64 else gates[node_mask].clamp(1e-7, 1 - 1e-7)
    return F.binary_cross_entropy(g, labels[node_mask].to(g.dtype))


def ml_losses(out: ModelOutput) -> tuple[torch.Tensor, torch.Tensor]:
    seq = loss_seq(out)
    if out.gates is None:
        return seq, seq.new_zeros(())
    return seq, loss_mask(out.gates, out.labels, out.node_mask)


def policy_gradient_loss(sample_logprobs: torch.Tensor, sample_reward, greedy_reward) -> torch.Tensor:
    """``-(R(y^s) - R(y_hat)) * sum_t log p(y^s_t)``, averaged over the batch.

    ``sample_logprobs`` is B x L (zeros past the end); rewards are constants.
    """
    rs = torch.as_tensor(sample_reward, dtype=sample_logprobs.dtype)
    rg = torch.as_tensor(greedy_reward, dtype=sample_logprobs.dtype)
    advantage = (rs - rg).detach().reshape(-1)
    seq_logp = sample_logprobs.reshape(advantage.numel(), -1).sum(1)
    return -(advantage * seq_logp).mean()


# ---------------------------------------------------------------------------
# rewards


class CompositeReward:
    """ROUGE mixture plus ``cloze_weight`` times the cloze reward; ROUGE-only for documents without a bank."""

    def __init__(self, config: RewardConfig, banks: Mapping[str, Sequence[ClozeQuestion]] | None = None,
                 qa: QaScorer | None = None):
        self.config = config
        self.banks = banks or {}
        self.qa = qa
        self._warned: set[str] = set()

    def __call__(self, doc_id: str, tokens: Sequence[str], reference: Sequence[str]) -> float:
        cfg = self.config
        r = rouge_reward(tokens, reference, cfg.rouge1_weight, cfg.rouge2_weight)
        if cfg.cloze_weight == 0:
            return r
        questions = self.banks.get(doc_id)
        if not questions or self.qa is None:
            if doc_id not in self._warned:
                logger.warning("no cloze question bank for %s; using ROUGE-only reward", doc_id)
                self._warned.add(doc_id)
            return r
        return r + cfg.cloze_weight * cloze_reward(tokens, questions, self.qa)


def composite_reward(tokens, reference, questions, qa, config: RewardConfig) -> float:
    r = rouge_reward(tokens, reference, config.rouge1_weight, config.rouge2_weight)
    if config.cloze_weight and questions and qa is not None:
        r += config.cloze_weight * cloze_reward(tokens, questions, qa)
    return r


def self_critical_loss(sample, sample_logprobs, greedy, reference, cloze_questions, qa_scorer, reward_cfg):
    """Self-critical loss for one document given its sampled and greedy summaries."""
    rs = composite_reward(sample, reference, cloze_questions, qa_scorer, reward_cfg)
    rg = composite_reward(greedy, reference, cloze_questions, qa_scorer, reward_cfg)
    return policy_gradient_loss(sample_logprobs.reshape(1, -1), [rs], [rg])


# ---------------------------------------------------------------------------
# training loops


@dataclass
class TrainResult:
    history: list[dict] = field(default_factory=list)
    best_state: Optional[dict] = None
    best_metric: float = math.nan
    best_epoch: int = -1
    steps: int = 0


class TrainLog:
    """Tab-separated training log with a fixed column order."""

    def __init__(self, path: str | Path | None = None, append: bool = False):
        self.rows: list[dict] = []
        self.path = Path(path) if path else None
        if self.path and not append:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with open(self.path, "w", newline="") as fh:
                csv.writer(fh, delimiter="\t").writerow(LOG_FIELDS)

    def write(self, **row):
        row = {k: row.get(k, "") for k in LOG_FIELDS}
        self.rows.append(row)
        if self.path:
            with open(self.path, "a", newline="") as fh:
                csv.writer(fh, delimiter="\t").writerow([_fmt(row[k]) for k in LOG_FIELDS])


def _fmt(v):
    return f"{v:.6f}" if isinstance(v, float) else v


def batches(examples: Sequence[Example], batch_size: int, seed: int, epoch: int, shuffle: bool = True):
    order = list(range(len(examples)))
    if shuffle:
        random.Random(seed * 100003 + epoch).shuffle(order)
    for i in range(0, len(order), batch_size):
        yield [examples[j] for j in order[i:i + batch_size]]


def _dtype(model):
    return next(model.parameters()).dtype


@torch.no_grad()
def evaluate_ml(model: SummarizationModel, examples: Sequence[Example], batch_size: int = 32) -> dict:
    model.eval()
    seq_total = mask_total = 0.0
    n = 0
    for chunk in batches(examples, batch_size, 0, 0, shuffle=False):
        seq, msk = ml_losses(model(collate(chunk, dtype=_dtype(model))))
        seq_total += float(seq) * len(chunk)
        mask_total += float(msk) * len(chunk)
        n += len(chunk)
    model.train()
    n = max(n, 1)
    return {"loss_seq": seq_total / n, "loss_mask": mask_total / n, "loss": (seq_total + mask_total) / n}


def clip_gradients(model, max_norm: float) -> float:
    return float(torch.nn.utils.clip_grad_norm_(model.parameters(), max_norm))


def train_ml(
    model: SummarizationModel,
    train: Sequence[Example],
    valid: Sequence[Example] | None,
    config: TrainingConfig,
    out_dir: str | Path | None = None,
    log: TrainLog | None = None,
    resume: dict | None = None,
) -> TrainResult:
    """Minimise sequence NLL plus salience-mask BCE with Adam and gradient-norm clipping.

    The state with the best validation loss (training loss when no
    validation set is given) is kept in ``result.best_state`` and written to
    ``out_dir/best.pt``; ``out_dir/last.pt`` allows resuming.
    """
    torch.manual_seed(config.seed)
    log = log or TrainLog()
    opt = torch.optim.Adam(model.parameters(), lr=config.lr_ml)
    start_epoch, step = 0, 0
    result = TrainResult()
    if resume is not None:
        model.load_state_dict(resume["state_dict"])
        opt.load_state_dict(resume["optimizer"])
        start_epoch, step = resume["epoch"] + 1, resume["step"]
        result.best_metric = resume.get("best_metric", math.nan)
    model.train()
    dtype = _dtype(model)
    for epoch in range(start_epoch, config.epochs):
        seq_sum = mask_sum = 0.0
        n = 0
        for chunk in batches(train, config.batch_size, config.seed, epoch):
            out = model(collate(chunk, dtype=dtype))
            seq, msk = ml_losses(out)
            loss = seq + msk
            if not torch.isfinite(loss):
                raise TrainingDiverged(f"non-finite loss at epoch {epoch} step {step}: seq={seq.item()} mask={msk.item()}")
            opt.zero_grad()
            loss.backward()
            clip_gradients(model, config.grad_clip)
            opt.step()
            step += 1
            seq_sum += seq.item() * len(chunk)
            mask_sum += msk.item() * len(chunk)
            n += len(chunk)
            if config.max_steps is not None and step >= config.max_steps:
                break
        train_seq, train_mask = seq_sum / max(n, 1), mask_sum / max(n, 1)
        log.write(stage="ml", epoch=epoch, step=step, loss_seq=train_seq, loss_mask=train_mask)
        row = {"epoch": epoch, "step": step, "loss_seq": train_seq, "loss_mask": train_mask}
        if valid and (epoch + 1) % config.eval_every == 0:
            val = evaluate_ml(model, valid, config.batch_size)
            row.update({f"val_{k}": v for k, v in val.items()})
            metric = val["loss"]
            log.write(stage="ml-valid", epoch=epoch, step=step, loss_seq=val["loss_seq"], loss_mask=val["loss_mask"])
        else:
            metric = train_seq + train_mask
        result.history.append(row)
        if math.isnan(result.best_metric) or metric < result.best_metric:
            result.best_metric, result.best_epoch = metric, epoch
            result.best_state = copy.deepcopy(model.state_dict())
            if out_dir:
                save_checkpoint(Path(out_dir) / "best.pt", model, {"epoch": epoch, "metric": metric})
        if out_dir:
            save_checkpoint(Path(out_dir) / "last.pt", model, {
                "epoch": epoch, "step": step, "optimizer": opt.state_dict(), "best_metric": result.best_metric,
            })
        done_steps = config.max_steps is not None and step >= config.max_steps
        if (config.target_loss is not None and train_seq < config.target_loss) or done_steps:
            break
    result.steps = step
    return result


RewardFn = Callable[[str, Sequence[str], Sequence[str]], float]


def decode_tokens(vocab: Vocab, ids: Sequence[Sequence[int]], oovs: Sequence[Sequence[str]]) -> list[list[str]]:
    return [vocab.to_tokens(seq, o) for seq, o in zip(ids, oovs)]


@torch.no_grad()
def mean_greedy_reward(model, examples, vocab, reward_fn: RewardFn, config: TrainingConfig) -> float:
    model.eval()
    total, n = 0.0, 0
    for chunk in batches(examples, config.batch_size, 0, 0, shuffle=False):
        batch = collate(chunk, dtype=_dtype(model))
        ids = model.decode_greedy(batch, config.max_len, config.min_len)
        for ex, toks in zip(chunk, decode_tokens(vocab, ids, batch.oovs)):
            total += reward_fn(ex.doc_id, toks, ex.reference)
            n += 1
    model.train()
    return total / max(n, 1)


def mean_greedy_rouge1(model, examples, vocab, config: TrainingConfig) -> float:
    return mean_greedy_reward(model, examples, vocab, lambda _d, t, r: rouge_n(t, r, 1).f1, config)


def train_rl(
    model: SummarizationModel,
    train: Sequence[Example],
    vocab: Vocab,
    reward_fn: RewardFn,
    config: TrainingConfig,
    valid: Sequence[Example] | None = None,
    out_dir: str | Path | None = None,
    log: TrainLog | None = None,
    on_step: Callable[[int, SummarizationModel], None] | None = None,
) -> TrainResult:
    """Self-critical fine-tuning: one sampled and one greedy rollout per document.

    Keeps the state with the best mean greedy reward on ``valid`` (or the
    training set) and stops after ``rl_patience`` epochs without improvement.
    """
    torch.manual_seed(config.seed)
    log = log or TrainLog()
    opt = torch.optim.Adam(model.parameters(), lr=config.lr_rl)
    gen = torch.Generator().manual_seed(config.seed)
    result = TrainResult()
    held = valid if valid else train
    result.best_metric = mean_greedy_reward(model, held, vocab, reward_fn, config)
    result.best_state = copy.deepcopy(model.state_dict())
    stale, step = 0, 0
    dtype = _dtype(model)
    for epoch in range(config.rl_epochs):
        rewards = []
        for chunk in batches(train, config.batch_size, config.seed, epoch):
            batch = collate(chunk, dtype=dtype)
            model.eval()
            greedy_ids = model.decode_greedy(batch, config.max_len, config.min_len)
            model.train()
            sample_ids, logp = model.decode_sample(batch, config.max_len, generator=gen, min_len=config.min_len)
            greedy = decode_tokens(vocab, greedy_ids, batch.oovs)
            sampled = decode_tokens(vocab, sample_ids, batch.oovs)
            rg = [reward_fn(ex.doc_id, g, ex.reference) for ex, g in zip(chunk, greedy)]
            rs = [reward_fn(ex.doc_id, s, ex.reference) for ex, s in zip(chunk, sampled)]
            loss = policy_gradient_loss(logp, rs, rg)
            if not torch.isfinite(loss):
                raise TrainingDiverged(f"non-finite RL loss at step {step}")
            opt.zero_grad()
            loss.backward()
            clip_gradients(model, config.grad_clip)
            opt.step()
            step += 1
            rewards.extend(rg)
            if on_step is not None:
                on_step(step, model)
            if config.max_steps is not None and step >= config.max_steps:
                break
        mean_r = sum(rewards) / max(len(rewards), 1)
        log.write(stage="rl", epoch=epoch, step=step, mean_reward=mean_r)
        metric = mean_greedy_reward(model, held, vocab, reward_fn, config)
        log.write(stage="rl-valid", epoch=epoch, step=step, mean_reward=metric)
        result.history.append({"epoch": epoch, "step": step, "mean_greedy_reward": mean_r, "valid_reward": metric})
        if metric > result.best_metric:
            result.best_metric, result.best_epoch, stale = metric, epoch, 0
            result.best_state = copy.deepcopy(model.state_dict())
            if out_dir:
                save_checkpoint(Path(out_dir) / "best_rl.pt", model, {"epoch": epoch, "metric": metric})
        else:
            stale += 1
        if stale >= config.rl_patience or (config.max_steps is not None and step >= config.max_steps):
            break
    result.steps = step
    return result


def config_dict(cfg) -> dict:
    return asdict(cfg)
