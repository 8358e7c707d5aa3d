"""Command-line pipeline: preprocess, train, decode, evaluate, cloze-eval, stats.

Artifacts live under ``output_dir``::

    config.ini                      snapshot of the resolved configuration
    preprocess/vocab.json
    preprocess/<split>/graphs.jsonl, seggraphs.jsonl, salient_contexts.jsonl,
                       questions.jsonl, skipped.txt, stats.tsv
    qa/qa_scorer.pt, qa/metrics.json
    train_log.tsv
    checkpoints/<ml|rl>/config.json, params.pt, metrics.json
    decode/<split>.jsonl
    eval/<split>/rouge.tsv, cloze.tsv, plot_rouge.tsv, plot_cloze.tsv, report.json
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import fields
from pathlib import Path
from typing import Sequence

import torch

from . import __version__
from .cloze import (
    NgramFluencyScorer,
    OracleQaScorer,
    QaScorer,
    UniformQaScorer,
    build_questions,
    cloze_evaluate,
    load_qa_scorer,
    read_bank,
    read_contexts,
    save_qa_scorer,
    select_salient_context,
    train_qa_scorer,
    write_bank,
    write_contexts,
)
from .config import FIELD_TYPES, PipelineConfig, SECTIONS, build_config, read_ini
from .data import AnnotatedDocument, load_corpus
from .features import DOCGRAPH, NOGRAPH, Example, collate, doc_graph_features, make_example, seg_graph_features
from .kg import (
    GraphStats,
    build_doc_graph,
    build_seg_graphs,
    corpus_stats,
    dumps,
    graph_from_record,
    graph_to_record,
    label_node_salience,
    prepare_document,
    seg_from_record,
    seg_to_record,
)
from .model import SummarizationModel, load_checkpoint, save_checkpoint
from .rouge import rouge_all
from .training import CompositeReward, TrainLog, train_ml, train_rl
from .vocab import Vocab

logger = logging.getLogger("kgsum")

SPLITS = ("train", "valid", "test")


class PipelineError(RuntimeError):
    """A prerequisite is missing or an input is unusable."""


# ---------------------------------------------------------------------------
# paths and small IO helpers


class Layout:
    def __init__(self, root: str | Path):
        self.root = Path(root)

    def prep(self, split: str | None = None) -> Path:
        return self.root / "preprocess" / split if split else self.root / "preprocess"

    @property
    def vocab(self) -> Path:
        return self.prep() / "vocab.json"

    @property
    def qa_dir(self) -> Path:
        return self.root / "qa"

    @property
    def qa_scorer(self) -> Path:
        return self.qa_dir / "qa_scorer.pt"

    @property
    def train_log(self) -> Path:
        return self.root / "train_log.tsv"

    def checkpoint_dir(self, stage: str) -> Path:
        return self.root / "checkpoints" / stage

    def params(self, stage: str) -> Path:
        return self.checkpoint_dir(stage) / "params.pt"

    def decoded(self, split: str) -> Path:
        return self.root / "decode" / f"{split}.jsonl"

    def eval_dir(self, split: str) -> Path:
        return self.root / "eval" / split


def require(path: Path, what: str, hint: str) -> Path:
    if not path.exists():
        raise PipelineError(f"missing {what}: {path} ({hint})")
    return path


def write_tsv(path: Path, header: Sequence[str], rows: Sequence[Sequence]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, delimiter="\t", lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([f"{v:.6f}" if isinstance(v, float) else v for v in row])


def write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def read_jsonl(path: Path) -> list[dict]:
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


def split_path(cfg: PipelineConfig, split: str) -> str:
    return getattr(cfg, f"{split}_path")


def load_split(cfg: PipelineConfig, split: str, skipped: list[str] | None = None) -> list[AnnotatedDocument]:
    path = split_path(cfg, split)
    if not path:
        raise PipelineError(f"no {split} corpus configured (set {split}_path in [data] or --{split}-path)")
    require(Path(path), f"{split} corpus", f"check {split}_path")
    return load_corpus(path, cfg.truncate_len, strict=False, skipped=skipped)


def configured_splits(cfg: PipelineConfig) -> list[str]:
    return [s for s in SPLITS if split_path(cfg, s)]


# ---------------------------------------------------------------------------
# preprocess


def stats_table(rows: Sequence[tuple[str, GraphStats]]) -> str:
    header = ["split", "docs", "#word", "doc #arg", "doc #pre", "para #arg", "para #pre", "#para"]
    lines = ["\t".join(header)]
    for name, st in rows:
        lines.append("\t".join([name, str(st.documents)] + [f"{v:.2f}" for v in st.row()[1:]]))
    return "\n".join(lines)


def cmd_preprocess(cfg: PipelineConfig, args) -> int:
    layout = Layout(cfg.output_dir)
    splits = configured_splits(cfg)
    if not splits:
        raise PipelineError("no corpus configured; set train_path / valid_path / test_path")
    corpora, skipped = {}, {}
    for split in splits:
        skipped[split] = []
        corpora[split] = [prepare_document(d) for d in load_split(cfg, split, skipped[split])]

    train_docs = corpora.get("train", [])
    if "train" in corpora:
        vocab = Vocab.build([d.tokens for d in train_docs] + [d.reference_tokens for d in train_docs], cfg.vocab_size)
        layout.prep().mkdir(parents=True, exist_ok=True)
        vocab.save(layout.vocab)
    fluency = NgramFluencyScorer(cfg.fluency_k).fit(
        [d.sentence_tokens(i) for d in train_docs for i in range(len(d.sentences))]
    )

    table = []
    for split in splits:
        docs = corpora[split]
        out = layout.prep(split)
        out.mkdir(parents=True, exist_ok=True)
        doc_graphs, seg_graphs, contexts, questions, diagnostics = [], [], {}, [], []
        with open(out / "graphs.jsonl", "w", encoding="utf-8") as g_fh, \
                open(out / "seggraphs.jsonl", "w", encoding="utf-8") as s_fh:
            for doc in docs:
                g = build_doc_graph(doc, cfg.min_nodes)
                g_fh.write(dumps(graph_to_record(g, doc.doc_id, label_node_salience(g, doc.reference_tokens, doc.tokens))) + "\n")
                seg = build_seg_graphs(doc)
                labels = [label_node_salience(sg, doc.reference_tokens, doc.tokens) for sg in seg.subgraphs]
                s_fh.write(dumps(seg_to_record(seg, doc.doc_id, labels)) + "\n")
                doc_graphs.append(g)
                seg_graphs.append(seg)
                ctx = select_salient_context(doc, recall_threshold=cfg.recall_threshold)
                contexts[doc.doc_id] = ctx
                questions.extend(build_questions(doc, ctx, fluency, cfg.seed, diagnostics))
        write_contexts(contexts, out / "salient_contexts.jsonl")
        write_bank(questions, out / "questions.jsonl")
        (out / "skipped.txt").write_text("".join(m + "\n" for m in skipped[split] + diagnostics), encoding="utf-8")
        st = corpus_stats(docs, doc_graphs, seg_graphs)
        write_tsv(out / "stats.tsv", GraphStats.HEADER, [st.row()])
        table.append((split, st))
        logger.info("%s: %d documents, %d skipped, %d questions", split, len(docs), len(skipped[split]), len(questions))
    print(stats_table(table))
    print("skipped documents: " + ", ".join(f"{s}={len(skipped[s])}" for s in splits))
    return 0


def cmd_stats(cfg: PipelineConfig, args) -> int:
    paths = [(Path(p).name, p) for p in (args.corpus or [])]
    if not paths:
        paths = [(s, split_path(cfg, s)) for s in configured_splits(cfg)]
    if not paths:
        raise PipelineError("no corpus given (use --corpus or set *_path in the config)")
    table = []
    for name, path in paths:
        require(Path(path), "corpus", "check the path")
        docs = load_corpus(path, cfg.truncate_len, strict=False)
        table.append((name, corpus_stats(docs, min_nodes=cfg.min_nodes)))
    text = stats_table(table)
    print(text)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    return 0


# ---------------------------------------------------------------------------
# examples from preprocess artifacts


def load_vocab(layout: Layout) -> Vocab:
    return Vocab.load(require(layout.vocab, "vocabulary", "run `kgsum preprocess` with a train corpus first"))


def load_examples(cfg: PipelineConfig, layout: Layout, split: str, vocab: Vocab,
                  variant: str | None = None) -> list[Example]:
    variant = variant or cfg.variant
    docs = [prepare_document(d) for d in load_split(cfg, split)]
    graphs: dict[str, object] = {}
    if variant != NOGRAPH:
        name = "graphs.jsonl" if variant == DOCGRAPH else "seggraphs.jsonl"
        path = require(layout.prep(split) / name, f"{split} graph dump", "run `kgsum preprocess` first")
        for rec in read_jsonl(path):
            if variant == DOCGRAPH:
                g, sal = graph_from_record(rec)
                graphs[rec["doc_id"]] = doc_graph_features(g, sal)
            else:
                seg, sals = seg_from_record(rec)
                graphs[rec["doc_id"]] = seg_graph_features(seg, sals)
    examples = []
    for doc in docs:
        if variant != NOGRAPH and doc.doc_id not in graphs:
            raise PipelineError(f"no graph for document {doc.doc_id!r} in {split}; rerun `kgsum preprocess`")
        examples.append(make_example(doc, vocab, graphs.get(doc.doc_id)))
    return examples


def qa_samples(cfg: PipelineConfig, layout: Layout, split: str) -> list:
    bank = read_bank(require(layout.prep(split) / "questions.jsonl", f"{split} question bank", "run `kgsum preprocess` first"))
    contexts = read_contexts(require(layout.prep(split) / "salient_contexts.jsonl", f"{split} salient contexts",
                                     "run `kgsum preprocess` first"))
    samples = []
    for doc in load_split(cfg, split):
        idx = contexts.get(doc.doc_id, [])
        text = [t for i in idx for t in doc.sentence_tokens(i)]
        samples.extend((text, q) for q in bank.get(doc.doc_id, []))
    return samples


# ---------------------------------------------------------------------------
# train


def _write_checkpoint_dir(stage_dir: Path, model: SummarizationModel, metrics: dict) -> None:
    stage_dir.mkdir(parents=True, exist_ok=True)
    cfg = model.config.to_dict()
    cfg["node_dim"] = model.config.node_dim
    write_json(stage_dir / "config.json", cfg)
    save_checkpoint(stage_dir / "params.pt", model)
    write_json(stage_dir / "metrics.json", metrics)


def _rewrite_log_without(path: Path, stages: tuple[str, ...]) -> TrainLog:
    kept = []
    if path.exists():
        with open(path, encoding="utf-8") as fh:
            reader = csv.reader(fh, delimiter="\t")
            next(reader, None)
            kept = [row for row in reader if row and not row[0].startswith(stages)]
    log = TrainLog(path)
    with open(path, "a", newline="", encoding="utf-8") as fh:
        csv.writer(fh, delimiter="\t").writerows(kept)
    return log


def train_stage_qa(cfg: PipelineConfig, layout: Layout) -> None:
    samples = qa_samples(cfg, layout, "train")
    if not samples:
        raise PipelineError("the training question bank is empty; cannot train the QA scorer")
    heldout = qa_samples(cfg, layout, "valid") if cfg.valid_path else None
    scorer, report = train_qa_scorer(samples, cfg.qa(), heldout or None)
    layout.qa_dir.mkdir(parents=True, exist_ok=True)
    save_qa_scorer(scorer, layout.qa_scorer)
    write_json(layout.qa_dir / "metrics.json", report)
    print(f"qa: held-out accuracy {report['heldout_accuracy']:.4f} on {report['heldout_size']} questions")


def train_stage_ml(cfg: PipelineConfig, layout: Layout, resume: bool) -> None:
    vocab = load_vocab(layout)
    train = load_examples(cfg, layout, "train", vocab)
    valid = load_examples(cfg, layout, "valid", vocab) if cfg.valid_path else None
    torch.manual_seed(cfg.seed)
    model = SummarizationModel(cfg.model(len(vocab)))
    stage_dir = layout.checkpoint_dir("ml")
    state = None
    if resume:
        last = require(stage_dir / "last.pt", "ML checkpoint to resume from", "run `kgsum train --stage ml` first")
        state = torch.load(last, map_location="cpu", weights_only=False)
        log = TrainLog(layout.train_log, append=True)
    else:
        log = _rewrite_log_without(layout.train_log, ("ml", "rl"))
    result = train_ml(model, train, valid, cfg.training(), stage_dir, log, resume=state)
    if result.best_state is not None:
        model.load_state_dict(result.best_state)
    _write_checkpoint_dir(stage_dir, model, {
        "best_metric": result.best_metric, "best_epoch": result.best_epoch, "steps": result.steps,
        "history": result.history,
    })
    print(f"ml: best loss {result.best_metric:.4f} at epoch {result.best_epoch}; checkpoint {layout.params('ml')}")


def load_qa(cfg: PipelineConfig, layout: Layout, choice: str) -> QaScorer | None:
    if choice == "oracle":
        return OracleQaScorer()
    if choice == "uniform":
        return UniformQaScorer()
    if choice == "none":
        return None
    if choice == "trained" or layout.qa_scorer.exists():
        return load_qa_scorer(require(layout.qa_scorer, "QA scorer", "run `kgsum train --stage qa` first"))
    return None


def train_stage_rl(cfg: PipelineConfig, layout: Layout) -> None:
    vocab = load_vocab(layout)
    model, _ = load_checkpoint(require(layout.params("ml"), "ML checkpoint", "run `kgsum train --stage ml` first"))
    if model.config.variant != cfg.variant:
        raise PipelineError(f"ML checkpoint is variant {model.config.variant!r} but config says {cfg.variant!r}")
    qa = None
    banks = {}
    if cfg.cloze_weight > 0:
        qa = load_qa_scorer(require(layout.qa_scorer, "QA scorer", "run `kgsum train --stage qa` first"))
        banks = read_bank(require(layout.prep("train") / "questions.jsonl", "train question bank",
                                  "run `kgsum preprocess` first"))
        valid_bank = layout.prep("valid") / "questions.jsonl"
        if cfg.valid_path and valid_bank.exists():
            banks.update(read_bank(valid_bank))
    reward = CompositeReward(cfg.reward(), banks, qa)
    train = load_examples(cfg, layout, "train", vocab)
    valid = load_examples(cfg, layout, "valid", vocab) if cfg.valid_path else None
    log = _rewrite_log_without(layout.train_log, ("rl",))
    stage_dir = layout.checkpoint_dir("rl")
    result = train_rl(model, train, vocab, reward, cfg.training(), valid, stage_dir, log)
    if result.best_state is not None:
        model.load_state_dict(result.best_state)
    _write_checkpoint_dir(stage_dir, model, {
        "best_metric": result.best_metric, "best_epoch": result.best_epoch, "steps": result.steps,
        "history": result.history,
    })
    print(f"rl: best mean reward {result.best_metric:.4f}; checkpoint {layout.params('rl')}")


def cmd_train(cfg: PipelineConfig, args) -> int:
    layout = Layout(cfg.output_dir)
    stages = ["qa", "ml", "rl"] if args.stage == "all" else [args.stage]
    for stage in stages:
        if stage == "qa":
            train_stage_qa(cfg, layout)
        elif stage == "ml":
            train_stage_ml(cfg, layout, args.resume)
        else:
            train_stage_rl(cfg, layout)
    return 0


# ---------------------------------------------------------------------------
# decode


def pick_checkpoint(layout: Layout, choice: str | None) -> Path:
    if choice in (None, "auto"):
        for stage in ("rl", "ml"):
            if layout.params(stage).exists():
                return layout.params(stage)
        raise PipelineError(f"no trained checkpoint under {layout.root / 'checkpoints'}; run `kgsum train` first")
    if choice in ("ml", "rl"):
        return require(layout.params(choice), f"{choice} checkpoint", f"run `kgsum train --stage {choice}` first")
    return require(Path(choice), "checkpoint", "check --checkpoint")


@torch.no_grad()
def decode_examples(model: SummarizationModel, vocab: Vocab, examples: Sequence[Example], cfg: PipelineConfig):
    model.eval()
    out = []
    for i in range(0, len(examples), cfg.batch_size):
        chunk = examples[i:i + cfg.batch_size]
        batch = collate(chunk)
        if cfg.beam_size > 1:
            ids = model.decode_beam(batch, cfg.beam_size, cfg.max_len, cfg.min_len)
        else:
            ids = model.decode_greedy(batch, cfg.max_len, cfg.min_len)
        for ex, seq, oovs in zip(chunk, ids, batch.oovs):
            out.append((ex.doc_id, vocab.to_tokens(seq, oovs)))
    return out


def cmd_decode(cfg: PipelineConfig, args) -> int:
    layout = Layout(cfg.output_dir)
    vocab = load_vocab(layout)
    model, _ = load_checkpoint(pick_checkpoint(layout, args.checkpoint))
    examples = load_examples(cfg, layout, args.split, vocab, variant=model.config.variant)
    results = decode_examples(model, vocab, examples, cfg)
    path = Path(args.out) if args.out else layout.decoded(args.split)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for doc_id, toks in results:
            fh.write(json.dumps({"doc_id": doc_id, "summary": " ".join(toks), "token_count": len(toks)},
                                sort_keys=True) + "\n")
    print(f"decoded {len(results)} documents to {path}")
    return 0


# ---------------------------------------------------------------------------
# evaluation


def read_summaries(path: Path) -> dict[str, list[str]]:
    require(path, "decoded summaries", "run `kgsum decode` first or pass --summaries")
    return {rec["doc_id"]: rec["summary"].split() for rec in read_jsonl(path)}


def histogram(values: Sequence[float], bins: int = 10) -> list[int]:
    counts = [0] * bins
    for v in values:
        counts[min(int(v * bins), bins - 1) if v > 0 else 0] += 1
    return counts


def rouge_rows(summaries: dict[str, list[str]], docs: Sequence[AnnotatedDocument]) -> list[list]:
    rows = []
    for doc in docs:
        if doc.doc_id not in summaries:
            raise PipelineError(f"no decoded summary for document {doc.doc_id!r}")
        s = rouge_all(summaries[doc.doc_id], doc.reference_tokens)
        rows.append([doc.doc_id, s["rouge-1"].f1, s["rouge-2"].f1, s["rouge-l"].f1])
    return rows


def _mean(values) -> float:
    values = list(values)
    return sum(values) / len(values) if values else 0.0


def write_plot(path: Path, columns: dict[str, Sequence[float]], bins: int = 10) -> None:
    hists = {k: histogram(v, bins) for k, v in columns.items()}
    rows = [[i / bins, (i + 1) / bins] + [hists[k][i] for k in columns] for i in range(bins)]
    write_tsv(path, ["bin_low", "bin_high"] + list(columns), rows)


def evaluate_cloze(summaries, cfg, layout, split, qa: QaScorer, out_dir: Path) -> dict:
    banks = read_bank(require(layout.prep(split) / "questions.jsonl", f"{split} question bank",
                              "run `kgsum preprocess` first"))
    ev = cloze_evaluate(summaries, banks, qa)
    rows = [[d, p, a] for d, (p, a) in sorted(ev.per_summary.items())]
    write_tsv(out_dir / "cloze.tsv", ["doc_id", "mean_probability", "accuracy"], rows + [["ALL", ev.mean_probability, ev.accuracy]])
    write_plot(out_dir / "plot_cloze.tsv", {"mean_probability": [r[1] for r in rows], "accuracy": [r[2] for r in rows]})
    return {"cloze_mean_probability": ev.mean_probability, "cloze_accuracy": ev.accuracy, "cloze_documents": len(rows)}


def cmd_evaluate(cfg: PipelineConfig, args) -> int:
    layout = Layout(cfg.output_dir)
    summaries = read_summaries(Path(args.summaries) if args.summaries else layout.decoded(args.split))
    docs = load_split(cfg, args.split)
    out_dir = Path(args.out) if args.out else layout.eval_dir(args.split)
    rows = rouge_rows(summaries, docs)
    totals = [_mean(r[i] for r in rows) for i in (1, 2, 3)]
    write_tsv(out_dir / "rouge.tsv", ["doc_id", "r1_f", "r2_f", "rl_f"], rows + [["ALL"] + totals])
    write_plot(out_dir / "plot_rouge.tsv", {"r1_f": [r[1] for r in rows], "r2_f": [r[2] for r in rows],
                                            "rl_f": [r[3] for r in rows]})
    report = {"documents": len(rows), "rouge1_f": totals[0], "rouge2_f": totals[1], "rougeL_f": totals[2]}
    qa = load_qa(cfg, layout, args.qa)
    if qa is not None:
        report.update(evaluate_cloze({d.doc_id: summaries[d.doc_id] for d in docs}, cfg, layout, args.split, qa, out_dir))
    else:
        logger.info("no QA scorer available; cloze columns omitted")
    write_json(out_dir / "report.json", report)
    print("\t".join(report))
    print("\t".join(f"{v:.4f}" if isinstance(v, float) else str(v) for v in report.values()))
    return 0


def cmd_cloze_eval(cfg: PipelineConfig, args) -> int:
    layout = Layout(cfg.output_dir)
    summaries = read_summaries(Path(args.summaries) if args.summaries else layout.decoded(args.split))
    qa = load_qa(cfg, layout, "trained" if args.qa == "auto" else args.qa)
    if qa is None:
        raise PipelineError("cloze-eval needs a QA scorer (--qa trained|oracle|uniform)")
    out_dir = Path(args.out) if args.out else layout.eval_dir(args.split)
    report = evaluate_cloze(summaries, cfg, layout, args.split, qa, out_dir)
    write_json(out_dir / "cloze_report.json", report)
    print(f"cloze mean probability {report['cloze_mean_probability']:.4f}, accuracy {report['cloze_accuracy']:.4f} "
          f"over {report['cloze_documents']} summaries")
    return 0


# ---------------------------------------------------------------------------
# argument parsing


def _flag(name: str) -> str:
    return "--" + name.replace("_", "-")


def add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="INI configuration file")
    group = p.add_argument_group("configuration overrides")
    for f in fields(PipelineConfig):
        group.add_argument(_flag(f.name), dest=f"cfg_{f.name}", type=FIELD_TYPES[f.name], default=None,
                           help=f"[{SECTIONS[f.name]}] {f.metadata.get('help', '')}".rstrip())


def config_from_args(args) -> PipelineConfig:
    overrides = {f.name: getattr(args, f"cfg_{f.name}") for f in fields(PipelineConfig)}
    cfg = build_config(read_ini(args.config) if args.config else {}, overrides)
    for split in SPLITS:
        path = split_path(cfg, split)
        if path and args.config and not Path(path).is_absolute() and not Path(path).exists():
            candidate = Path(args.config).parent / path
            if candidate.exists():
                setattr(cfg, f"{split}_path", str(candidate))
    return cfg


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kgsum", description="Graph-augmented abstractive summarisation pipeline.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("preprocess", help="build graphs, salience labels, salient contexts and question banks")
    add_config_flags(p)
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("train", help="train the QA scorer, the ML stage and/or the RL stage")
    add_config_flags(p)
    p.add_argument("--stage", choices=["qa", "ml", "rl", "all"], default="ml")
    p.add_argument("--resume", action="store_true", help="continue ML training from checkpoints/ml/last.pt")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("decode", help="write summaries for a split")
    add_config_flags(p)
    p.add_argument("--split", choices=SPLITS, default="test")
    p.add_argument("--checkpoint", help="ml, rl, auto (default) or a path to params.pt")
    p.add_argument("--out", help="output JSON-lines file")
    p.set_defaults(func=cmd_decode)

    for name, func, helptext in (("evaluate", cmd_evaluate, "ROUGE and cloze report for decoded summaries"),
                                 ("cloze-eval", cmd_cloze_eval, "cloze probability/accuracy only")):
        p = sub.add_parser(name, help=helptext)
        add_config_flags(p)
        p.add_argument("--split", choices=SPLITS, default="test")
        p.add_argument("--summaries", help="decoded summaries (JSON lines); default decode/<split>.jsonl")
        p.add_argument("--qa", choices=["auto", "trained", "oracle", "uniform", "none"], default="auto")
        p.add_argument("--out", help="report directory; default eval/<split>")
        p.set_defaults(func=func)

    p = sub.add_parser("stats", help="document and graph size statistics")
    add_config_flags(p)
    p.add_argument("--corpus", action="append", help="corpus file (repeatable); default: configured splits")
    p.add_argument("--out", help="also write the table here")
    p.set_defaults(func=cmd_stats)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        cfg = config_from_args(args)
        if args.command != "stats":
            Path(cfg.output_dir).mkdir(parents=True, exist_ok=True)
            cfg.save(Path(cfg.output_dir) / "config.ini")
        torch.manual_seed(cfg.seed)
        return args.func(cfg, args)
    except (PipelineError, ValueError, FileNotFoundError, KeyError, OSError) as exc:
        print(f"kgsum {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - last-resort diagnostic
        logger.debug("unhandled error", exc_info=True)
        print(f"kgsum {args.command}: unexpected error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
