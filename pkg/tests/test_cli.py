import csv
import json
import shutil
import subprocess
import sys

import pytest
import torch

from kgsum.cli import main
from kgsum.data import write_corpus
from kgsum.synthetic import fact_corpus

SMALL = [
    "--embed-dim", "16", "--hidden-dim", "16", "--decoder-dim", "16", "--num-heads", "2", "--head-dim", "8",
    "--epochs", "3", "--batch-size", "4", "--lr-ml", "0.01", "--rl-epochs", "1", "--lr-rl", "0.001",
    "--max-len", "12", "--min-len", "2", "--qa-epochs", "2",
]


def files_under(path):
    return {p.relative_to(path).as_posix(): p.read_bytes() for p in sorted(path.rglob("*")) if p.is_file()}


def read_tsv(path):
    with open(path) as fh:
        return list(csv.reader(fh, delimiter="\t"))


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    root = tmp_path_factory.mktemp("corpus")
    write_corpus(fact_corpus(12, seed=1), root / "train.jsonl")
    write_corpus(fact_corpus(4, seed=2, prefix="val"), root / "valid.jsonl")
    write_corpus(fact_corpus(4, seed=3, prefix="tst"), root / "test.jsonl")
    return root


def base_args(corpus, out, variant="docgraph"):
    return ["--train-path", str(corpus / "train.jsonl"), "--valid-path", str(corpus / "valid.jsonl"),
            "--test-path", str(corpus / "test.jsonl"), "--output-dir", str(out), "--variant", variant] + SMALL


@pytest.fixture(scope="module")
def run(corpus, tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    args = base_args(corpus, out)
    codes = {
        "preprocess": main(["preprocess"] + args),
        "train": main(["train", "--stage", "all"] + args),
        "decode": main(["decode", "--split", "test"] + args),
        "evaluate": main(["evaluate", "--split", "test"] + args),
        "cloze-eval": main(["cloze-eval", "--split", "test", "--qa", "oracle", "--out", str(out / "oracle")] + args),
    }
    return out, args, codes


def test_pipeline_exit_codes_and_artifacts(run):
    out, _, codes = run
    assert codes == {k: 0 for k in codes}
    for rel in ["config.ini", "preprocess/vocab.json", "preprocess/train/graphs.jsonl", "preprocess/train/seggraphs.jsonl",
                "preprocess/train/salient_contexts.jsonl", "preprocess/train/questions.jsonl", "preprocess/test/stats.tsv",
                "qa/qa_scorer.pt", "qa/metrics.json", "train_log.tsv",
                "checkpoints/ml/config.json", "checkpoints/ml/params.pt", "checkpoints/ml/metrics.json",
                "checkpoints/rl/params.pt", "decode/test.jsonl", "eval/test/rouge.tsv", "eval/test/cloze.tsv",
                "eval/test/plot_rouge.tsv", "eval/test/plot_cloze.tsv", "eval/test/report.json"]:
        assert (out / rel).exists(), rel
    cfg = json.loads((out / "checkpoints/ml/config.json").read_text())
    assert {"embed_dim", "hidden_dim", "node_dim", "num_heads", "num_layers"} <= set(cfg)
    stages = {row[0] for row in read_tsv(out / "train_log.tsv")[1:]}
    assert {"ml", "ml-valid", "rl", "rl-valid"} <= stages


def test_decode_output_format(run):
    out, _, _ = run
    recs = [json.loads(line) for line in (out / "decode/test.jsonl").read_text().splitlines()]
    assert [r["doc_id"] for r in recs] == [f"tst{i:04d}" for i in range(4)]
    for r in recs:
        assert set(r) == {"doc_id", "summary", "token_count"}
        assert r["token_count"] == len(r["summary"].split()) <= 12


def test_report_totals_match_rows(run):
    out, _, _ = run
    rows = read_tsv(out / "eval/test/rouge.tsv")
    assert rows[0] == ["doc_id", "r1_f", "r2_f", "rl_f"]
    body, total = rows[1:-1], rows[-1]
    assert total[0] == "ALL" and len(body) == 4
    report = json.loads((out / "eval/test/report.json").read_text())
    for col, key in zip((1, 2, 3), ("rouge1_f", "rouge2_f", "rougeL_f")):
        mean = sum(float(r[col]) for r in body) / len(body)
        assert report[key] == pytest.approx(mean, abs=1e-6)
        assert float(total[col]) == pytest.approx(mean, abs=1e-6)
    hist = read_tsv(out / "eval/test/plot_rouge.tsv")
    assert sum(int(r[2]) for r in hist[1:]) == 4


def test_oracle_cloze_accuracy_is_one(run):
    out, _, _ = run
    report = json.loads((out / "oracle/cloze_report.json").read_text())
    assert report["cloze_accuracy"] == 1.0 and report["cloze_mean_probability"] == 1.0
    assert report["cloze_documents"] == 4


def test_reference_summaries_score_one(run, corpus, tmp_path):
    out, args, _ = run
    summaries = tmp_path / "refs.jsonl"
    with open(summaries, "w") as fh:
        for doc in fact_corpus(4, seed=3, prefix="tst"):
            fh.write(json.dumps({"doc_id": doc.doc_id, "summary": " ".join(doc.reference_tokens),
                                 "token_count": len(doc.reference_tokens)}) + "\n")
    rc = main(["evaluate", "--split", "test", "--summaries", str(summaries), "--qa", "oracle",
               "--out", str(tmp_path / "ev")] + args)
    assert rc == 0
    report = json.loads((tmp_path / "ev/report.json").read_text())
    assert (report["rouge1_f"], report["rouge2_f"], report["rougeL_f"]) == (1.0, 1.0, 1.0)
    assert report["cloze_accuracy"] == 1.0


def test_preprocess_rerun_is_byte_identical(run):
    out, args, _ = run
    before = files_under(out / "preprocess")
    assert main(["preprocess"] + args) == 0
    assert files_under(out / "preprocess") == before


def test_ml_stage_writes_no_rl_rows(run, tmp_path):
    out, args, _ = run
    shutil.copytree(out / "preprocess", tmp_path / "preprocess")
    args = [a if a != str(out) else str(tmp_path) for a in args]
    assert main(["train", "--stage", "ml"] + args) == 0
    stages = {row[0] for row in read_tsv(tmp_path / "train_log.tsv")[1:]}
    assert stages == {"ml", "ml-valid"}


def test_nograph_checkpoint_has_no_graph_parameters(run, tmp_path):
    out, args, _ = run
    shutil.copytree(out / "preprocess", tmp_path / "preprocess")
    args = [a if a not in (str(out), "docgraph") else (str(tmp_path) if a == str(out) else "nograph") for a in args]
    assert main(["train", "--stage", "ml"] + args) == 0
    blob = torch.load(tmp_path / "checkpoints/ml/params.pt", weights_only=False)
    assert blob["config"]["variant"] == "nograph"
    assert not any(k.startswith(("graph_encoder", "seg_encoder", "decoder.graph_attention")) for k in blob["state_dict"])


def test_resume_reproduces_uninterrupted_run(run, tmp_path):
    out, args, _ = run

    def fresh(name, extra):
        d = tmp_path / name
        shutil.copytree(out / "preprocess", d / "preprocess")
        a = [x if x != str(out) else str(d) for x in args]
        return d, a + extra

    full, a_full = fresh("full", ["--epochs", "4"])
    assert main(["train", "--stage", "ml"] + a_full) == 0
    part, a_part = fresh("part", ["--epochs", "2"])
    assert main(["train", "--stage", "ml"] + a_part) == 0
    assert main(["train", "--stage", "ml", "--resume"] + a_part[:-2] + ["--epochs", "4"]) == 0
    rows_full = [r for r in read_tsv(full / "train_log.tsv")[1:] if r[0] == "ml"]
    rows_part = [r for r in read_tsv(part / "train_log.tsv")[1:] if r[0] == "ml"]
    assert len(rows_full) == len(rows_part) == 4
    for a, b in zip(rows_full, rows_part):
        assert a[:3] == b[:3]
        assert float(a[3]) == pytest.approx(float(b[3]), abs=1e-5)


def test_missing_prerequisites_named(run, tmp_path, corpus, capsys):
    args = base_args(corpus, tmp_path / "empty")
    assert main(["train", "--stage", "ml"] + args) == 2
    assert "vocabulary" in capsys.readouterr().err
    shutil.copytree(run[0] / "preprocess", tmp_path / "empty/preprocess")
    assert main(["decode"] + args) == 2
    assert "checkpoint" in capsys.readouterr().err
    assert main(["evaluate"] + args) == 2
    assert "decoded summaries" in capsys.readouterr().err
    assert main(["preprocess", "--output-dir", str(tmp_path / "x")]) == 2
    assert "no corpus" in capsys.readouterr().err


def test_rl_requires_ml_checkpoint(run, tmp_path, capsys):
    out, args, _ = run
    shutil.copytree(out / "preprocess", tmp_path / "preprocess")
    args = [a if a != str(out) else str(tmp_path) for a in args]
    assert main(["train", "--stage", "rl"] + args) == 2
    assert "ML checkpoint" in capsys.readouterr().err


def test_bad_values_give_nonzero_exit(corpus, tmp_path, capsys):
    assert main(["preprocess", "--variant", "treegraph", "--train-path", str(corpus / "train.jsonl"),
                 "--output-dir", str(tmp_path)]) == 2
    assert "treegraph" in capsys.readouterr().err
    assert main(["stats", "--corpus", str(tmp_path / "missing.jsonl")]) == 2
    with pytest.raises(SystemExit) as exc:
        main(["summon"])
    assert exc.value.code == 2


def test_stats_command(corpus, tmp_path, capsys):
    (tmp_path / "empty.jsonl").write_text("")
    assert main(["stats", "--corpus", str(corpus / "test.jsonl"), "--corpus", str(tmp_path / "empty.jsonl"),
                 "--out", str(tmp_path / "stats.tsv")]) == 0
    rows = read_tsv(tmp_path / "stats.tsv")
    assert rows[0][:2] == ["split", "docs"]
    assert rows[1][:2] == ["test.jsonl", "4"]
    assert rows[2] == ["empty.jsonl", "0"] + ["0.00"] * 6


def test_empty_corpus_preprocess(tmp_path):
    (tmp_path / "train.jsonl").write_text("")
    assert main(["preprocess", "--train-path", str(tmp_path / "train.jsonl"), "--output-dir", str(tmp_path / "o")]) == 0
    prep = tmp_path / "o/preprocess/train"
    assert (prep / "questions.jsonl").read_text() == ""
    assert read_tsv(prep / "stats.tsv")[1][0] == "0"


def test_config_file_with_relative_paths(corpus, tmp_path):
    shutil.copy(corpus / "train.jsonl", tmp_path / "train.jsonl")
    (tmp_path / "run.ini").write_text(
        "[data]\nprofile = cnndm\ntrain_path = train.jsonl\n[output]\noutput_dir = %s\n" % (tmp_path / "o")
    )
    assert main(["preprocess", "--config", str(tmp_path / "run.ini")]) == 0
    snapshot = (tmp_path / "o/config.ini").read_text()
    assert "truncate_len = 512" in snapshot and "rouge1_weight = 0.33" in snapshot


def test_console_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "kgsum", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and "kgsum" in res.stdout
    res = subprocess.run([sys.executable, "-m", "kgsum", "decode", "--output-dir", str(tmp_path)],
                         capture_output=True, text=True)
    assert res.returncode == 2 and "error" in res.stderr
