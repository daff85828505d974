import json
from pathlib import Path

import pytest

from cotcert.cli import main
from cotcert.harness import EXIT_GATE_ERROR, EXIT_INPUT_ERROR, EXIT_OK
from cotcert.synth import FaultKind, FaultSpec, corpus_to_jsonl, make_corpus


@pytest.fixture
def raspberry_path(tmp_path, raspberry_json) -> Path:
    path = tmp_path / "raspberry.json"
    path.write_text(raspberry_json, encoding="utf-8")
    return path


@pytest.fixture
def unit_failure_path(tmp_path, unit_failure_json) -> Path:
    path = tmp_path / "unit_failure.json"
    path.write_text(unit_failure_json, encoding="utf-8")
    return path


@pytest.fixture
def runs_path(tmp_path) -> Path:
    faults = [
        FaultSpec(FaultKind.UNIT_SWAP, 0.15),
        FaultSpec(FaultKind.ANSWER_MISMATCH, 0.25),
    ]
    path = tmp_path / "runs.jsonl"
    path.write_text(
        corpus_to_jsonl(make_corpus(12, 3, faults, seed=5)) + "\n", encoding="utf-8"
    )
    return path


def test_check_accepts_golden(raspberry_path, capsys):
    assert main(["check", str(raspberry_path)]) == EXIT_OK
    out = capsys.readouterr().out
    assert "strict: ACCEPT" in out
    assert "relaxed: ACCEPT" in out
    assert "criterion: ACCEPT" in out
    assert "Therefore : 187 [count]" in out
    assert "coverage=1.000 evr=1.000 uvr=1.000 pe=1 mps=2" in out


def test_check_rejects_unit_failure(unit_failure_path, capsys):
    assert main(["check", str(unit_failure_path)]) == EXIT_OK  # parse succeeded
    out = capsys.readouterr().out
    assert "strict: REJECT (uvr_min)" in out
    assert "relaxed: ACCEPT" in out


def test_check_malformed_json_exits_2(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json", encoding="utf-8")
    assert main(["check", str(bad)]) == EXIT_INPUT_ERROR
    assert "parse error" in capsys.readouterr().err


def test_missing_file_exits_2(tmp_path, capsys):
    assert main(["check", str(tmp_path / "nope.json")]) == EXIT_INPUT_ERROR


def test_bad_gate_exits_3(runs_path, tmp_path, capsys):
    code = main(
        ["certify", str(runs_path), "--out", str(tmp_path / "r"), "--gate", "nope"]
    )
    assert code == EXIT_GATE_ERROR
    assert "gate config error" in capsys.readouterr().err


def test_render_and_label(tmp_path, raspberry_path, capsys):
    assert main(["render", str(raspberry_path)]) == EXIT_OK
    sketch = capsys.readouterr().out
    assert sketch.strip().endswith("Therefore : 187 [count]")

    cot = tmp_path / "cot.txt"
    cot.write_text(sketch, encoding="utf-8")
    out_file = tmp_path / "steps.jsonl"
    assert main(["label", str(cot), "--out", str(out_file)]) == EXIT_OK
    rows = [json.loads(l) for l in out_file.read_text().splitlines()]
    assert rows[0]["schema"] == "EXTRACT_NUMBER"
    assert rows[-1]["schema"] == "THEREFORE"


def test_certify_writes_reports(runs_path, tmp_path, capsys):
    out_dir = tmp_path / "reports"
    assert main(["certify", str(runs_path), "--out", str(out_dir)]) == EXIT_OK
    metrics = (out_dir / "metrics.csv").read_text().splitlines()
    assert metrics[0] == "run_id,coverage,evr,uvr,pe,mps"
    assert len(metrics) == 1 + 36
    csc = (out_dir / "csc.csv").read_text().splitlines()
    assert csc[0].startswith("question_id,gate,predicted")
    summary = json.loads((out_dir / "summary.json").read_text())
    assert set(summary) == {"criterion", "relaxed", "strict"}
    qdir = out_dir / "questions" / "q0000"
    assert (qdir / "report.json").exists()
    assert (qdir / "run0_program.pretty.json").exists()
    assert (qdir / "run0_typed_program.txt").exists()


def test_certify_strict_subset_relaxed_end_to_end(runs_path, tmp_path, capsys):
    out_dir = tmp_path / "reports"
    main(["certify", str(runs_path), "--out", str(out_dir)])
    rows = {}
    for line in (out_dir / "csc.csv").read_text().splitlines()[1:]:
        qid, gate, predicted, abstained, support, certified, correct = line.split(",")
        rows.setdefault(qid, {})[gate] = int(certified)
    for qid, by_gate in rows.items():
        assert by_gate["strict"] <= by_gate["relaxed"], qid


def test_certify_empty_file(tmp_path, capsys):
    empty = tmp_path / "empty.jsonl"
    empty.write_text("", encoding="utf-8")
    out_dir = tmp_path / "reports"
    assert main(["certify", str(empty), "--out", str(out_dir)]) == EXIT_OK
    assert (out_dir / "metrics.csv").read_text().strip() == "run_id,coverage,evr,uvr,pe,mps"


def test_certify_skips_malformed_lines(tmp_path, capsys):
    runs = tmp_path / "runs.jsonl"
    good = corpus_to_jsonl(make_corpus(1, 1, [], seed=1))
    runs.write_text(good + "\nnot json\n", encoding="utf-8")
    out_dir = tmp_path / "reports"
    assert main(["certify", str(runs), "--out", str(out_dir)]) == EXIT_OK
    assert "skipped" in capsys.readouterr().err
    assert (out_dir / "errors.log").exists()


def test_certify_ablation_flags(runs_path, tmp_path, capsys):
    out_a = tmp_path / "a"
    assert main(
        ["certify", str(runs_path), "--out", str(out_a), "--no-type-check", "--no-path"]
    ) == EXIT_OK
    summary = json.loads((out_a / "summary.json").read_text())
    # With checks ablated, every parseable run is certified at every gate.
    assert summary["relaxed"]["accepted_runs"] >= summary["strict"]["accepted_runs"]

    out_b = tmp_path / "b"
    assert main(
        ["certify", str(runs_path), "--out", str(out_b), "--no-csc"]
    ) == EXIT_OK
    csc = (out_b / "csc.csv").read_text().splitlines()[1:]
    assert all(line.split(",")[1] == "none" for line in csc)


def test_aggregate_single_gate(runs_path, tmp_path, capsys):
    out_file = tmp_path / "agg.csv"
    assert main(
        ["aggregate", str(runs_path), "--gate", "strict", "--out", str(out_file)]
    ) == EXIT_OK
    lines = out_file.read_text().splitlines()
    assert len(lines) == 1 + 12
    assert all(line.split(",")[1] == "strict" for line in lines[1:])


def test_align_command(tmp_path, raspberry_path, capsys):
    main(["render", str(raspberry_path)])
    sketch = capsys.readouterr().out
    cot = tmp_path / "cot.txt"
    cot.write_text(sketch, encoding="utf-8")
    assert main(["align", "--program", str(raspberry_path), "--cot", str(cot)]) == EXIT_OK
    out = capsys.readouterr().out
    assert "full (2/2)" in out


def test_emit_mock_to_files(tmp_path, capsys):
    out_dir = tmp_path / "emissions"
    assert main(
        ["emit", "How many?", "--k", "2", "--seed", "3", "--out", str(out_dir)]
    ) == EXIT_OK
    assert (out_dir / "emission0.txt").exists()
    meta = json.loads((out_dir / "emission1.json").read_text())
    assert meta["parsed"] is True


def test_synth_determinism(tmp_path, capsys):
    args = [
        "synth", "--questions", "6", "--k", "2", "--fault", "unit_swap=0.5",
        "--seed", "9",
    ]
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    assert main(args + ["--out", str(a)]) == EXIT_OK
    assert main(args + ["--out", str(b)]) == EXIT_OK
    assert a.read_bytes() == b.read_bytes()


def test_synth_rejects_bad_fault(tmp_path, capsys):
    code = main(
        ["synth", "--questions", "2", "--k", "1", "--fault", "unit_swap=2.0",
         "--out", str(tmp_path / "x.jsonl")]
    )
    assert code == EXIT_INPUT_ERROR


def test_sweep_csv(runs_path, tmp_path, capsys):
    out_file = tmp_path / "sweep.csv"
    assert main(
        ["sweep", str(runs_path), "--metric", "uvr", "--grid", "0,0.5,1",
         "--out", str(out_file)]
    ) == EXIT_OK
    lines = out_file.read_text().splitlines()
    assert lines[0].startswith("metric,threshold")
    assert len(lines) == 4
    coverages = [float(line.split(",")[3]) for line in lines[1:]]
    assert coverages == sorted(coverages, reverse=True)


def test_sweep_rejects_bad_grid(runs_path, tmp_path, capsys):
    assert main(
        ["sweep", str(runs_path), "--metric", "uvr", "--grid", "0,2"]
    ) == EXIT_INPUT_ERROR
