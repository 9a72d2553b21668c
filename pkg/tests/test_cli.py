import csv
import subprocess
import sys

import pytest

from simulstream import formats
from simulstream.cli import UsageError, main, parse_grid


@pytest.fixture
def corpus(tmp_path):
    assert main(["synth", "--out-dir", str(tmp_path), "--n", "4", "--seed", "5",
                 "--min-frames", "60", "--max-frames", "200"]) == 0
    return tmp_path


def _run_args(d, *extra):
    return ["--manifest", str(d / "manifest.jsonl"), "--refs", str(d / "refs.tsv"), "--workers", "1", *extra]


def test_parse_grid():
    assert parse_grid("1..4") == [1, 2, 3, 4]
    assert parse_grid("120,280") == [120, 280]
    with pytest.raises(UsageError):
        parse_grid(",")


def test_run_then_report(corpus, capsys):
    traces = corpus / "t.jsonl"
    rc = main(["run", *_run_args(corpus, "--policy", "wait-k", "--k", "2", "--pre-decision", "fixed",
                                 "--step-ms", "280", "--cost-model", "recompute:2", "--out", str(traces))])
    assert rc == 0
    items = formats.read_traces(traces)
    assert len(items) == 4
    assert items[0][1]["cost_model"] == "recompute:2"

    assert main(["report", str(traces), "--refs", str(corpus / "refs.tsv")]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0].startswith("policy,params,pre_decision")
    assert out[1].startswith("wait-k,k=2,fixed:280,recompute:2,oracle,100.000,")


def test_report_nca_only_without_refs(corpus, capsys):
    traces = corpus / "t.jsonl"
    main(["run", *_run_args(corpus, "--policy", "mma", "--heads", "waitk:1,waitk:3",
                            "--pre-decision", "flexible", "--alignments", str(corpus / "alignments.jsonl"),
                            "--out", str(traces))])
    assert main(["report", str(traces), "--latency", "nca"]) == 0
    row = next(csv.reader(capsys.readouterr().out.splitlines()[1:]))
    assert row[:5] == ["mma", "heads=waitk:1,waitk:3", "flexible:word", "zero", "oracle"]
    assert row[-1] == "1"  # reference fallback
    assert row[-2] == "" and row[-3] == ""


def test_sweep_writes_one_row_per_grid_point(corpus):
    out = corpus / "report.csv"
    rc = main(["sweep", *_run_args(corpus, "--policy", "wait-k", "--k-grid", "1..3", "--pre-decision", "fixed",
                                   "--step-grid", "120,280", "--out", str(out),
                                   "--traces-out", str(corpus / "all.jsonl"))])
    assert rc == 0
    lines = out.read_text().splitlines()
    assert len(lines) == 1 + 6
    assert len(formats.read_traces(corpus / "all.jsonl")) == 24

    # report over the saved traces reproduces the sweep byte for byte
    again = corpus / "again.csv"
    main(["report", str(corpus / "all.jsonl"), "--refs", str(corpus / "refs.tsv"), "--out", str(again)])
    assert again.read_text() == out.read_text()


@pytest.mark.parametrize(
    "extra",
    [
        ["--policy", "wait-k", "--pre-decision", "fixed", "--step-ms", "280"],
        ["--policy", "wait-k", "--k", "1", "--heads", "waitk:1", "--pre-decision", "fixed", "--step-ms", "280"],
        ["--policy", "mma", "--k", "1", "--pre-decision", "fixed", "--step-ms", "280"],
        ["--policy", "wait-k", "--k", "1", "--pre-decision", "fixed", "--step-ms", "25"],
        ["--policy", "wait-k", "--k", "1", "--pre-decision", "flexible", "--step-ms", "280"],
        ["--policy", "wait-k", "--k", "1", "--pre-decision", "flexible"],
        ["--policy", "wait-k", "--k", "1", "--pre-decision", "fixed", "--step-ms", "40", "--cost-model", "bogus"],
    ],
)
def test_contradictory_or_missing_flags_exit_2(corpus, tmp_path, extra):
    with pytest.raises(SystemExit) as exc:
        main(["run", *_run_args(corpus, *extra, "--out", str(tmp_path / "x.jsonl"))])
    assert exc.value.code == 2


def test_missing_reference_is_an_error(corpus, capsys):
    (corpus / "refs.tsv").write_text("utt0\ta b\n")
    rc = main(["run", *_run_args(corpus, "--policy", "wait-k", "--k", "1", "--pre-decision", "fixed",
                                 "--step-ms", "40", "--out", str(corpus / "x.jsonl"))])
    assert rc == 1
    assert "no reference" in capsys.readouterr().err


def test_module_entry_point(corpus):
    proc = subprocess.run(
        [sys.executable, "-m", "simulstream", "report", str(corpus / "nothing.jsonl")],
        capture_output=True, text=True,
    )
    assert proc.returncode == 1
    assert proc.stderr.startswith("simulstream: error:")
