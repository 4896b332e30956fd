import json

import numpy as np
import pytest

from mlvalid.cli import main

SPEC = {
    "n_features": 2,
    "clusters": [
        {"label": 0, "mean": [0.0, 0.0], "std": 1.0, "n": 500},
        {"label": 1, "mean": [10.0, 10.0], "std": 1.0, "n": 500},
    ],
}


@pytest.fixture
def workdir(tmp_path):
    (tmp_path / "spec.json").write_text(json.dumps(SPEC))
    assert main(["synth", "--spec", str(tmp_path / "spec.json"), "--seed", "3",
                 "--out", str(tmp_path / "d.csv"), "--schema-out", str(tmp_path / "schema.json")]) == 0
    return tmp_path


def run(workdir, *args):
    return main([str(a) for a in args])


def test_synth_counts_and_means(workdir):
    lines = (workdir / "d.csv").read_text().splitlines()
    assert len(lines) == 1001
    data = np.loadtxt(workdir / "d.csv", delimiter=",", skiprows=1)
    for label, mean in ((0, 0.0), (1, 10.0)):
        rows = data[data[:, 2] == label, :2]
        assert len(rows) == 500
        assert np.all(np.abs(rows.mean(axis=0) - mean) <= 3 / np.sqrt(500))


def test_synth_byte_identical(workdir):
    run(workdir, "synth", "--spec", workdir / "spec.json", "--seed", 3, "--out", workdir / "again.csv")
    assert (workdir / "again.csv").read_bytes() == (workdir / "d.csv").read_bytes()


def test_synth_degenerate_covariance(tmp_path):
    bad = {"n_features": 2, "clusters": [{"label": 0, "mean": [0, 0], "cov": [[1, 1], [1, 1]], "n": 5}]}
    (tmp_path / "s.json").write_text(json.dumps(bad))
    assert run(tmp_path, "synth", "--spec", tmp_path / "s.json", "--out", tmp_path / "x.csv") == 2


def pipeline(w, validator="prob", extra=()):
    s = w / "schema.json"
    assert run(w, "split", w / "d.csv", "--schema", s, "--seed", 1,
               "--train-out", w / "tr.csv", "--test-out", w / "te.csv") == 0
    assert run(w, "predict", "--schema", s, "--train", w / "tr.csv", w / "te.csv", "--out", w / "p.csv") == 0
    assert run(w, "predict", "--schema", s, "--train", w / "tr.csv", w / "tr.csv", "--out", w / "ptr.csv") == 0
    assert run(w, "fit", w / "tr.csv", "--schema", s, "--validator", validator,
               "--predictions", w / "ptr.csv", "--out", w / f"{validator}.json", *extra) == 0
    return s


def test_fit_records_defaults_and_is_byte_identical(workdir):
    s = pipeline(workdir)
    first = (workdir / "prob.json").read_bytes()
    assert run(workdir, "fit", workdir / "tr.csv", "--schema", s, "--predictions", workdir / "ptr.csv",
               "--out", workdir / "prob.json") == 0
    assert (workdir / "prob.json").read_bytes() == first
    doc = json.loads(first)
    opts = doc["header"]["options"]
    assert opts["mode"] == "simplified" and opts["bins"] == 32 and opts["min_count"] == 5
    assert opts["threshold_validity"] == 0.6 and opts["aggregation"] == "sum"
    report = json.loads((workdir / "prob.fit-report.json").read_text())
    assert sum(report["cell_occupancy"][0]) == 500 and report["insufficient_cells"] == [[]]


@pytest.mark.parametrize("validator", ["prob", "knn", "bishop"])
def test_validate_stream_length(workdir, validator):
    s = pipeline(workdir, validator)
    out = workdir / "v.jsonl"
    assert run(workdir, "validate", workdir / f"{validator}.json", workdir / "te.csv", "--schema", s,
               "--predictions", workdir / "p.csv", "--out", out) == 0
    lines = out.read_text().splitlines()
    assert len(lines) == 500
    assert [json.loads(l)["row"] for l in lines] == list(range(500))


def test_training_replay_median_validity(workdir):
    s = pipeline(workdir)
    out = workdir / "v.jsonl"
    run(workdir, "validate", workdir / "prob.json", workdir / "tr.csv", "--schema", s,
        "--predictions", workdir / "ptr.csv", "--out", out)
    vals = [json.loads(l)["outputs"][0]["validity"] for l in out.read_text().splitlines()]
    assert np.median(vals) >= 0.5


def test_out_of_range_row_scores_zero(workdir):
    s = pipeline(workdir)
    (workdir / "far.csv").write_text("f0,f1,label\n1000,-1000,0\n")
    (workdir / "farp.csv").write_text("out_0\n0\n")
    out = workdir / "v.jsonl"
    run(workdir, "validate", workdir / "prob.json", workdir / "far.csv", "--schema", s,
        "--predictions", workdir / "farp.csv", "--out", out)
    rec = json.loads(out.read_text())
    assert all(o["validity"] == 0.0 for o in rec["outputs"])
    assert rec["outputs"][0]["decision"] == "invalid"


def test_online_mode_flag(workdir):
    s = pipeline(workdir)
    out = workdir / "v.jsonl"
    assert run(workdir, "--mode", "online", "validate", workdir / "prob.json", workdir / "te.csv",
               "--schema", s, "--predictions", workdir / "p.csv", "--out", out) == 0
    qualities = [json.loads(l)["outputs"][0]["terms"][0]["quality"] for l in out.read_text().splitlines()]
    assert qualities[0] < qualities[-1] <= 1.0


def test_report_end_to_end(workdir, capsys):
    s = pipeline(workdir)
    run(workdir, "validate", workdir / "prob.json", workdir / "te.csv", "--schema", s,
        "--predictions", workdir / "p.csv", "--out", workdir / "v.jsonl")
    assert run(workdir, "report", workdir / "te.csv", "--schema", s, "--predictions", workdir / "p.csv",
               "--validity", workdir / "v.jsonl", "--artifact", workdir / "prob.json",
               "--out-dir", workdir / "rep") == 0
    summary = json.loads((workdir / "rep" / "summary.json").read_text())
    out = summary["outputs"][0]
    assert sum(map(sum, out["confusion"])) == 500
    assert (workdir / "rep" / "label_validity.png").exists()
    assert "FIR" in capsys.readouterr().out


def test_exit_codes(workdir):
    s = pipeline(workdir)
    assert run(workdir, "bogus") == 1
    assert run(workdir, "split", workdir / "d.csv", "--train-out", "a", "--test-out", "b") == 1
    assert run(workdir, "split", workdir / "missing.csv", "--schema", s,
               "--train-out", workdir / "a", "--test-out", workdir / "b") == 2
    other = json.loads(s.read_text())
    other["features"] = ["g0", "g1"]
    (workdir / "other.json").write_text(json.dumps(other))
    (workdir / "g.csv").write_text("g0,g1,label\n1,2,0\n")
    (workdir / "gp.csv").write_text("out_0\n0\n")
    assert run(workdir, "validate", workdir / "prob.json", workdir / "g.csv", "--schema", workdir / "other.json",
               "--predictions", workdir / "gp.csv") == 3
    (workdir / "short.csv").write_text("out_0\n0\n")
    assert run(workdir, "validate", workdir / "prob.json", workdir / "te.csv", "--schema", s,
               "--predictions", workdir / "short.csv", "--out", workdir / "x.jsonl") == 2
