import json

import numpy as np
import pytest

from mlvalid.core import Quantizer
from mlvalid.report import format_table, rates, read_validity_stream, summarize, write_report

from conftest import class_schema, reg_schema

TRUTH = np.array([0, 0, 1, 1, 2, 2, 0, 1, 2, 0], float)[:, None]
PRED = np.array([0, 0, 1, 2, 2, 0, 0, 1, 1, 0], float)[:, None]
V = np.array([0.9, 0.5, 0.7, 0.8, 0.6, 0.2, 0.59, 1.0, 0.61, 0.3])[:, None]


def test_all_correct_all_valid():
    q = Quantizer.from_schema(class_schema(classes=2))
    y = np.array([[0], [1], [1]], float)
    s = summarize(y, y, np.ones_like(y), q).outputs[0]
    assert s.fir == 0.0 and s.fvr is None
    assert "n/a" in format_table(summarize(y, y, np.ones_like(y), q))


def test_hand_counted_fixture():
    q = Quantizer.from_schema(class_schema(classes=3))
    s = summarize(TRUTH, PRED, V, q, tau_validity=0.6).outputs[0]
    assert (s.n_correct, s.n_incorrect) == (7, 3)
    assert s.accuracy == pytest.approx(0.7)
    assert s.fir == pytest.approx(3 / 7)
    assert s.fvr == pytest.approx(2 / 3)
    assert s.confusion == [[4, 0, 0], [0, 2, 1], [1, 1, 1]]
    assert sum(map(sum, s.confusion)) == 10


def test_insufficient_counts_as_invalid():
    correct = np.array([True, False])
    fir, fvr = rates(correct, np.array([np.nan, np.nan]), 0.6)
    assert (fir, fvr) == (1.0, 0.0)


def test_regression_threshold_in_enlarged_units():
    q = Quantizer.from_schema(reg_schema())
    truth = np.array([[0.50], [0.50], [0.50], [0.50]])
    pred = np.array([[0.505], [0.51], [0.52], [0.90]])
    v = np.array([[0.9], [0.8], [0.7], [0.1]])
    s = summarize(truth, pred, v, q, tau_error=0.1).outputs[0]
    # |err| * 10 <= 0.1 holds for the first two only
    assert (s.n_correct, s.n_incorrect) == (2, 2)
    assert s.tau_error_raw == pytest.approx(0.01)
    assert s.spearman == pytest.approx(-1.0)


def test_sweep_monotone(rng):
    q = Quantizer.from_schema(class_schema(classes=3))
    s = summarize(TRUTH, PRED, V, q).outputs[0]
    firs = [p["fir"] for p in s.sweep]
    fvrs = [p["fvr"] for p in s.sweep]
    assert firs == sorted(firs) and fvrs == sorted(fvrs, reverse=True)


def test_read_stream():
    lines = [json.dumps({"outputs": [{"validity": 0.5}, {"validity": None}]}), ""]
    arr = read_validity_stream(lines, 2)
    assert arr.shape == (1, 2) and arr[0, 0] == 0.5 and np.isnan(arr[0, 1])


def test_write_report_files(tmp_path):
    q = Quantizer.from_schema(reg_schema())
    rng = np.random.default_rng(0)
    truth = rng.uniform(0, 1, (40, 1))
    pred = truth + rng.normal(0, 0.02, (40, 1))
    v = rng.uniform(0, 1, (40, 1))
    s = summarize(truth, pred, v, q)
    paths = write_report(tmp_path, s, truth, pred, v, q)
    names = {p.name for p in paths}
    assert {"summary.json", "summary.txt", "y_correct.csv", "y_incorrect.csv", "y_sweep.csv",
            "y_validity_vs_error.csv", "y_validity.png", "y_confusion.png"} <= names
    n_correct = len((tmp_path / "y_correct.csv").read_text().splitlines()) - 1
    n_incorrect = len((tmp_path / "y_incorrect.csv").read_text().splitlines()) - 1
    assert n_correct + n_incorrect == 40
    assert (tmp_path / "y_validity.png").read_bytes()[:4] == b"\x89PNG"
