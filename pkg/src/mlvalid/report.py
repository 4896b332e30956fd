"""Evaluation summaries: accuracy, confusion matrices and validity error rates.

FIR is the share of correct predictions whose validity falls below the
threshold; FVR is the share of incorrect predictions at or above it.
Outputs without a validity (insufficient data) count as not valid.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.stats import spearmanr

from .core import CLASSIFICATION, DataError, Quantizer

SWEEP = np.round(np.linspace(0.0, 1.0, 21), 2)


@dataclass
class OutputSummary:
    name: str
    kind: str
    n: int
    accuracy: float
    n_correct: int
    n_incorrect: int
    n_insufficient: int
    tau_validity: float
    fir: float | None
    fvr: float | None
    labels: list[int] = field(default_factory=list)
    confusion: list[list[int]] = field(default_factory=list)
    tau_error: float | None = None
    tau_error_raw: float | None = None
    spearman: float | None = None
    sweep: list[dict] = field(default_factory=list)


@dataclass
class EvalSummary:
    n: int
    outputs: list[OutputSummary]

    def to_dict(self) -> dict:
        return asdict(self)


def rates(correct: np.ndarray, validity: np.ndarray, tau: float) -> tuple[float | None, float | None]:
    """(FIR, FVR) at threshold ``tau``; NaN validity never counts as valid."""
    valid = np.nan_to_num(validity, nan=-np.inf) >= tau
    n_ok = int(correct.sum())
    n_bad = int((~correct).sum())
    fir = float((correct & ~valid).sum() / n_ok) if n_ok else None
    fvr = float((~correct & valid).sum() / n_bad) if n_bad else None
    return fir, fvr


def confusion_matrix(truth: np.ndarray, pred: np.ndarray, n_classes: int) -> np.ndarray:
    """Counts with true class on rows and predicted class on columns."""
    cm = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(cm, (truth.astype(np.int64), pred.astype(np.int64)), 1)
    return cm


def summarize(truth, pred, validity, quantizer: Quantizer, tau_validity: float = 0.6,
              tau_error: float = 0.1) -> EvalSummary:
    """Build the summary. ``validity`` is (n, M) with NaN for missing values.

    ``tau_error`` is in enlarged units: a regression prediction is correct
    when ``|pred - truth| * factor <= tau_error``.
    """
    truth = np.asarray(truth, dtype=float)
    pred = np.asarray(pred, dtype=float)
    validity = np.asarray(validity, dtype=float)
    if not (truth.shape == pred.shape == validity.shape) or truth.ndim != 2:
        raise DataError("truth, predictions and validity are not aligned")
    if truth.shape[1] != len(quantizer.outputs):
        raise DataError("output arity does not match quantizer")
    cells_t, _ = quantizer.quantize_many(truth)
    cells_p, _ = quantizer.quantize_many(pred)
    outs = []
    for j, spec in enumerate(quantizer.outputs):
        t, p, v = truth[:, j], pred[:, j], validity[:, j]
        if spec.kind == CLASSIFICATION:
            correct = t == p
            extra = {}
        else:
            err = np.abs(p - t)
            correct = err * spec.factor <= tau_error + 1e-12
            ok = ~np.isnan(v)
            rho = None
            if ok.sum() > 2 and np.ptp(v[ok]) > 0 and np.ptp(err[ok]) > 0:
                rho = float(spearmanr(v[ok], err[ok])[0])
            extra = {"tau_error": tau_error, "tau_error_raw": tau_error / spec.factor, "spearman": rho}
        k = int(spec.bins)
        cm = confusion_matrix(cells_t[:, j], cells_p[:, j], k)
        fir, fvr = rates(correct, v, tau_validity)
        sweep = []
        for tau in SWEEP:
            f1, f2 = rates(correct, v, float(tau))
            sweep.append({"tau": float(tau), "fir": f1, "fvr": f2})
        outs.append(
            OutputSummary(
                name=spec.name,
                kind=spec.kind,
                n=len(t),
                accuracy=float(correct.mean()) if len(t) else 0.0,
                n_correct=int(correct.sum()),
                n_incorrect=int((~correct).sum()),
                n_insufficient=int(np.isnan(v).sum()),
                tau_validity=tau_validity,
                fir=fir,
                fvr=fvr,
                labels=list(range(k)),
                confusion=cm.tolist(),
                sweep=sweep,
                **extra,
            )
        )
    return EvalSummary(len(truth), outs)


def read_validity_stream(lines: Iterable[str], n_outputs: int) -> np.ndarray:
    """Collect per-output validity values from a JSON-lines report stream."""
    rows = []
    for n, line in enumerate(lines):
        if not line.strip():
            continue
        rec = json.loads(line)
        outs = rec.get("outputs", [])
        if len(outs) != n_outputs:
            raise DataError(f"validity line {n}: expected {n_outputs} outputs")
        rows.append([np.nan if o.get("validity") is None else float(o["validity"]) for o in outs])
    return np.asarray(rows, dtype=float).reshape(-1, n_outputs)


def _pct(x: float | None) -> str:
    return "n/a" if x is None else f"{100 * x:.1f}%"


def format_table(summary: EvalSummary) -> str:
    lines = []
    for o in summary.outputs:
        lines.append(f"output {o.name} ({o.kind}), n={o.n}")
        lines.append(f"  accuracy        {_pct(o.accuracy)}  ({o.n_correct} correct, {o.n_incorrect} incorrect)")
        if o.tau_error is not None:
            lines.append(f"  error threshold {o.tau_error:g} enlarged / {o.tau_error_raw:g} raw")
        lines.append(f"  validity tau    {o.tau_validity:g}")
        lines.append(f"  FIR             {_pct(o.fir)}  (correct marked invalid)")
        lines.append(f"  FVR             {_pct(o.fvr)}  (incorrect marked valid)")
        lines.append(f"  insufficient    {o.n_insufficient}")
        if o.kind != CLASSIFICATION:
            rho = "n/a" if o.spearman is None else f"{o.spearman:.3f}"
            lines.append(f"  spearman(V,err) {rho}")
        width = max(len(str(c)) for row in o.confusion for c in row) if o.confusion else 1
        lines.append("  confusion (rows: true, cols: predicted)")
        for row in o.confusion:
            lines.append("    " + " ".join(str(c).rjust(width) for c in row))
    return "\n".join(lines)


def _write_rows(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow(["" if v is None or (isinstance(v, float) and np.isnan(v)) else v for v in r])


def write_report(out_dir: str | Path, summary: EvalSummary, truth, pred, validity,
                 quantizer: Quantizer, figures: bool = True) -> list[Path]:
    """Write summary JSON, text table, per-sample CSVs and (optionally) PNG figures."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    truth = np.asarray(truth, dtype=float)
    pred = np.asarray(pred, dtype=float)
    validity = np.asarray(validity, dtype=float)
    written = []
    p = out / "summary.json"
    p.write_text(json.dumps(summary.to_dict(), indent=2, sort_keys=True) + "\n")
    written.append(p)
    p = out / "summary.txt"
    p.write_text(format_table(summary) + "\n")
    written.append(p)
    for j, o in enumerate(summary.outputs):
        t, pr, v = truth[:, j], pred[:, j], validity[:, j]
        spec = quantizer.outputs[j]
        if o.kind == CLASSIFICATION:
            correct = t == pr
        else:
            correct = np.abs(pr - t) * spec.factor <= o.tau_error + 1e-12
        err = np.abs(pr - t)
        for tag, mask in (("correct", correct), ("incorrect", ~correct)):
            p = out / f"{o.name}_{tag}.csv"
            idx = np.flatnonzero(mask)
            _write_rows(p, ["row", "truth", "prediction", "abs_error", "validity"],
                        ([int(r), t[r], pr[r], err[r], v[r]] for r in idx))
            written.append(p)
        p = out / f"{o.name}_sweep.csv"
        _write_rows(p, ["tau", "fir", "fvr"], ([s["tau"], s["fir"], s["fvr"]] for s in o.sweep))
        written.append(p)
        p = out / f"{o.name}_confusion.csv"
        _write_rows(p, ["true\\pred", *o.labels], ([lab, *row] for lab, row in zip(o.labels, o.confusion)))
        written.append(p)
        if o.kind != CLASSIFICATION:
            p = out / f"{o.name}_validity_vs_error.csv"
            _write_rows(p, ["row", "truth", "abs_error", "abs_error_enlarged", "validity"],
                        ([r, t[r], err[r], err[r] * spec.factor, v[r]] for r in range(len(t))))
            written.append(p)
        if figures:
            from . import plotting

            written += plotting.render_output(out, o, t, err, v, correct)
    return written
