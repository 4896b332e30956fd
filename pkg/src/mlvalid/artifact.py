"""Validator artifacts on disk and the streaming validation loop."""

from __future__ import annotations

import itertools
import json
from pathlib import Path
from typing import IO, Iterable, Iterator, Sequence

import numpy as np

from . import __version__
from .bishop import DensityBank
from .core import DataError, SchemaMismatch
from .knn import KnnIndex
from .prob import ONLINE, ProbValidator, ValidityReport

FORMATS = {"mlvalid/prob": "prob", "mlvalid/knn": "knn", "mlvalid/bishop": "bishop"}


def dumps(obj: dict) -> str:
    """Canonical JSON: sorted keys, repr-exact floats, trailing newline."""
    return json.dumps(obj, sort_keys=True, indent=1, allow_nan=False) + "\n"


def save(path: str | Path, validator, options: dict) -> dict:
    doc = validator.to_dict()
    doc["header"] = {"version": __version__, "validator": FORMATS[doc["format"]], "options": options}
    Path(path).write_text(dumps(doc))
    return doc


def load(path: str | Path, threshold: float | None = None, mode: str | None = None,
         weights: Sequence[float] | None = None):
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}: not a validator artifact ({exc})") from None
    kind = FORMATS.get(doc.get("format"))
    if kind == "prob":
        v = ProbValidator.from_dict(doc, threshold=threshold, mode=mode)
    elif kind == "knn":
        v = KnnIndex.from_dict(doc, threshold=threshold)
    elif kind == "bishop":
        v = DensityBank.from_dict(doc, threshold=threshold)
    else:
        raise DataError(f"{path}: unknown artifact format {doc.get('format')!r}")
    if weights is not None:
        v.weights = list(weights)
    return v


def check_schema(validator, schema_hash: str) -> None:
    if validator.schema_hash != schema_hash:
        raise SchemaMismatch("artifact was fitted under a different schema")


def _record(row: int, report: ValidityReport) -> str:
    return json.dumps({"row": row, **report.to_dict()}, separators=(",", ":"))


def stream_validate(validator, rows: Iterable[Sequence[float]], predictions: Iterable[Sequence[float]],
                    out: IO[str], chunk: int = 2048) -> int:
    """Validate paired rows and predictions, writing one JSON line per row.

    Both inputs are consumed lazily in blocks of ``chunk`` rows so memory does
    not grow with stream length.  An online probabilistic validator folds
    each sample into its network bank before scoring it, strictly in order.
    Returns the number of rows written.
    """
    online = isinstance(validator, ProbValidator) and validator.config.mode == ONLINE
    sentinel = object()
    pairs = itertools.zip_longest(rows, predictions, fillvalue=sentinel)
    n = 0
    while True:
        block = list(itertools.islice(pairs, chunk))
        if not block:
            return n
        if any(x is sentinel or y is sentinel for x, y in block):
            raise DataError("data rows and predictions differ in length")
        X = np.asarray([x for x, _ in block], dtype=float)
        Y = np.asarray([y for _, y in block], dtype=float)
        if online:
            reports = []
            for x, y in zip(X, Y):
                validator.observe(x, y)
                reports.append(validator.validity(x, y))
        else:
            reports = validator.validity_many(X, Y)
        for report in reports:
            out.write(_record(n, report))
            out.write("\n")
            n += 1


def iter_reports(lines: Iterable[str]) -> Iterator[dict]:
    for line in lines:
        if line.strip():
            yield json.loads(line)
