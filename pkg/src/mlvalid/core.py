"""Dataset schema, CSV ingestion, train/test splitting and output quantization."""

from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

CLASSIFICATION = "classification"
REGRESSION = "regression"


class DataError(ValueError):
    """Input data does not satisfy the contract of an operation."""


class SchemaMismatch(DataError):
    """Data, predictions or artifacts were produced under a different schema."""


@dataclass(frozen=True)
class OutputSpec:
    """One model output: its column name, task kind and quantizer parameters.

    For classification outputs ``bins`` is the class count (``None`` means
    "infer from the training labels").
    """

    name: str
    kind: str = CLASSIFICATION
    factor: float = 10.0
    bins: int | None = None
    lo: float = 0.0
    hi: float = 10.0

    def __post_init__(self):
        if self.kind not in (CLASSIFICATION, REGRESSION):
            raise DataError(f"output {self.name!r}: unknown kind {self.kind!r}")
        if self.kind == REGRESSION:
            if self.bins is None:
                object.__setattr__(self, "bins", 10)
            if not self.lo < self.hi:
                raise DataError(f"output {self.name!r}: need lo < hi")
            if self.factor <= 0:
                raise DataError(f"output {self.name!r}: factor must be positive")
        if self.bins is not None and self.bins < 1:
            raise DataError(f"output {self.name!r}: bins must be positive")

    def to_dict(self) -> dict:
        d = {"name": self.name, "kind": self.kind}
        if self.kind == REGRESSION:
            d.update(factor=self.factor, bins=self.bins, lo=self.lo, hi=self.hi)
        elif self.bins is not None:
            d["classes"] = self.bins
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "OutputSpec":
        kind = d.get("kind", CLASSIFICATION)
        if kind == CLASSIFICATION:
            return cls(name=d["name"], kind=kind, bins=d.get("classes"))
        return cls(
            name=d["name"],
            kind=kind,
            factor=float(d.get("factor", 10.0)),
            bins=int(d.get("bins", 10)),
            lo=float(d.get("lo", 0.0)),
            hi=float(d.get("hi", 10.0)),
        )


@dataclass(frozen=True)
class Schema:
    features: tuple[str, ...]
    outputs: tuple[OutputSpec, ...]
    delimiter: str = ","

    def __post_init__(self):
        object.__setattr__(self, "features", tuple(self.features))
        object.__setattr__(self, "outputs", tuple(self.outputs))
        if not self.features:
            raise DataError("schema needs at least one feature column")
        if not self.outputs:
            raise DataError("schema needs at least one output column")
        names = list(self.features) + [o.name for o in self.outputs]
        if len(set(names)) != len(names):
            raise DataError("schema column names must be unique")

    @property
    def n_features(self) -> int:
        return len(self.features)

    @property
    def n_outputs(self) -> int:
        return len(self.outputs)

    @property
    def columns(self) -> list[str]:
        return list(self.features) + [o.name for o in self.outputs]

    def to_dict(self) -> dict:
        d = {
            "features": list(self.features),
            "outputs": [o.to_dict() for o in self.outputs],
        }
        if self.delimiter != ",":
            d["delimiter"] = self.delimiter
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Schema":
        try:
            return cls(
                features=tuple(d["features"]),
                outputs=tuple(OutputSpec.from_dict(o) for o in d["outputs"]),
                delimiter=d.get("delimiter", ","),
            )
        except (KeyError, TypeError) as exc:
            raise DataError(f"malformed schema: {exc}") from exc

    @classmethod
    def load(cls, path: str | Path) -> "Schema":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def column_hash(self) -> str:
        """Hash of the column layout (names and task kinds).

        Quantizer parameters are deliberately excluded so that an artifact
        fitted with inferred class counts still matches its source schema.
        """
        layout = {
            "features": list(self.features),
            "outputs": [[o.name, o.kind] for o in self.outputs],
        }
        blob = json.dumps(layout, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


@dataclass(frozen=True, eq=False)
class Dataset:
    """Rows of finite feature values ``X`` (n, N) and outputs ``Y`` (n, M)."""

    schema: Schema
    X: np.ndarray
    Y: np.ndarray
    source: str | None = None
    source_rows: int = 0
    dropped: int = 0

    def __post_init__(self):
        X = np.array(self.X, dtype=float, ndmin=2)
        Y = np.array(self.Y, dtype=float, ndmin=2)
        if X.size == 0:
            X = X.reshape(0, self.schema.n_features)
        if Y.size == 0:
            Y = Y.reshape(0, self.schema.n_outputs)
        if X.shape[1] != self.schema.n_features or Y.shape[1] != self.schema.n_outputs:
            raise DataError("row arity does not match schema")
        if X.shape[0] != Y.shape[0]:
            raise DataError("feature and output row counts differ")
        if not (np.isfinite(X).all() and np.isfinite(Y).all()):
            raise DataError("dataset contains non-finite values")
        X.setflags(write=False)
        Y.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Y", Y)

    def __len__(self) -> int:
        return self.X.shape[0]

    def subset(self, idx: Sequence[int]) -> "Dataset":
        idx = np.asarray(idx, dtype=int)
        return Dataset(self.schema, self.X[idx], self.Y[idx], source=self.source)

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, delimiter=self.schema.delimiter, lineterminator="\n")
            w.writerow(self.schema.columns)
            for x, y in zip(self.X, self.Y):
                w.writerow([repr(float(v)) for v in x] + [_fmt_output(v) for v in y])


def _fmt_output(v: float) -> str:
    return str(int(v)) if float(v).is_integer() else repr(float(v))


def _parse_cell(token: str) -> float | None:
    token = token.strip()
    if not token:
        return None
    try:
        v = float(token)
    except ValueError:
        return None
    return v if math.isfinite(v) else None


def iter_csv_rows(path: str | Path, schema: Schema) -> Iterator[tuple[int, list[float] | None]]:
    """Yield ``(source_row, values)`` for every data row of a CSV file.

    ``values`` holds the schema columns in schema order, or ``None`` when any
    of them is missing, non-numeric or non-finite.  Rows are read lazily.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such data file: {path}")
    with open(path, newline="") as fh:
        reader = csv.reader(fh, delimiter=schema.delimiter)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty file, header row required") from None
        missing = [c for c in schema.columns if c not in header]
        if missing:
            raise SchemaMismatch(f"{path}: header lacks schema columns {missing}")
        pos = [header.index(c) for c in schema.columns]
        for n, row in enumerate(reader):
            if not row:
                continue
            if len(row) < len(header):
                yield n, None
                continue
            values = [_parse_cell(row[p]) for p in pos]
            yield n, None if any(v is None for v in values) else values


def ingest_csv(path: str | Path, schema: Schema) -> Dataset:
    """Load a delimited file, dropping every row with a missing schema cell."""
    rows = []
    seen = 0
    for _, values in iter_csv_rows(path, schema):
        seen += 1
        if values is not None:
            rows.append(values)
    if not rows:
        raise DataError(f"{path}: no complete rows ({seen} read)")
    arr = np.asarray(rows, dtype=float)
    n = schema.n_features
    return Dataset(
        schema,
        arr[:, :n],
        arr[:, n:],
        source=str(path),
        source_rows=seen,
        dropped=seen - len(rows),
    )


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise DataError("train fraction must lie in (0, 1)")


def split(ds: Dataset, spec: SplitSpec = SplitSpec()) -> tuple[Dataset, Dataset]:
    """Seeded shuffle, then cut into train and test partitions.

    The train size is ``round(fraction * n)`` (half rounds up), kept inside
    ``[1, n - 1]`` so neither partition is empty.
    """
    n = len(ds)
    if n < 2:
        raise DataError("need at least two rows to split")
    n_train = int(math.floor(spec.train_fraction * n + 0.5))
    n_train = min(max(n_train, 1), n - 1)
    perm = np.random.default_rng(spec.seed).permutation(n)
    return ds.subset(perm[:n_train]), ds.subset(perm[n_train:])


@dataclass(frozen=True)
class Quantizer:
    """Per-output mapping between output values and cell (bin/class) indices."""

    outputs: tuple[OutputSpec, ...]

    def __post_init__(self):
        object.__setattr__(self, "outputs", tuple(self.outputs))
        for o in self.outputs:
            if o.bins is None:
                raise DataError(f"output {o.name!r}: class count unresolved")

    @classmethod
    def from_schema(cls, schema: Schema, Y: np.ndarray | None = None) -> "Quantizer":
        """Build from schema parameters; unknown class counts come from ``Y``."""
        specs = []
        for j, o in enumerate(schema.outputs):
            if o.kind == CLASSIFICATION and o.bins is None:
                if Y is None or len(Y) == 0:
                    raise DataError(f"output {o.name!r}: class count needs training labels")
                labels = _as_labels(np.asarray(Y)[:, j], o.name)
                o = OutputSpec(o.name, CLASSIFICATION, bins=int(labels.max()) + 1)
            specs.append(o)
        return cls(tuple(specs))

    @property
    def sizes(self) -> list[int]:
        return [int(o.bins) for o in self.outputs]

    def quantize(self, y: Sequence[float]) -> tuple[list[int], list[bool]]:
        """Return cell indices and per-output clamp flags for one output vector."""
        cells, clamped = self.quantize_many(np.asarray(y, dtype=float).reshape(1, -1))
        return [int(c) for c in cells[0]], [bool(c) for c in clamped[0]]

    def quantize_many(self, Y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        Y = np.asarray(Y, dtype=float)
        if Y.ndim != 2 or Y.shape[1] != len(self.outputs):
            raise DataError("output arity does not match quantizer")
        cells = np.empty(Y.shape, dtype=np.int64)
        clamped = np.zeros(Y.shape, dtype=bool)
        for j, o in enumerate(self.outputs):
            col = Y[:, j]
            if o.kind == CLASSIFICATION:
                labels = _as_labels(col, o.name)
                if labels.size and labels.max() >= o.bins:
                    raise DataError(f"output {o.name!r}: label outside [0, {o.bins})")
                cells[:, j] = labels
                continue
            width = (o.hi - o.lo) / o.bins
            raw = np.floor((col * o.factor - o.lo) / width)
            clamped[:, j] = (raw < 0) | (raw > o.bins - 1)
            # the top edge belongs to the last bin, so it is not a clamp
            clamped[:, j] &= col * o.factor != o.hi
            cells[:, j] = np.clip(raw, 0, o.bins - 1).astype(np.int64)
        return cells, clamped

    def dequantize(self, cells: Sequence[int]) -> list[float]:
        """Map cell indices back to bin centres in raw (unenlarged) units."""
        out = []
        for o, c in zip(self.outputs, cells):
            if o.kind == CLASSIFICATION:
                out.append(float(c))
            else:
                width = (o.hi - o.lo) / o.bins
                out.append((o.lo + (c + 0.5) * width) / o.factor)
        return out

    def to_dict(self) -> list[dict]:
        return [o.to_dict() for o in self.outputs]

    @classmethod
    def from_dict(cls, d: list[dict]) -> "Quantizer":
        return cls(tuple(OutputSpec.from_dict(o) for o in d))


def _as_labels(col: np.ndarray, name: str) -> np.ndarray:
    if col.size and (np.any(col < 0) or np.any(col != np.floor(col))):
        raise DataError(f"output {name!r}: class labels must be non-negative integers")
    return col.astype(np.int64)
