"""Exact k-nearest-neighbour validity over the stored training set.

Features are z-scored with the training statistics.  A query predicted in
cell ``k`` of output ``j`` is compared with every training row of that cell;
the mean distance ``d`` to its ``k`` nearest ones maps to ``1 / (1 + d / d_ref)``
where ``d_ref`` is the cell's typical within-cell neighbour distance.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.spatial import cKDTree

from .core import Dataset, DataError, Quantizer
from .hist import DEFAULT_EPS
from .prob import INSUFFICIENT, OK, ValidityReport, validity_all

CELL = "cell"
GLOBAL = "global"


@dataclass
class KnnOutputValidity:
    output: str
    cell: int
    clamped: bool
    status: str
    validity: float | None
    decision: str | None
    mean_distance: float | None = None
    reference_distance: float | None = None
    agreement: float | None = None
    neighbors: list[int] = field(default_factory=list)
    feature_sq_distance: dict[str, float] = field(default_factory=dict)


def standardize_stats(X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Column means and standard deviations; constant columns get (0, 1)."""
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    const = ~(std > 0)
    return np.where(const, 0.0, mean), np.where(const, 1.0, std)


def distances(Z: np.ndarray, z: np.ndarray) -> np.ndarray:
    return np.sqrt(((Z - z) ** 2).sum(axis=-1))


def nearest(Z: np.ndarray, z: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Positions and distances of the ``k`` nearest rows; ties go to the lower position."""
    d = distances(Z, z)
    order = np.argsort(d, kind="stable")[:k]
    return order, d[order]


def reference_distance(Z: np.ndarray, k: int) -> float | None:
    """Median over rows of the mean distance to their ``k`` nearest other rows.

    Fewer than ``k`` other rows means fewer neighbours are used; a single row
    has no reference distance.
    """
    n = len(Z)
    if n < 2:
        return None
    m = min(k, n - 1)
    _, idx = cKDTree(Z).query(Z, k=m + 1)
    idx = np.asarray(idx).reshape(n, m + 1)
    means = np.empty(n)
    for r in range(n):
        d = distances(Z[idx[r]], Z[r])
        hit = np.flatnonzero(idx[r] == r)
        # drop self; if zero-distance duplicates displaced it, drop the farthest
        d = np.sort(np.delete(d, hit[0]) if hit.size else d)[:m]
        means[r] = d.mean()
    return float(np.median(means))


class KnnIndex:
    def __init__(self, mean, std, Z, cells, quantizer: Quantizer, k: int, d_ref,
                 variant: str = CELL, feature_names: Sequence[str] | None = None,
                 schema_hash: str | None = None, eps: float = DEFAULT_EPS,
                 threshold: float = 0.6, weights: Sequence[float] | None = None):
        self.mean = np.asarray(mean, dtype=float)
        self.std = np.asarray(std, dtype=float)
        self.Z = np.asarray(Z, dtype=float).reshape(-1, len(self.mean))
        self.cells = np.asarray(cells, dtype=np.int64).reshape(len(self.Z), -1)
        self.quantizer = quantizer
        self.k = int(k)
        self.d_ref = d_ref
        self.variant = variant
        self.feature_names = list(feature_names or [f"f{i}" for i in range(len(self.mean))])
        self.schema_hash = schema_hash
        self.eps = eps
        self.threshold = threshold
        self.weights = list(weights) if weights is not None else None
        if variant not in (CELL, GLOBAL):
            raise ValueError(f"unknown kNN variant {variant!r}")
        self._members = [
            [np.flatnonzero(self.cells[:, j] == c) for c in range(size)]
            for j, size in enumerate(quantizer.sizes)
        ]

    @classmethod
    def fit(cls, train: Dataset, predictions, quantizer: Quantizer | None = None, k: int | None = None,
            variant: str = CELL, eps: float = DEFAULT_EPS, threshold: float = 0.6,
            weights=None) -> "KnnIndex":
        predictions = np.asarray(predictions, dtype=float).reshape(-1, train.schema.n_outputs)
        if len(train) == 0:
            raise DataError("empty training set")
        if len(predictions) != len(train):
            raise DataError("one prediction per training row required")
        k = train.schema.n_features if k is None else int(k)
        if k < 1:
            raise DataError("k must be at least 1")
        if quantizer is None:
            quantizer = Quantizer.from_schema(train.schema, np.vstack([train.Y, predictions]))
        cells, _ = quantizer.quantize_many(predictions)
        mean, std = standardize_stats(train.X)
        Z = (train.X - mean) / std
        if variant == CELL:
            d_ref = [
                [reference_distance(Z[cells[:, j] == c], k) for c in range(size)]
                for j, size in enumerate(quantizer.sizes)
            ]
        else:
            d_ref = reference_distance(Z, k)
        return cls(mean, std, Z, cells, quantizer, k, d_ref, variant, train.schema.features,
                   train.schema.column_hash(), eps, threshold, weights)

    def transform(self, X) -> np.ndarray:
        return (np.asarray(X, dtype=float) - self.mean) / self.std

    def validity(self, x: Sequence[float], y_hat: Sequence[float]) -> ValidityReport:
        x = np.asarray(x, dtype=float)
        if not np.isfinite(x).all():
            raise DataError("non-finite feature value")
        z = self.transform(x)
        cells, clamped = self.quantizer.quantize(y_hat)
        outs = [self._output(j, c, cl, z) for j, (c, cl) in enumerate(zip(cells, clamped))]
        vals = [o.validity if o.status == OK else None for o in outs]
        overall = validity_all(vals, self.weights)
        return ValidityReport(outs, overall, OK if overall is not None else INSUFFICIENT)

    def validity_many(self, X, Y_hat) -> list[ValidityReport]:
        return [self.validity(x, y) for x, y in zip(np.asarray(X, float), np.asarray(Y_hat, float))]

    def _output(self, j: int, c: int, clamped: bool, z: np.ndarray) -> KnnOutputValidity:
        name = self.quantizer.outputs[j].name
        if self.variant == CELL:
            rows = self._members[j][c]
            d_ref = self.d_ref[j][c]
        else:
            rows = np.arange(len(self.Z))
            d_ref = self.d_ref
        if len(rows) < self.k or d_ref is None:
            return KnnOutputValidity(name, c, clamped, INSUFFICIENT, None, None)
        pos, d = nearest(self.Z[rows], z, self.k)
        nbr = rows[pos]
        d_bar = float(d.mean())
        v = 1.0 / (1.0 + d_bar / max(d_ref, self.eps))
        agreement = None
        if self.variant == GLOBAL:
            agreement = float(np.mean(self.cells[nbr, j] == c))
            v *= agreement
        sq = ((self.Z[nbr] - z) ** 2).mean(axis=0)
        return KnnOutputValidity(
            name, c, clamped, OK, v, "valid" if v >= self.threshold else "invalid",
            mean_distance=d_bar,
            reference_distance=d_ref,
            agreement=agreement,
            neighbors=[int(r) for r in nbr],
            feature_sq_distance={f: float(s) for f, s in zip(self.feature_names, sq)},
        )

    def to_dict(self) -> dict:
        return {
            "format": "mlvalid/knn",
            "schema_hash": self.schema_hash,
            "features": self.feature_names,
            "quantizer": self.quantizer.to_dict(),
            "config": {"k": self.k, "variant": self.variant, "eps": self.eps, "threshold": self.threshold},
            "weights": self.weights,
            "means": self.mean.tolist(),
            "stds": self.std.tolist(),
            "rows": self.Z.tolist(),
            "cells": self.cells.tolist(),
            "d_ref": self.d_ref,
        }

    @classmethod
    def from_dict(cls, d: dict, threshold: float | None = None) -> "KnnIndex":
        cfg = d["config"]
        return cls(
            d["means"], d["stds"], d["rows"], d["cells"], Quantizer.from_dict(d["quantizer"]),
            cfg["k"], d["d_ref"], cfg["variant"], d["features"], d["schema_hash"], cfg["eps"],
            cfg["threshold"] if threshold is None else threshold, d.get("weights"),
        )
