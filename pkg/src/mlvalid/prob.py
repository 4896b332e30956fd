"""Validity of model outputs from per-feature conditional histograms.

A :class:`ConditionalBank` holds one histogram per (output ``j``, output cell
``k``, feature ``i``).  The bank fitted on training data (ground truth bank)
is compared with a bank accumulated online from the model's live inputs and
outputs (network bank); a query's validity for output ``j`` is::

    V_j = sum_i Q_ji * P_gt(x_i | k) / (sum_i max P_gt(. | k) + eps)

where ``Q_ji`` is the Jaccard similarity of the two banks' histograms for that
cell and feature.  In ``simplified`` mode ``Q`` is fixed to one.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .core import Dataset, DataError, Quantizer
from .hist import DEFAULT_BINS, DEFAULT_EPS, Histogram, feature_ranges, jaccard_masses, locate, masses

OK = "ok"
INSUFFICIENT = "insufficient-data"

SIMPLIFIED = "simplified"
ONLINE = "online"

AGGREGATIONS = ("sum", "median", "min-quality")


@dataclass(frozen=True)
class ProbConfig:
    bins: int = DEFAULT_BINS
    padding: float = 0.01
    eps: float = DEFAULT_EPS
    min_count: int = 5
    mode: str = SIMPLIFIED
    aggregation: str = "sum"
    q_min: float = 0.0
    threshold: float = 0.6
    smoothing: float = 0.0
    window: int | None = None
    condition_on: str = "prediction"

    def __post_init__(self):
        if self.mode not in (SIMPLIFIED, ONLINE):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.aggregation not in AGGREGATIONS:
            raise ValueError(f"unknown aggregation {self.aggregation!r}")
        if self.condition_on not in ("prediction", "truth"):
            raise ValueError(f"unknown conditioning {self.condition_on!r}")
        if self.window is not None and self.window < 1:
            raise ValueError("window must be positive")
        if self.bins < 1 or self.min_count < 0 or self.smoothing < 0:
            raise ValueError("invalid bank configuration")


class ConditionalBank:
    """Histograms for every (output, cell, feature) over shared feature binnings."""

    def __init__(self, lo, hi, bins: int, sizes: Sequence[int], counts=None):
        self.lo = np.array(lo, dtype=float)
        self.hi = np.array(hi, dtype=float)
        self.bins = int(bins)
        self.sizes = [int(s) for s in sizes]
        if self.lo.shape != self.hi.shape or self.lo.ndim != 1 or not (self.lo < self.hi).all():
            raise ValueError("invalid feature ranges")
        shape = lambda k: (k, self.n_features, self.bins + 2)
        if counts is None:
            counts = [np.zeros(shape(k), dtype=np.int64) for k in self.sizes]
        self.counts = [np.asarray(c, dtype=np.int64) for c in counts]
        for c, k in zip(self.counts, self.sizes):
            if c.shape != shape(k):
                raise ValueError("count array does not match bank layout")

    @property
    def n_features(self) -> int:
        return self.lo.shape[0]

    @property
    def n_outputs(self) -> int:
        return len(self.sizes)

    def empty_like(self) -> "ConditionalBank":
        return ConditionalBank(self.lo, self.hi, self.bins, self.sizes)

    def same_layout(self, other: "ConditionalBank") -> bool:
        return (
            self.bins == other.bins
            and self.sizes == other.sizes
            and np.array_equal(self.lo, other.lo)
            and np.array_equal(self.hi, other.hi)
        )

    def slots(self, X) -> np.ndarray:
        return locate(X, self.lo, self.hi, self.bins)

    def add(self, X, cells, sign: int = 1) -> None:
        """Add (or with ``sign=-1`` remove) rows ``X`` (n, N) under ``cells`` (n, M)."""
        X = np.asarray(X, dtype=float).reshape(-1, self.n_features)
        cells = np.asarray(cells, dtype=np.int64).reshape(len(X), self.n_outputs)
        if not np.isfinite(X).all():
            raise DataError("non-finite feature value")
        slots = self.slots(X)
        feat = np.broadcast_to(np.arange(self.n_features), slots.shape)
        for j, c in enumerate(self.counts):
            np.add.at(c, (np.broadcast_to(cells[:, j : j + 1], slots.shape), feat, slots), sign)

    def cell_count(self, j: int, k: int) -> int:
        return int(self.counts[j][k, 0].sum())

    def histogram(self, j: int, k: int, i: int) -> Histogram:
        return Histogram(self.lo[i], self.hi[i], self.bins, self.counts[j][k, i])

    def masses(self, j: int, alpha: float = 0.0) -> np.ndarray:
        return masses(self.counts[j], alpha)

    def to_dict(self) -> dict:
        cells = []
        for j, c in enumerate(self.counts):
            for k in range(self.sizes[j]):
                if not c[k].any():
                    continue
                cells.append(
                    {
                        "output": j,
                        "cell": k,
                        "count": int(c[k, 0].sum()),
                        "features": [self.histogram(j, k, i).to_dict() for i in range(self.n_features)],
                    }
                )
        return {
            "kind": "conditional",
            "bins": self.bins,
            "lo": self.lo.tolist(),
            "hi": self.hi.tolist(),
            "sizes": self.sizes,
            "cells": cells,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ConditionalBank":
        bank = cls(d["lo"], d["hi"], d["bins"], d["sizes"])
        for rec in d["cells"]:
            for i, h in enumerate(rec["features"]):
                bank.counts[rec["output"]][rec["cell"], i] = Histogram.from_dict(h).slots
        return bank

    def __eq__(self, other) -> bool:
        if not isinstance(other, ConditionalBank):
            return NotImplemented
        return self.same_layout(other) and all(
            np.array_equal(a, b) for a, b in zip(self.counts, other.counts)
        )


def fit_bank(X: np.ndarray, cells: np.ndarray, sizes: Sequence[int], bins: int = DEFAULT_BINS,
             padding: float = 0.01) -> ConditionalBank:
    """Fill a bank from training rows; ranges come from the full training set."""
    X = np.asarray(X, dtype=float)
    if len(X) == 0:
        raise DataError("empty training set")
    lo, hi = feature_ranges(X, padding)
    bank = ConditionalBank(lo, hi, bins, sizes)
    bank.add(X, cells)
    return bank


@dataclass
class FeatureTerm:
    feature: str
    quality: float
    p_gt: float
    max_gt: float
    contribution: float


@dataclass
class OutputValidity:
    output: str
    cell: int
    clamped: bool
    status: str
    validity: float | None
    decision: str | None
    terms: list[FeatureTerm] = field(default_factory=list)


@dataclass
class ValidityReport:
    outputs: list[OutputValidity]
    overall: float | None
    overall_status: str

    def to_dict(self) -> dict:
        # shallow on purpose: asdict() deep-copies and dominates streaming cost
        outs = []
        for o in self.outputs:
            d = dict(vars(o))
            if "terms" in d:
                d["terms"] = [vars(t) for t in d["terms"]]
            outs.append(d)
        return {"outputs": outs, "overall": self.overall, "overall_status": self.overall_status}


def validity_all(values: Sequence[float | None], weights: Sequence[float] | None = None) -> float | None:
    """(Weighted) mean of the per-output validities that are not ``None``.

    Returns ``None`` when every output lacks data.
    """
    if weights is None:
        weights = [1.0] * len(values)
    if len(weights) != len(values):
        raise ValueError("one weight per output required")
    if any(w <= 0 for w in weights):
        raise ValueError("weights must be positive")
    pairs = [(w, v) for w, v in zip(weights, values) if v is not None]
    if not pairs:
        return None
    return math.fsum(w * v for w, v in pairs) / math.fsum(w for w, _ in pairs)


class ProbValidator:
    """Ground-truth bank plus an online network bank for one model."""

    def __init__(self, gt: ConditionalBank, quantizer: Quantizer, config: ProbConfig = ProbConfig(),
                 feature_names: Sequence[str] | None = None, schema_hash: str | None = None,
                 weights: Sequence[float] | None = None):
        if gt.sizes != quantizer.sizes:
            raise ValueError("bank cells do not match quantizer")
        self.gt = gt
        self.quantizer = quantizer
        self.config = config
        self.feature_names = list(feature_names or [f"f{i}" for i in range(gt.n_features)])
        self.schema_hash = schema_hash
        self.weights = list(weights) if weights is not None else None
        self.net = gt.empty_like()
        self._history = deque()
        a = config.smoothing
        self._gt_mass = [gt.masses(j, a) for j in range(gt.n_outputs)]
        self._gt_max = [m.max(axis=-1) for m in self._gt_mass]
        self._gt_count = [c[:, 0, :].sum(axis=-1) for c in gt.counts]
        self._ones = np.ones(gt.n_features)

    @classmethod
    def fit(cls, train: Dataset, predictions, quantizer: Quantizer | None = None,
            config: ProbConfig = ProbConfig(), weights=None) -> "ProbValidator":
        predictions = np.asarray(predictions, dtype=float).reshape(-1, train.schema.n_outputs)
        if len(predictions) != len(train):
            raise DataError("one prediction per training row required")
        if len(train) == 0:
            raise DataError("empty training set")
        if quantizer is None:
            quantizer = Quantizer.from_schema(train.schema, np.vstack([train.Y, predictions]))
        target = predictions if config.condition_on == "prediction" else train.Y
        cells, _ = quantizer.quantize_many(target)
        gt = fit_bank(train.X, cells, quantizer.sizes, config.bins, config.padding)
        return cls(gt, quantizer, config, train.schema.features, train.schema.column_hash(), weights)

    def observe(self, x: Sequence[float], y_hat: Sequence[float]) -> None:
        """Add one live sample to the network bank."""
        x = np.asarray(x, dtype=float)
        if not np.isfinite(x).all():
            raise DataError("non-finite feature value")
        cells, _ = self.quantizer.quantize(y_hat)
        self.net.add(x, cells)
        if self.config.window is not None:
            self._history.append((x, cells))
            if len(self._history) > self.config.window:
                old_x, old_cells = self._history.popleft()
                self.net.add(old_x, old_cells, sign=-1)

    def quality(self, j: int, k: int, i: int) -> float:
        if self.config.mode == SIMPLIFIED:
            return 1.0
        p = self._gt_mass[j][k, i]
        q = masses(self.net.counts[j][k, i], self.config.smoothing)
        return float(jaccard_masses(p, q, self.config.eps))

    def _qualities(self, j: int, k: int) -> np.ndarray:
        if self.config.mode == SIMPLIFIED:
            return self._ones
        q = masses(self.net.counts[j][k], self.config.smoothing)
        return jaccard_masses(self._gt_mass[j][k], q, self.config.eps)

    def terms(self, X: np.ndarray, cells: np.ndarray):
        """Per-feature ``(P_gt(x_i), max P_gt)`` arrays of shape (n, M, N)."""
        X = np.asarray(X, dtype=float).reshape(-1, self.gt.n_features)
        slots = self.gt.slots(X)
        feat = np.arange(self.gt.n_features)
        p = np.empty(cells.shape + (self.gt.n_features,))
        mx = np.empty_like(p)
        for j in range(self.gt.n_outputs):
            k = cells[:, j : j + 1]
            p[:, j] = self._gt_mass[j][k, feat, slots]
            mx[:, j] = self._gt_max[j][cells[:, j]]
        return p, mx

    def validity(self, x: Sequence[float], y_hat: Sequence[float]) -> ValidityReport:
        return self.validity_many(np.asarray(x, dtype=float)[None], np.asarray(y_hat, dtype=float)[None])[0]

    def validity_many(self, X: np.ndarray, Y_hat: np.ndarray) -> list[ValidityReport]:
        """Reports for a block of queries against the current bank state."""
        X = np.asarray(X, dtype=float).reshape(-1, self.gt.n_features)
        if not np.isfinite(X).all():
            raise DataError("non-finite feature value")
        cells, clamped = self.quantizer.quantize_many(Y_hat)
        p, mx = self.terms(X, cells)
        reports = []
        for r in range(len(X)):
            outs = []
            for j, spec in enumerate(self.quantizer.outputs):
                k = int(cells[r, j])
                q = self._qualities(j, k)
                outs.append(self._output_validity(spec.name, k, bool(clamped[r, j]), q, p[r, j], mx[r, j],
                                                  int(self._gt_count[j][k])))
            vals = [o.validity if o.status == OK else None for o in outs]
            overall = validity_all(vals, self.weights)
            reports.append(ValidityReport(outs, overall, OK if overall is not None else INSUFFICIENT))
        return reports

    def _output_validity(self, name, k, clamped, q, p, mx, count) -> OutputValidity:
        cfg = self.config
        contrib = q * p
        terms = [
            FeatureTerm(f, float(qi), float(pi), float(mi), float(ci))
            for f, qi, pi, mi, ci in zip(self.feature_names, q, p, mx, contrib)
        ]
        if count < max(cfg.min_count, 1):
            return OutputValidity(name, k, clamped, INSUFFICIENT, None, None, terms)
        if cfg.aggregation == "median":
            v = float(np.median(contrib / mx))
        else:
            keep = q >= cfg.q_min if cfg.aggregation == "min-quality" else np.ones(len(q), bool)
            if not keep.any():
                return OutputValidity(name, k, clamped, INSUFFICIENT, None, None, terms)
            v = math.fsum(contrib[keep]) / (math.fsum(mx[keep]) + cfg.eps)
        decision = "valid" if v >= cfg.threshold else "invalid"
        return OutputValidity(name, k, clamped, OK, v, decision, terms)

    def to_dict(self) -> dict:
        cfg = asdict(self.config)
        return {
            "format": "mlvalid/prob",
            "schema_hash": self.schema_hash,
            "features": self.feature_names,
            "quantizer": self.quantizer.to_dict(),
            "config": cfg,
            "weights": self.weights,
            "bank": self.gt.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict, **overrides) -> "ProbValidator":
        cfg = {**d["config"], **{k: v for k, v in overrides.items() if v is not None}}
        return cls(
            ConditionalBank.from_dict(d["bank"]),
            Quantizer.from_dict(d["quantizer"]),
            ProbConfig(**cfg),
            d["features"],
            d["schema_hash"],
            d.get("weights"),
        )
