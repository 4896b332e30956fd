"""Unconditional input-density novelty baseline.

One histogram per feature over all training inputs, scored like the
conditional validator with the quality fixed to one.  Comparing the two
isolates what conditioning on the model output buys.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import Dataset, DataError
from .hist import DEFAULT_BINS, DEFAULT_EPS, Histogram, feature_ranges, locate, masses
from .prob import OK, FeatureTerm, ValidityReport


@dataclass
class BaselineOutputValidity:
    output: str
    status: str
    validity: float
    decision: str
    terms: list[FeatureTerm] = field(default_factory=list)


class DensityBank:
    def __init__(self, lo, hi, bins: int, counts=None, feature_names=None, output_names=None,
                 schema_hash: str | None = None, eps: float = DEFAULT_EPS, threshold: float = 0.6):
        self.lo = np.array(lo, dtype=float)
        self.hi = np.array(hi, dtype=float)
        self.bins = int(bins)
        n = len(self.lo)
        self.counts = np.zeros((n, self.bins + 2), np.int64) if counts is None else np.array(counts, np.int64)
        if self.counts.shape != (n, self.bins + 2):
            raise ValueError("count array does not match binning")
        self.feature_names = list(feature_names or [f"f{i}" for i in range(n)])
        self.output_names = list(output_names or ["out_0"])
        self.schema_hash = schema_hash
        self.eps = eps
        self.threshold = threshold
        self._mass = masses(self.counts)
        self._max = self._mass.max(axis=-1)

    @classmethod
    def fit(cls, train: Dataset, bins: int = DEFAULT_BINS, padding: float = 0.01,
            eps: float = DEFAULT_EPS, threshold: float = 0.6) -> "DensityBank":
        if len(train) == 0:
            raise DataError("empty training set")
        lo, hi = feature_ranges(train.X, padding)
        slots = locate(train.X, lo, hi, bins)
        counts = np.stack([np.bincount(slots[:, i], minlength=bins + 2) for i in range(len(lo))])
        return cls(lo, hi, bins, counts, train.schema.features, [o.name for o in train.schema.outputs],
                   train.schema.column_hash(), eps, threshold)

    def histogram(self, i: int) -> Histogram:
        return Histogram(self.lo[i], self.hi[i], self.bins, self.counts[i])

    def score(self, x: Sequence[float]) -> tuple[float, list[FeatureTerm]]:
        x = np.asarray(x, dtype=float)
        if not np.isfinite(x).all():
            raise DataError("non-finite feature value")
        slots = locate(x, self.lo, self.hi, self.bins)
        p = self._mass[np.arange(len(x)), slots]
        terms = [FeatureTerm(f, 1.0, float(pi), float(mi), float(pi))
                 for f, pi, mi in zip(self.feature_names, p, self._max)]
        return math.fsum(p) / (math.fsum(self._max) + self.eps), terms

    def validity(self, x: Sequence[float], y_hat: Sequence[float] | None = None) -> ValidityReport:
        """Input-only validity, repeated for every output so reports line up."""
        v, terms = self.score(x)
        decision = "valid" if v >= self.threshold else "invalid"
        outs = [BaselineOutputValidity(name, OK, v, decision, terms) for name in self.output_names]
        return ValidityReport(outs, v, OK)

    def validity_many(self, X, Y_hat=None) -> list[ValidityReport]:
        return [self.validity(x) for x in np.asarray(X, dtype=float)]

    def to_dict(self) -> dict:
        return {
            "format": "mlvalid/bishop",
            "kind": "unconditional",
            "schema_hash": self.schema_hash,
            "features": self.feature_names,
            "outputs": self.output_names,
            "config": {"bins": self.bins, "eps": self.eps, "threshold": self.threshold},
            "lo": self.lo.tolist(),
            "hi": self.hi.tolist(),
            "histograms": [self.histogram(i).to_dict() for i in range(len(self.lo))],
        }

    @classmethod
    def from_dict(cls, d: dict, threshold: float | None = None) -> "DensityBank":
        counts = [Histogram.from_dict(h).slots for h in d["histograms"]]
        cfg = d["config"]
        return cls(d["lo"], d["hi"], cfg["bins"], counts, d["features"], d["outputs"], d["schema_hash"],
                   cfg["eps"], cfg["threshold"] if threshold is None else threshold)
