"""Fixed-bin online histograms and the Jaccard similarity between them.

Counts live in a slot array of length ``bins + 2``: slot 0 is the underflow
bin, slots ``1..bins`` the interior bins and slot ``bins + 1`` the overflow
bin.  Interior bins are half-open ``[edge_b, edge_b+1)`` except the last,
which also holds ``hi``.
"""

from __future__ import annotations

import math

import numpy as np

DEFAULT_BINS = 32
DEFAULT_EPS = 1e-12


def locate(x, lo, hi, bins: int):
    """Slot index of ``x`` for binning(s) ``[lo, hi]`` with ``bins`` interior bins.

    Works elementwise on arrays; ``lo`` and ``hi`` broadcast against ``x``.
    """
    x = np.asarray(x, dtype=float)
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    width = (hi - lo) / bins
    with np.errstate(invalid="ignore"):
        interior = np.floor((x - lo) / width)
    slot = np.clip(interior, 0, bins - 1).astype(np.int64) + 1
    slot = np.where(x < lo, 0, slot)
    return np.where(x > hi, bins + 1, slot)


def masses(slots: np.ndarray, alpha: float = 0.0) -> np.ndarray:
    """Normalized masses of a slot-count array (last axis).

    ``alpha`` adds pseudo-counts to the interior bins only.  An empty
    histogram has all-zero masses regardless of ``alpha``.
    """
    slots = np.asarray(slots, dtype=float)
    total = slots.sum(axis=-1, keepdims=True)
    if alpha:
        slots = slots.copy()
        slots[..., 1:-1] += alpha
        denom = total + alpha * (slots.shape[-1] - 2)
    else:
        denom = total
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(total > 0, slots / np.where(denom > 0, denom, 1.0), 0.0)
    return out


def jaccard_masses(p: np.ndarray, q: np.ndarray, eps: float = DEFAULT_EPS) -> np.ndarray:
    """Bin-wise min over bin-wise max of two mass arrays (last axis)."""
    inter = np.minimum(p, q).sum(axis=-1)
    union = np.maximum(p, q).sum(axis=-1)
    return inter / (union + eps)


def feature_ranges(X: np.ndarray, padding: float = 0.01) -> tuple[np.ndarray, np.ndarray]:
    """Per-column ``[min, max]`` widened by ``padding`` of the span on each side.

    A constant column gets a unit-wide range centred on its value.
    """
    X = np.asarray(X, dtype=float)
    lo = X.min(axis=0)
    hi = X.max(axis=0)
    span = hi - lo
    pad = np.where(span > 0, padding * span, 0.5)
    return lo - pad, hi + pad


class Histogram:
    """Single-feature histogram with exact integer counts."""

    def __init__(self, lo: float, hi: float, bins: int = DEFAULT_BINS, slots=None):
        lo, hi = float(lo), float(hi)
        if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
            raise ValueError(f"invalid histogram range [{lo}, {hi}]")
        if bins < 1:
            raise ValueError("bins must be positive")
        self.lo, self.hi, self.bins = lo, hi, int(bins)
        if slots is None:
            self.slots = np.zeros(self.bins + 2, dtype=np.int64)
        else:
            self.slots = np.array(slots, dtype=np.int64)
            if self.slots.shape != (self.bins + 2,) or (self.slots < 0).any():
                raise ValueError("slot array does not match binning")

    @property
    def counts(self) -> np.ndarray:
        return self.slots[1:-1]

    @property
    def underflow(self) -> int:
        return int(self.slots[0])

    @property
    def overflow(self) -> int:
        return int(self.slots[-1])

    @property
    def total(self) -> int:
        return int(self.slots.sum())

    def same_binning(self, other: "Histogram") -> bool:
        return (self.lo, self.hi, self.bins) == (other.lo, other.hi, other.bins)

    def slot_of(self, x: float) -> int:
        return int(locate(x, self.lo, self.hi, self.bins))

    def update(self, x: float) -> "Histogram":
        if not math.isfinite(x):
            raise ValueError(f"non-finite sample {x!r}")
        self.slots[self.slot_of(x)] += 1
        return self

    def update_many(self, xs) -> "Histogram":
        xs = np.asarray(xs, dtype=float).ravel()
        if not np.isfinite(xs).all():
            raise ValueError("non-finite sample")
        self.slots += np.bincount(locate(xs, self.lo, self.hi, self.bins), minlength=self.bins + 2)
        return self

    def masses(self, alpha: float = 0.0) -> np.ndarray:
        return masses(self.slots, alpha)

    def eval_at(self, x: float, alpha: float = 0.0) -> float:
        """Normalized mass of the bin holding ``x`` (0 for an empty histogram)."""
        return float(self.masses(alpha)[self.slot_of(x)])

    def max_mass(self, alpha: float = 0.0) -> float:
        return float(self.masses(alpha).max())

    def jaccard(self, other: "Histogram", eps: float = DEFAULT_EPS, alpha: float = 0.0) -> float:
        return jaccard(self, other, eps, alpha)

    def to_dict(self) -> dict:
        return {
            "lo": self.lo,
            "hi": self.hi,
            "bins": self.bins,
            "counts": self.counts.tolist(),
            "underflow": self.underflow,
            "overflow": self.overflow,
            "total": self.total,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Histogram":
        slots = [d["underflow"], *d["counts"], d["overflow"]]
        h = cls(d["lo"], d["hi"], d["bins"], slots)
        if h.total != d["total"]:
            raise ValueError("histogram total disagrees with its counts")
        return h

    def __eq__(self, other) -> bool:
        if not isinstance(other, Histogram):
            return NotImplemented
        return self.same_binning(other) and np.array_equal(self.slots, other.slots)

    def __repr__(self) -> str:
        return f"Histogram(lo={self.lo!r}, hi={self.hi!r}, bins={self.bins}, total={self.total})"


def jaccard(p: Histogram, q: Histogram, eps: float = DEFAULT_EPS, alpha: float = 0.0) -> float:
    """Intersection-over-union of two normalized histograms, under/overflow included."""
    if not p.same_binning(q):
        raise ValueError("histograms have different binning")
    return float(jaccard_masses(p.masses(alpha), q.masses(alpha), eps))
