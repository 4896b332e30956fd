"""Seeded Gaussian-cluster datasets for desk-scale experiments.

A cluster spec is a JSON object::

    {"features": ["f0", "f1"],            # or "n_features": 2
     "label": "label",                    # output column name (optional)
     "clusters": [{"label": 0, "mean": [0, 0], "std": 1.0, "n": 500},
                  {"label": 1, "mean": [10, 10], "cov": [[1, 0], [0, 2]], "n": 500}]}

Each cluster takes either an isotropic ``std`` or a full covariance ``cov``.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .core import CLASSIFICATION, DataError, Dataset, OutputSpec, Schema


def _cov(cluster: dict, n_features: int) -> np.ndarray:
    if "cov" in cluster:
        cov = np.asarray(cluster["cov"], dtype=float)
        if cov.shape != (n_features, n_features) or not np.allclose(cov, cov.T):
            raise DataError("covariance must be a symmetric N x N matrix")
    else:
        std = float(cluster.get("std", 1.0))
        cov = np.eye(n_features) * std**2
    try:
        np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        raise DataError("degenerate covariance (not positive definite)") from None
    return cov


def gaussian_clusters(spec: dict, seed: int = 0) -> Dataset:
    features = spec.get("features") or [f"f{i}" for i in range(int(spec["n_features"]))]
    schema = Schema(tuple(features), (OutputSpec(spec.get("label", "label"), CLASSIFICATION),))
    clusters = spec.get("clusters") or []
    if not clusters:
        raise DataError("need at least one cluster")
    rng = np.random.default_rng(seed)
    xs, ys = [], []
    for c in clusters:
        n = int(c["n"])
        if n < 1:
            raise DataError("cluster sizes must be positive")
        mean = np.asarray(c["mean"], dtype=float)
        if mean.shape != (len(features),):
            raise DataError("cluster mean has wrong dimension")
        chol = np.linalg.cholesky(_cov(c, len(features)))
        xs.append(mean + rng.standard_normal((n, len(features))) @ chol.T)
        ys.append(np.full((n, 1), int(c["label"])))
    return Dataset(schema, np.vstack(xs), np.vstack(ys), source="synth")


def write_synth(spec_path: str | Path, out: str | Path, seed: int = 0,
                schema_out: str | Path | None = None) -> Dataset:
    with open(spec_path) as fh:
        spec = json.load(fh)
    ds = gaussian_clusters(spec, seed)
    ds.write_csv(out)
    if schema_out is not None:
        with open(schema_out, "w") as fh:
            json.dump(ds.schema.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")
    return ds
