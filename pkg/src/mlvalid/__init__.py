"""Explainable online validation of model outputs against their training data."""

__version__ = "0.1.0"

from .core import (  # noqa: E402
    Dataset,
    DataError,
    OutputSpec,
    Quantizer,
    Schema,
    SchemaMismatch,
    SplitSpec,
    ingest_csv,
    split,
)
from .hist import Histogram, jaccard  # noqa: E402
from .prob import ConditionalBank, ProbConfig, ProbValidator, ValidityReport, validity_all  # noqa: E402
from .knn import KnnIndex  # noqa: E402
from .bishop import DensityBank  # noqa: E402
from .predictor import PredictionSet, fit_predict_builtin, load_external  # noqa: E402

__all__ = [
    "ConditionalBank",
    "DataError",
    "Dataset",
    "DensityBank",
    "Histogram",
    "KnnIndex",
    "OutputSpec",
    "PredictionSet",
    "ProbConfig",
    "ProbValidator",
    "Quantizer",
    "Schema",
    "SchemaMismatch",
    "SplitSpec",
    "ValidityReport",
    "fit_predict_builtin",
    "ingest_csv",
    "jaccard",
    "load_external",
    "split",
    "validity_all",
]
