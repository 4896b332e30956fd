import numpy as np
import pytest

from mlvalid.core import CLASSIFICATION, REGRESSION, Dataset, OutputSpec, Schema

ACCEPTANCE = []


def record(criterion: str, passed: bool | None, detail: str = "") -> None:
    """Log one acceptance outcome; ``passed=None`` marks a skipped check."""
    ACCEPTANCE.append((criterion, passed, detail))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, passed, detail in ACCEPTANCE:
        status = "SKIP" if passed is None else "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"{status}  {name}  {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def class_schema(n_features=2, name="label", classes=None):
    return Schema(tuple(f"f{i}" for i in range(n_features)), (OutputSpec(name, CLASSIFICATION, bins=classes),))


def reg_schema(n_features=2, factor=10.0, bins=10, lo=0.0, hi=10.0):
    return Schema(tuple(f"f{i}" for i in range(n_features)),
                  (OutputSpec("y", REGRESSION, factor=factor, bins=bins, lo=lo, hi=hi),))


def two_gaussians(rng, n_per_class=250, n_features=2, sep=10.0):
    X = np.vstack([rng.standard_normal((n_per_class, n_features)),
                   sep + rng.standard_normal((n_per_class, n_features))])
    Y = np.repeat([0, 1], n_per_class)[:, None]
    return Dataset(class_schema(n_features), X, Y)
