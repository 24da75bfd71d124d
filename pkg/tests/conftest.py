import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from dbrf.data import Dataset, FeatureSchema  # noqa: E402

DATA_DIR = Path(__file__).resolve().parents[1] / "data"

# filled by test_acceptance; echoed once more at the end of the run
ACCEPTANCE_LINES: list[str] = []


def make_dataset(X, y, n_classes=None, names=None):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    y = np.asarray(y, dtype=np.int64)
    k = n_classes or int(y.max()) + 1
    k = max(k, 2)
    schema = FeatureSchema(
        columns=tuple((names[j] if names else f"f{j}", "numeric") for j in range(X.shape[1])),
        label_column="label",
        class_names=tuple(str(c) for c in range(k)),
    )
    return Dataset(X, y, np.arange(len(y)), schema)


@pytest.fixture
def iris_path():
    return DATA_DIR / "iris.csv"


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
