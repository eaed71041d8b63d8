import os
from pathlib import Path

import numpy as np
import pytest

from onn4f import backend
from onn4f.mnist import CANONICAL_FILES, DATA_DIR_ENV

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(params=["python", "compiled"])
def kernel_backend(request):
    """Run the test once per kernel backend; skip ones not built here."""
    if request.param not in backend.available():
        pytest.skip(f"{request.param} backend not available")
    with backend.use(request.param):
        yield request.param


def find_mnist_dir() -> Path | None:
    candidates = []
    env = os.environ.get(DATA_DIR_ENV)
    if env:
        candidates.append(Path(env))
    candidates.append(Path("/root/data/mnist"))
    for cand in candidates:
        if all((cand / name).is_file() for name in CANONICAL_FILES):
            return cand
    return None


@pytest.fixture(scope="session")
def mnist_dir() -> Path:
    found = find_mnist_dir()
    if found is None:
        pytest.skip(
            f"MNIST IDX files not found (set {DATA_DIR_ENV} to a directory "
            f"holding {', '.join(CANONICAL_FILES)})"
        )
    return found


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
