from __future__ import annotations

import numpy as np
import pytest

from qstable.search import haar_unitary
from qstable.tensor_core import StateSet, StateVector

_CRITERIA: list[tuple[str, str]] = []


def local_unitary(dims, rng):
    """Random U_1 (x) ... (x) U_N in flat-index order."""
    U = np.array([[1.0 + 0j]])
    for d in dims:
        U = np.kron(U, haar_unitary(d, rng))
    return U


def apply_local(S: StateSet, U: np.ndarray) -> StateSet:
    return StateSet(S.shape, S.amplitude_matrix() @ U.T, label=S.label, orth_tol=1e-9)


def product_basis(dims) -> StateSet:
    n = int(np.prod(dims))
    return StateSet(dims, np.eye(n), label="product basis")


@pytest.fixture
def rng():
    return np.random.default_rng(20221016)


def pytest_runtest_makereport(item, call):
    if call.when == "call" and item.get_closest_marker("criterion") is not None:
        label = item.get_closest_marker("criterion").args[0]
        _CRITERIA.append((label, "PASS" if call.excinfo is None else "FAIL"))


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(label): acceptance criterion")


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for label, outcome in _CRITERIA:
        terminalreporter.write_line(f"{outcome}  {label}")
