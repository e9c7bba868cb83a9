import numpy as np
import pytest

# acceptance outcomes, filled by tests/test_acceptance.py and echoed after the run
ACCEPTANCE_LINES = []


def record_criterion(label: str, passed: bool, detail: str = "") -> None:
    line = f"[{'PASS' if passed else 'FAIL'}] {label}" + (f": {detail}" if detail else "")
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def bootstrap_means(samples, n_boot: int = 2000, seed: int = 0) -> np.ndarray:
    """Bootstrap distribution of the mean along axis 0."""
    x = np.asarray(samples)
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, len(x), size=(n_boot, len(x)))
    return np.array([x[i].mean(axis=0) for i in idx])


def full_gate(u, wires, n):
    """Dense 2^n operator of ``u`` on ``wires`` by explicit index bookkeeping."""
    dim = 2**n
    out = np.zeros((dim, dim), dtype=complex)
    k = len(wires)
    for col in range(dim):
        local_in = sum(((col >> w) & 1) << j for j, w in enumerate(wires))
        for local_out in range(2**k):
            row = col
            for j, w in enumerate(wires):
                bit = (local_out >> j) & 1
                row = (row & ~(1 << w)) | (bit << w)
            out[row, col] += u[local_out, local_in]
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
