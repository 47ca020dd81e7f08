import numpy as np
import pytest

from certrom import DenseLTI, TimeScheme, assemble_heat_1d, discretize, pod_basis, simulate

ACCEPTANCE_LINES = []


def random_stable_system(seed, N, p, norm=0.9):
    """Dense system with ``||A||_2 = norm`` from a fixed seed."""
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((N, N))
    A *= norm / np.linalg.norm(A, 2)
    B = rng.standard_normal((N, p))
    return DenseLTI(A, B)


def random_basis(seed, N, n):
    rng = np.random.default_rng(seed + 10_000)
    Q, _ = np.linalg.qr(rng.standard_normal((N, n)))
    return pod_basis(Q, n)


@pytest.fixture(scope="session")
def heat():
    """Backward-Euler heat system and the inputs of the 1-D benchmark."""
    S = discretize(assemble_heat_1d(133, 0.1), TimeScheme(1.0, 0.01))
    K, T = 500, 5.0
    t = 0.01 * np.arange(K + 1)
    g_basis = (np.exp(t) * np.sin(20 * np.pi * t / T))[1:, None]
    g_test = (np.exp(t) * np.sin(12 * np.pi * t / T))[1:, None]
    g_train = np.random.default_rng(7).standard_normal((K, 1))
    w0 = np.zeros(133)
    basis = pod_basis(simulate(S, w0, g_basis).states.T, 8)
    return {"system": S, "basis": basis, "g_train": g_train, "g_test": g_test,
            "w0": w0, "test": simulate(S, w0, g_test)}


@pytest.fixture
def acceptance():
    """Record a criterion result for the end-of-run acceptance summary."""
    def record(name, passed, detail=""):
        line = f"[{'PASS' if passed else 'FAIL'}] {name}" + (f": {detail}" if detail else "")
        ACCEPTANCE_LINES.append(line)
        print(line)
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
