import itertools
import sys

import numpy as np
import pytest

from sparsesdf.panel import PlantedKernelSpec, synth_panel


def random_F(seed, T, P):
    return np.random.default_rng(seed).standard_normal((T, P))


def enumerate_bp(F):
    """Smallest l1 norm over all basic solutions of F lam = 1 (brute force)."""
    T, P = F.shape
    best = np.inf
    for cols in itertools.combinations(range(P), T):
        B = F[:, cols]
        if abs(np.linalg.det(B)) < 1e-12:
            continue
        x = np.linalg.solve(B, np.ones(T))
        best = min(best, float(np.abs(x).sum()))
    return best


def gram_schmidt(A):
    """Orthonormal basis of the column span of A, classical Gram-Schmidt twice."""
    Q = []
    for a in A.T:
        v = a.astype(float).copy()
        for _ in range(2):
            for q in Q:
                v -= (q @ v) * q
        n = np.linalg.norm(v)
        if n > 1e-12:
            Q.append(v / n)
    return np.array(Q).T


@pytest.fixture(scope="session")
def small_panel():
    spec = PlantedKernelSpec(k_true=2, P_max=200, seed=3)
    panel, lam = synth_panel(spec, T_total=20, N=30, D=3)
    return panel


def pytest_terminal_summary(terminalreporter):
    lines = getattr(sys.modules.get("test_acceptance"), "REPORT", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
