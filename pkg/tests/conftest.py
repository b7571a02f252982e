import numpy as np
import pytest

from dynlogit import MnlPanelDataset, PanelDataset


def panel_from_paths(paths, T, p=1, x=None):
    y = np.asarray(paths, dtype=np.int64)
    if x is None:
        x = np.zeros((y.shape[0], T, 0))
    return PanelDataset(y, x, T, p)


def random_panel(rng, n, T, p=1, K=1, gamma=0.5, beta=1.0):
    """Small panel with enough switchers for every group."""
    x = rng.normal(size=(n, T, K))
    alpha = rng.normal(size=n)
    y = np.zeros((n, T + p), dtype=np.int64)
    y[:, :p] = rng.integers(0, 2, size=(n, p))
    for t in range(T):
        z = alpha + x[:, t] @ np.full(K, beta) + gamma * y[:, t + p - 1]
        y[:, t + p] = rng.random(n) < 1 / (1 + np.exp(-z))
    return PanelDataset(y, x, T, p)


def random_mnl_panel(rng, n, T, M, K=1):
    x = rng.normal(size=(n, T, M, K))
    y = rng.integers(1, M + 1, size=(n, T + 1))
    return MnlPanelDataset(y, x, T, M)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def central_gradient(f, theta, h=1e-5):
    theta = np.asarray(theta, float)
    g = np.empty((theta.size,) + np.shape(f(theta)))
    for j in range(theta.size):
        e = np.zeros_like(theta)
        e[j] = h
        g[j] = (np.asarray(f(theta + e)) - np.asarray(f(theta - e))) / (2 * h)
    return g


def rel_err(a, b):
    a, b = np.asarray(a, float), np.asarray(b, float)
    return float(np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1.0))


ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
