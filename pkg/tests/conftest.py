from __future__ import annotations

import numpy as np
import pytest

from gsfavar.numeric import RngStream


@pytest.fixture
def rng():
    return RngStream(1234)


def simulate_var(coefs: np.ndarray, omega: np.ndarray, t_len: int, seed: int, burn: int = 100) -> np.ndarray:
    """Simulate ``y_t = sum_p A_p y_{t-p} + e_t`` with ``e_t ~ N(0, omega)``; coefs is (P, n, n)."""
    g = np.random.default_rng(seed)
    lags, n, _ = coefs.shape
    chol = np.linalg.cholesky(omega)
    y = np.zeros((t_len + burn, n))
    for t in range(lags, t_len + burn):
        y[t] = sum(coefs[p] @ y[t - p - 1] for p in range(lags)) + chol @ g.standard_normal(n)
    return y[burn:]


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[n])
