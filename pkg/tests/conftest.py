import numpy as np
import pytest

from dcselect.model_core import build_instance


def random_instance(rng, n, p, a0=1.0, b0=1.0, signal=0.0, s=0):
    """Random Gaussian-design instance, optionally with planted signals."""
    X = rng.standard_normal((n, p))
    theta = np.zeros(p)
    if s:
        idx = rng.choice(p, size=s, replace=False)
        theta[idx] = signal * rng.choice([-1.0, 1.0], size=s)
    y = X @ theta + rng.standard_normal(n)
    return build_instance(X, y, a0, b0)


def random_precision(rng, p, spread=1.0):
    return np.exp(rng.normal(0.0, spread, size=p))


def figure1_instance(theta0, n=20, seed=3, a0=1.0, b0=1.0):
    """One-column ones design: y_i = theta0 + eps_i."""
    rng = np.random.default_rng(seed)
    y = theta0 + rng.standard_normal(n)
    return build_instance(np.ones((n, 1)), y, a0, b0)


def norm_rel(a, b):
    """Max elementwise difference relative to the larger vector scale."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    scale = max(np.max(np.abs(a)), np.max(np.abs(b)), 1e-300)
    return float(np.max(np.abs(a - b)) / scale)


@pytest.fixture
def rng():
    return np.random.default_rng(20190704)
