"""Shared helpers for the test suite.

Most tests operate on small seeded random instances.  Calibration inputs
are drawn as X = A @ Z with a random square mixer A so that features are
correlated and error compensation actually has something to do; a few
tests use orthonormal inputs instead to get an identity Gram matrix.
"""

import numpy as np
import pytest


def correlated_instance(d_row, d_col, n, seed):
    """Random weight matrix plus correlated calibration inputs."""
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((d_col, d_col))
    Z = rng.standard_normal((d_col, n))
    X = A @ Z
    W = rng.standard_normal((d_row, d_col))
    return W, X


def spd_matrix(d, seed, jitter=0.1):
    """Well-conditioned random symmetric positive definite matrix."""
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((d, d))
    return A @ A.T + jitter * d * np.eye(d)


@pytest.fixture
def rng():
    return np.random.default_rng(0)
