import numpy as np
import pytest

from fsk.model import FactorModel, random_model

LAMBDA_A = np.array(
    [
        [0.8, 0.0],
        [0.7, 0.0],
        [0.6, 0.0],
        [0.0, 0.8],
        [0.0, 0.7],
        [0.0, 0.6],
    ]
)


def desk_model_a():
    """Two clean blocks, orthogonal factors."""
    return FactorModel(LAMBDA_A, np.eye(2), 1.0 - (LAMBDA_A**2).sum(axis=1))


def desk_model_b():
    """Model A with cross-loadings 0.3 of variable 4 on factor 1 and variable 3 on factor 2."""
    lam = LAMBDA_A.copy()
    lam[3, 0] = 0.3
    lam[2, 1] = 0.3
    return FactorModel(lam, np.eye(2), 1.0 - (lam**2).sum(axis=1))


def spearman_model(loadings=(0.8, 0.7, 0.6)):
    lam = np.asarray(loadings, dtype=float)[:, None]
    return FactorModel(lam, np.eye(1), 1.0 - lam[:, 0] ** 2)


def suite_config(seed):
    """Deterministic (p, q, oblique) for the 200-model suites."""
    p = (6, 9, 12)[seed % 3]
    q = (2, 3)[(seed // 3) % 2]
    oblique = (seed // 6) % 2 == 0
    return p, q, oblique


def suite_model(seed):
    p, q, oblique = suite_config(seed)
    return random_model(p, q, oblique, seed)


@pytest.fixture
def model_a():
    return desk_model_a()


@pytest.fixture
def model_b():
    return desk_model_b()


@pytest.fixture
def spearman():
    return spearman_model()
