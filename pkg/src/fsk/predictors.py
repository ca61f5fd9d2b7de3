"""
Factor score predictor weights and their second-moment properties.

Three predictors are supported:

* ``BL``    -- regression / best linear predictor, ``Phi L' S^-1 x``
* ``BLCU``  -- best linear conditionally unbiased (Bartlett) predictor,
  ``(L' S^-1 L)^-1 L' S^-1 x``
* ``DBLCP`` -- determinant best linear correlation-preserving predictor,
  ``Phi^1/2 (Phi^1/2 L' S^-1 L Phi^1/2)^-1/2 Phi^1/2 L' S^-1 x``

Weights are stored as ``p x q`` matrices ``W`` with scores ``W' x``. All
covariances are computed generically as ``W_a' S W_b``.
"""

import enum
from dataclasses import dataclass

import numpy as np

from . import matalg
from .errors import NumericalIntegrityError
from .model import FactorModel

CORRELATION_SLACK = 1e-10


class PredictorKind(str, enum.Enum):
    BL = "bl"
    BLCU = "blcu"
    DBLCP = "dblcp"


@dataclass(frozen=True)
class WeightMatrix:
    kind: PredictorKind
    w: np.ndarray


def _precision_terms(m, eps):
    sigma = m.observed_cov()
    sigma_inv = matalg.safe_inverse(sigma, eps)
    sl = sigma_inv @ m.loadings
    info = matalg.as_symmetric(m.loadings.T @ sl)
    return sigma, sl, info


def weights(m: FactorModel, kind: PredictorKind, eps=None) -> WeightMatrix:
    """
    Weight matrix of a factor score predictor.

    Raises
    ------
    Singular
        If ``L' S^-1 L`` (or the inner DBLCP matrix) is singular.
    NotPositiveSemiDefinite
        If the inner DBLCP matrix has a negative eigenvalue.
    """
    kind = PredictorKind(kind)
    _, sl, info = _precision_terms(m, eps)
    if kind is PredictorKind.BL:
        w = sl @ m.phi
    elif kind is PredictorKind.BLCU:
        w = sl @ matalg.safe_inverse(info, eps)
    else:
        phi_half = matalg.sym_power(m.phi, 0.5, eps)
        inner = phi_half @ info @ phi_half
        w = sl @ phi_half @ matalg.sym_power(inner, -0.5, eps) @ phi_half
    return WeightMatrix(kind, w)


def all_weights(m: FactorModel, eps=None):
    return {k: weights(m, k, eps) for k in PredictorKind}


def cross_covariance(m: FactorModel, a: PredictorKind, b: PredictorKind, eps=None) -> np.ndarray:
    """Covariance of predictor ``a`` (rows) with predictor ``b`` (columns)."""
    sigma = m.observed_cov()
    wa = weights(m, a, eps).w
    wb = wa if PredictorKind(a) is PredictorKind(b) else weights(m, b, eps).w
    return wa.T @ sigma @ wb


def predictor_covariance(m: FactorModel, kind: PredictorKind, eps=None) -> np.ndarray:
    return matalg.as_symmetric(cross_covariance(m, kind, kind, eps))


def _check_range(r, what):
    worst = float(np.max(np.abs(r))) if r.size else 0.0
    if worst > 1.0 + CORRELATION_SLACK:
        raise NumericalIntegrityError(f"{what} has entry of magnitude {worst!r} > 1")


def cross_correlation(m: FactorModel, a: PredictorKind, b: PredictorKind, eps=None) -> np.ndarray:
    """
    Correlations between predictor ``a`` (rows) and predictor ``b`` (columns).

    Rows are normalized by the standard deviations of ``a``, columns by those
    of ``b``. Entries are not clamped: a magnitude above ``1 + 1e-10`` raises
    :class:`NumericalIntegrityError`.
    """
    c = cross_covariance(m, a, b, eps)
    da = matalg.diag_power(predictor_covariance(m, a, eps), -0.5)
    db = matalg.diag_power(predictor_covariance(m, b, eps), -0.5)
    r = da @ c @ db
    _check_range(r, f"correlation({PredictorKind(a).name}, {PredictorKind(b).name})")
    return r


#: Predictor pairs whose covariances have closed forms.
PAIRS = (
    (PredictorKind.BLCU, PredictorKind.BL),
    (PredictorKind.DBLCP, PredictorKind.BL),
    (PredictorKind.BLCU, PredictorKind.DBLCP),
)


def pair_key(a, b):
    return f"{PredictorKind(a).value}_{PredictorKind(b).value}"


def pairwise_correlations(m: FactorModel, eps=None):
    return {pair_key(a, b): cross_correlation(m, a, b, eps) for a, b in PAIRS}


def factor_validity(m: FactorModel, kind: PredictorKind, eps=None) -> np.ndarray:
    """
    Correlation of each predictor with its own factor.

    ``Cov(W'x, f) = W' L Phi``; factors have unit variance.
    """
    w = weights(m, kind, eps).w
    cov_with_factors = w.T @ m.loadings @ m.phi
    var = np.diag(predictor_covariance(m, kind, eps))
    v = np.diag(cov_with_factors) / np.sqrt(var)
    _check_range(v, f"validity({PredictorKind(kind).name})")
    return v
