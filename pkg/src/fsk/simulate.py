"""
Sampling from a factor model and sample-moment checks of the predictors.

Draws use the Philox counter-based generator. Rows are produced in fixed
blocks of ``BLOCK_ROWS``; block ``i`` uses ``Philox(seed).jumped(i)`` and each
row reads its factor and error draws from one contiguous stretch of that
stream. Row ``k`` therefore depends only on the seed and ``k``, not on the
sample size or on how many threads fill the blocks.
"""

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import matalg
from .model import FactorModel
from .predictors import PredictorKind, weights

BLOCK_ROWS = 1 << 15
THREADS_ENV = "FSK_THREADS"


@dataclass(frozen=True, eq=False)
class SampleSet:
    n: int
    x: np.ndarray
    f: np.ndarray
    seed: int


def thread_count(requested=None):
    """Worker count from ``requested`` or ``$FSK_THREADS``; 0 or unset means automatic."""
    if requested is None:
        raw = os.environ.get(THREADS_ENV, "0").strip() or "0"
        try:
            requested = int(raw)
        except ValueError:
            raise ValueError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
    if requested < 0:
        raise ValueError("thread count must be nonnegative")
    return requested or (os.cpu_count() or 1)


def _error_factor(m):
    # With an explicit observed covariance, everything outside L Phi L' is
    # error variance (e.g. an omitted general factor).
    if m.sigma is None:
        return None
    common = m.loadings @ m.phi @ m.loadings.T
    return matalg.sym_power(m.sigma - common, 0.5)


def sample(m: FactorModel, n: int, seed: int, threads=None) -> SampleSet:
    """
    Draw ``n`` observations ``x = L f + e``.

    ``f ~ N(0, Phi)`` and ``e ~ N(0, diag(psi2))`` independently. For a model
    with an explicit observed covariance ``S``, ``e ~ N(0, S - L Phi L')``.

    Raises
    ------
    NotPositiveSemiDefinite
        If ``Phi`` (or the error covariance) cannot be factored.
    """
    if n < 2:
        raise ValueError("need at least two observations")
    p, q = m.p, m.q
    phi_root = matalg.sym_power(m.phi, 0.5)
    err_root = _error_factor(m)
    psi = np.sqrt(m.psi2)
    x = np.empty((n, p))
    f = np.empty((n, q))
    starts = range(0, n, BLOCK_ROWS)

    def fill(block):
        lo = block * BLOCK_ROWS
        hi = min(lo + BLOCK_ROWS, n)
        rng = np.random.Generator(np.random.Philox(seed).jumped(block))
        z = rng.standard_normal((hi - lo, q + p))
        fb = z[:, :q] @ phi_root
        eb = z[:, q:]
        eb = eb @ err_root if err_root is not None else eb * psi
        f[lo:hi] = fb
        x[lo:hi] = fb @ m.loadings.T + eb

    blocks = range(len(starts))
    workers = min(thread_count(threads), len(starts))
    if workers <= 1:
        for b in blocks:
            fill(b)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(fill, blocks))
    return SampleSet(n=n, x=x, f=f, seed=seed)


def _corr_between(a, b):
    a = a - a.mean(axis=0)
    b = b - b.mean(axis=0)
    sa = np.sqrt(np.einsum("ij,ij->j", a, a))
    sb = np.sqrt(np.einsum("ij,ij->j", b, b))
    return (a.T @ b) / np.outer(sa, sb)


def empirical_predictor_correlations(s: SampleSet, m: FactorModel, a: PredictorKind, b: PredictorKind):
    """Sample correlations of predictor ``a`` scores (rows) with ``b`` scores (columns)."""
    ya = s.x @ weights(m, a).w
    yb = ya if PredictorKind(a) is PredictorKind(b) else s.x @ weights(m, b).w
    return _corr_between(ya, yb)


def empirical_validity(s: SampleSet, m: FactorModel, kind: PredictorKind):
    """Sample correlation of each predictor column with its true factor."""
    y = s.x @ weights(m, kind).w
    return np.diag(_corr_between(y, s.f)).copy()


def sample_covariance(s: SampleSet):
    return np.cov(s.x, rowvar=False)


def write_csv(s: SampleSet, path):
    """Write observed scores with header ``v1..vp``."""
    header = ",".join(f"v{j + 1}" for j in range(s.x.shape[1]))
    np.savetxt(path, s.x, delimiter=",", header=header, comments="", fmt="%.17g")
