"""
Dense symmetric-matrix utilities.

Every symmetric power goes through one eigendecomposition routine so the
eigenvalue guards are applied consistently. Tolerances are relative to the
largest eigenvalue magnitude of the matrix at hand.
"""

import numpy as np

from .errors import NonPositiveDiagonal, NotPositiveSemiDefinite, NotSymmetric, Singular

DEFAULT_EPS = 1e-10
SYMMETRY_TOL = 1e-9


def as_symmetric(m, tol=SYMMETRY_TOL):
    """
    Return ``m`` as a symmetric float array.

    Asymmetry up to ``tol`` (absolute, scaled by ``max(1, max|m|)``) is
    averaged away; anything larger is rejected.

    Raises
    ------
    NotSymmetric
        If ``m`` is not square or its asymmetry exceeds the tolerance.
    """
    m = np.array(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise NotSymmetric(f"expected a square matrix, got shape {m.shape}")
    if m.size == 0:
        return m
    asym = np.max(np.abs(m - m.T))
    if asym == 0.0:
        return m
    scale = max(1.0, float(np.max(np.abs(m))))
    if asym > tol * scale:
        raise NotSymmetric(f"matrix asymmetry {asym:.3g} exceeds tolerance")
    return (m + m.T) / 2.0


def _is_diagonal(m):
    return not np.any(m[~np.eye(m.shape[0], dtype=bool)])


def _eigh(m):
    # Diagonal inputs bypass LAPACK so that symmetric and elementwise powers
    # of a diagonal matrix agree bit for bit.
    if _is_diagonal(m):
        return np.diag(m).copy(), np.eye(m.shape[0])
    return np.linalg.eigh(m)


def _threshold(evals, eps):
    eps = DEFAULT_EPS if eps is None else eps
    scale = float(np.max(np.abs(evals))) if evals.size else 0.0
    return eps * scale


def sym_power(m, exponent, eps=None):
    """
    Raise a symmetric positive (semi-)definite matrix to a real power.

    Computes ``V diag(w**exponent) V'`` from the eigendecomposition
    ``m = V diag(w) V'``.

    Parameters
    ----------
    m : array-like, (k, k)
        Symmetric matrix.
    exponent : float
        Power applied to the eigenvalues.
    eps : float, optional
        Relative eigenvalue tolerance; defaults to 1e-10 times the largest
        eigenvalue magnitude. Eigenvalues within ``[-eps, eps]`` are set to
        zero for nonnegative exponents.

    Returns
    -------
    numpy.ndarray
        Symmetric matrix power.

    Raises
    ------
    NotPositiveSemiDefinite
        If an eigenvalue is below ``-eps``.
    Singular
        If the exponent is negative and an eigenvalue is ``<= eps``.
    """
    m = as_symmetric(m)
    evals, evecs = _eigh(m)
    thresh = _threshold(evals, eps)
    if np.any(evals < -thresh):
        raise NotPositiveSemiDefinite(f"smallest eigenvalue {evals.min():.3g} is negative")
    if exponent < 0:
        if np.any(evals <= thresh):
            raise Singular(f"cannot raise eigenvalue {evals.min():.3g} to a negative power")
    else:
        evals = np.where(np.abs(evals) <= thresh, 0.0, evals)
    powered = np.power(evals, exponent)
    out = (evecs * powered) @ evecs.T
    return (out + out.T) / 2.0


def safe_inverse(m, eps=None):
    """
    Invert a symmetric matrix through its eigendecomposition.

    Raises :class:`Singular` when the smallest eigenvalue is at most ``eps``
    times the largest one.
    """
    m = as_symmetric(m)
    evals, evecs = _eigh(m)
    thresh = _threshold(evals, eps)
    if evals.size and (evals.min() <= thresh or evals.max() <= 0):
        raise Singular(f"matrix is singular to tolerance (min eigenvalue {evals.min():.3g})")
    out = (evecs / evals) @ evecs.T
    return (out + out.T) / 2.0


def diag_power(m, exponent):
    """Diagonal matrix holding ``diag(m)`` raised elementwise to ``exponent``."""
    d = np.diag(np.asarray(m, dtype=float)).copy()
    fractional = float(exponent) != float(np.floor(exponent))
    if (exponent < 0 or fractional) and np.any(d <= 0):
        raise NonPositiveDiagonal(f"diagonal entry {d.min():.3g} cannot be raised to {exponent}")
    return np.diag(np.power(d, exponent))


def offdiag_max(m):
    """Largest absolute off-diagonal entry; 0 for 1x1 matrices."""
    m = np.asarray(m, dtype=float)
    if m.shape[0] < 2:
        return 0.0
    mask = ~np.eye(m.shape[0], dtype=bool)
    return float(np.max(np.abs(m[mask])))


def corr_from_cov(c):
    """Rescale a covariance matrix to unit diagonal: ``D^-1/2 c D^-1/2``."""
    c = np.asarray(c, dtype=float)
    d = np.diag(c)
    if np.any(d <= 0):
        raise NonPositiveDiagonal("covariance matrix has a non-positive variance")
    s = 1.0 / np.sqrt(d)
    out = c * s[:, None] * s[None, :]
    np.fill_diagonal(out, 1.0)
    return out
