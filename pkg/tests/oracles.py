"""
Independent reference computations.

Nothing here calls ``fsk.predictors`` or ``fsk.transform``; matrix functions
come from scipy so they do not share code with ``fsk.matalg``.
"""

import numpy as np
from scipy import linalg


def spd_power(m, e):
    return np.real(linalg.fractional_matrix_power(np.asarray(m, dtype=float), e))


def precision_info(lam, sigma):
    return lam.T @ linalg.solve(sigma, lam, assume_a="pos")


def closed_form_cov_blcu_bl(phi):
    """Covariance of the BLCU and BL predictors: Phi."""
    return phi


def closed_form_cov_dblcp_bl(lam, phi, sigma):
    """Phi^1/2 (Phi^1/2 L' S^-1 L Phi^1/2)^1/2 Phi^1/2."""
    ph = spd_power(phi, 0.5)
    return ph @ spd_power(ph @ precision_info(lam, sigma) @ ph, 0.5) @ ph


def closed_form_cov_blcu_dblcp(lam, phi, sigma):
    """Phi^1/2 (Phi^1/2 L' S^-1 L Phi^1/2)^-1/2 Phi^1/2."""
    ph = spd_power(phi, 0.5)
    return ph @ spd_power(ph @ precision_info(lam, sigma) @ ph, -0.5) @ ph


def closed_form_corr_blcu_bl(lam, phi, sigma):
    """Phi diag((L'S^-1L)^-1)^-1/2 diag(Phi L'S^-1L Phi)^-1/2, rows and columns placed as written."""
    info = precision_info(lam, sigma)
    d_blcu = np.diag(np.diag(np.linalg.inv(info)) ** -0.5)
    d_bl = np.diag(np.diag(phi @ info @ phi) ** -0.5)
    return d_blcu @ phi @ d_bl


def closed_form_corr_dblcp_bl(lam, phi, sigma):
    """DBLCP has unit variances, so only the BL side is normalized."""
    info = precision_info(lam, sigma)
    d_bl = np.diag(np.diag(phi @ info @ phi) ** -0.5)
    return closed_form_cov_dblcp_bl(lam, phi, sigma) @ d_bl


def closed_form_corr_blcu_dblcp(lam, phi, sigma):
    info = precision_info(lam, sigma)
    d_blcu = np.diag(np.diag(np.linalg.inv(info)) ** -0.5)
    return d_blcu @ closed_form_cov_blcu_dblcp(lam, phi, sigma)


def one_factor_exact(r):
    """
    Exact one-factor loadings of a 3x3 correlation matrix, or None.

    l1^2 = r12 r13 / r23 and cyclic; requires a positive triple product.
    """
    r12, r13, r23 = r[0, 1], r[0, 2], r[1, 2]
    if r12 * r13 * r23 <= 0:
        return None
    l = np.sqrt(np.array([r12 * r13 / r23, r12 * r23 / r13, r13 * r23 / r12]))
    # signs follow the correlations with the largest-loading variable
    k = int(np.argmax(l))
    sign = np.sign(r[k])
    sign[k] = 1.0
    l = l * sign
    return l if l.sum() >= 0 else -l


def empirical_cross_corr(ya, yb):
    """Sample correlation matrix between the columns of two score matrices."""
    k = ya.shape[1]
    full = np.corrcoef(np.hstack([ya, yb]), rowvar=False)
    return full[:k, k:]
