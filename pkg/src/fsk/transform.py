"""
Loading transformation that diagonalizes ``L' S^-1 L``, followed by a
one-general-factor Schmid-Leiman orthogonalization.

Pipeline::

    transform_loadings -> extract_general_factor -> schmid_leiman

The transformed loadings are ``L* = L T`` with
``T = (L' S^-1 L)^-1/2 diag(L' S^-1 L)^1/2``. The factor correlations change
to ``T^-1 Phi T^-T`` so that the implied covariance is unchanged. A single
general factor is fitted to those correlations and the first-order factors
are orthogonalized; the orthogonalized primaries keep ``L' S^-1 L`` diagonal,
which makes the BL, BLCU and DBLCP predictors perfectly correlated for
corresponding factors.
"""

from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from . import matalg, predictors
from .errors import HeywoodCase, NotConverged, NumericalIntegrityError
from .model import FactorModel, sigma_from_model, validate

SECOND_ORDER_TOL = 1e-10
SECOND_ORDER_MAX_ITER = 500
HEYWOOD_FLOOR = 1e-6
ROUTE_TOL = 1e-12
HEYWOOD_DIVERGENCE = 10.0
POLISH_STEPS = 8

HEYWOOD = "HEYWOOD"
NOT_CONVERGED = "NOT_CONVERGED"
Q1_BYPASS = "Q1_BYPASS"
Q2_INDETERMINATE = "Q2_INDETERMINATE"


@dataclass(frozen=True, eq=False)
class TransformedModel:
    """
    Result of the diagonalizing loading transformation.

    ``lambda_star = original.loadings @ t``; ``scale`` holds the factor
    standard deviations removed by standardization, so the transformed
    loadings before rescaling are ``lambda_star / scale``.
    """

    original: FactorModel
    lambda_star: np.ndarray
    phi_star: np.ndarray
    t: np.ndarray
    scale: np.ndarray

    @property
    def lambda_star_unscaled(self) -> np.ndarray:
        return self.lambda_star / self.scale

    @property
    def model(self) -> FactorModel:
        return FactorModel(self.lambda_star, self.phi_star, self.original.psi2, self.original.sigma)


@dataclass(frozen=True, eq=False)
class SecondOrderSolution:
    lambda2: np.ndarray
    psi2_2: np.ndarray
    fit_residual: float
    iterations: int
    converged: bool


@dataclass(frozen=True, eq=False)
class SchmidLeimanSolution:
    lambda_sl: np.ndarray
    lambda_slp: np.ndarray
    p_matrix: np.ndarray

    @property
    def general(self) -> np.ndarray:
        return self.lambda_sl[:, 0]


def transform_loadings(m: FactorModel, eps=None) -> TransformedModel:
    """
    Transform loadings so that ``L*' S^-1 L*`` is diagonal.

    The factor correlations become ``T^-1 Phi T^-T`` and are then rescaled
    to unit diagonal; diagonal rescaling keeps ``L*' S^-1 L*`` diagonal.
    For orthogonal input the rescaling is the identity.
    """
    sigma_inv = matalg.safe_inverse(m.observed_cov(), eps)
    info = matalg.as_symmetric(m.loadings.T @ sigma_inv @ m.loadings)
    t_raw = matalg.sym_power(info, -0.5, eps) @ matalg.diag_power(info, 0.5)
    t_inv = matalg.diag_power(info, -0.5) @ matalg.sym_power(info, 0.5, eps)
    phi_raw = matalg.as_symmetric(t_inv @ m.phi @ t_inv.T)
    scale = np.sqrt(np.diag(phi_raw))
    phi_star = matalg.corr_from_cov(phi_raw)
    t = t_raw * scale
    return TransformedModel(m, m.loadings @ t, phi_star, t, scale)


def extract_general_factor(
    phi_star,
    tol=SECOND_ORDER_TOL,
    max_iter=SECOND_ORDER_MAX_ITER,
    heywood_floor=HEYWOOD_FLOOR,
) -> SecondOrderSolution:
    """
    Fit one general factor to a correlation matrix by iterated principal axes.

    Communalities start at the largest absolute off-diagonal entry of each
    row. Each step places the communalities on the diagonal, takes the
    leading eigenpair ``(d, v)`` and sets the loadings to ``sqrt(d) v``,
    stopping once no communality moves by ``tol`` or more. The limit is
    then refined by Newton steps on ``g(h) - h``, because the plain map
    contracts slowly for variables with small loadings. The sign is
    fixed so that the loadings sum to a nonnegative value.

    Raises
    ------
    HeywoodCase
        If a squared loading reaches ``1 - heywood_floor``.
    NotConverged
        If ``max_iter`` steps do not reach ``tol``.
    """
    r = matalg.as_symmetric(phi_star)
    q = r.shape[0]
    if q < 2:
        raise ValueError("second-order factoring needs at least two factors")
    off = np.abs(r - np.diag(np.diag(r)))
    work = r.copy()
    idx = np.arange(q)

    def step(h):
        work[idx, idx] = h
        evals, evecs = np.linalg.eigh(work)
        lam = np.sqrt(max(evals[-1], 0.0)) * evecs[:, -1]
        return lam, lam**2

    # Each cycle is a SQUAREM extrapolation of two principal-axis steps,
    # followed by a plain step; the stopping rule is applied to that plain
    # step so the fixed point is the principal-axis one.
    h = off.max(axis=1)
    lam2, h_new = step(h)
    converged = False
    it = 0
    while it < max_iter:
        it += 1
        change = float(np.max(np.abs(h_new - h)))
        if change < tol:
            h = h_new
            converged = True
            break
        if np.max(h_new) > HEYWOOD_DIVERGENCE:
            break
        _, h2 = step(h_new)
        d1 = h_new - h
        d2 = h2 - 2.0 * h_new + h
        nd2 = np.linalg.norm(d2)
        alpha = -np.linalg.norm(d1) / nd2 if nd2 > 0 else -1.0
        alpha = min(alpha, -1.0)
        h_ext = np.maximum(h - 2.0 * alpha * d1 + alpha**2 * d2, 0.0)
        h = h2 if not np.all(np.isfinite(h_ext)) else h_ext
        lam2, h_new = step(h)
    if converged:
        lam2 = _polish(step, work, idx, h_new, lam2)
    if lam2.sum() < 0:
        lam2 = -lam2
    if not converged:
        if np.max(h_new) >= 1.0 - heywood_floor:
            raise HeywoodCase(
                f"second-order communality {np.max(h_new):.6g} left the admissible range"
            )
        raise NotConverged(f"principal-axis iteration did not converge in {max_iter} steps")
    if np.any(lam2**2 >= 1.0 - heywood_floor):
        raise HeywoodCase(f"second-order loading {np.abs(lam2).max():.6g} implies non-positive uniqueness")
    psi2_2 = 1.0 - lam2**2
    resid = r - np.outer(lam2, lam2)
    return SecondOrderSolution(lam2, psi2_2, matalg.offdiag_max(resid), it, converged)


def _polish(step, work, idx, h, lam):
    """Newton refinement of a principal-axis fixed point; keeps only improving steps."""
    q = h.size

    def resid(h):
        lam, g = step(h)
        return lam, g - h

    lam, f = resid(h)
    best = float(np.max(np.abs(f)))
    for _ in range(POLISH_STEPS):
        if best == 0.0:
            break
        work[idx, idx] = h
        evals, evecs = np.linalg.eigh(work)
        d, v = evals[-1], evecs[:, -1]
        gap = d - evals[:-1]
        if d <= 0 or np.min(gap) <= 0:
            break
        # dv/dh_i = sum_k v_k v_k[i] v[i] / (d - d_k); dd/dh_i = v[i]^2
        others = evecs[:, :-1]
        dv = others @ (others.T * v[None, :] / gap[:, None])
        jac = np.outer(v * v, v * v) + 2.0 * d * v[:, None] * dv - np.eye(q)
        try:
            h_try = h - np.linalg.solve(jac, f)
        except np.linalg.LinAlgError:
            break
        lam_try, f_try = resid(h_try)
        size = float(np.max(np.abs(f_try)))
        if not size < best:
            break
        h, lam, f, best = h_try, lam_try, f_try, size
    return lam


def schmid_leiman(tm: TransformedModel, so: SecondOrderSolution) -> SchmidLeimanSolution:
    """
    Orthogonalize the transformed first-order factors.

    ``P = [lambda2 | diag(sqrt(psi2_2))]`` and ``L_SL = L* P``; the first
    column is the general factor, the remaining ``q`` columns are the
    orthogonalized primaries.
    """
    if np.any(so.psi2_2 <= 0):
        raise HeywoodCase("second-order uniquenesses must be positive")
    psi_2 = np.sqrt(so.psi2_2)
    p_matrix = np.column_stack([so.lambda2, np.diag(psi_2)])
    lambda_sl = tm.lambda_star @ p_matrix
    lambda_slp = lambda_sl[:, 1:].copy()
    direct = tm.lambda_star * psi_2
    gap = float(np.max(np.abs(lambda_slp - direct)))
    if gap > ROUTE_TOL * max(1.0, float(np.max(np.abs(direct)))):
        raise NumericalIntegrityError(f"primary loadings disagree between routes by {gap:.3g}")
    return SchmidLeimanSolution(lambda_sl, lambda_slp, p_matrix)


def primaries_model(m: FactorModel, sl: SchmidLeimanSolution) -> FactorModel:
    """
    Orthogonal model of the primaries alone.

    The general factor's variance is absorbed into the unique variances and
    the observed covariance of ``m`` is carried along, so predictors are
    evaluated against the full covariance.
    """
    q = sl.lambda_slp.shape[1]
    psi2 = m.psi2 + sl.general**2
    return FactorModel(sl.lambda_slp, np.eye(q), psi2, m.observed_cov())


@dataclass
class PipelineReport:
    """Residuals and predictor correlations from one pipeline run."""

    q: int
    information_residual: float
    sigma_preservation_residual: float
    primaries_information_residual: Optional[float] = None
    sl_fit_residual: Optional[float] = None
    sigma_reconstruction_residual: Optional[float] = None
    route_residual: Optional[float] = None
    pairwise_correlations: Dict[str, np.ndarray] = field(default_factory=dict)
    max_deviation_from_identity: Optional[float] = None
    warnings: List[str] = field(default_factory=list)
    lambda_star: Optional[np.ndarray] = None
    phi_star: Optional[np.ndarray] = None
    t: Optional[np.ndarray] = None
    lambda2: Optional[np.ndarray] = None
    psi2_2: Optional[np.ndarray] = None
    second_order_iterations: Optional[int] = None
    lambda_sl: Optional[np.ndarray] = None
    lambda_slp: Optional[np.ndarray] = None
    primaries: Optional[FactorModel] = None

    def to_dict(self):
        from .model import model_to_dict

        def arr(x):
            return None if x is None else np.asarray(x).tolist()

        return {
            "q": self.q,
            "warnings": list(self.warnings),
            "residuals": {
                "information_offdiag": self.information_residual,
                "sigma_preservation": self.sigma_preservation_residual,
                "primaries_information_offdiag": self.primaries_information_residual,
                "sl_fit": self.sl_fit_residual,
                "sigma_reconstruction": self.sigma_reconstruction_residual,
                "route": self.route_residual,
            },
            "max_deviation_from_identity": self.max_deviation_from_identity,
            "pairwise_correlations": {k: arr(v) for k, v in self.pairwise_correlations.items()},
            "lambda_star": arr(self.lambda_star),
            "phi_star": arr(self.phi_star),
            "t": arr(self.t),
            "lambda2": arr(self.lambda2),
            "psi2_2": arr(self.psi2_2),
            "second_order_iterations": self.second_order_iterations,
            "lambda_sl": arr(self.lambda_sl),
            "lambda_slp": arr(self.lambda_slp),
            "primaries_model": None if self.primaries is None else model_to_dict(self.primaries),
        }


def _identity_deviation(corrs):
    devs = [float(np.max(np.abs(r - np.eye(r.shape[0])))) for r in corrs.values()]
    return max(devs)


def information_residual(tm: TransformedModel, eps=None) -> float:
    """Off-diagonal size of ``L*' S^-1 L*`` plus drift of its diagonal from ``diag(L' S^-1 L)``."""
    m = tm.original
    sigma_inv = matalg.safe_inverse(m.observed_cov(), eps)
    before = m.loadings.T @ sigma_inv @ m.loadings
    ls = tm.lambda_star_unscaled
    after = ls.T @ sigma_inv @ ls
    return max(matalg.offdiag_max(after), float(np.max(np.abs(np.diag(after) - np.diag(before)))))


def sigma_preservation_residual(tm: TransformedModel) -> float:
    m = tm.original
    before = m.loadings @ m.phi @ m.loadings.T
    after = tm.lambda_star @ tm.phi_star @ tm.lambda_star.T
    return float(np.max(np.abs(after - before)))


def run_pipeline(m: FactorModel, tol=SECOND_ORDER_TOL, eps=None) -> PipelineReport:
    """
    Run transformation, second-order factoring and Schmid-Leiman on a model.

    For ``q == 1`` the transformation is vacuous; the report carries the
    ``Q1_BYPASS`` warning and the correlations of the original model.

    Raises
    ------
    HeywoodCase, NotConverged
        With the partial report attached as ``exc.report``.
    """
    validate(m)
    if m.q == 1:
        corrs = predictors.pairwise_correlations(m, eps)
        return PipelineReport(
            q=1,
            information_residual=0.0,
            sigma_preservation_residual=0.0,
            primaries_information_residual=0.0,
            sl_fit_residual=0.0,
            sigma_reconstruction_residual=0.0,
            route_residual=0.0,
            pairwise_correlations=corrs,
            max_deviation_from_identity=_identity_deviation(corrs),
            warnings=[Q1_BYPASS],
            lambda_star=m.loadings,
            phi_star=m.phi,
            t=np.eye(1),
            primaries=m,
        )

    tm = transform_loadings(m, eps)
    report = PipelineReport(
        q=m.q,
        information_residual=information_residual(tm, eps),
        sigma_preservation_residual=sigma_preservation_residual(tm),
        lambda_star=tm.lambda_star,
        phi_star=tm.phi_star,
        t=tm.t,
    )
    if m.q == 2:
        report.warnings.append(Q2_INDETERMINATE)
    try:
        so = extract_general_factor(tm.phi_star, tol=tol)
    except HeywoodCase as exc:
        report.warnings.append(HEYWOOD)
        exc.report = report
        raise
    except NotConverged as exc:
        report.warnings.append(NOT_CONVERGED)
        exc.report = report
        raise

    sl = schmid_leiman(tm, so)
    prim = primaries_model(m, sl)
    sigma = m.observed_cov()
    sigma_inv = matalg.safe_inverse(sigma, eps)
    corrs = predictors.pairwise_correlations(prim, eps)

    report.lambda2 = so.lambda2
    report.psi2_2 = so.psi2_2
    report.second_order_iterations = so.iterations
    report.sl_fit_residual = so.fit_residual
    report.lambda_sl = sl.lambda_sl
    report.lambda_slp = sl.lambda_slp
    report.route_residual = float(np.max(np.abs(sl.lambda_slp - tm.lambda_star * np.sqrt(so.psi2_2))))
    report.primaries_information_residual = matalg.offdiag_max(sl.lambda_slp.T @ sigma_inv @ sl.lambda_slp)
    recon = sl.lambda_sl @ sl.lambda_sl.T + np.diag(m.psi2)
    report.sigma_reconstruction_residual = float(np.max(np.abs(recon - sigma_from_model(m))))
    report.pairwise_correlations = corrs
    report.max_deviation_from_identity = _identity_deviation(corrs)
    report.primaries = prim
    return report
