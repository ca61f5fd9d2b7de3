"""
The common factor model ``x = L f + e`` and its implied covariance.

A model holds the loading matrix, the factor correlation matrix and the
unique variances (kept as a vector, since the unique covariance matrix is
diagonal by assumption). Models can optionally carry an explicit observed
covariance; this is used for factor subsets such as orthogonalized primaries,
where part of the common variance belongs to a factor that is not modelled.
"""

import json
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from . import matalg
from .errors import GenerationFailed, InvalidModel, ModelFormatError, NonPositiveDiagonal, NotSymmetric

SIGMA_CONDITION_LIMIT = 1e8
MIN_GENERATED_PSI2 = 0.05
MAX_GENERATION_ATTEMPTS = 1000


@dataclass(frozen=True, eq=False)
class FactorModel:
    """
    Population factor model.

    Parameters
    ----------
    loadings : array-like, (p, q)
        Factor pattern matrix.
    phi : array-like, (q, q)
        Factor correlation matrix.
    psi2 : array-like, (p,)
        Unique variances.
    sigma : array-like, (p, p), optional
        Observed covariance to use instead of the model-implied one.

    Shapes are checked on construction; numerical invariants are checked by
    :func:`validate`.
    """

    loadings: np.ndarray
    phi: np.ndarray
    psi2: np.ndarray
    sigma: Optional[np.ndarray] = None

    def __post_init__(self):
        lam = np.array(self.loadings, dtype=float)
        if lam.ndim != 2:
            raise InvalidModel(f"lambda must be a 2-d matrix, got shape {lam.shape}")
        p, q = lam.shape
        try:
            phi = matalg.as_symmetric(self.phi)
        except NotSymmetric as exc:
            raise InvalidModel(f"phi not symmetric: {exc}") from None
        if phi.shape != (q, q):
            raise InvalidModel(f"phi must be {q}x{q}, got {phi.shape}")
        psi2 = np.array(self.psi2, dtype=float)
        if psi2.shape != (p,):
            raise InvalidModel(f"psi2 must have length {p}, got shape {psi2.shape}")
        sigma = self.sigma
        if sigma is not None:
            try:
                sigma = matalg.as_symmetric(sigma)
            except NotSymmetric as exc:
                raise InvalidModel(f"sigma not symmetric: {exc}") from None
            if sigma.shape != (p, p):
                raise InvalidModel(f"sigma must be {p}x{p}, got {sigma.shape}")
        for name, arr in (("lambda", lam), ("phi", phi), ("psi2", psi2), ("sigma", sigma)):
            if arr is not None and not np.all(np.isfinite(arr)):
                raise InvalidModel(f"{name} contains non-finite values")
            if arr is not None:
                arr.setflags(write=False)
        object.__setattr__(self, "loadings", lam)
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "psi2", psi2)
        object.__setattr__(self, "sigma", sigma)

    @property
    def p(self) -> int:
        return self.loadings.shape[0]

    @property
    def q(self) -> int:
        return self.loadings.shape[1]

    def observed_cov(self) -> np.ndarray:
        """Explicit observed covariance if present, else the implied one."""
        if self.sigma is not None:
            return self.sigma
        return sigma_from_model(self)

    def replace(self, **changes) -> "FactorModel":
        fields = {"loadings": self.loadings, "phi": self.phi, "psi2": self.psi2, "sigma": self.sigma}
        fields.update(changes)
        return FactorModel(**fields)


@dataclass
class ModelDiagnostics:
    sigma_condition_number: float
    min_psi2: float
    min_phi_eigenvalue: float
    flags: List[str] = field(default_factory=list)

    def to_dict(self):
        return {
            "sigma_condition_number": self.sigma_condition_number,
            "min_psi2": self.min_psi2,
            "min_phi_eigenvalue": self.min_phi_eigenvalue,
            "flags": list(self.flags),
        }


def sigma_from_model(m: FactorModel) -> np.ndarray:
    """Model-implied covariance ``L Phi L' + diag(psi2)``."""
    lam = m.loadings
    common = lam @ m.phi @ lam.T
    common = (common + common.T) / 2.0
    return common + np.diag(m.psi2)


def validate(m: FactorModel, eps: float = matalg.DEFAULT_EPS) -> ModelDiagnostics:
    """
    Check every numerical invariant of a factor model.

    Returns diagnostics even for valid models. Near-singular covariance
    matrices (condition number above 1e8) are flagged, not rejected.

    Raises
    ------
    InvalidModel
        Naming the first violated invariant.
    """
    p, q = m.p, m.q
    if not 1 <= q < p:
        raise InvalidModel(f"factor count must satisfy 1 <= q < p (p={p}, q={q})")
    if np.max(np.abs(np.diag(m.phi) - 1.0)) > eps:
        raise InvalidModel("phi must have unit diagonal")
    phi_evals = np.linalg.eigvalsh(m.phi)
    if phi_evals.min() < -eps * max(1.0, float(np.abs(phi_evals).max())):
        raise InvalidModel("phi not PSD")
    if np.any(m.psi2 <= 0):
        raise InvalidModel("psi2 must be strictly positive")
    if np.any(np.all(m.loadings == 0, axis=0)):
        raise InvalidModel("lambda has an all-zero column")

    flags = []
    sig_evals = np.linalg.eigvalsh(sigma_from_model(m))
    if sig_evals.min() <= eps * float(np.abs(sig_evals).max()):
        raise InvalidModel("model-implied sigma not positive definite")
    cond = float(sig_evals.max() / sig_evals.min())
    if m.sigma is not None:
        obs_evals = np.linalg.eigvalsh(m.sigma)
        if obs_evals.min() <= eps * float(np.abs(obs_evals).max()):
            raise InvalidModel("observed sigma not positive definite")
        cond = max(cond, float(obs_evals.max() / obs_evals.min()))
    if cond > SIGMA_CONDITION_LIMIT:
        flags.append("SIGMA_ILL_CONDITIONED")
    return ModelDiagnostics(
        sigma_condition_number=cond,
        min_psi2=float(m.psi2.min()),
        min_phi_eigenvalue=float(phi_evals.min()),
        flags=flags,
    )


def standardize(m: FactorModel) -> FactorModel:
    """
    Rescale factors to unit variance without changing the implied covariance.

    ``lambda <- lambda D^1/2`` and ``phi <- D^-1/2 phi D^-1/2`` with
    ``D = diag(phi)``.
    """
    d = np.diag(m.phi)
    if np.any(d <= 0):
        raise NonPositiveDiagonal("factor variances must be positive")
    s = np.sqrt(d)
    return m.replace(loadings=m.loadings * s, phi=matalg.corr_from_cov(m.phi))


def _nearest_correlation(c, floor=1e-6):
    evals, evecs = np.linalg.eigh(c)
    if evals.min() >= floor:
        return c
    c = (evecs * np.maximum(evals, floor)) @ evecs.T
    return matalg.corr_from_cov((c + c.T) / 2.0)


def random_model(p, q, oblique=False, seed=0, cross_prob=0.3):
    """
    Draw a synthetic standardized factor model with simple structure.

    Each variable loads on one factor with a loading from U[0.4, 0.9];
    other entries receive a cross-loading from U[0, 0.3] with probability
    ``cross_prob``. Oblique models draw factor correlations from U[0, 0.5]
    and project onto the PSD cone. Unique variances make the observed
    variances 1; draws leaving any uniqueness at or below 0.05 are redrawn.

    Parameters
    ----------
    p, q : int
        Variable and factor counts, ``p >= 3`` and ``q < p``.
    oblique : bool
        Whether the factors are correlated.
    seed : int
        Seed for a Philox generator; equal seeds give equal models.
    cross_prob : float
        Probability of a cross-loading per off-structure entry.
    """
    if p < 3 or not 1 <= q < p:
        raise ValueError(f"need p >= 3 and 1 <= q < p, got p={p}, q={q}")
    rng = np.random.Generator(np.random.Philox(seed))
    owner = np.arange(p) * q // p
    for _ in range(MAX_GENERATION_ATTEMPTS):
        lam = np.zeros((p, q))
        lam[np.arange(p), owner] = rng.uniform(0.4, 0.9, size=p)
        cross = rng.uniform(0.0, 0.3, size=(p, q)) * (rng.random((p, q)) < cross_prob)
        cross[np.arange(p), owner] = 0.0
        lam += cross
        phi = np.eye(q)
        if oblique and q > 1:
            iu = np.triu_indices(q, 1)
            phi[iu] = rng.uniform(0.0, 0.5, size=len(iu[0]))
            phi = phi + np.triu(phi, 1).T
            phi = _nearest_correlation(phi)
        psi2 = 1.0 - np.einsum("ij,jk,ik->i", lam, phi, lam)
        if np.all(psi2 > MIN_GENERATED_PSI2):
            return FactorModel(lam, phi, psi2)
    raise GenerationFailed(f"no admissible model after {MAX_GENERATION_ATTEMPTS} draws")


_MODEL_KEYS = {"p", "q", "lambda", "phi", "psi2"}
_OPTIONAL_KEYS = {"sigma"}


def model_from_dict(doc) -> FactorModel:
    """
    Build a model from the JSON document layout.

    ``{"p": int, "q": int, "lambda": [[...]], "phi": [[...]], "psi2": [...]}``
    with an optional row-major ``"sigma"`` matrix.
    """
    if not isinstance(doc, dict):
        raise ModelFormatError("model document must be a JSON object")
    keys = set(doc)
    missing = _MODEL_KEYS - keys
    if missing:
        raise ModelFormatError(f"model document missing keys: {sorted(missing)}")
    extra = keys - _MODEL_KEYS - _OPTIONAL_KEYS - {"schema_version"}
    if extra:
        raise ModelFormatError(f"unknown model keys: {sorted(extra)}")
    p, q = doc["p"], doc["q"]
    if not (isinstance(p, int) and isinstance(q, int)) or isinstance(p, bool) or isinstance(q, bool):
        raise ModelFormatError("p and q must be integers")

    def matrix(name, shape):
        try:
            arr = np.array(doc[name], dtype=float)
        except (TypeError, ValueError):
            raise ModelFormatError(f"{name} is not a numeric array") from None
        if arr.shape != shape:
            raise ModelFormatError(f"{name} must have shape {shape}, got {arr.shape}")
        return arr

    sigma = matrix("sigma", (p, p)) if doc.get("sigma") is not None else None
    return FactorModel(matrix("lambda", (p, q)), matrix("phi", (q, q)), matrix("psi2", (p,)), sigma)


def model_to_dict(m: FactorModel) -> dict:
    doc = {
        "p": m.p,
        "q": m.q,
        "lambda": m.loadings.tolist(),
        "phi": m.phi.tolist(),
        "psi2": m.psi2.tolist(),
    }
    if m.sigma is not None:
        doc["sigma"] = m.sigma.tolist()
    return doc


def load_model(path) -> FactorModel:
    """Read a model JSON file. Parse errors surface as ``json.JSONDecodeError``."""
    with open(path, encoding="utf-8") as fh:
        return model_from_dict(json.load(fh))
