"""Factor score predictors and a Schmid-Leiman based transformation that
makes them perfectly correlated for corresponding factors."""

from .errors import (
    FskError,
    GenerationFailed,
    HeywoodCase,
    InvalidModel,
    NonPositiveDiagonal,
    NotConverged,
    NotPositiveSemiDefinite,
    NotSymmetric,
    NumericalIntegrityError,
    Singular,
)
from .model import FactorModel, load_model, random_model, sigma_from_model, standardize, validate
from .predictors import (
    PredictorKind,
    cross_correlation,
    cross_covariance,
    factor_validity,
    pairwise_correlations,
    weights,
)
from .transform import extract_general_factor, run_pipeline, schmid_leiman, transform_loadings

__version__ = "0.1.0"
