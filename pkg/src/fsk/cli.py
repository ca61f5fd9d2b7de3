"""
Command-line interface.

Exit codes: 0 success, 1 validation or verification failure, 2 I/O or parse
failure, 3 numerical failure (Heywood case, singular matrix, no convergence).
"""

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import matalg, predictors, simulate, transform
from .errors import NUMERICAL_ERRORS, HeywoodCase, InvalidModel, ModelFormatError, NotConverged
from .jsonout import SCHEMA_VERSION, dumps
from .model import load_model, model_to_dict, validate
from .predictors import PredictorKind

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_IO = 2
EXIT_NUMERICAL = 3

DEFAULT_TOL = 1e-10
DEFAULT_N_SAMPLES = 200_000


class _Fail(Exception):
    def __init__(self, code, message, doc=None):
        super().__init__(message)
        self.code = code
        self.doc = doc


def _doc(command, **body):
    out = {"schema_version": SCHEMA_VERSION, "command": command}
    out.update(body)
    return out


def _emit(doc, cfg):
    text = dumps(doc)
    if cfg.out and not (cfg.command == "simulate" and cfg.format == "csv"):
        try:
            Path(cfg.out).write_text(text, encoding="utf-8")
        except OSError as exc:
            raise _Fail(EXIT_IO, f"cannot write {cfg.out}: {exc}") from None
    else:
        sys.stdout.write(text)


def _load(cfg, check=True):
    try:
        m = load_model(cfg.model)
    except OSError as exc:
        raise _Fail(EXIT_IO, f"cannot read {cfg.model}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise _Fail(EXIT_IO, f"malformed JSON in {cfg.model}: {exc}") from None
    except ModelFormatError as exc:
        raise _Fail(EXIT_IO, f"bad model document: {exc}") from None
    except InvalidModel as exc:
        raise _Fail(EXIT_INVALID, str(exc), _doc(cfg.command, valid=False, error=str(exc))) from None
    if check:
        try:
            validate(m, cfg.tol)
        except InvalidModel as exc:
            raise _Fail(EXIT_INVALID, str(exc), _doc(cfg.command, valid=False, error=str(exc))) from None
    return m


def cmd_validate(cfg):
    m = _load(cfg, check=False)
    try:
        diag = validate(m, cfg.tol)
    except InvalidModel as exc:
        _emit(_doc("validate", valid=False, error=str(exc)), cfg)
        return EXIT_INVALID
    _emit(_doc("validate", valid=True, diagnostics=diag.to_dict()), cfg)
    return EXIT_OK


def cmd_transform(cfg):
    m = _load(cfg)
    tm = transform.transform_loadings(m, cfg.tol)
    doc = _doc(
        "transform",
        model=model_to_dict(tm.model),
        t=tm.t,
        scale=tm.scale,
        residuals={
            "information_offdiag": transform.information_residual(tm, cfg.tol),
            "sigma_preservation": transform.sigma_preservation_residual(tm),
        },
    )
    _emit(doc, cfg)
    return EXIT_OK


def cmd_pipeline(cfg):
    m = _load(cfg)
    try:
        report = transform.run_pipeline(m, tol=cfg.tol, eps=cfg.tol)
    except (HeywoodCase, NotConverged) as exc:
        body = exc.report.to_dict() if exc.report is not None else {}
        raise _Fail(EXIT_NUMERICAL, str(exc), _doc("pipeline", error=str(exc), report=body)) from None
    if cfg.primaries_out and report.primaries is not None:
        try:
            Path(cfg.primaries_out).write_text(dumps(model_to_dict(report.primaries)), encoding="utf-8")
        except OSError as exc:
            raise _Fail(EXIT_IO, f"cannot write {cfg.primaries_out}: {exc}") from None
    _emit(_doc("pipeline", report=report.to_dict()), cfg)
    return EXIT_OK


def _predictor_doc(m, eps):
    w = predictors.all_weights(m, eps)
    return {
        "weights": {k.value: w[k].w for k in PredictorKind},
        "covariances": {k.value: predictors.predictor_covariance(m, k, eps) for k in PredictorKind},
        "cross_correlations": {
            predictors.pair_key(a, b): predictors.cross_correlation(m, a, b, eps) for a, b in predictors.PAIRS
        },
        "validities": {k.value: predictors.factor_validity(m, k, eps) for k in PredictorKind},
    }


def cmd_predictors(cfg):
    m = _load(cfg)
    body = _predictor_doc(m, cfg.tol)
    if cfg.format == "csv":
        if not cfg.out:
            raise _Fail(EXIT_IO, "--format csv requires --out as the file stem")
        out = Path(cfg.out)
        stem = out.with_suffix("") if out.suffix else out
        try:
            for k in PredictorKind:
                np.savetxt(f"{stem}_{k.value}.csv", body["weights"][k.value], delimiter=",", fmt="%.17g")
        except OSError as exc:
            raise _Fail(EXIT_IO, f"cannot write CSV: {exc}") from None
        return EXIT_OK
    _emit(_doc("predictors", **body), cfg)
    return EXIT_OK


def cmd_verify(cfg):
    m = _load(cfg)
    sigma_inv = matalg.safe_inverse(m.observed_cov(), cfg.tol)
    info = m.loadings.T @ sigma_inv @ m.loadings
    info_offdiag = matalg.offdiag_max(info)
    phi_dev = float(np.max(np.abs(m.phi - np.eye(m.q))))
    met = info_offdiag < cfg.tol and phi_dev < cfg.tol
    corrs = predictors.pairwise_correlations(m, cfg.tol)
    deviation = max(float(np.max(np.abs(r - np.eye(m.q)))) for r in corrs.values())
    if not met:
        status = "precondition not met"
    elif deviation < cfg.tol:
        status = "verified"
    else:
        status = "failed"
    doc = _doc(
        "verify",
        precondition={"met": met, "info_offdiag_max": info_offdiag, "phi_identity_deviation": phi_dev},
        pairwise_correlations=corrs,
        max_deviation_from_identity=deviation,
        status=status,
    )
    _emit(doc, cfg)
    return EXIT_INVALID if status == "failed" else EXIT_OK


def cmd_simulate(cfg):
    m = _load(cfg)
    s = simulate.sample(m, cfg.n_samples, cfg.seed)
    pairs = {}
    worst = 0.0
    for a, b in predictors.PAIRS:
        emp = simulate.empirical_predictor_correlations(s, m, a, b)
        exact = predictors.cross_correlation(m, a, b, cfg.tol)
        gap = float(np.max(np.abs(emp - exact)))
        worst = max(worst, gap)
        pairs[predictors.pair_key(a, b)] = {"empirical": emp, "closed_form": exact, "max_abs_discrepancy": gap}
    validity = {}
    for k in PredictorKind:
        emp = simulate.empirical_validity(s, m, k)
        exact = predictors.factor_validity(m, k, cfg.tol)
        gap = float(np.max(np.abs(emp - exact)))
        worst = max(worst, gap)
        validity[k.value] = {"empirical": emp, "closed_form": exact, "max_abs_discrepancy": gap}
    cov_gap = float(np.max(np.abs(simulate.sample_covariance(s) - m.observed_cov())))
    doc = _doc(
        "simulate",
        n_samples=cfg.n_samples,
        seed=cfg.seed,
        covariance_max_abs_discrepancy=cov_gap,
        correlations=pairs,
        validities=validity,
        max_abs_discrepancy=worst,
    )
    if cfg.format == "csv":
        if not cfg.out:
            raise _Fail(EXIT_IO, "--format csv requires --out for the sample file")
        try:
            simulate.write_csv(s, cfg.out)
        except OSError as exc:
            raise _Fail(EXIT_IO, f"cannot write {cfg.out}: {exc}") from None
    _emit(doc, cfg)
    return EXIT_OK


COMMANDS = {
    "validate": (cmd_validate, "check model invariants and print diagnostics"),
    "transform": (cmd_transform, "apply the diagonalizing loading transformation"),
    "pipeline": (cmd_pipeline, "transformation, general factor and Schmid-Leiman orthogonalization"),
    "predictors": (cmd_predictors, "BL, BLCU and DBLCP weights, covariances and validities"),
    "verify": (cmd_verify, "check the perfect-correlation precondition and predictor correlations"),
    "simulate": (cmd_simulate, "compare sample predictor correlations with closed forms"),
}


def _nonneg_int(text):
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError("must be nonnegative")
    return v


def _sample_count(text):
    v = int(text)
    if v < 2:
        raise argparse.ArgumentTypeError("need at least 2 samples")
    return v


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--model", required=True, metavar="PATH", help="model JSON file")
    common.add_argument("--tol", type=float, default=DEFAULT_TOL, help="numerical tolerance (default: %(default)g)")
    common.add_argument("--seed", type=_nonneg_int, default=0, help="random seed (default: %(default)s)")
    common.add_argument(
        "--n-samples", type=_sample_count, default=DEFAULT_N_SAMPLES, help="sample size (default: %(default)s)"
    )
    common.add_argument("--out", metavar="PATH", help="output file (default: stdout)")
    common.add_argument("--format", choices=("json", "csv"), default="json", help="output format (default: json)")

    parser = argparse.ArgumentParser(
        prog="fsk",
        description="Factor score predictors and the Schmid-Leiman based perfect-correlation transformation.",
        epilog="Set FSK_THREADS to cap sampling threads (0 = automatic).",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, parents=[common], help=help_text, description=help_text)
        if name == "pipeline":
            p.add_argument("--primaries-out", metavar="PATH", help="also write the orthogonal primaries model")
    return parser


def main(argv=None):
    cfg = build_parser().parse_args(argv)
    handler = COMMANDS[cfg.command][0]
    if not hasattr(cfg, "primaries_out"):
        cfg.primaries_out = None
    try:
        return handler(cfg)
    except _Fail as exc:
        if exc.doc is not None:
            try:
                _emit(exc.doc, cfg)
            except _Fail:
                pass
        print(f"fsk {cfg.command}: {exc}", file=sys.stderr)
        return exc.code
    except NUMERICAL_ERRORS as exc:
        print(f"fsk {cfg.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        print(f"fsk {cfg.command}: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
