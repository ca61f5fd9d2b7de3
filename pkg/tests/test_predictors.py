import numpy as np
import pytest

from fsk import predictors
from fsk.errors import NumericalIntegrityError, Singular
from fsk.model import FactorModel, random_model, sigma_from_model
from fsk.predictors import PAIRS, PredictorKind, cross_correlation, cross_covariance, factor_validity, weights

from . import oracles
from .conftest import desk_model_b, spearman_model, suite_model

KINDS = list(PredictorKind)


def spearman_determinacy(lam, psi2):
    # Woodbury for one factor: l' S^-1 l = s / (1 + s), s = sum(l^2 / psi2)
    s = np.sum(lam**2 / psi2)
    return s / (1 + s)


class TestWeights:
    def test_spearman_weights_proportional(self, spearman):
        w = {k: weights(spearman, k).w[:, 0] for k in KINDS}
        for k in (PredictorKind.BLCU, PredictorKind.DBLCP):
            ratio = w[k] / w[PredictorKind.BL]
            assert np.all(ratio > 0)
            np.testing.assert_allclose(ratio, ratio[0], rtol=1e-12)

    def test_isotropic_orthonormal_bl(self):
        lam = np.array([[1, 0], [1, 0], [0, 1], [0, 1]]) / np.sqrt(2)
        s2 = 0.5
        m = FactorModel(lam, np.eye(2), np.full(4, s2))
        np.testing.assert_allclose(weights(m, PredictorKind.BL).w.T, lam.T / (1 + s2), atol=1e-15)

    def test_model_b_blcu_unbiased(self, model_b):
        w = weights(model_b, PredictorKind.BLCU).w
        assert np.max(np.abs(w.T @ model_b.loadings - np.eye(2))) < 1e-10

    @pytest.mark.parametrize("seed", range(30))
    def test_unbiasedness_and_preservation(self, seed):
        m = suite_model(seed)
        w = weights(m, PredictorKind.BLCU).w
        assert np.max(np.abs(w.T @ m.loadings - np.eye(m.q))) < 1e-10
        cov = predictors.predictor_covariance(m, PredictorKind.DBLCP)
        assert np.max(np.abs(cov - m.phi)) < 1e-10

    def test_shapes(self, model_b):
        for k in KINDS:
            wm = weights(model_b, k)
            assert wm.kind is k
            assert wm.w.shape == (6, 2)

    def test_string_kind(self, model_b):
        np.testing.assert_array_equal(weights(model_b, "blcu").w, weights(model_b, PredictorKind.BLCU).w)

    def test_singular_information(self):
        lam = np.full((4, 2), 0.5)
        m = FactorModel(lam, np.eye(2), np.full(4, 0.5))
        with pytest.raises(Singular):
            weights(m, PredictorKind.BLCU)
        with pytest.raises(Singular):
            weights(m, PredictorKind.DBLCP)


class TestCovariances:
    def test_dblcp_preserves_phi(self):
        m = random_model(12, 3, True, 4)
        assert np.max(np.abs(predictors.predictor_covariance(m, PredictorKind.DBLCP) - m.phi)) < 1e-10

    def test_bl_spearman_determinacy(self, spearman):
        v = predictors.predictor_covariance(spearman, PredictorKind.BL)
        expected = spearman_determinacy(spearman.loadings[:, 0], spearman.psi2)
        assert v.shape == (1, 1)
        assert v[0, 0] == pytest.approx(expected, abs=1e-14)
        assert v[0, 0] < 1

    def test_blcu_dominates_bl_on_orthogonal(self):
        for seed in range(100):
            p, q = (6, 9, 12)[seed % 3], (2, 3)[seed % 2]
            m = random_model(p, q, False, seed)
            diff = predictors.predictor_covariance(m, PredictorKind.BLCU) - predictors.predictor_covariance(
                m, PredictorKind.BL
            )
            assert np.linalg.eigvalsh(diff).min() > -1e-12
            assert np.all(np.diag(diff) > 0)

    @pytest.mark.parametrize("kind", KINDS)
    def test_self_cross_is_covariance(self, model_b, kind):
        np.testing.assert_allclose(
            cross_covariance(model_b, kind, kind), predictors.predictor_covariance(model_b, kind), atol=1e-15
        )

    @pytest.mark.parametrize("seed", range(40))
    def test_closed_forms(self, seed):
        m = suite_model(seed)
        lam, phi, sigma = m.loadings, m.phi, sigma_from_model(m)
        c = cross_covariance(m, PredictorKind.BLCU, PredictorKind.BL)
        assert np.max(np.abs(c - oracles.closed_form_cov_blcu_bl(phi))) < 1e-10
        c = cross_covariance(m, PredictorKind.DBLCP, PredictorKind.BL)
        assert np.max(np.abs(c - oracles.closed_form_cov_dblcp_bl(lam, phi, sigma))) < 1e-10
        c = cross_covariance(m, PredictorKind.BLCU, PredictorKind.DBLCP)
        assert np.max(np.abs(c - oracles.closed_form_cov_blcu_dblcp(lam, phi, sigma))) < 1e-10

    def test_model_b_dblcp_bl_two_routes(self, model_b):
        c = cross_covariance(model_b, PredictorKind.DBLCP, PredictorKind.BL)
        expected = oracles.closed_form_cov_dblcp_bl(model_b.loadings, model_b.phi, sigma_from_model(model_b))
        assert np.max(np.abs(c - expected)) < 1e-12


class TestCorrelations:
    def test_spearman_pairs(self, spearman):
        for a, b in PAIRS:
            r = cross_correlation(spearman, a, b)
            assert r.shape == (1, 1)
            assert r[0, 0] == pytest.approx(1.0, abs=1e-12)

    def test_model_b_blcu_bl(self, model_b):
        r = cross_correlation(model_b, PredictorKind.BLCU, PredictorKind.BL)
        # Cov(BLCU, BL) = Phi = I, so only the diagonal is nonzero.
        assert np.all(np.diag(r) < 1)
        assert matalg_offdiag(r) < 1e-12
        info = oracles.precision_info(model_b.loadings, sigma_from_model(model_b))
        expected = 1.0 / np.sqrt(np.diag(np.linalg.inv(info)) * np.diag(info))
        np.testing.assert_allclose(np.diag(r), expected, atol=1e-12)

    def test_model_b_dblcp_pairs_not_diagonal(self, model_b):
        r = cross_correlation(model_b, PredictorKind.DBLCP, PredictorKind.BL)
        assert matalg_offdiag(r) > 0.03
        assert np.all(np.diag(r) < 1)

    @pytest.mark.parametrize("seed", range(40))
    def test_one_sided_normalizations_agree(self, seed):
        m = suite_model(seed)
        lam, phi, sigma = m.loadings, m.phi, sigma_from_model(m)
        routes = {
            (PredictorKind.BLCU, PredictorKind.BL): oracles.closed_form_corr_blcu_bl,
            (PredictorKind.DBLCP, PredictorKind.BL): oracles.closed_form_corr_dblcp_bl,
            (PredictorKind.BLCU, PredictorKind.DBLCP): oracles.closed_form_corr_blcu_dblcp,
        }
        for (a, b), oracle in routes.items():
            r = cross_correlation(m, a, b)
            assert np.max(np.abs(r - oracle(lam, phi, sigma))) < 1e-10
            assert np.max(np.abs(r)) <= 1 + 1e-10

    @pytest.mark.parametrize("seed", range(30))
    def test_diagonal_information_gives_identity(self, seed):
        p, q = (6, 9, 12)[seed % 3], (2, 3)[seed % 2]
        m = random_model(p, q, False, seed, cross_prob=0.0)
        _, _, info = predictors._precision_terms(m, None)
        assert matalg_offdiag(info) < 1e-12
        for a, b in PAIRS:
            r = cross_correlation(m, a, b)
            assert np.max(np.abs(r - np.eye(q))) < 1e-8

    def test_out_of_range_raises(self, model_b, monkeypatch):
        real = predictors.cross_covariance
        monkeypatch.setattr(predictors, "cross_covariance", lambda *a, **k: 2.0 * real(*a, **k))
        monkeypatch.setattr(predictors, "predictor_covariance", lambda m, k, eps=None: real(m, k, k, eps))
        with pytest.raises(NumericalIntegrityError):
            predictors.cross_correlation(model_b, PredictorKind.BLCU, PredictorKind.BL)


class TestValidity:
    def test_bl_is_maximal(self):
        for seed in range(100):
            m = suite_model(seed)
            bl = factor_validity(m, PredictorKind.BL)
            for k in (PredictorKind.BLCU, PredictorKind.DBLCP):
                assert np.all(bl >= factor_validity(m, k) - 1e-12)

    def test_determinacy_limit(self):
        lam = np.array([[0.8], [0.7], [0.6]])
        m = FactorModel(lam, np.eye(1), np.full(3, 1e-6))
        for k in KINDS:
            assert factor_validity(m, k)[0] == pytest.approx(1.0, abs=1e-3)

    def test_spearman_equal(self, spearman):
        v = [factor_validity(spearman, k)[0] for k in KINDS]
        expected = np.sqrt(spearman_determinacy(spearman.loadings[:, 0], spearman.psi2))
        np.testing.assert_allclose(v, expected, atol=1e-12)

    def test_blcu_uncorrelated_with_other_factors(self):
        # B' L = I implies Cov(BLCU, f) = Phi; with Phi = I off-diagonals vanish.
        m = desk_model_b()
        w = weights(m, PredictorKind.BLCU).w
        cov = w.T @ m.loadings @ m.phi
        assert matalg_offdiag(cov) < 1e-12


def matalg_offdiag(m):
    from fsk.matalg import offdiag_max

    return offdiag_max(m)


def test_spearman_model_helper():
    m = spearman_model((0.5, 0.5, 0.5, 0.5))
    assert m.q == 1 and m.p == 4
