"""Constrained fits, degrees of freedom, zero-pattern scaling, tilted paths."""

import numpy as np
import pytest
from scipy.optimize import minimize

from dirnormal.core import sample_mvn, summarize
from dirnormal.exceptions import DimensionError, NotPositiveDefiniteError
from dirnormal.hypotheses import (
    BlockIndependence,
    CompleteIndependence,
    EqualCovariances,
    EqualDistributions,
    ProportionalIdentity,
    SpecifiedMeanCov,
    ZeroPattern,
    constrained_mle,
    degrees_of_freedom,
    expected_s_psi,
    fit_hypothesis,
    fit_zero_pattern,
    is_degenerate,
    path_estimates,
    standardize,
)
from dirnormal.linalg import is_positive_definite, vech


def make_summary(mle_cov, n=30, ybar=None):
    """Consistent sufficient statistics with exactly the given covariance."""
    from dirnormal.core import SampleSummary

    mle_cov = np.asarray(mle_cov, dtype=float)
    p = mle_cov.shape[0]
    ybar = np.zeros(p) if ybar is None else np.asarray(ybar, dtype=float)
    return SampleSummary(
        n=n,
        p=p,
        ybar=ybar,
        second_moment=mle_cov + np.outer(ybar, ybar),
        mle_cov=mle_cov,
        centered_ssq=n * mle_cov,
    )


class TestDegreesOfFreedom:
    def test_specified_mean_cov_p4(self):
        assert degrees_of_freedom(SpecifiedMeanCov(np.zeros(4), np.eye(4)), 4) == 14

    def test_equal_covariances_p3_k3(self):
        assert degrees_of_freedom(EqualCovariances(), 3, k=3) == 12

    def test_complete_independence_p2(self):
        assert degrees_of_freedom(CompleteIndependence(), 2) == 1

    def test_proportional_identity(self):
        assert degrees_of_freedom(ProportionalIdentity(), 5) == 14  # 15 - 1

    def test_equal_distributions(self):
        assert degrees_of_freedom(EqualDistributions(), 2, k=3) == 10  # p(p+3)(k-1)/2

    def test_block_bookkeeping_identity(self):
        # constrained dof + free block dofs = total covariance dofs
        p = 7
        hyp = BlockIndependence((3, 2, 2))
        d = degrees_of_freedom(hyp, p)
        free = sum(s * (s + 1) // 2 for s in hyp.block_sizes)
        assert d + free == p * (p + 1) // 2

    def test_zero_pattern_counts_pairs(self):
        assert degrees_of_freedom(ZeroPattern(((0, 1), (2, 3))), 4) == 2


class TestConstrainedMle:
    def test_proportional_identity_trace_mean(self):
        fit = constrained_mle(ProportionalIdentity(), [make_summary(np.diag([2.0, 4.0]))])
        np.testing.assert_allclose(fit.lambda0_inv, 3.0 * np.eye(2), rtol=1e-14)

    def test_complete_independence_diagonal(self):
        fit = constrained_mle(CompleteIndependence(), [make_summary([[1.0, 0.5], [0.5, 2.0]])])
        np.testing.assert_array_equal(fit.lambda0_inv, np.diag([1.0, 2.0]))

    def test_equal_distributions_matches_pooled_loop(self):
        rng = np.random.default_rng(3)
        groups = [rng.standard_normal((12, 3)), rng.standard_normal((17, 3)) + 0.4]
        fit = fit_hypothesis(EqualDistributions(), groups)
        stacked = np.vstack(groups)
        ybar = stacked.mean(axis=0)
        pooled = np.zeros((3, 3))
        for row in stacked:
            pooled += np.outer(row - ybar, row - ybar)
        pooled /= len(stacked)
        np.testing.assert_allclose(fit.lambda0_inv, pooled, rtol=1e-10, atol=1e-12)
        np.testing.assert_allclose(fit.mu0[0], ybar, atol=1e-14)

    def test_trace_identity_one_sample_cases(self):
        rng = np.random.default_rng(4)
        y = rng.standard_normal((25, 4))
        for hyp in (
            ProportionalIdentity(),
            BlockIndependence((2, 2)),
            CompleteIndependence(),
            ZeroPattern(((0, 3), (1, 2))),
        ):
            fit = fit_hypothesis(hyp, y)
            assert sum(fit.pencil_eigs[0]) == pytest.approx(4.0, abs=1e-8)

    def test_equal_covariances_weighted_trace_identity(self):
        # The shared fit satisfies the n-weighted trace identity; the
        # unweighted per-group version is false in general (see below).
        rng = np.random.default_rng(5)
        groups = [rng.standard_normal((20, 3)), 2.0 * rng.standard_normal((30, 3))]
        fit = fit_hypothesis(EqualCovariances(), groups)
        weighted = sum(
            s.n * np.sum(nu) for s, nu in zip(fit.summaries, fit.pencil_eigs)
        ) / fit.n_total
        assert weighted == pytest.approx(3.0, abs=1e-8)

    def test_equal_covariances_per_group_trace_not_p(self):
        # 1-d counterexample: pooled 1.0 against group values 0.4 and 1.6.
        g1 = np.array([[0.0], [2.0], [1.0], [1.0], [1.0]])  # ssq 2 -> 0.4
        g2 = np.array([[0.0], [4.0], [2.0], [2.0], [2.0]])  # ssq 8 -> 1.6
        fit = fit_hypothesis(EqualCovariances(), [g1, g2])
        sums = [float(np.sum(nu)) for nu in fit.pencil_eigs]
        assert sums[0] != pytest.approx(1.0, abs=0.1)
        assert (5 * sums[0] + 5 * sums[1]) / 10 == pytest.approx(1.0, abs=1e-12)

    def test_blocks_of_size_one_match_complete_independence(self):
        rng = np.random.default_rng(6)
        y = rng.standard_normal((20, 3))
        a = fit_hypothesis(BlockIndependence((1, 1, 1)), y)
        b = fit_hypothesis(CompleteIndependence(), y)
        np.testing.assert_allclose(a.lambda0_inv, b.lambda0_inv, atol=1e-14)
        assert a.d == b.d

    def test_group_count_validation(self):
        rng = np.random.default_rng(7)
        y = rng.standard_normal((10, 2))
        with pytest.raises(DimensionError):
            fit_hypothesis(EqualCovariances(), [y])
        with pytest.raises(DimensionError):
            fit_hypothesis(ProportionalIdentity(), np.ones((3, 2)))  # n < p + 2


class TestZeroPattern:
    def test_no_zeros_returns_input(self):
        rng = np.random.default_rng(8)
        v = summarize(rng.standard_normal((20, 3))).mle_cov
        np.testing.assert_array_equal(fit_zero_pattern(v, ()), v)

    def test_full_independence_matches_diagonal(self):
        rng = np.random.default_rng(9)
        v = summarize(rng.standard_normal((20, 3))).mle_cov
        pairs = ((0, 1), (0, 2), (1, 2))
        np.testing.assert_allclose(fit_zero_pattern(v, pairs), np.diag(np.diag(v)), atol=1e-12)

    def test_single_zero_matches_numeric_optimizer(self):
        rng = np.random.default_rng(10)
        v = summarize(rng.standard_normal((30, 3))).mle_cov
        pairs = ((0, 2),)
        fitted = fit_zero_pattern(v, pairs, tol=1e-12)

        # restricted-likelihood oracle: maximize log det(K) - tr(K V) over
        # concentrations K with K[0, 2] = 0
        idx = [(0, 0), (1, 1), (2, 2), (0, 1), (1, 2)]

        def unpack(theta):
            k = np.zeros((3, 3))
            for val, (i, j) in zip(theta, idx):
                k[i, j] = k[j, i] = val
            return k

        def neg(theta):
            k = unpack(theta)
            sign, logdet = np.linalg.slogdet(k)
            if sign <= 0:
                return 1e10
            return -(logdet - float(np.sum(k * v)))

        theta0 = np.array([1 / v[0, 0], 1 / v[1, 1], 1 / v[2, 2], 0.0, 0.0])
        res = minimize(neg, theta0, method="Nelder-Mead",
                       options={"xatol": 1e-13, "fatol": 1e-13, "maxiter": 50000})
        oracle_cov = np.linalg.inv(unpack(res.x))
        np.testing.assert_allclose(fitted, oracle_cov, atol=1e-8)

    def test_zero_entries_exact_and_free_entries_match(self):
        rng = np.random.default_rng(11)
        v = summarize(rng.standard_normal((40, 5))).mle_cov
        pairs = ((0, 1), (2, 4))
        fitted = fit_zero_pattern(v, pairs, tol=1e-11)
        conc = np.linalg.inv(fitted)
        for i, j in pairs:
            assert abs(conc[i, j]) < 1e-9
        free = [(i, j) for i in range(5) for j in range(i, 5) if (i, j) not in pairs]
        for i, j in free:
            assert fitted[i, j] == pytest.approx(v[i, j], abs=1e-9)
        # trace identity comes along for free
        assert np.sum(conc * v) == pytest.approx(5.0, abs=1e-10)

    def test_not_pd_input_rejected(self):
        with pytest.raises(NotPositiveDefiniteError):
            fit_zero_pattern(np.array([[1.0, 2.0], [2.0, 1.0]]), ((0, 1),))


class TestExpectedSPsi:
    def test_degenerate_when_constrained_equals_unconstrained(self):
        fit = constrained_mle(ProportionalIdentity(), [make_summary(2.0 * np.eye(3))])
        shift = expected_s_psi(fit)
        assert shift.max_abs() == 0.0
        assert is_degenerate(fit)

    def test_standardized_at_null_is_zero(self):
        # rows chosen so the mean is zero and the second moment exactly I
        y = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]]) * np.sqrt(2)
        s = summarize(y)
        np.testing.assert_allclose(s.second_moment, np.eye(2), atol=1e-15)
        fit = constrained_mle(SpecifiedMeanCov(np.zeros(2), np.eye(2)), [s])
        assert expected_s_psi(fit).max_abs() <= 1e-15

    def test_equal_covariances_blocks_recomputed(self):
        rng = np.random.default_rng(13)
        groups = [rng.standard_normal((15, 2)), rng.standard_normal((25, 2)) * 1.5]
        fit = fit_hypothesis(EqualCovariances(), groups)
        shift = expected_s_psi(fit)
        for s, mean_b, vech_b in zip(fit.summaries, shift.mean_blocks, shift.vech_blocks):
            np.testing.assert_array_equal(mean_b, np.zeros(2))
            np.testing.assert_allclose(
                vech_b, -0.5 * s.n * vech(fit.lambda0_inv - s.mle_cov), atol=1e-12
            )


class TestPathEstimates:
    def _fits(self):
        rng = np.random.default_rng(14)
        y = rng.standard_normal((20, 3))
        groups = [rng.standard_normal((15, 3)), rng.standard_normal((18, 3)) + 0.2]
        return [
            fit_hypothesis(ProportionalIdentity(), y),
            fit_hypothesis(SpecifiedMeanCov(np.zeros(3), np.eye(3)), y),
            fit_hypothesis(EqualCovariances(), groups),
            fit_hypothesis(EqualDistributions(), groups),
        ]

    def test_endpoints(self):
        for fit in self._fits():
            at1 = path_estimates(fit, 1.0)
            for m, s in zip(at1.lambda_t_inv, fit.summaries):
                np.testing.assert_allclose(m, s.mle_cov, atol=1e-12)
            for mu, s in zip(at1.mu_t, fit.summaries):
                np.testing.assert_allclose(mu, s.ybar, atol=1e-12)
            at0 = path_estimates(fit, 0.0)
            for m in at0.lambda_t_inv:
                np.testing.assert_allclose(m, fit.lambda0_inv, atol=1e-12)
            for mu, mu0 in zip(at0.mu_t, fit.mu0):
                np.testing.assert_allclose(mu, mu0, atol=1e-12)

    def test_convex_range_is_positive_definite(self):
        rng = np.random.default_rng(15)
        y = rng.standard_normal((20, 4))
        fit = fit_hypothesis(BlockIndependence((2, 2)), y)
        for t in rng.uniform(0, 1, size=100):
            for m in path_estimates(fit, t).lambda_t_inv:
                assert is_positive_definite(m)

    def test_specified_case_midpoint_maximizes_tilted_loglik(self):
        # generic-optimizer oracle for the tilted fit at t = 0.5
        rng = np.random.default_rng(16)
        y = rng.standard_normal((14, 2)) * 1.2 + 0.3
        fit = fit_hypothesis(SpecifiedMeanCov(np.zeros(2), np.eye(2)), y)
        s = fit.summaries[0]
        t = 0.5
        target = s.second_moment * t + (1 - t) * np.eye(2)

        def tilted_neg(theta):
            xi = theta[:2]
            ell = np.array([[np.exp(theta[2]), 0.0], [theta[4], np.exp(theta[3])]])
            lam = ell @ ell.T
            val = (
                s.n * t * xi @ s.ybar
                - 0.5 * s.n * np.sum(lam * target)
                + 0.5 * s.n * np.linalg.slogdet(lam)[1]
                - 0.5 * s.n * xi @ np.linalg.solve(lam, xi)
            )
            return -val

        res = minimize(tilted_neg, np.zeros(5), method="Nelder-Mead",
                       options={"xatol": 1e-12, "fatol": 1e-12, "maxiter": 50000})
        ell = np.array([[np.exp(res.x[2]), 0.0], [res.x[4], np.exp(res.x[3])]])
        lam_opt = ell @ ell.T
        point = path_estimates(fit, t)
        np.testing.assert_allclose(np.linalg.inv(lam_opt), point.lambda_t_inv[0], atol=1e-6)
        mu_opt = np.linalg.solve(lam_opt, res.x[:2])
        np.testing.assert_allclose(mu_opt, point.mu_t[0], atol=1e-6)

    def test_outside_range_raises(self):
        rng = np.random.default_rng(17)
        y = rng.standard_normal((20, 3))
        fit = fit_hypothesis(ProportionalIdentity(), y)
        nu_min = fit.pencil_eigs[0][0]
        beyond = 1.0 / (1.0 - nu_min) * 1.01
        with pytest.raises(NotPositiveDefiniteError):
            path_estimates(fit, beyond)


class TestStandardize:
    def test_identity_transform(self):
        rng = np.random.default_rng(18)
        y = rng.standard_normal((10, 3))
        np.testing.assert_allclose(standardize(y, np.zeros(3), np.eye(3)), y, atol=1e-15)

    def test_scalar_case(self):
        # concentration 4 means standard deviation 1/2: y -> 2 (y - 2)
        y = np.array([[3.0], [1.0]])
        out = standardize(y, np.array([2.0]), np.array([[4.0]]))
        np.testing.assert_allclose(out, [[2.0], [-2.0]])

    def test_null_covariance_becomes_identity(self):
        rng = np.random.default_rng(19)
        cov = np.array([[2.0, 0.7, 0.0], [0.7, 1.0, -0.3], [0.0, -0.3, 0.5]])
        lam0 = np.linalg.inv(cov)
        mu0 = np.array([1.0, -2.0, 0.5])
        y = sample_mvn(mu0, cov, 100_000, seed=20)
        out = standardize(y, mu0, lam0)
        assert np.max(np.abs(np.cov(out, rowvar=False) - np.eye(3))) < 0.05
        assert np.max(np.abs(out.mean(axis=0))) < 0.02
