import itertools

import numpy as np
import pytest

from eegfactor import (
    ArgumentError,
    CpdOptions,
    FactorSet,
    SynthSpec,
    Tensor3,
    cpd_als,
    cpd_gn,
    factor_match_score,
    make_tensor,
    relative_error,
)


def truth_init(truth):
    w3 = truth.weights ** (1.0 / 3.0)
    return (truth.A * w3, truth.B * w3, truth.C * w3)


class TestOptions:
    def test_zero_rank_rejected(self):
        with pytest.raises(ArgumentError):
            CpdOptions(rank=0)

    def test_bad_tol(self):
        with pytest.raises(ArgumentError):
            CpdOptions(rank=1, tol=0.0)

    def test_bad_solver(self):
        with pytest.raises(ArgumentError):
            CpdOptions(rank=1, solver="NEWTON")

    def test_rank_cap(self, planted_small):
        t, _ = planted_small
        cap = min(19 * 89, 40 * 89, 40 * 19)
        with pytest.raises(ArgumentError):
            cpd_als(t, CpdOptions(rank=cap + 1, n_starts=1, max_iters=2))

    def test_zero_tensor_rejected(self):
        with pytest.raises(ArgumentError):
            cpd_als(Tensor3(np.zeros((3, 3, 3))), CpdOptions(rank=1))


class TestAls:
    def test_planted_noiseless_recovery(self, planted_small, tight_opts):
        t, truth = planted_small
        res = cpd_als(t, tight_opts)
        assert res.rel_error < 1e-6
        assert factor_match_score(res.factors, truth) > 0.99

    def test_rank1_exact_in_three_iterations(self):
        t, truth = make_tensor(SynthSpec(dims=(8, 6, 7), rank=1, seed=3))
        res = cpd_als(t, CpdOptions(rank=1, n_starts=1, seed=5))
        assert res.rel_error < 1e-10
        assert res.iterations <= 3

    def test_trace_non_increasing(self, planted_noisy):
        t, _ = planted_noisy
        res = cpd_als(t, CpdOptions(rank=3, n_starts=2, tol=1e-12, max_iters=200, seed=1))
        trace = np.array(res.trace)
        assert np.all(np.diff(trace) <= 1e-12)

    def test_seeded_determinism(self, planted_noisy):
        t, _ = planted_noisy
        opts = CpdOptions(rank=2, n_starts=2, max_iters=60, seed=9)
        r1, r2 = cpd_als(t, opts), cpd_als(t, opts)
        assert r1.trace == r2.trace
        np.testing.assert_array_equal(r1.factors.A, r2.factors.A)
        np.testing.assert_array_equal(r1.factors.weights, r2.factors.weights)
        assert r1.start_index == r2.start_index

    def test_normalized_output(self, planted_small, tight_opts):
        t, _ = planted_small
        fs = cpd_als(t, tight_opts).factors
        np.testing.assert_allclose(np.linalg.norm(fs.A, axis=0), 1.0, rtol=1e-10)
        assert np.all(np.diff(fs.weights) <= 0)

    def test_degenerate_gramian_regularized_and_flagged(self):
        # a zero factor column makes the mode-0 Gramian singular on sweep one
        t, truth = make_tensor(SynthSpec(dims=(8, 6, 7), rank=1, seed=13))
        rng = np.random.default_rng(0)
        init = (
            np.column_stack([rng.uniform(0, 1, 8), np.zeros(8)]),
            np.column_stack([rng.uniform(0, 1, 6), np.zeros(6)]),
            np.column_stack([rng.uniform(0, 1, 7), np.zeros(7)]),
        )
        res = cpd_als(t, CpdOptions(rank=2, n_starts=1, max_iters=30, seed=0), init=init)
        assert res.gram_regularized
        assert np.all(np.isfinite(res.factors.A))
        assert res.rel_error < 1e-8  # the live component still fits the rank-1 data


class TestGaussNewton:
    def test_planted_noiseless_recovery(self, planted_small, tight_opts):
        t, truth = planted_small
        res = cpd_gn(t, tight_opts)
        assert res.rel_error < 1e-6
        assert factor_match_score(res.factors, truth) > 0.99

    def test_agrees_with_als(self, planted_small, tight_opts):
        t, _ = planted_small
        fit_als = cpd_als(t, tight_opts).fit
        fit_gn = cpd_gn(t, tight_opts).fit
        assert abs(fit_als - fit_gn) < 1e-4

    def test_stationary_start_returns_immediately(self, planted_small):
        t, truth = planted_small
        res = cpd_gn(t, CpdOptions(rank=3, seed=1), init=truth_init(truth))
        assert res.converged
        assert res.iterations == 0
        assert res.rel_error < 1e-10

    def test_noisy_fit_beats_planted_factors(self, planted_noisy):
        t, truth = planted_noisy
        res = cpd_gn(t, CpdOptions(rank=3, n_starts=3, tol=1e-12, max_iters=150, seed=2))
        planted_fit = 1.0 - relative_error(t, truth) ** 2
        assert res.fit >= planted_fit

    def test_accepted_steps_non_increasing(self, planted_noisy):
        t, _ = planted_noisy
        res = cpd_gn(t, CpdOptions(rank=3, n_starts=2, tol=1e-12, max_iters=100, seed=4))
        trace = np.array(res.trace)
        assert np.all(np.diff(trace) <= 0.0)

    def test_seeded_determinism(self, planted_noisy):
        t, _ = planted_noisy
        opts = CpdOptions(rank=2, n_starts=2, max_iters=40, seed=11)
        r1, r2 = cpd_gn(t, opts), cpd_gn(t, opts)
        assert r1.trace == r2.trace
        np.testing.assert_array_equal(r1.factors.A, r2.factors.A)

    def test_cg_path_matches_direct(self):
        # force N > 2000 so the inner solver runs conjugate gradients
        t, truth = make_tensor(SynthSpec(dims=(700, 19, 89), rank=3, seed=21))
        assert 3 * (700 + 19 + 89) > 2000
        res = cpd_gn(t, CpdOptions(rank=3, n_starts=2, tol=1e-14, max_iters=60, seed=3))
        assert res.rel_error < 1e-6
        assert factor_match_score(res.factors, truth) > 0.99


class TestHessianPieces:
    def test_matvec_matches_assembled_matrix(self):
        from eegfactor.cpd import _assemble_hessian, _gn_matvec

        rng = np.random.default_rng(6)
        E, S, F, r = 4, 3, 5, 2
        A, B, C = rng.standard_normal((E, r)), rng.standard_normal((S, r)), rng.standard_normal((F, r))
        ZA, ZB, ZC = A.T @ A, B.T @ B, C.T @ C
        GA, GB, GC = ZB * ZC, ZA * ZC, ZA * ZB
        mu = 0.37
        H = _assemble_hessian(A, B, C, ZA, ZB, ZC, GA, GB, GC, mu)
        np.testing.assert_allclose(H, H.T, atol=1e-12)
        for _ in range(5):
            v = rng.standard_normal(r * (E + S + F))
            np.testing.assert_allclose(
                _gn_matvec(v, A, B, C, ZA, ZB, ZC, GA, GB, GC, mu), H @ v, rtol=1e-10, atol=1e-10
            )

    def test_hessian_matches_finite_differences(self):
        # JtJ of the residual map equals the Gauss-Newton term of the true
        # Hessian; verify J^T J v against finite differences of the gradient
        # for a quadratic-in-each-factor model at a random point
        rng = np.random.default_rng(7)
        E, S, F, r = 3, 4, 2, 2
        X = rng.standard_normal((E, S, F))
        A, B, C = rng.standard_normal((E, r)), rng.standard_normal((S, r)), rng.standard_normal((F, r))

        def residual(theta):
            a = theta[: E * r].reshape(E, r)
            b = theta[E * r : E * r + S * r].reshape(S, r)
            c = theta[E * r + S * r :].reshape(F, r)
            return (np.einsum("er,sr,fr->esf", a, b, c) - X).ravel()

        theta0 = np.concatenate([A.ravel(), B.ravel(), C.ravel()])
        n = len(theta0)
        J = np.empty((E * S * F, n))
        h = 1e-6
        for i in range(n):
            up, dn = theta0.copy(), theta0.copy()
            up[i] += h
            dn[i] -= h
            J[:, i] = (residual(up) - residual(dn)) / (2 * h)
        from eegfactor.cpd import _assemble_hessian

        ZA, ZB, ZC = A.T @ A, B.T @ B, C.T @ C
        H = _assemble_hessian(A, B, C, ZA, ZB, ZC, ZB * ZC, ZA * ZC, ZA * ZB, 0.0)
        np.testing.assert_allclose(H, J.T @ J, rtol=1e-6, atol=1e-6)


class TestFactorMatchScore:
    def test_identical_sets(self, planted_small):
        _, truth = planted_small
        assert factor_match_score(truth, truth) == pytest.approx(1.0, abs=1e-12)

    def test_orthogonal_columns_near_zero(self):
        a = FactorSet(2, np.eye(4)[:, :2], np.eye(4)[:, :2], np.eye(4)[:, :2], np.ones(2))
        b = FactorSet(2, np.eye(4)[:, 2:], np.eye(4)[:, 2:], np.eye(4)[:, 2:], np.ones(2))
        assert factor_match_score(a, b) < 1e-12

    def test_rank_mismatch(self, planted_small):
        _, truth = planted_small
        other = FactorSet(2, truth.A[:, :2], truth.B[:, :2], truth.C[:, :2], truth.weights[:2])
        with pytest.raises(ArgumentError):
            factor_match_score(truth, other)

    def test_two_independent_runs_agree(self, planted_small):
        t, _ = planted_small
        r1 = cpd_als(t, CpdOptions(rank=3, n_starts=2, tol=1e-13, max_iters=300, seed=100))
        r2 = cpd_als(t, CpdOptions(rank=3, n_starts=2, tol=1e-13, max_iters=300, seed=200))
        assert factor_match_score(r1.factors, r2.factors) > 0.99

    def test_permutation_and_sign_invariance(self, planted_small):
        _, truth = planted_small
        perm = [2, 0, 1]
        flipped = FactorSet(
            3,
            -truth.A[:, perm],
            truth.B[:, perm],
            -truth.C[:, perm],
            truth.weights[perm],
        )
        assert factor_match_score(truth, flipped) == pytest.approx(1.0, abs=1e-12)

    def test_assignment_matches_exhaustive(self):
        rng = np.random.default_rng(8)
        dims, r = (5, 6, 7), 4
        a = FactorSet(r, *(rng.standard_normal((d, r)) for d in dims), np.ones(r))
        b = FactorSet(r, *(rng.standard_normal((d, r)) for d in dims), np.ones(r))
        from eegfactor.cpd import _abs_cosines

        P = _abs_cosines(a.A, b.A) * _abs_cosines(a.B, b.B) * _abs_cosines(a.C, b.C)
        brute = max(
            sum(P[i, p[i]] for i in range(r)) / r for p in itertools.permutations(range(r))
        )
        assert factor_match_score(a, b) == pytest.approx(brute, abs=1e-12)
