"""Representation learners and their shared subproblems."""

import numpy as np
import pytest

from polyrom.features import g_eval
from polyrom.learn import LearnConfig, learn_am, learn_pod, procrustes, solve_xi
from polyrom.manifold import PolynomialManifold, decode, relative_state_error
from polyrom.snapshot import CenteredSnapshots, svd_spectrum


def centered_from(data):
    s_ref = data.mean(axis=1)
    return CenteredSnapshots(centered=data - s_ref[:, None], s_ref=s_ref,
                             times=np.arange(data.shape[1], dtype=float))


def planted_manifold(n=20, r=2, q=2, p=2, k=200, seed=0, xi_scale=0.15):
    """Data lying exactly on a mildly curved manifold, plus its generator."""
    rng = np.random.default_rng(seed)
    basis, _ = np.linalg.qr(rng.normal(size=(n, r + q)))
    coords = rng.uniform(-1.0, 1.0, size=(r, k)) * np.array([[2.0], [1.0]])[:r]
    m = PolynomialManifold(
        s_ref=np.zeros(n),
        V=basis[:, :r],
        V_bar=basis[:, r:],
        Xi=xi_scale * rng.normal(size=(q, (p - 1) * r)),
        p=p,
    )
    return m, decode(m, coords), coords


class TestProcrustes:
    def test_exact_recovery(self):
        rng = np.random.default_rng(1)
        omega0, _ = np.linalg.qr(rng.normal(size=(12, 4)))
        C = rng.normal(size=(4, 30))
        omega, degenerate = procrustes(omega0 @ C, C)
        assert not degenerate
        np.testing.assert_allclose(omega, omega0, atol=1e-10)

    def test_identity_coefficients(self):
        rng = np.random.default_rng(2)
        omega0, _ = np.linalg.qr(rng.normal(size=(9, 3)))
        omega, _ = procrustes(omega0, np.eye(3))
        np.testing.assert_allclose(omega, omega0, atol=1e-12)

    def test_beats_random_orthonormal_samples(self):
        rng = np.random.default_rng(3)
        A = rng.normal(size=(20, 8))
        C = rng.normal(size=(3, 8))
        omega, _ = procrustes(A, C)
        best = np.linalg.norm(A - omega @ C)
        for _ in range(100):
            sample, _ = np.linalg.qr(rng.normal(size=(20, 3)))
            assert best <= np.linalg.norm(A - sample @ C) + 1e-12

    def test_orthonormal_output(self):
        rng = np.random.default_rng(4)
        omega, _ = procrustes(rng.normal(size=(15, 40)), rng.normal(size=(5, 40)))
        err = np.max(np.abs(omega.T @ omega - np.eye(5)))
        assert err <= 1e-10

    def test_degeneracy_flag(self):
        A = np.zeros((6, 4))
        C = np.ones((2, 4))
        _, degenerate = procrustes(A, C)
        assert degenerate


class TestSolveXi:
    def test_identity_features(self):
        rng = np.random.default_rng(5)
        basis, _ = np.linalg.qr(rng.normal(size=(10, 4)))
        V, V_bar = basis[:, :2], basis[:, 2:]
        # choose coordinates whose squared features form the identity
        S_hat = np.sqrt(np.eye(2))
        D = rng.normal(size=(2, 2))
        centered = V_bar @ D
        xi = solve_xi(V, V_bar, S_hat, centered, gamma=0.0, p=2)
        np.testing.assert_allclose(xi, D, atol=1e-12)

    def test_ridge_halves_identity_solution(self):
        rng = np.random.default_rng(6)
        basis, _ = np.linalg.qr(rng.normal(size=(10, 4)))
        V, V_bar = basis[:, :2], basis[:, 2:]
        S_hat = np.sqrt(np.eye(2))
        D = rng.normal(size=(2, 2))
        xi = solve_xi(V, V_bar, S_hat, V_bar @ D, gamma=1.0, p=2)
        np.testing.assert_allclose(xi, D / 2, atol=1e-12)

    def test_gradient_vanishes_at_solution(self):
        rng = np.random.default_rng(7)
        basis, _ = np.linalg.qr(rng.normal(size=(15, 5)))
        V, V_bar = basis[:, :2], basis[:, 2:]
        centered = rng.normal(size=(15, 40))
        S_hat = rng.normal(size=(2, 40))
        for gamma in (0.0, 0.3, 5.0):
            xi = solve_xi(V, V_bar, S_hat, centered, gamma=gamma, p=3)
            G = g_eval(S_hat, 3)
            D = V_bar.T @ centered
            grad = (xi @ G - D) @ G.T + gamma * xi
            assert np.linalg.norm(grad) <= 1e-8 * np.linalg.norm(D)

    def test_empty_for_linear_subspace(self):
        xi = solve_xi(np.eye(3)[:, :2], np.zeros((3, 0)), np.zeros((2, 4)),
                      np.zeros((3, 4)), gamma=0.0, p=3)
        assert xi.shape == (0, 4)


class TestPodLearner:
    def test_exact_linear_data(self):
        rng = np.random.default_rng(8)
        V0, _ = np.linalg.qr(rng.normal(size=(12, 2)))
        data = 5.0 + V0 @ rng.normal(size=(2, 40))
        cs = centered_from(data)
        m, S_hat = learn_pod(cs, LearnConfig(r=2, q=0, p=2))
        assert relative_state_error(m, S_hat, data) <= 1e-10

    def test_large_gamma_shrinks_coefficients(self):
        m0, data, _ = planted_manifold(seed=9)
        cs = centered_from(data)
        _, _ = m0, data
        m_free, _ = learn_pod(cs, LearnConfig(r=2, q=2, p=2, gamma=0.0))
        m_ridge, _ = learn_pod(cs, LearnConfig(r=2, q=2, p=2, gamma=1e12))
        assert np.linalg.norm(m_ridge.Xi) <= 1e-6 * np.linalg.norm(m_free.Xi)

    def test_rank_check(self):
        data = np.outer(np.arange(1.0, 5.0), np.arange(1.0, 7.0))
        data += np.arange(1.0, 5.0)[:, None]
        cs = centered_from(data)
        with pytest.raises(ValueError, match="insufficient data rank"):
            learn_pod(cs, LearnConfig(r=2, q=1, p=2))

    def test_dimension_budget(self):
        rng = np.random.default_rng(10)
        cs = centered_from(rng.normal(size=(3, 5)))
        with pytest.raises(ValueError, match="min"):
            learn_pod(cs, LearnConfig(r=3, q=1, p=2))

    def test_stiefel_invariant(self):
        rng = np.random.default_rng(11)
        cs = centered_from(rng.normal(size=(10, 30)))
        m, _ = learn_pod(cs, LearnConfig(r=3, q=4, p=3))
        assert m.orthonormality_error() <= 1e-10

    def test_q_zero_matches_classical_truncation(self):
        rng = np.random.default_rng(12)
        data = rng.normal(size=(9, 25))
        cs = centered_from(data)
        spec = svd_spectrum(cs)
        for r in (1, 3, 5):
            m, S_hat = learn_pod(cs, LearnConfig(r=r, q=0, p=2))
            err = relative_state_error(m, S_hat, data)
            assert err**2 == pytest.approx(1.0 - spec.energy_at(r), abs=1e-10)


class TestAlternatingLearner:
    def test_planted_manifold_recovery(self):
        # anchor the fit at the planted reference: with the column mean as
        # reference the planted surface is not exactly representable
        _, data, _ = planted_manifold(seed=2, xi_scale=0.1)
        cs = CenteredSnapshots(centered=data.copy(), s_ref=np.zeros(data.shape[0]),
                               times=np.arange(data.shape[1], dtype=float))
        cfg = LearnConfig(r=2, q=2, p=2, gamma=0.0, am_energy_tolerance=1e-13,
                          am_max_outer_iterations=500)
        m, S_hat, report = learn_am(cs, cfg)
        norm2 = np.linalg.norm(cs.centered) ** 2
        assert report.objective_history[-1] <= 1e-8 * norm2

    def test_zero_iterations_returns_init(self):
        rng = np.random.default_rng(14)
        cs = centered_from(rng.normal(size=(8, 20)))
        cfg = LearnConfig(r=2, q=1, p=2, am_max_outer_iterations=0)
        m0, S0 = learn_pod(cs, cfg)
        m, S_hat, report = learn_am(cs, cfg, init=(m0, S0))
        assert report.iterations == 0
        assert not report.converged
        np.testing.assert_array_equal(S_hat, S0)
        np.testing.assert_array_equal(m.V, m0.V)

    def test_objective_monotone(self):
        rng = np.random.default_rng(15)
        data = rng.normal(size=(10, 60))
        data[3:] *= 0.1
        cs = centered_from(data)
        cfg = LearnConfig(r=2, q=2, p=3, gamma=1e-3, am_energy_tolerance=1e-9,
                          am_max_outer_iterations=25)
        _, _, report = learn_am(cs, cfg)
        hist = np.asarray(report.objective_history)
        assert np.all(np.diff(hist) <= 1e-8 * hist[0])

    def test_one_iteration_never_hurts(self):
        _, data, _ = planted_manifold(seed=16, xi_scale=0.4)
        noisy = data + 0.02 * np.random.default_rng(17).normal(size=data.shape)
        cs = centered_from(noisy)
        cfg = LearnConfig(r=2, q=2, p=2, am_energy_tolerance=np.inf,
                          am_max_outer_iterations=1)
        m0, S0 = learn_pod(cs, cfg)
        base = relative_state_error(m0, S0, noisy)
        m, S_hat, _ = learn_am(cs, cfg, init=(m0, S0))
        assert relative_state_error(m, S_hat, noisy) <= base + 1e-10

    def test_stiefel_invariant(self):
        rng = np.random.default_rng(18)
        cs = centered_from(rng.normal(size=(9, 40)))
        cfg = LearnConfig(r=2, q=2, p=2, am_max_outer_iterations=5,
                          am_energy_tolerance=1e-9)
        m, _, _ = learn_am(cs, cfg)
        assert m.orthonormality_error() <= 1e-10

    def test_histories_align(self):
        rng = np.random.default_rng(19)
        cs = centered_from(rng.normal(size=(8, 30)))
        cfg = LearnConfig(r=2, q=1, p=2, am_max_outer_iterations=4,
                          am_energy_tolerance=1e-12)
        _, _, report = learn_am(cs, cfg)
        assert len(report.objective_history) == report.iterations + 1
        assert len(report.energy_history) == report.iterations + 1
