"""Manifold decode/encode, representation metrics, and persistence."""

import numpy as np
import pytest

from polyrom.manifold import (EncodeSettings, PolynomialManifold, decode,
                              encode_columns, encode_linear, encode_nls,
                              energy_metric, load_model, relative_state_error,
                              save_model)
from polyrom.snapshot import CenteredSnapshots, svd_spectrum


def random_manifold(n=8, r=2, q=2, p=2, seed=0, xi_scale=0.3):
    rng = np.random.default_rng(seed)
    basis, _ = np.linalg.qr(rng.normal(size=(n, r + q)))
    return PolynomialManifold(
        s_ref=rng.normal(size=n),
        V=basis[:, :r],
        V_bar=basis[:, r:],
        Xi=xi_scale * rng.normal(size=(q, (p - 1) * r)),
        p=p,
    ), rng


class TestDecode:
    def test_zero_coordinates_give_reference(self):
        m, _ = random_manifold()
        np.testing.assert_array_equal(decode(m, np.zeros(m.r)), m.s_ref)

    def test_linear_degenerate_case(self):
        m, rng = random_manifold(q=0)
        s_hat = rng.normal(size=m.r)
        np.testing.assert_allclose(decode(m, s_hat), m.s_ref + m.V @ s_hat)

    def test_two_mode_cubic_expansion(self):
        # four coefficients weight (s1^2, s2^2, s1^3, s2^3) on one extra vector
        m, _ = random_manifold(n=6, r=2, q=1, p=3, seed=3)
        s_hat = np.array([0.4, -0.8])
        xi = m.Xi[0]
        expected = (m.s_ref + m.V @ s_hat
                    + m.V_bar[:, 0] * (xi[0] * s_hat[0]**2 + xi[1] * s_hat[1]**2
                                       + xi[2] * s_hat[0]**3 + xi[3] * s_hat[1]**3))
        np.testing.assert_allclose(decode(m, s_hat), expected, atol=1e-14)
        assert m.Xi.shape == (1, 4)

    def test_matrix_decode_matches_columns(self):
        m, rng = random_manifold(p=3)
        S_hat = rng.normal(size=(m.r, 5))
        out = decode(m, S_hat)
        for j in range(5):
            np.testing.assert_allclose(out[:, j], decode(m, S_hat[:, j]))


class TestEncodeLinear:
    def test_reference_maps_to_zero(self):
        m, _ = random_manifold()
        np.testing.assert_allclose(encode_linear(m, m.s_ref), 0.0, atol=1e-14)

    def test_basis_direction(self):
        m, _ = random_manifold()
        out = encode_linear(m, m.s_ref + m.V[:, 0])
        np.testing.assert_allclose(out, np.eye(m.r)[0], atol=1e-12)

    def test_secondary_space_invisible(self):
        m, _ = random_manifold()
        out = encode_linear(m, m.s_ref + 3.0 * m.V_bar[:, -1])
        np.testing.assert_allclose(out, 0.0, atol=1e-12)


class TestEncodeNls:
    def test_recovers_generating_coordinates(self):
        m, rng = random_manifold(seed=5)
        truth = rng.normal(size=m.r)
        s = decode(m, truth)
        res = encode_nls(m, s, EncodeSettings(initial_guess=truth))
        assert np.linalg.norm(res.s_hat - truth) <= 1e-6
        assert res.residual_norm <= 1e-8
        assert res.converged

    def test_linear_case_converges_immediately(self):
        m, rng = random_manifold(q=0)
        s = rng.normal(size=m.n)
        res = encode_nls(m, s)
        np.testing.assert_allclose(res.s_hat, encode_linear(m, s), atol=1e-12)
        assert res.iterations == 1

    def test_monotone_improvement(self):
        m, rng = random_manifold(n=12, q=3, p=3, seed=8, xi_scale=1.0)
        for _ in range(20):
            s = rng.normal(size=m.n)
            guess = rng.normal(size=m.r)
            res = encode_nls(m, s, EncodeSettings(initial_guess=guess))
            start = np.linalg.norm(s - decode(m, guess))
            assert res.residual_norm <= start + 1e-12

    def test_iteration_budget_flag(self):
        m, rng = random_manifold(n=12, q=3, p=3, seed=9, xi_scale=2.0)
        s = 5.0 * rng.normal(size=m.n)
        res = encode_nls(m, s, EncodeSettings(max_iterations=1,
                                              function_tolerance=1e-16))
        assert res.iterations == 1

    def test_beats_linear_reconstruction_on_average(self):
        m, rng = random_manifold(n=10, r=2, q=2, p=3, seed=11, xi_scale=0.5)
        S = decode(m, rng.normal(size=(m.r, 40))) + 0.05 * rng.normal(size=(m.n, 40))
        lin = encode_linear(m, S)
        lin_resid = np.linalg.norm(S - decode(m, lin), axis=0)
        S_hat = encode_columns(m, S)
        nls_resid = np.linalg.norm(S - decode(m, S_hat), axis=0)
        assert nls_resid.mean() < lin_resid.mean()
        assert np.all(nls_resid <= lin_resid + 1e-12)

    def test_beats_linear_on_toy_surface(self):
        from polyrom.fom import toy_snapshot_set
        from polyrom.learn import LearnConfig, learn_pod
        from polyrom.snapshot import center

        sset = toy_snapshot_set()
        cs = center(sset, "column_mean")
        m, _ = learn_pod(cs, LearnConfig(r=2, q=1, p=3))
        lin = encode_linear(m, sset.data)
        lin_resid = np.linalg.norm(sset.data - decode(m, lin), axis=0)
        S_hat = encode_columns(m, sset.data)
        nls_resid = np.linalg.norm(sset.data - decode(m, S_hat), axis=0)
        assert nls_resid.mean() < lin_resid.mean()


class TestMetrics:
    def test_exact_reconstruction_scores_zero(self):
        m, rng = random_manifold(seed=13)
        S_hat = rng.normal(size=(m.r, 9))
        S = decode(m, S_hat)
        assert relative_state_error(m, S_hat, S) <= 1e-12

    def test_reference_prediction_scores_one(self):
        m, rng = random_manifold(seed=14, xi_scale=0.0)
        S = m.s_ref[:, None] + rng.normal(size=(m.n, 6))
        err = relative_state_error(m, np.zeros((m.r, 6)), S)
        assert err == pytest.approx(1.0)

    def test_degenerate_data_rejected(self):
        m, _ = random_manifold()
        S = np.repeat(m.s_ref[:, None], 3, axis=1)
        with pytest.raises(ValueError, match="degenerate data"):
            relative_state_error(m, np.zeros((m.r, 3)), S)

    def test_signed_permutation_invariance(self):
        m, rng = random_manifold(n=9, r=3, q=2, p=2, seed=15)
        S_hat = rng.normal(size=(m.r, 12))
        S = decode(m, S_hat) + 0.1 * rng.normal(size=(m.n, 12))
        base = relative_state_error(m, S_hat, S)
        perm = rng.permutation(m.r)
        signs = rng.choice([-1.0, 1.0], size=m.r)
        # permute/flip basis columns with matching coordinate and Xi reindexing
        V2 = m.V[:, perm] * signs
        S_hat2 = S_hat[perm] * signs[:, None]
        Xi2 = np.hstack([m.Xi[:, (j - 2) * m.r:(j - 1) * m.r][:, perm] * signs**j
                         for j in range(2, m.p + 1)])
        m2 = PolynomialManifold(s_ref=m.s_ref, V=V2, V_bar=m.V_bar, Xi=Xi2, p=m.p)
        assert relative_state_error(m2, S_hat2, S) == pytest.approx(base, rel=1e-10)

    def test_energy_zero_for_zero_representation(self):
        m, rng = random_manifold(xi_scale=0.0)
        S = m.s_ref[:, None] + rng.normal(size=(m.n, 5))
        assert energy_metric(m, np.zeros((m.r, 5)), S) == 0.0

    def test_energy_matches_spectrum_for_linear_manifold(self):
        rng = np.random.default_rng(16)
        data = rng.normal(size=(7, 30))
        s_ref = data.mean(axis=1)
        centered = data - s_ref[:, None]
        U, _, _ = np.linalg.svd(centered, full_matrices=False)
        r = 3
        m = PolynomialManifold(s_ref=s_ref, V=U[:, :r], V_bar=np.zeros((7, 0)),
                               Xi=np.zeros((0, r)), p=2)
        S_hat = encode_linear(m, data)
        spec = svd_spectrum(CenteredSnapshots(centered=centered, s_ref=s_ref,
                                              times=np.arange(30.0)))
        assert energy_metric(m, S_hat, data) == pytest.approx(spec.energy_at(r), abs=1e-10)


class TestPersistence:
    def test_round_trip(self, tmp_path):
        m, _ = random_manifold(n=7, r=2, q=3, p=3, seed=17)
        path = tmp_path / "manifold.json"
        save_model(m, path)
        back = load_model(path)
        for a, b in [(m.s_ref, back.s_ref), (m.V, back.V),
                     (m.V_bar, back.V_bar), (m.Xi, back.Xi)]:
            assert a.tobytes() == b.tobytes()
        assert back.p == m.p

    def test_linear_subspace_round_trip(self, tmp_path):
        m, _ = random_manifold(q=0, seed=18)
        path = tmp_path / "linear.json"
        save_model(m, path)
        back = load_model(path)
        assert back.q == 0
        assert back.Xi.shape == (0, (m.p - 1) * m.r)

    def test_rejects_non_orthonormal_basis(self, tmp_path):
        m, _ = random_manifold(seed=19)
        skewed = PolynomialManifold(s_ref=m.s_ref, V=m.V + 1e-3, V_bar=m.V_bar,
                                    Xi=m.Xi, p=m.p)
        path = tmp_path / "bad.json"
        save_model(skewed, path)
        with pytest.raises(ValueError, match="non-orthonormal"):
            load_model(path)

    def test_warns_on_marginal_orthonormality(self, tmp_path):
        m, _ = random_manifold(seed=20)
        marginal = PolynomialManifold(s_ref=m.s_ref, V=m.V * (1 + 2e-8),
                                      V_bar=m.V_bar, Xi=m.Xi, p=m.p)
        path = tmp_path / "marginal.json"
        save_model(marginal, path)
        with pytest.warns(UserWarning, match="orthonormality"):
            load_model(path)

    def test_decode_encode_identity_on_subspace_data(self):
        m, rng = random_manifold(q=0, seed=21)
        coords = rng.normal(size=(m.r, 15))
        S = m.s_ref[:, None] + m.V @ coords
        back = encode_linear(m, S)
        assert np.max(np.abs(back - coords)) <= 1e-12 * max(1.0, np.max(np.abs(coords)))
