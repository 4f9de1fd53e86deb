import numpy as np
import pytest

from twrelay.errors import (
    DegenerateEstimateError,
    ModelViolationError,
    SingularTrainingError,
    TiedSingularValueWarning,
)
from twrelay.forward import (
    effective_noise_cov,
    effective_noise_model,
    entry_ls_baseline,
    forward_from_composite,
    ml_objective,
    noise_cov_B,
    noise_weight_eta,
    projector_omega,
    q_value,
    rank_one_objective,
    svd_ml_composite,
    weighting_Z,
)
from twrelay.training import build_training, uniform_allocation

from conftest import crandn, within_3se
from oracles import brute_force_rank_one, objective_at, weighted_objective


def dft_training(N1=4, N2=4, L=8, power=10.0):
    return build_training(uniform_allocation((power, power), (N1, N2)), L).P


# effective noise -----------------------------------------------------------

def test_effective_noise_perfect_stage1(rng):
    h = crandn(rng, 3, 1)
    P = crandn(rng, 4, 5)
    R = effective_noise_cov(P, np.zeros((3, 3)), h, (1.0, 2.0), 0.7, 1.3, 2)
    np.testing.assert_allclose(R, np.kron(np.eye(5), noise_cov_B(h, 0.7, 1.3)), atol=1e-14)


def test_effective_noise_without_training(rng):
    h, c = crandn(rng, 3, 1), 0.05
    R = effective_noise_cov(np.zeros((2, 4)), c * np.eye(3), h, (1.0, 1.0), 0.7, 1.3, 1)
    inner = 0.7 * h @ h.conj().T + 1.3 * np.eye(3) + 0.7 * c * np.eye(3)
    np.testing.assert_allclose(R, np.kron(np.eye(4), inner), atol=1e-14)


def test_effective_noise_monte_carlo(rng):
    # Draw dh, h_c, v_r, V_i around a fixed h_hat and compare covariances entrywise
    Ni, N1, N2, L = 2, 1, 1, 3
    s2r, s2i, s2hri, c = 0.8, 1.2, (1.0, 2.0), 0.3
    h_hat = crandn(rng, Ni, 1)
    P = crandn(rng, N1 + N2, L)
    C = c * np.eye(Ni)
    R = effective_noise_cov(P, C, h_hat, s2hri, s2r, s2i, N1)
    T = 10_000
    dh = crandn(rng, T, Ni, 1, variance=c)
    h_c = np.concatenate([crandn(rng, T, 1, N1, variance=s2hri[0]),
                          crandn(rng, T, 1, N2, variance=s2hri[1])], axis=2)
    v_r = crandn(rng, T, 1, L, variance=s2r)
    V = crandn(rng, T, Ni, L, variance=s2i)
    Vbar = h_hat[None] @ v_r - dh @ h_c @ P - dh @ v_r + V
    vecs = Vbar.transpose(0, 2, 1).reshape(T, -1)  # column-major vec per draw
    prods = vecs[:, :, None] * vecs[:, None, :].conj()
    for a in range(R.shape[0]):
        for b in range(R.shape[1]):
            assert within_3se(prods[:, a, b].real, R[a, b].real), (a, b)
            assert within_3se(prods[:, a, b].imag, R[a, b].imag), (a, b)
    # the dh v_r term adds variance; subtracting it is rejected by the same data
    minus = R - 2 * s2r * np.kron(np.eye(L), C)
    assert not all(within_3se(prods[:, a, a].real, minus[a, a].real) for a in range(R.shape[0]))


def test_effective_noise_indefinite_flagged(rng):
    with pytest.raises(ModelViolationError):
        effective_noise_cov(np.zeros((2, 3)), -10 * np.eye(2), crandn(rng, 2, 1), (1, 1), 1.0, 1.0, 1)


def test_effective_noise_approaches_B_with_relay_power(rng):
    h, P = crandn(rng, 4, 1), dft_training()
    ref = np.kron(np.eye(8), noise_cov_B(h, 1.0, 1.0))
    gaps = []
    for Pr in (10, 1e2, 1e4, 1e6):
        C = np.eye(4) / (1 + Pr)
        R = effective_noise_cov(P, C, h, (1.0, 1.0), 1.0, 1.0, 4)
        gaps.append(np.linalg.norm(R - ref) / np.linalg.norm(ref))
    assert all(a > b for a, b in zip(gaps, gaps[1:]))
    assert gaps[-1] < 1e-4


# eta, q --------------------------------------------------------------------

def test_eta_examples():
    h = np.array([[1.0], [0.0]])
    assert noise_weight_eta(h, 1.0, 1.0) == pytest.approx(0.5)
    assert noise_weight_eta(np.zeros((3, 1)), 1.0, 1.0) == 0.0


def test_sherman_morrison_identity(rng):
    for _ in range(20):
        h = crandn(rng, 4, 1)
        s2r, s2i = rng.uniform(0.2, 3, size=2)
        eta = noise_weight_eta(h, s2r, s2i)
        n2 = np.vdot(h, h).real
        Binv = (np.eye(4) - eta * h @ h.conj().T / n2) / s2i
        np.testing.assert_allclose(Binv @ noise_cov_B(h, s2r, s2i), np.eye(4), atol=1e-12)
        q_direct = (h.conj().T @ np.linalg.solve(noise_cov_B(h, s2r, s2i), h))[0, 0].real
        assert q_value(h, s2r, s2i) == pytest.approx(q_direct, rel=1e-12)
        m = effective_noise_model(h, s2r, s2i)
        assert 0 <= m.eta < 1 and m.q == pytest.approx(q_direct)


# Omega and Z ---------------------------------------------------------------

def test_omega_orthonormal_columns(rng):
    Q, _ = np.linalg.qr(crandn(rng, 6, 3))
    np.testing.assert_allclose(projector_omega(Q), Q @ Q.conj().T, atol=1e-12)


def test_omega_square_is_identity(rng):
    np.testing.assert_allclose(projector_omega(crandn(rng, 4, 4)), np.eye(4), atol=1e-10)


def test_omega_eigenvalues(rng):
    S = crandn(rng, 7, 3)
    omega = projector_omega(S)
    np.testing.assert_allclose(omega, omega.conj().T, atol=1e-12)
    np.testing.assert_allclose(omega @ omega, omega, atol=1e-12)
    w = np.linalg.eigvalsh(omega)
    np.testing.assert_allclose(w, [0] * 4 + [1] * 3, atol=1e-10)


def test_omega_rank_deficient(rng):
    S = crandn(rng, 5, 1) @ crandn(rng, 1, 2)
    with pytest.raises(SingularTrainingError):
        projector_omega(S)


def test_Z_limits_and_identity(rng):
    omega = projector_omega(crandn(rng, 6, 2))
    np.testing.assert_allclose(weighting_Z(omega, 1.0), np.eye(6), atol=1e-12)
    np.testing.assert_allclose(weighting_Z(omega, 0.0), omega)
    eta = 0.37
    Z = weighting_Z(omega, eta)
    np.testing.assert_allclose(Z.conj().T @ Z, eta * np.eye(6) + (1 - eta) * omega, atol=1e-12)
    s = np.sort(np.linalg.svd(Z, compute_uv=False))
    np.testing.assert_allclose(s, [np.sqrt(eta)] * 4 + [1, 1], atol=1e-10)


# SVD-ML --------------------------------------------------------------------

def test_svd_ml_noiseless_recovery(rng):
    for L in (8, 11):
        h, hc = crandn(rng, 4, 1), crandn(rng, 1, 8)
        P = crandn(rng, 8, L)
        est = svd_ml_composite(h @ hc @ P, P, eta=0.6)
        np.testing.assert_allclose(est.H_c_hat, h @ hc, atol=1e-10)


def test_svd_ml_projector_structure(rng):
    for _ in range(10):
        Y, P = crandn(rng, 3, 6), crandn(rng, 4, 6)
        est = svd_ml_composite(Y, P, eta=0.8)
        v = est.v1
        assert np.linalg.norm(v) == pytest.approx(1.0)
        np.testing.assert_allclose(np.outer(v.conj(), v) @ est.H_c_hat, est.H_c_hat, atol=1e-12)
        k = np.flatnonzero(np.abs(v) > 0)[0]
        assert abs(v[k].imag) < 1e-15 and v[k].real > 0
        assert est.sigma1 > 0 and not est.tied


def test_svd_ml_tie_flagged():
    with pytest.warns(TiedSingularValueWarning):
        est = svd_ml_composite(np.eye(2, dtype=complex), np.eye(2), eta=0.5)
    assert est.tied


def test_svd_ml_matches_brute_force_small(rng):
    for L in (2, 3):
        for _ in range(5):
            h, hc = crandn(rng, 2, 1), crandn(rng, 1, 2)
            P = crandn(rng, 2, L)
            Y = h @ hc @ P + h @ crandn(rng, 1, L) + crandn(rng, 2, L)
            eta = noise_weight_eta(h, 1.0, 1.0)
            est = svd_ml_composite(Y, P, eta)
            val = objective_at(Y, P, est.H_c_hat, eta)
            ref, _ = brute_force_rank_one(Y, P, eta)
            assert val == pytest.approx(rank_one_objective(Y, P, est.H_c_hat, eta), rel=1e-12)
            assert val <= ref * (1 + 1e-9)
            assert abs(val - ref) <= 1e-6 * abs(ref)


def test_svd_ml_beats_random_rank_one_candidates(rng):
    h, hc = crandn(rng, 2, 1), crandn(rng, 1, 2)
    P = crandn(rng, 2, 3)
    Y = h @ hc @ P + h @ crandn(rng, 1, 3) + crandn(rng, 2, 3)
    eta = noise_weight_eta(h, 1.0, 1.0)
    best = objective_at(Y, P, svd_ml_composite(Y, P, eta).H_c_hat, eta)
    n = 100_000
    f = crandn(rng, n, 2)
    g = crandn(rng, n, 2)
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    X, S = Y.T, P.T
    E = X[None] - (S @ f.T).T[:, :, None] * g[:, None, :]
    M = np.eye(2)[None] - eta * g.conj()[:, :, None] * g[:, None, :]
    vals = np.einsum("bli,blj,bji->b", E.conj(), E, M).real
    assert best <= vals.min() + 1e-12


def test_weighted_objective_oracle_agrees_with_library(rng):
    Y, P = crandn(rng, 2, 3), crandn(rng, 2, 3)
    H = crandn(rng, 2, 1) @ crandn(rng, 1, 2)
    g = np.linalg.svd(H)[0][:, 0]
    assert rank_one_objective(Y, P, H, 0.4) == pytest.approx(weighted_objective(Y.T, P.T, H.T, g, 0.4))


def test_ml_objective_examples(rng):
    h, hc = crandn(rng, 4, 1), crandn(rng, 1, 8)
    P = dft_training()
    assert ml_objective(h @ hc @ P, P, h, h @ hc, 1.0, 1.0) == pytest.approx(0.0, abs=1e-20)
    assert ml_objective(np.zeros((4, 8)), P, h, np.zeros((4, 8)), 1.0, 1.0) == 0.0


@pytest.mark.parametrize("L", [8, 10])
def test_svd_ml_dominates_truth(rng, L):
    N1 = N2 = 4
    P = build_training(uniform_allocation((10.0, 10.0), (N1, N2)), L).P
    for _ in range(1000):
        h, hc = crandn(rng, 4, 1), crandn(rng, 1, 8)
        Y = h @ hc @ P + h @ crandn(rng, 1, L) + crandn(rng, 4, L)
        eta = noise_weight_eta(h, 1.0, 1.0)
        H = svd_ml_composite(Y, P, eta).H_c_hat
        assert rank_one_objective(Y, P, H, eta) <= rank_one_objective(Y, P, h @ hc, eta) + 1e-9
        if L == N1 + N2:
            assert ml_objective(Y, P, h, H, 1.0, 1.0) <= ml_objective(Y, P, h, h @ hc, 1.0, 1.0) + 1e-9


# entry baseline and forward recovery ---------------------------------------

def test_entry_baseline_noiseless(rng):
    h, hc = crandn(rng, 4, 1), crandn(rng, 1, 8)
    P = crandn(rng, 8, 9)
    np.testing.assert_allclose(entry_ls_baseline(h @ hc @ P, P).H_c_hat, h @ hc, atol=1e-10)


def test_entry_baseline_orthogonal_training(rng):
    P = build_training(uniform_allocation((12.0, 8.0), (4, 4)), 8).P
    Y = crandn(rng, 4, 8)
    D = np.diag([3.0] * 4 + [2.0] * 4)
    np.testing.assert_allclose(entry_ls_baseline(Y, P).H_c_hat, Y @ P.conj().T @ np.linalg.inv(D), atol=1e-12)


def test_entry_baseline_singular_training(rng):
    P = np.zeros((2, 4))
    with pytest.raises(SingularTrainingError):
        entry_ls_baseline(crandn(rng, 3, 4), P)
    with pytest.raises(SingularTrainingError):
        svd_ml_composite(crandn(rng, 3, 4), P, 0.5)


def test_forward_exact(rng):
    h, hc = crandn(rng, 4, 1), crandn(rng, 1, 6)
    fwd = forward_from_composite(h @ hc, h, 2)
    np.testing.assert_allclose(fwd.h_c_hat, hc, atol=1e-12)
    np.testing.assert_array_equal(np.hstack([fwd.h_r1_hat, fwd.h_r2_hat]), fwd.h_c_hat)
    assert fwd.h_r1_hat.shape == (1, 2) and fwd.h_r2_hat.shape == (1, 4)


def test_forward_unit_vector(rng):
    H = crandn(rng, 3, 5)
    e1 = np.array([[1.0], [0.0], [0.0]])
    np.testing.assert_allclose(forward_from_composite(H, e1, 2).h_c_hat, H[:1])


def test_forward_is_least_squares(rng):
    H, h = crandn(rng, 4, 8), crandn(rng, 4, 1)
    z_hat = forward_from_composite(H, h, 4).h_c_hat
    best = np.linalg.norm(H - h @ z_hat)
    for _ in range(1000):
        z = z_hat + 0.3 * crandn(rng, 1, 8)
        assert best <= np.linalg.norm(H - h @ z)


def test_forward_degenerate(rng):
    with pytest.raises(DegenerateEstimateError):
        forward_from_composite(crandn(rng, 2, 2), np.zeros((2, 1)), 1)
