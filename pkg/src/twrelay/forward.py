"""Stage 2: SVD-ML estimation of the composite channel and forward recovery.

With the stage-1 estimate ``h_hat`` held fixed, source ``i`` observes

    Y_i = h_hat h_c P + Vbar_i,

where ``P = [P_1; P_2]`` stacks the source pilots ((N1+N2) x L) and
``h_c = [h_r1, h_r2]``. The composite channel ``H_c = h_hat h_c`` is rank
one. Its ML estimate works on the transposed observation ``X = Y_i^T`` with
``S = P^T`` and reduces to a dominant singular vector of ``Z X``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateEstimateError,
    DimensionError,
    ModelViolationError,
    SingularTrainingError,
    TiedSingularValueWarning,
)

__all__ = [
    "EffectiveNoiseModel",
    "CompositeEstimate",
    "ForwardEstimate",
    "effective_noise_cov",
    "effective_noise_model",
    "noise_cov_B",
    "noise_weight_eta",
    "q_value",
    "projector_omega",
    "weighting_Z",
    "svd_ml_composite",
    "entry_ls_baseline",
    "ml_objective",
    "rank_one_objective",
    "forward_from_composite",
]

_TIE_RTOL = 1e-12


@dataclass(frozen=True)
class EffectiveNoiseModel:
    """Large-relay-power noise model at one source.

    ``B`` is the per-column covariance ``sigma2_r h h^H + sigma2_i I``;
    ``eta`` and ``q`` are the scalars derived from it.
    """

    B: np.ndarray
    eta: float
    q: float
    R_vbar: np.ndarray | None = None


@dataclass(frozen=True)
class CompositeEstimate:
    """Estimate of ``H_c`` (``N_i x (N1+N2)``).

    ``v1``/``sigma1`` come from the SVD step and are ``None`` for the
    unstructured baseline. ``tied`` flags a repeated dominant singular value.
    """

    H_c_hat: np.ndarray
    v1: np.ndarray | None = None
    sigma1: float | None = None
    tied: bool = False


@dataclass(frozen=True)
class ForwardEstimate:
    h_c_hat: np.ndarray
    N1: int

    @property
    def h_r1_hat(self) -> np.ndarray:
        return self.h_c_hat[:, : self.N1]

    @property
    def h_r2_hat(self) -> np.ndarray:
        return self.h_c_hat[:, self.N1:]


def _norm2(x) -> float:
    return float(np.vdot(x, x).real)


def noise_cov_B(h_hat, sigma2_r, sigma2_i) -> np.ndarray:
    h_hat = np.asarray(h_hat).reshape(-1, 1)
    return sigma2_r * (h_hat @ h_hat.conj().T) + sigma2_i * np.eye(h_hat.shape[0])


def noise_weight_eta(h_hat, sigma2_r, sigma2_i) -> float:
    """Weight ``eta`` with ``B^{-1} = (I - eta h h^H / ||h||^2) / sigma2_i``."""
    snr = sigma2_r * _norm2(h_hat) / sigma2_i
    return snr / (1.0 + snr)


def q_value(h_hat, sigma2_r, sigma2_i) -> float:
    """``h^H B^{-1} h`` in closed form (Sherman-Morrison)."""
    n2 = _norm2(h_hat)
    return n2 / (sigma2_i + sigma2_r * n2)


def effective_noise_model(h_hat, sigma2_r, sigma2_i) -> EffectiveNoiseModel:
    return EffectiveNoiseModel(
        B=noise_cov_B(h_hat, sigma2_r, sigma2_i),
        eta=noise_weight_eta(h_hat, sigma2_r, sigma2_i),
        q=q_value(h_hat, sigma2_r, sigma2_i),
    )


def effective_noise_cov(P, C_dh, h_hat, sigma2_h_ri, sigma2_r, sigma2_i, N1) -> np.ndarray:
    """Covariance of ``vec(Vbar_i)`` given ``h_hat``, shape ``(N_i L, N_i L)``.

    ``Vbar_i = h_hat v_r - dh h_c P - dh v_r + V_i`` with the stage-1 error
    ``dh ~ CN(0, C_dh)`` independent of ``v_r``, ``h_c`` and ``V_i``. The
    ``dh v_r`` term contributes ``+ sigma2_r C_dh``.

    Parameters
    ----------
    P : ndarray, shape (N1+N2, L)
        Stacked source pilots.
    sigma2_h_ri : pair of float
        Prior variances of ``h_r1`` and ``h_r2``.
    N1 : int
        Number of rows of ``P`` belonging to source 1.
    """
    P = np.atleast_2d(P)
    C_dh = np.asarray(C_dh)
    h_hat = np.asarray(h_hat).reshape(-1, 1)
    L = P.shape[1]
    train = sum(var * (Pk.T @ Pk.conj()) for var, Pk in zip(sigma2_h_ri, (P[:N1], P[N1:])))
    inner = noise_cov_B(h_hat, sigma2_r, sigma2_i) + sigma2_r * C_dh
    R = np.kron(train, C_dh) + np.kron(np.eye(L), inner)
    R = 0.5 * (R + R.conj().T)
    lam_min = np.linalg.eigvalsh(R)[0]
    if lam_min < -1e-10 * max(1.0, np.abs(R).max()):
        raise ModelViolationError(f"effective noise covariance is indefinite (min eigenvalue {lam_min:.3e})")
    return R


def projector_omega(S) -> np.ndarray:
    """Orthogonal projector onto the column space of ``S`` (``L x n``, ``L >= n``)."""
    S = np.atleast_2d(S)
    L, n = S.shape
    if L < n or np.linalg.matrix_rank(S) < n:
        raise SingularTrainingError(f"training of shape {S.shape} does not have full column rank")
    G = S.conj().T @ S
    omega = S @ np.linalg.solve(G, S.conj().T)
    return 0.5 * (omega + omega.conj().T)


def weighting_Z(omega, eta) -> np.ndarray:
    """``Omega + sqrt(eta) (I - Omega)``."""
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"eta must lie in [0, 1], got {eta}")
    eye = np.eye(omega.shape[0])
    return omega + np.sqrt(eta) * (eye - omega)


def _check_training(P):
    P = np.atleast_2d(P)
    n, L = P.shape
    if L < n or np.linalg.matrix_rank(P) < n:
        raise SingularTrainingError(f"training of shape {P.shape} does not have full row rank")
    return P


def _ls_fit(Y, P) -> np.ndarray:
    """``Y P^H (P P^H)^{-1}``."""
    return np.linalg.solve(P @ P.conj().T, P @ Y.conj().T).conj().T


def _fix_phase(v) -> np.ndarray:
    k = np.flatnonzero(np.abs(v) > 1e-300)
    if k.size:
        v = v * (abs(v[k[0]]) / v[k[0]])
    return v


def svd_ml_composite(Y_i, P, eta) -> CompositeEstimate:
    """Rank-one ML estimate ``H_c = v1^* v1^T Y_i P^H (P P^H)^{-1}``.

    ``v1`` is the dominant right singular vector of ``Z X`` with ``X = Y_i^T``
    and ``Z`` built from ``S = P^T``. Its phase is fixed so the first nonzero
    entry is real and positive.
    """
    Y_i = np.atleast_2d(Y_i)
    P = _check_training(P)
    if Y_i.shape[1] != P.shape[1]:
        raise DimensionError(f"Y_i has {Y_i.shape[1]} columns, P has {P.shape[1]}")
    X = Y_i.T
    Z = weighting_Z(projector_omega(P.T), eta)
    _, s, Vh = np.linalg.svd(Z @ X)
    tied = s.size > 1 and s[1] >= s[0] * (1.0 - _TIE_RTOL) and s[0] > 0
    if tied:
        warnings.warn("dominant singular value is repeated; using the first singular vector",
                      TiedSingularValueWarning, stacklevel=2)
    v1 = _fix_phase(Vh[0].conj())
    H = np.outer(v1.conj(), v1) @ _ls_fit(Y_i, P)
    return CompositeEstimate(H_c_hat=H, v1=v1, sigma1=float(s[0]), tied=bool(tied))


def entry_ls_baseline(Y_i, P) -> CompositeEstimate:
    """Unstructured least squares ``Y_i P^H (P P^H)^{-1}``; no rank constraint."""
    P = _check_training(P)
    return CompositeEstimate(H_c_hat=_ls_fit(np.atleast_2d(Y_i), P))


def ml_objective(Y_i, P, h_hat, H_c, sigma2_r, sigma2_i) -> float:
    """Negative log-likelihood kernel ``Tr(A A^H B^{-1})``, ``A = Y_i - H_c P``."""
    A = np.atleast_2d(Y_i) - H_c @ P
    B = noise_cov_B(h_hat, sigma2_r, sigma2_i)
    return float(np.trace(A @ A.conj().T @ np.linalg.inv(B)).real)


def rank_one_objective(Y_i, P, H_c, eta) -> float:
    """Weighted objective minimized by :func:`svd_ml_composite`.

    In transposed form ``Tr[(X - S F)^H (X - S F) (I - eta g^H g)]`` with
    ``X = Y_i^T``, ``S = P^T``, ``F = H_c^T`` and ``g`` the unit row spanning
    the rows of ``F``. The weighting follows the candidate's own direction.
    """
    X = np.atleast_2d(Y_i).T
    F = np.asarray(H_c).T
    E = X - P.T @ F
    U, s, _ = np.linalg.svd(np.asarray(H_c))
    M = np.eye(X.shape[1], dtype=complex)
    if s[0] > 0:
        g = U[:, 0]
        M -= eta * np.outer(g.conj(), g)
    return float(np.trace(E.conj().T @ E @ M).real)


def forward_from_composite(H_c_hat, h_hat, N1) -> ForwardEstimate:
    """Least-squares split ``h_c = h_hat^H H_c / ||h_hat||^2``."""
    h_hat = np.asarray(h_hat).reshape(-1, 1)
    n2 = _norm2(h_hat)
    if np.sqrt(n2) < 1e-12:
        raise DegenerateEstimateError("backward estimate is numerically zero")
    return ForwardEstimate(h_c_hat=(h_hat.conj().T @ H_c_hat) / n2, N1=int(N1))
