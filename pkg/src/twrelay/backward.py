"""Stage 1: LMMSE estimation of the backward channel ``h_ir``.

The observation ``Ytilde = h_ir p_R + noise`` is vectorized column-major, so
``vec(Ytilde) = (p_R^T kron I) h_ir + vec(noise)``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateTrainingWarning, DimensionError

__all__ = [
    "Stage1Training",
    "BackwardEstimate",
    "vec",
    "lmmse_gain",
    "estimate_backward",
    "error_covariance",
    "lmmse_backward",
    "optimal_stage1_training",
    "nonoptimal_stage1_training",
]


def vec(A) -> np.ndarray:
    """Column-major vectorization, returned as a column."""
    return np.asarray(A).reshape(-1, 1, order="F")


@dataclass(frozen=True)
class Stage1Training:
    p_R: np.ndarray
    power: float

    @classmethod
    def from_vector(cls, p_R) -> "Stage1Training":
        p_R = np.atleast_2d(np.asarray(p_R, dtype=complex))
        return cls(p_R=p_R, power=float(np.linalg.norm(p_R) ** 2))


@dataclass(frozen=True)
class BackwardEstimate:
    """LMMSE estimate with its error covariance ``E[dh dh^H]``, ``dh = h_hat - h``."""

    h_hat: np.ndarray
    err_cov: np.ndarray
    per_entry_err_var: float


def _training_power(p_R) -> float:
    return float(np.vdot(p_R, p_R).real)


def lmmse_gain(p_R, sigma2_h, sigma2_i, N_i) -> np.ndarray:
    """LMMSE matrix ``G`` such that ``h_hat = G^H vec(Ytilde)``.

    Returns
    -------
    G : ndarray, shape (N_i * Lr, N_i)
    """
    p_R = np.atleast_2d(np.asarray(p_R, dtype=complex))
    if p_R.shape[0] != 1:
        raise DimensionError(f"p_R must be 1 x Lr, got {p_R.shape}")
    if _training_power(p_R) == 0.0:
        warnings.warn("zero stage-1 training: estimate reduces to the prior mean",
                      DegenerateTrainingWarning, stacklevel=2)
    eye = np.eye(N_i)
    Lr = p_R.shape[1]
    R_hy = sigma2_h * np.kron(p_R.conj(), eye)
    R_y = sigma2_h * np.kron(p_R.T @ p_R.conj(), eye) + sigma2_i * np.eye(N_i * Lr)
    # G^H = R_hy R_y^{-1}  <=>  G = R_y^{-1} R_hy^H  (R_y Hermitian)
    return np.linalg.solve(R_y, R_hy.conj().T)


def estimate_backward(Ytilde, G) -> np.ndarray:
    y = vec(Ytilde)
    if G.shape[0] != y.shape[0]:
        raise DimensionError(f"gain has {G.shape[0]} rows, observation has {y.shape[0]} entries")
    return G.conj().T @ y


def error_covariance(p_R, sigma2_h, sigma2_i, N_i) -> np.ndarray:
    """``(1/sigma2_h + ||p_R||^2 / sigma2_i)^{-1} I``; depends on ``p_R`` only through its energy."""
    var = 1.0 / (1.0 / sigma2_h + _training_power(p_R) / sigma2_i)
    return var * np.eye(N_i, dtype=complex)


def lmmse_backward(Ytilde, p_R, sigma2_h, sigma2_i) -> BackwardEstimate:
    N_i = np.shape(Ytilde)[0]
    G = lmmse_gain(p_R, sigma2_h, sigma2_i, N_i)
    C = error_covariance(p_R, sigma2_h, sigma2_i, N_i)
    return BackwardEstimate(h_hat=estimate_backward(Ytilde, G), err_cov=C,
                            per_entry_err_var=float(C[0, 0].real))


def optimal_stage1_training(Pr, Lr) -> Stage1Training:
    """Full relay power on the first symbol: ``p_R = sqrt(Pr) [u_r, 0, ..., 0]``.

    The error covariance falls monotonically with ``||p_R||^2``, so any
    direction at full power is optimal; ``u_r = exp(-j 2 pi) = 1``.
    """
    p_R = np.zeros((1, Lr), dtype=complex)
    p_R[0, 0] = np.sqrt(Pr)
    return Stage1Training(p_R=p_R, power=float(Pr))


def nonoptimal_stage1_training(Pr, Lr, fraction=0.8) -> Stage1Training:
    """Optimal direction, but only ``fraction * Pr`` of the budget."""
    return optimal_stage1_training(fraction * Pr, Lr)
