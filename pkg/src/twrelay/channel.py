"""Rayleigh channels, noise and the three training-phase signal models.

Convention: ``CN(0, s2)`` has variance ``s2 / 2`` on each of the real and
imaginary parts. Backward channels ``h_ir`` are ``N_i x 1`` columns, forward
channels ``h_ri`` are ``1 x N_i`` rows. The relay forwards its received
signal without amplification.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import SystemConfig
from .errors import DimensionError

__all__ = [
    "ChannelRealization",
    "ReceivedSignals",
    "complex_gaussian",
    "draw_channels",
    "stage1_receive",
    "stage2_receive",
]


def complex_gaussian(rng: np.random.Generator, shape, variance=1.0) -> np.ndarray:
    """I.i.d. circularly-symmetric complex Gaussian entries of the given variance."""
    scale = np.sqrt(np.asarray(variance, dtype=float) / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


@dataclass(frozen=True)
class ChannelRealization:
    """One draw of the backward (``h_1r``, ``h_2r``) and forward (``h_r1``, ``h_r2``) channels."""

    h_1r: np.ndarray
    h_2r: np.ndarray
    h_r1: np.ndarray
    h_r2: np.ndarray

    def backward(self, i: int) -> np.ndarray:
        """Backward channel to source ``i`` (1-based)."""
        return (self.h_1r, self.h_2r)[i - 1]

    @property
    def h_c(self) -> np.ndarray:
        """Stacked forward channel ``[h_r1, h_r2]``, shape ``1 x (N1+N2)``."""
        return np.hstack([self.h_r1, self.h_r2])


@dataclass(frozen=True)
class ReceivedSignals:
    """Stage-2 observations, optionally with the stage-1 ones.

    Tuples are indexed by source node (``[0]`` is node 1). Noise draws are
    kept so tests can check the signal equations exactly.
    """

    y_r: np.ndarray
    Y: tuple[np.ndarray, np.ndarray]
    v_r: np.ndarray
    V: tuple[np.ndarray, np.ndarray]
    Ytilde: tuple[np.ndarray, np.ndarray] | None = None
    Vtilde: tuple[np.ndarray, np.ndarray] | None = None


def draw_channels(config: SystemConfig, rng: np.random.Generator) -> ChannelRealization:
    N1, N2 = config.N
    return ChannelRealization(
        h_1r=complex_gaussian(rng, (N1, 1), config.sigma2_h_ir[0]),
        h_2r=complex_gaussian(rng, (N2, 1), config.sigma2_h_ir[1]),
        h_r1=complex_gaussian(rng, (1, N1), config.sigma2_h_ri[0]),
        h_r2=complex_gaussian(rng, (1, N2), config.sigma2_h_ri[1]),
    )


def stage1_receive(h_ir, p_R, sigma2_i, rng):
    """Relay broadcasts ``p_R``; source sees ``h_ir p_R + noise``.

    Returns
    -------
    Ytilde, Vtilde : ndarray, shape (N_i, Lr)
    """
    h_ir = np.asarray(h_ir)
    p_R = np.atleast_2d(p_R)
    if h_ir.ndim != 2 or h_ir.shape[1] != 1:
        raise DimensionError(f"h_ir must be N_i x 1, got {h_ir.shape}")
    if p_R.shape[0] != 1:
        raise DimensionError(f"p_R must be 1 x Lr, got {p_R.shape}")
    Vtilde = complex_gaussian(rng, (h_ir.shape[0], p_R.shape[1]), sigma2_i)
    return h_ir @ p_R + Vtilde, Vtilde


def stage2_receive(channels: ChannelRealization, P1, P2, config: SystemConfig, rng) -> ReceivedSignals:
    """Both sources transmit, the relay sums and echoes back unamplified.

    The same relay-noise draw ``v_r`` reaches both sources.
    """
    P1 = np.atleast_2d(P1)
    P2 = np.atleast_2d(P2)
    N1, N2 = config.N
    if P1.shape[0] != N1 or P2.shape[0] != N2 or P1.shape[1] != P2.shape[1]:
        raise DimensionError(f"training shapes {P1.shape}, {P2.shape} do not match N1={N1}, N2={N2}")
    L = P1.shape[1]
    v_r = complex_gaussian(rng, (1, L), config.sigma2_r)
    y_r = channels.h_r1 @ P1 + channels.h_r2 @ P2 + v_r
    Y, V = [], []
    for i, n in ((1, N1), (2, N2)):
        h_ir = channels.backward(i)
        V_i = complex_gaussian(rng, (n, L), config.sigma2_i[i - 1])
        Y.append(h_ir @ (channels.h_r1 @ P1) + h_ir @ (channels.h_r2 @ P2) + h_ir @ v_r + V_i)
        V.append(V_i)
    return ReceivedSignals(y_r=y_r, Y=tuple(Y), v_r=v_r, V=tuple(V))
