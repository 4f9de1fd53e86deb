"""Stage-2 training design by minimizing the Bayesian CRLB.

For source ``i`` the Fisher information on ``h_c`` is ``q_i P^* P^T`` and the
Gaussian prior adds ``diag(1 / sigma2_h_rk)``. With orthogonal, row-diagonal
training ``P_k = diag(sqrt(varsigma_k)) conj(Xi_k)`` the bound separates into

    J = sum_i sum_k sum_l 1 / (1/sigma2_{k,l} + q_i varsigma_{k,l}),

which is minimized per group under ``sum_l varsigma_{k,l} <= P_k`` by a
two-loop bisection on the KKT conditions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, SolverError

__all__ = [
    "PowerAllocation",
    "Stage2Training",
    "dft_unitary",
    "fim",
    "prior_information",
    "bim",
    "bcrlb_trace",
    "scalar_objective",
    "kkt_residuals",
    "solve_allocation",
    "uniform_allocation",
    "random_allocation",
    "build_training",
]


@dataclass(frozen=True)
class PowerAllocation:
    """Per-antenna training powers for both source groups.

    ``mu`` holds the budget multipliers found by the outer bisection; it is
    ``None`` for allocations that did not come from the solver.
    """

    varsigma: tuple[np.ndarray, np.ndarray]
    budgets: tuple[float, float]
    mu: tuple[float, float] | None = None

    @property
    def N(self) -> tuple[int, int]:
        return (self.varsigma[0].size, self.varsigma[1].size)

    @property
    def stacked(self) -> np.ndarray:
        return np.concatenate(self.varsigma)


@dataclass(frozen=True)
class Stage2Training:
    P1: np.ndarray
    P2: np.ndarray
    allocation: PowerAllocation
    U_F: np.ndarray

    @property
    def P(self) -> np.ndarray:
        """Stacked ``[P1; P2]``, shape ``(N1+N2) x L``."""
        return np.vstack([self.P1, self.P2])


def dft_unitary(n: int) -> np.ndarray:
    """Normalized DFT matrix, entry ``(p, q) = exp(-j 2 pi p q / n) / sqrt(n)``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    k = np.arange(n)
    return np.exp(-2j * np.pi * np.outer(k, k) / n) / np.sqrt(n)


def fim(P, q) -> np.ndarray:
    """Fisher information ``q P^* P^T`` on the stacked forward channel."""
    P = np.atleast_2d(P)
    F = q * (P.conj() @ P.T)
    return 0.5 * (F + F.conj().T)


def _inverse_variances(sigma2_h, N) -> tuple[np.ndarray, np.ndarray]:
    """Per-coordinate ``1 / sigma2`` for each group; scalars broadcast over the group."""
    out = []
    for s2, n in zip(sigma2_h, N):
        s2 = np.broadcast_to(np.asarray(s2, dtype=float), (n,)).copy()
        if np.any(s2 <= 0):
            raise ConfigError("prior variances must be positive")
        out.append(1.0 / s2)
    return tuple(out)


def prior_information(sigma2_h_r1, sigma2_h_r2, N1, N2) -> np.ndarray:
    """``blkdiag(I_N1 / sigma2_h_r1, I_N2 / sigma2_h_r2)``; per-antenna arrays are accepted."""
    a1, a2 = _inverse_variances((sigma2_h_r1, sigma2_h_r2), (N1, N2))
    return np.diag(np.concatenate([a1, a2]))


def bim(fim_matrix, prior) -> np.ndarray:
    return fim_matrix + prior


def bcrlb_trace(bim_matrix) -> float:
    """``Tr(BIM^{-1})`` via Cholesky; a non-positive-definite BIM raises LinAlgError."""
    C = np.linalg.cholesky(bim_matrix)
    Cinv = np.linalg.inv(C)
    return float(np.sum(np.abs(Cinv) ** 2))


def scalar_objective(varsigma, q, sigma2_h) -> float:
    """Sum of BCRLB traces over destinations for a diagonal allocation.

    Parameters
    ----------
    varsigma : PowerAllocation or pair of arrays
    q : sequence of float
        ``q_i`` of each destination.
    sigma2_h : pair
        Prior variances of ``h_r1`` and ``h_r2`` (scalars or per-antenna).
    """
    if isinstance(varsigma, PowerAllocation):
        varsigma = varsigma.varsigma
    varsigma = [np.asarray(v, dtype=float) for v in varsigma]
    a = _inverse_variances(sigma2_h, [v.size for v in varsigma])
    q = np.asarray(q, dtype=float)[:, None]
    return float(sum(np.sum(1.0 / (ak + q * vk)) for ak, vk in zip(a, varsigma)))


def _gradient(varsigma, a, q):
    """``sum_i q_i / (a + q_i varsigma)^2``, decreasing in varsigma."""
    return np.sum(q[:, None] / (a + q[:, None] * varsigma) ** 2, axis=0)


def kkt_residuals(allocation: PowerAllocation, q, sigma2_h):
    """Stationarity residuals per group.

    For active coordinates (``varsigma > 0``) the entry is
    ``|grad - mu_k|``; for inactive ones it is ``max(grad(0) - mu_k, 0)``,
    the violated part of the dual feasibility condition.
    """
    if allocation.mu is None:
        raise ValueError("allocation carries no multipliers")
    q = np.asarray(q, dtype=float)
    a = _inverse_variances(sigma2_h, allocation.N)
    out = []
    for vk, ak, mu in zip(allocation.varsigma, a, allocation.mu):
        g = _gradient(vk, ak, q)
        out.append(np.where(vk > 0, np.abs(g - mu), np.maximum(g - mu, 0.0)))
    return tuple(out)


def _grad_scalar(x, a, q):
    return sum(qi / (a + qi * x) ** 2 for qi in q)


def _inner(mu, a, q, budget, max_iter):
    """Solve ``grad(varsigma) = mu`` for each distinct prior on ``[0, budget]``.

    Clamped at 0 when even zero power has gradient below ``mu`` and at the
    budget when full power still has gradient above it. Plain floats: the
    vectors are tiny and this runs in the innermost loop.
    """
    out = []
    for ak in a:
        if _grad_scalar(0.0, ak, q) <= mu:
            out.append(0.0)
            continue
        if _grad_scalar(budget, ak, q) >= mu:
            out.append(budget)
            continue
        lo, hi = 0.0, budget
        for _ in range(max_iter):
            mid = 0.5 * (lo + hi)
            if hi - lo <= 1e-15 * budget or mid in (lo, hi):
                break
            if _grad_scalar(mid, ak, q) > mu:
                lo = mid
            else:
                hi = mid
        out.append(0.5 * (lo + hi))
    return np.array(out)


def _solve_group(q, a, budget, tol, max_iter):
    # identical coordinates share one solution; solve each distinct prior once
    a_u, inverse, counts = np.unique(a, return_inverse=True, return_counts=True)
    q_list = [float(v) for v in q]
    a_list = [float(v) for v in a_u]
    grad0 = [_grad_scalar(0.0, ak, q_list) for ak in a_list]
    gradP = [_grad_scalar(budget, ak, q_list) for ak in a_list]
    mu_lo, mu_hi = min(gradP), max(grad0)

    def multiplier(x):
        # an antenna clamped at the full budget leaves mu free over an
        # interval; report the value that makes its stationarity exact
        active = [_grad_scalar(xk, ak, q_list) for xk, ak in zip(x, a_list) if xk > 0]
        return float(np.mean(active))

    x = _inner(mu_lo, a_list, q_list, budget, max_iter)
    residual = float(np.dot(counts, x)) - budget
    if abs(residual) <= tol * budget:
        return x[inverse], multiplier(x)
    for _ in range(max_iter):
        # bracket spans decades, so split it geometrically
        mu = float(np.sqrt(mu_lo * mu_hi))
        x = _inner(mu, a_list, q_list, budget, max_iter)
        residual = float(np.dot(counts, x)) - budget
        if abs(residual) <= tol * budget:
            return x[inverse], multiplier(x)
        if residual > 0:
            mu_lo = mu
        else:
            mu_hi = mu
        if mu_hi - mu_lo <= 1e-15 * mu_hi:
            break
    raise SolverError(f"power bisection did not meet budget {budget} "
                      f"(last residual {residual:.3e})", residual=abs(residual))


def solve_allocation(q, sigma2_h, budgets, N, tol=1e-10, max_iter=200) -> PowerAllocation:
    """Minimize the summed BCRLB over per-antenna training powers.

    Outer bisection on each group's multiplier ``mu_k`` until the powers use
    the budget to relative accuracy ``tol``; inner bisection solves the
    stationarity condition for each antenna given ``mu_k``. Coordinates whose
    gradient at zero power is already below ``mu_k`` stay at zero.

    Parameters
    ----------
    q : sequence of float
        ``q_i > 0`` for each destination node.
    sigma2_h : pair
        Prior variances of the two forward channels, scalar per group or one
        value per antenna.
    budgets : pair of float
    N : pair of int
        Antennas per group.

    Raises
    ------
    SolverError
        If a budget is not met within ``max_iter`` outer iterations.
    """
    q = np.asarray(q, dtype=float)
    if q.ndim != 1 or q.size == 0 or np.any(q <= 0):
        raise ConfigError(f"q must be a non-empty vector of positive values, got {q}")
    if tol <= 0:
        raise ConfigError("tol must be positive")
    a = _inverse_variances(sigma2_h, N)
    varsigma, mus = [], []
    for ak, budget in zip(a, budgets):
        if budget <= 0:
            raise ConfigError(f"budgets must be positive, got {budgets}")
        x, mu = _solve_group(q, ak, float(budget), tol, max_iter)
        varsigma.append(x)
        mus.append(mu)
    return PowerAllocation(varsigma=tuple(varsigma), budgets=tuple(float(b) for b in budgets),
                           mu=tuple(mus))


def uniform_allocation(budgets, N) -> PowerAllocation:
    return PowerAllocation(
        varsigma=tuple(np.full(n, b / n) for b, n in zip(budgets, N)),
        budgets=tuple(float(b) for b in budgets),
    )


def random_allocation(budgets, N, rng: np.random.Generator) -> PowerAllocation:
    """Uniform draw on each group's simplex, scaled to spend the whole budget."""
    return PowerAllocation(
        varsigma=tuple(b * rng.dirichlet(np.ones(n)) for b, n in zip(budgets, N)),
        budgets=tuple(float(b) for b in budgets),
    )


def build_training(allocation: PowerAllocation, L: int) -> Stage2Training:
    """Orthogonal pilots ``P_k = diag(sqrt(varsigma_k)) conj(Xi_k)``, ``Xi = [U_F, 0]``."""
    N1, N2 = allocation.N
    n = N1 + N2
    if L < n:
        raise ConfigError(f"training length L={L} is shorter than N1 + N2 = {n}")
    U_F = dft_unitary(n)
    Xi = np.hstack([U_F, np.zeros((n, L - n))])
    root = np.sqrt(np.maximum(allocation.stacked, 0.0))
    P = root[:, None] * Xi.conj()
    return Stage2Training(P1=P[:N1], P2=P[N1:], allocation=allocation, U_F=U_F)
