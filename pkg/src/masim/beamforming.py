"""Transmit beamforming for fixed antenna positions.

``solve_p2`` finds the minimum-power beamformers meeting every user's SINR
target as one second-order cone program. ``mrt_beamforming`` is the
baseline: matched-filter directions with the powers from ``power_control``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from . import socp
from .channel import ChannelState
from .socp import Status

logger = logging.getLogger(__name__)


class InfeasibleError(ValueError):
    """The SINR targets cannot be met."""


@dataclass
class BeamformingSolution:
    """Beamformers ``W[j]`` (sqrt-watt amplitudes) with their SINRs and power."""

    W: np.ndarray | None
    total_power: float
    sinr: np.ndarray | None
    status: Status

    @property
    def ok(self) -> bool:
        return self.status is Status.OPTIMAL

    @classmethod
    def failed(cls, status: Status) -> "BeamformingSolution":
        return cls(None, np.inf, None, status)


def link_gains(ch: ChannelState, W) -> np.ndarray:
    """``G[k, j] = |h_kj^H w_j|^2`` for all user/transmitter pairs."""
    inner = np.einsum("kjn,jn->kj", ch.H.conj(), np.asarray(W, dtype=complex))
    return np.abs(inner) ** 2


def sinr(ch: ChannelState, W, sigma2) -> np.ndarray:
    G = link_gains(ch, W)
    signal = np.diag(G)
    interference = G.sum(axis=1) - signal
    return signal / (interference + np.asarray(sigma2, dtype=float))


def _from_weights(ch: ChannelState, W, sigma2) -> BeamformingSolution:
    W = np.asarray(W, dtype=complex)
    return BeamformingSolution(W, float(np.sum(np.abs(W) ** 2)), sinr(ch, W, sigma2), Status.OPTIMAL)


def mrt_directions(ch: ChannelState) -> np.ndarray:
    direct = ch.H[np.arange(ch.K), np.arange(ch.K)]  # (K, N): h_jj
    norms = np.linalg.norm(direct, axis=1)
    if np.any(norms == 0):
        raise ValueError("MRT is undefined for a zero direct channel")
    return direct / norms[:, None]


def interference_matrix(G, gamma) -> np.ndarray:
    """``diag(gamma / G_kk) F`` with ``F`` the off-diagonal part of ``G``."""
    G = np.asarray(G, dtype=float)
    F = G - np.diag(np.diag(G))
    return (np.asarray(gamma, dtype=float) / np.diag(G))[:, None] * F


def power_control(G, gamma, sigma2) -> np.ndarray:
    """Minimal powers meeting every SINR target with equality for fixed directions.

    ``G[k, j]`` is the gain from transmitter ``j``'s unit-norm beam to user
    ``k``. Raises :class:`InfeasibleError` when no positive solution exists,
    i.e. when the spectral radius of ``interference_matrix(G, gamma)``
    reaches one.
    """
    G = np.asarray(G, dtype=float)
    gamma = np.broadcast_to(np.asarray(gamma, dtype=float), (G.shape[0],))
    sigma2 = np.broadcast_to(np.asarray(sigma2, dtype=float), (G.shape[0],))
    diag = np.diag(G)
    if np.any(diag <= 0):
        raise ValueError("direct gains must be positive")
    B = interference_matrix(G, gamma)
    rho = float(np.max(np.abs(np.linalg.eigvals(B)))) if B.size > 1 else 0.0
    if rho >= 1.0:
        raise InfeasibleError(f"interference spectral radius {rho:.4g} >= 1")
    try:
        p = np.linalg.solve(np.eye(G.shape[0]) - B, gamma * sigma2 / diag)
    except np.linalg.LinAlgError as exc:
        raise InfeasibleError("singular power-control system") from exc
    if np.any(p <= 0) or not np.all(np.isfinite(p)):
        raise InfeasibleError("power-control solution is not positive")
    return p


def mrt_beamforming(ch: ChannelState, gamma, sigma2) -> BeamformingSolution:
    U = mrt_directions(ch)
    try:
        p = power_control(link_gains(ch, U), gamma, sigma2)
    except InfeasibleError:
        return BeamformingSolution.failed(Status.INFEASIBLE)
    return _from_weights(ch, np.sqrt(p)[:, None] * U, sigma2)


def mrt_feasible_fraction(ch: ChannelState, gamma) -> float:
    """Largest ``s`` such that MRT power control meets ``s * gamma`` (supremum)."""
    B = interference_matrix(link_gains(ch, mrt_directions(ch)), gamma)
    rho = float(np.max(np.abs(np.linalg.eigvals(B)))) if B.size > 1 else 0.0
    return np.inf if rho == 0 else 1.0 / rho


def _p2_program(ch: ChannelState, gamma, sigma2) -> socp.ConicProgram:
    # x = [Re w_1, Im w_1, ..., Re w_K, Im w_K, t]; minimise t >= ||w||.
    # Channels are divided by sigma_k so every noise term becomes 1.
    K, N = ch.K, ch.N
    n = 2 * K * N + 1
    Ht = ch.H / np.sqrt(np.asarray(sigma2, dtype=float))[:, None, None]

    def rows(k, j):
        # real-linear maps w_j -> Re / Im of h_kj^H w_j
        h = Ht[k, j]
        re = np.zeros(n)
        im = np.zeros(n)
        o = 2 * N * j
        re[o:o + N], re[o + N:o + 2 * N] = h.real, h.imag
        im[o:o + N], im[o + N:o + 2 * N] = -h.imag, h.real
        return re, im

    objective = np.zeros(n)
    objective[-1] = 1.0
    power_cone = socp.SecondOrderCone(np.eye(n)[:-1], np.zeros(n - 1), objective, 0.0)
    cones = [power_cone]
    eq_A = np.zeros((K, n))
    for k in range(K):
        re_kk, im_kk = rows(k, k)
        # w_k may be rotated so h_kk^H w_k is real: no loss of optimality
        eq_A[k] = im_kk
        A, b = [], []
        for j in range(K):
            if j != k:
                A.extend(rows(k, j))
                b.extend([0.0, 0.0])
        A.append(np.zeros(n))
        b.append(1.0)
        cones.append(socp.SecondOrderCone(np.array(A), np.array(b), re_kk / np.sqrt(gamma[k]), 0.0))
    return socp.ConicProgram(objective, cones, eq_A=eq_A, eq_b=np.zeros(K))


def solve_p2(
    ch: ChannelState, gamma, sigma2, feas_tol: float = 1e-8, gap_tol: float = 1e-8
) -> BeamformingSolution:
    """Minimum total power beamforming under per-user SINR targets."""
    K, N = ch.K, ch.N
    gamma = np.broadcast_to(np.asarray(gamma, dtype=float), (K,))
    sigma2 = np.broadcast_to(np.asarray(sigma2, dtype=float), (K,))
    result = socp.solve(_p2_program(ch, gamma, sigma2), feas_tol=feas_tol, gap_tol=gap_tol)
    if not result.ok:
        return BeamformingSolution.failed(result.status)
    x = result.x[:-1].reshape(K, 2, N)
    W = x[:, 0, :] + 1j * x[:, 1, :]
    return _from_weights(ch, W, sigma2)


def p2_feasible_fraction(ch: ChannelState, gamma, sigma2, rel_tol: float = 1e-3) -> tuple:
    """Bisect the largest feasible scaling ``s <= 1`` of the SINR targets.

    Returns ``(s, solution)`` with the beamformers solving the scaled problem,
    or ``(0.0, failed)`` if even a tiny fraction is infeasible.
    """
    lo, hi = 0.0, 1.0
    best = BeamformingSolution.failed(Status.INFEASIBLE)
    sol = solve_p2(ch, gamma, sigma2)
    if sol.ok:
        return 1.0, sol
    probe = 1e-3
    sol = solve_p2(ch, probe * np.asarray(gamma), sigma2)
    if not sol.ok:
        return 0.0, best
    lo, best = probe, sol
    while hi - lo > rel_tol * hi:
        mid = 0.5 * (lo + hi)
        sol = solve_p2(ch, mid * np.asarray(gamma), sigma2)
        if sol.ok:
            lo, best = mid, sol
        else:
            hi = mid
    return lo, best
