"""Antenna-position updates by successive convex approximation.

With the beamformers and all other antennas fixed, the gain of link (k, j)
as a function of antenna ``n``'s position ``t`` is

    f(t) = tr(V) + |G|^2 + sum_{a<b} zeta_ab(t) + sum_l chi_l(t)

where ``G`` collects the contribution of the other antennas,
``V = |w_n|^2 v v^H`` with ``v`` the path responses, and ``zeta``/``chi`` are
cosines of linear functions of ``t``. A scalar ``delta`` with
``-delta I <= Hessian(f) <= delta I`` gives quadratic lower and upper bounds
that are tight at the current point; plugging those into the SINR
constraints, and linearizing the minimum-distance constraints, yields a
convex subproblem per antenna index.

The functions taking a :class:`GainContext` broadcast over any leading batch
shape of the context, so one context can describe all K x K links at once.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import socp
from .beamforming import link_gains
from .channel import channel_state
from .socp import Status

logger = logging.getLogger(__name__)

DISTANCE_TOL = 1e-9
MARGIN_TOL = 1e-8


@dataclass
class GainContext:
    """Everything f_kj needs besides the moving antenna's position.

    Attributes (leading batch shape ``B``)
    ----------
    residual : complex, B
        Contribution of the other N - 1 antennas to ``h_kj^H w_j``.
    weight : complex, B
        Beamforming weight ``w_{j,n}`` of the moving antenna.
    responses : complex, B + (L,)
        Path responses ``v_kj``.
    wave_vectors : float, B + (L, 2)
    wavelength : float
    """

    residual: np.ndarray
    weight: np.ndarray
    responses: np.ndarray
    wave_vectors: np.ndarray
    wavelength: float
    _pairs: tuple = field(init=False, repr=False)

    def __post_init__(self):
        self.residual = np.asarray(self.residual, dtype=complex)
        self.weight = np.asarray(self.weight, dtype=complex)
        self.responses = np.asarray(self.responses, dtype=complex)
        self.wave_vectors = np.asarray(self.wave_vectors, dtype=float)
        self._pairs = np.triu_indices(self.responses.shape[-1], 1)

    @property
    def wavenumber(self) -> float:
        return 2 * np.pi / self.wavelength

    @property
    def V(self) -> np.ndarray:
        """``|w_n|^2 v v^H``, shape B + (L, L)."""
        v = self.responses
        return (np.abs(self.weight) ** 2)[..., None, None] * v[..., :, None] * v[..., None, :].conj()

    @property
    def r(self) -> np.ndarray:
        """``|G| |w_n| |v_l|``, shape B + (L,)."""
        return (np.abs(self.residual) * np.abs(self.weight))[..., None] * np.abs(self.responses)

    def pair_terms(self):
        """Upper-triangle entries of V and the matching wave-vector differences."""
        a, b = self._pairs
        v = self.responses
        Vab = (np.abs(self.weight) ** 2)[..., None] * v[..., a] * v[..., b].conj()
        dp = self.wave_vectors[..., b, :] - self.wave_vectors[..., a, :]
        return Vab, dp


def interference_residual(n: int, T_j, w_j, paths, wavelength: float) -> complex:
    """``sum_{m != n} w_{j,m} sum_l conj(tau_l) exp(+i k t_{j,m} . p_l)``."""
    T_j = np.asarray(T_j, dtype=float)
    w_j = np.asarray(w_j, dtype=complex)
    k = 2 * np.pi / wavelength
    others = np.arange(T_j.shape[0]) != n
    frv = np.exp(1j * k * (T_j[others] @ paths.wave_vectors.T))  # (N-1, L)
    return complex(np.sum(w_j[others] * (frv @ paths.responses.conj())))


def link_context(n: int, T_j, w_j, paths, wavelength: float) -> GainContext:
    """Context of a single link from transmitter ``j`` for its antenna ``n``."""
    return GainContext(
        residual=interference_residual(n, T_j, w_j, paths, wavelength),
        weight=np.asarray(w_j, dtype=complex)[n],
        responses=paths.responses,
        wave_vectors=paths.wave_vectors,
        wavelength=wavelength,
    )


def gain_context(n: int, positions, W, scenario) -> GainContext:
    """Batched context over all (k, j) links for antenna index ``n``."""
    T = np.asarray(positions, dtype=float)
    W = np.asarray(W, dtype=complex)
    P = scenario.wave_vector_array  # (K, K, L, 2)
    tau = scenario.response_array  # (K, K, L)
    k = 2 * np.pi / scenario.wavelength
    frv = np.exp(1j * k * np.einsum("jmd,kjld->kjml", T, P))
    conj_h = np.einsum("kjml,kjl->kjm", frv, tau.conj())  # conj(h_kj(t_jm))
    others = np.ones(T.shape[1])
    others[n] = 0.0
    residual = np.einsum("kjm,jm,m->kj", conj_h, W, others)
    weight = np.broadcast_to(W[:, n], residual.shape)
    return GainContext(residual, weight, tau, P, scenario.wavelength)


def _phases(t, ctx: GainContext) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    return ctx.wavenumber * np.sum(t[..., None, :] * ctx.wave_vectors, axis=-1)


def _cosine_terms(t, ctx: GainContext):
    """Amplitudes, arguments and direction vectors of the zeta and chi cosines."""
    phase = _phases(t, ctx)
    a, b = ctx._pairs
    Vab, dp = ctx.pair_terms()
    zeta_arg = phase[..., b] - phase[..., a] + np.angle(Vab)
    chi_arg = (
        phase
        - np.angle(ctx.residual)[..., None]
        + np.angle(ctx.weight)[..., None]
        - np.angle(ctx.responses)
    )
    return 2 * np.abs(Vab), zeta_arg, dp, 2 * ctx.r, chi_arg, ctx.wave_vectors


def f_expanded(t, ctx: GainContext) -> np.ndarray:
    """``|h_kj^H w_j|^2`` with antenna n at ``t``, in the expanded cosine form."""
    zeta_amp, zeta_arg, _, chi_amp, chi_arg, _ = _cosine_terms(t, ctx)
    trace = np.abs(ctx.weight) ** 2 * np.sum(np.abs(ctx.responses) ** 2, axis=-1)
    return (
        trace
        + np.abs(ctx.residual) ** 2
        + np.sum(zeta_amp * np.cos(zeta_arg), axis=-1)
        + np.sum(chi_amp * np.cos(chi_arg), axis=-1)
    )


def grad_f(t, ctx: GainContext) -> np.ndarray:
    zeta_amp, zeta_arg, dp, chi_amp, chi_arg, p = _cosine_terms(t, ctx)
    k = ctx.wavenumber
    return -k * (
        np.sum((zeta_amp * np.sin(zeta_arg))[..., None] * dp, axis=-2)
        + np.sum((chi_amp * np.sin(chi_arg))[..., None] * p, axis=-2)
    )


def hessian_f(t, ctx: GainContext) -> np.ndarray:
    zeta_amp, zeta_arg, dp, chi_amp, chi_arg, p = _cosine_terms(t, ctx)
    k2 = ctx.wavenumber ** 2
    zeta = zeta_amp * np.cos(zeta_arg)
    chi = chi_amp * np.cos(chi_arg)
    return -k2 * (
        np.einsum("...m,...mi,...mj->...ij", zeta, dp, dp)
        + np.einsum("...l,...li,...lj->...ij", chi, p, p)
    )


def delta_bound(ctx: GainContext) -> np.ndarray:
    """Curvature bound ``delta`` with ``||Hessian(f)(t)||_2 <= delta`` for every t.

    The Hessian is a signed sum of rank-one terms ``k^2 c dp dp^T`` with
    ``|c| <= 2|V_ab|`` (pairs) and ``|c| <= 2 r_l`` (paths), so the spectral
    norm is at most ``k^2 (sum 2|V_ab| ||p_b - p_a||^2 + sum 2 r_l ||p_l||^2)``.
    """
    Vab, dp = ctx.pair_terms()
    pair = np.sum(2 * np.abs(Vab) * np.sum(dp ** 2, axis=-1), axis=-1)
    path = np.sum(2 * ctx.r * np.sum(ctx.wave_vectors ** 2, axis=-1), axis=-1)
    return ctx.wavenumber ** 2 * (pair + path)


def delta_paper(ctx: GainContext) -> np.ndarray:
    """``(16 pi^2 / lambda^2) (sum_{a<b} |V_ab| + sum_l r_l)``.

    Kept for comparison only: when two paths have nearly opposite wave vectors
    this underestimates the curvature by up to a factor of two, so it is not
    used to build surrogates.
    """
    Vab, _ = ctx.pair_terms()
    scale = 16 * np.pi ** 2 / ctx.wavelength ** 2
    return scale * (np.sum(np.abs(Vab), axis=-1) + np.sum(ctx.r, axis=-1))


def surrogate_bounds(t, t_i, ctx: GainContext, delta) -> tuple:
    """Quadratic (lower, upper) bounds of f at ``t`` built around ``t_i``."""
    t = np.asarray(t, dtype=float)
    t_i = np.asarray(t_i, dtype=float)
    d = t - t_i
    lin = f_expanded(t_i, ctx) + np.sum(grad_f(t_i, ctx) * d, axis=-1)
    quad = 0.5 * np.asarray(delta) * np.sum(d * d, axis=-1)
    return lin - quad, lin + quad


def distance_linearization(t, t_i, t_other) -> float:
    """Affine minorant of ``||t - t_other||`` that is tight at ``t_i``."""
    t, t_i, t_other = (np.asarray(x, dtype=float) for x in (t, t_i, t_other))
    base = t_i - t_other
    dist = np.linalg.norm(base)
    if dist == 0:
        raise ValueError("linearization point coincides with the other antenna")
    return float(base @ (t - t_other) / dist)


# ---------------------------------------------------------------------------
# feasibility bookkeeping


def min_spacing(T) -> float:
    """Smallest pairwise antenna distance within any transmitter."""
    T = np.asarray(T, dtype=float)
    if T.shape[1] < 2:
        return np.inf
    diff = T[:, :, None, :] - T[:, None, :, :]
    dist = np.linalg.norm(diff, axis=-1)
    iu = np.triu_indices(T.shape[1], 1)
    return float(dist[:, iu[0], iu[1]].min())


def positions_feasible(T, side: float, spacing: float, tol: float = DISTANCE_TOL) -> bool:
    T = np.asarray(T, dtype=float)
    in_box = np.all(T >= -tol) and np.all(T <= side + tol)
    return bool(in_box and min_spacing(T) >= spacing - tol)


def normalized_margins(G, gamma, sigma2) -> np.ndarray:
    """``(S_k - gamma_k (I_k + sigma_k^2)) / sigma_k^2`` from link gains ``G``."""
    signal = np.diag(G)
    interference = G.sum(axis=1) - signal
    return (signal - gamma * (interference + sigma2)) / sigma2


def sinr_margin(G, gamma, sigma2) -> float:
    """``min_k (SINR_k - gamma_k)``."""
    signal = np.diag(G)
    interference = G.sum(axis=1) - signal
    return float(np.min(signal / (interference + sigma2) - gamma))


def _gains(T, W, scenario) -> np.ndarray:
    return link_gains(channel_state(T, scenario), W)


# ---------------------------------------------------------------------------
# per-index subproblem


@dataclass
class SubproblemResult:
    positions: np.ndarray  # (K, 2) new positions of antenna n, meters
    alpha: float  # optimal surrogate slack
    alpha_start: float  # slack of the linearization point
    status: Status

    @property
    def ok(self) -> bool:
        return self.status is Status.OPTIMAL


def _subproblem_program(n, T, ctx, gamma, sigma2, side, spacing, wavelength):
    K = T.shape[0]
    t_i = T[:, n]  # (K, 2)
    t_b = np.broadcast_to(t_i[None], (K, K, 2))
    f0 = f_expanded(t_b, ctx)
    # work in wavelength units for conditioning
    g = grad_f(t_b, ctx) * wavelength
    delta = delta_bound(ctx) * wavelength ** 2
    u_i = t_i / wavelength
    nvar = 2 * K + 1
    center = np.concatenate([u_i.ravel(), [0.0]])

    cones = []
    for k in range(K):
        weights = np.zeros(nvar)
        coef = np.zeros(nvar)
        for j in range(K):
            s = 1.0 if j == k else -gamma[k]
            weights[2 * j:2 * j + 2] = (delta[k, j] / 2) * (1.0 if j == k else gamma[k])
            coef[2 * j:2 * j + 2] = s * g[k, j]
        coef[-1] = -1.0
        const = f0[k, k] - gamma[k] * (f0[k].sum() - f0[k, k]) - gamma[k] * sigma2[k]
        weights /= sigma2[k]
        coef[:-1] /= sigma2[k]
        const = const / sigma2[k] - coef[:-1] @ center[:-1]
        cones.append(socp.quadratic_to_soc(weights, center, coef, const))

    D = spacing / wavelength
    N = T.shape[1]
    for j in range(K):
        for m in range(N):
            if m == n:
                continue
            u_m = T[j, m] / wavelength
            base = u_i[j] - u_m
            dist = np.linalg.norm(base)
            if dist == 0:
                raise ValueError("coincident antennas: distance linearization undefined")
            c = np.zeros(nvar)
            c[2 * j:2 * j + 2] = base / dist
            cones.append(socp.SecondOrderCone(np.zeros((0, nvar)), np.zeros(0), c, -base @ u_m / dist - D))

    objective = np.zeros(nvar)
    objective[-1] = -1.0
    lower = np.full(nvar, -np.inf)
    upper = np.full(nvar, np.inf)
    lower[:-1] = 0.0
    upper[:-1] = side / wavelength
    program = socp.ConicProgram(objective, cones, lower=lower, upper=upper)
    alpha_start = float(np.min(normalized_margins(f0, gamma, sigma2)))
    return program, alpha_start


def solve_p33n(
    n: int,
    positions,
    W,
    scenario,
    gamma=None,
    sigma2=None,
    feas_tol: float = 1e-8,
    gap_tol: float = 1e-8,
) -> SubproblemResult:
    """Move antenna ``n`` of every transmitter to maximize the worst surrogate SINR slack.

    Maximizes ``alpha`` subject to, for every user ``k``,
    ``lower_kk - gamma_k (sum_{j != k} upper_kj + sigma_k^2) >= alpha sigma_k^2``,
    the region box, and the linearized spacing constraints. The current
    positions are feasible with ``alpha`` equal to the current true margin, so
    the optimum never falls below it. On solver failure the positions are
    returned unchanged.
    """
    T = np.asarray(positions, dtype=float)
    cfg = scenario.config
    gamma = cfg.gamma if gamma is None else np.broadcast_to(np.asarray(gamma, float), (cfg.K,))
    sigma2 = cfg.noise if sigma2 is None else np.broadcast_to(np.asarray(sigma2, float), (cfg.K,))
    ctx = gain_context(n, T, W, scenario)
    side = cfg.region_side
    if side == 0:
        f0 = f_expanded(np.broadcast_to(T[:, n][None], (cfg.K, cfg.K, 2)), ctx)
        a0 = float(np.min(normalized_margins(f0, gamma, sigma2)))
        return SubproblemResult(T[:, n].copy(), a0, a0, Status.OPTIMAL)

    program, alpha_start = _subproblem_program(
        n, T, ctx, gamma, sigma2, side, cfg.min_spacing, cfg.wavelength
    )
    sol = socp.solve(program, feas_tol=feas_tol, gap_tol=gap_tol)
    if not sol.ok:
        logger.debug("subproblem n=%d failed (%s); keeping positions", n, sol.status)
        return SubproblemResult(T[:, n].copy(), alpha_start, alpha_start, sol.status)
    u = sol.x[:-1].reshape(-1, 2)
    new = np.clip(u * cfg.wavelength, 0.0, side)
    return SubproblemResult(new, float(sol.x[-1]), alpha_start, Status.OPTIMAL)


@dataclass
class PositionUpdate:
    positions: np.ndarray
    steps: int = 0  # accepted subproblem solutions
    rejected: int = 0  # candidate steps discarded by the true-constraint check
    failures: int = 0  # solver failures


def optimize_positions(
    positions,
    W,
    scenario,
    gamma=None,
    sigma2=None,
    max_inner: int = 20,
    tol: float = 1e-4,
    feas_tol: float = 1e-8,
) -> PositionUpdate:
    """Sweep antenna indices n = 0..N-1, running SCA iterations on each.

    Every candidate step is re-checked against the true constraints: region,
    spacing and a minimum SINR margin that may not decrease. A step failing
    that check ends the inner loop for that index without being applied.
    """
    T = np.array(positions, dtype=float)
    cfg = scenario.config
    gamma = cfg.gamma if gamma is None else np.broadcast_to(np.asarray(gamma, float), (cfg.K,))
    sigma2 = cfg.noise if sigma2 is None else np.broadcast_to(np.asarray(sigma2, float), (cfg.K,))
    out = PositionUpdate(T)
    if cfg.region_side == 0:
        return out
    side, spacing = cfg.region_side, cfg.min_spacing
    margin = sinr_margin(_gains(T, W, scenario), gamma, sigma2)
    for n in range(cfg.N):
        for _ in range(max_inner):
            res = solve_p33n(n, T, W, scenario, gamma, sigma2, feas_tol=feas_tol)
            if not res.ok:
                out.failures += 1
                break
            candidate = T.copy()
            candidate[:, n] = res.positions
            G = _gains(candidate, W, scenario)
            new_margin = sinr_margin(G, gamma, sigma2)
            true_alpha = float(np.min(normalized_margins(G, gamma, sigma2)))
            if true_alpha < res.alpha - 1e-6 * (1 + abs(res.alpha)):
                logger.warning("surrogate slack %.6g exceeds true slack %.6g", res.alpha, true_alpha)
            if not positions_feasible(candidate, side, spacing) or new_margin < margin - MARGIN_TOL:
                out.rejected += 1
                break
            T, margin = candidate, new_margin
            out.steps += 1
            if res.alpha - res.alpha_start < tol:
                break
    out.positions = T
    return out
