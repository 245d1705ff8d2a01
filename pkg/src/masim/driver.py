"""Alternating optimization of beamformers and antenna positions."""

from __future__ import annotations

import enum
import hashlib
import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .beamforming import (
    BeamformingSolution,
    mrt_beamforming,
    mrt_feasible_fraction,
    p2_feasible_fraction,
    solve_p2,
)
from .channel import channel_state
from .positions import optimize_positions, positions_feasible
from .scenario import Scenario, fpa_layout
from .socp import Status

logger = logging.getLogger(__name__)


class Scheme(str, enum.Enum):
    PROPOSED = "Proposed"
    MA_MRT = "MaMrt"
    FPA_SOCP = "FpaSocp"
    FPA_MRT = "FpaMrt"

    def __str__(self) -> str:
        return self.value

    @property
    def movable(self) -> bool:
        return self in (Scheme.PROPOSED, Scheme.MA_MRT)

    @property
    def uses_mrt(self) -> bool:
        return self in (Scheme.MA_MRT, Scheme.FPA_MRT)


@dataclass
class AlgorithmOptions:
    scheme: Scheme = Scheme.PROPOSED
    max_outer: int = 30
    max_inner: int = 20
    outer_tol: float = 1e-4
    inner_tol: float = 1e-4
    feas_tol: float = 1e-8
    gap_tol: float = 1e-8

    def __post_init__(self):
        self.scheme = Scheme(self.scheme)
        if self.max_outer < 1 or self.max_inner < 1:
            raise ValueError("iteration limits must be positive")
        if not (self.outer_tol > 0 and self.inner_tol > 0 and self.feas_tol > 0 and self.gap_tol > 0):
            raise ValueError("tolerances must be positive")


@dataclass
class IterationTrace:
    power: list = field(default_factory=list)  # watts, after each beamforming step
    margin: list = field(default_factory=list)  # min_k (SINR_k - gamma_k)
    position_hash: list = field(default_factory=list)
    wall_time: list = field(default_factory=list)  # seconds since start
    status: Status = Status.OPTIMAL
    converged: bool = False

    def record(self, sol: BeamformingSolution, T, gamma, t0: float) -> None:
        self.power.append(sol.total_power)
        self.margin.append(float(np.min(sol.sinr - gamma)))
        self.position_hash.append(position_hash(T))
        self.wall_time.append(time.perf_counter() - t0)

    @property
    def iterations(self) -> int:
        return len(self.power)


@dataclass
class RunResult:
    solution: BeamformingSolution
    positions: np.ndarray
    trace: IterationTrace

    @property
    def status(self) -> Status:
        return self.trace.status


def position_hash(T) -> str:
    return hashlib.sha256(np.ascontiguousarray(T, dtype=float).tobytes()).hexdigest()[:12]


def initialize_positions(scenario: Scenario) -> np.ndarray:
    """Half-wavelength UPA (or wider, if the spacing demands it) in every region."""
    cfg = scenario.config
    spacing = max(cfg.wavelength / 2, cfg.min_spacing)
    grid = fpa_layout(cfg.N, cfg.wavelength, cfg.region_side, spacing=spacing)
    return np.repeat(grid[None], cfg.K, axis=0)


def _beamform(scheme: Scheme, scenario, T, opts, gamma=None) -> BeamformingSolution:
    ch = channel_state(T, scenario)
    gamma = scenario.gamma if gamma is None else gamma
    if scheme.uses_mrt:
        return mrt_beamforming(ch, gamma, scenario.noise)
    return solve_p2(ch, gamma, scenario.noise, opts.feas_tol, opts.gap_tol)


def _rescue(scheme: Scheme, scenario, T, opts) -> np.ndarray:
    """One position step from a best-effort beamformer at scaled-down targets."""
    ch = channel_state(T, scenario)
    if scheme.uses_mrt:
        s = mrt_feasible_fraction(ch, scenario.gamma)
        sol = _beamform(scheme, scenario, T, opts, gamma=0.9 * min(s, 1.0) * scenario.gamma)
    else:
        s, sol = p2_feasible_fraction(ch, scenario.gamma, scenario.noise)
    if not sol.ok:
        return T
    logger.info("infeasible start: rescuing from %.3g of the SINR targets", s)
    return optimize_positions(
        T, sol.W, scenario, max_inner=opts.max_inner, tol=opts.inner_tol, feas_tol=opts.feas_tol
    ).positions


def _mrt_position_step(scenario, T, sol, opts):
    """Position step for MRT beamforming with a descent guard.

    The MRT directions change with the positions, so the recomputed power can
    exceed the previous one; the step is then halved towards the old
    positions a few times before being dropped.
    """
    cfg = scenario.config
    target = optimize_positions(
        T, sol.W, scenario, max_inner=opts.max_inner, tol=opts.inner_tol, feas_tol=opts.feas_tol
    ).positions
    step = 1.0
    for _ in range(6):
        cand = T + step * (target - T)
        if positions_feasible(cand, cfg.region_side, cfg.min_spacing):
            new = _beamform(Scheme.MA_MRT, scenario, cand, opts)
            if new.ok and new.total_power <= sol.total_power:
                return cand, new
        step *= 0.5
    return T, sol


def run(scenario: Scenario, options: AlgorithmOptions | None = None) -> RunResult:
    opts = options or AlgorithmOptions()
    scheme = opts.scheme
    gamma = scenario.gamma
    t0 = time.perf_counter()
    trace = IterationTrace()
    T = initialize_positions(scenario)

    sol = _beamform(scheme, scenario, T, opts)
    if not sol.ok and scheme.movable:
        T = _rescue(scheme, scenario, T, opts)
        sol = _beamform(scheme, scenario, T, opts)
    if not sol.ok:
        trace.status = sol.status
        return RunResult(sol, T, trace)
    trace.record(sol, T, gamma, t0)
    if not scheme.movable:
        trace.converged = True
        return RunResult(sol, T, trace)

    for _ in range(opts.max_outer - 1):
        if scheme is Scheme.MA_MRT:
            T_new, new = _mrt_position_step(scenario, T, sol, opts)
        else:
            T_new = optimize_positions(
                T, sol.W, scenario, max_inner=opts.max_inner, tol=opts.inner_tol, feas_tol=opts.feas_tol
            ).positions
            new = _beamform(scheme, scenario, T_new, opts)
            if not new.ok:
                # the previous beamformer is still feasible at T_new, so this is numerical
                logger.warning("beamforming failed after a position step (%s); stopping", new.status)
                break
        change = (sol.total_power - new.total_power) / sol.total_power
        T, sol = T_new, new
        trace.record(sol, T, gamma, t0)
        if abs(change) < opts.outer_tol:
            trace.converged = True
            break
    return RunResult(sol, T, trace)
