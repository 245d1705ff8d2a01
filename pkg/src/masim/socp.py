"""Second-order cone programs: a small representation plus a solver front end.

The interior-point iterations are delegated to Clarabel (primal-dual,
homogeneous embedding). Whatever the backend reports, a returned solution is
only marked ``OPTIMAL`` after :func:`residuals` re-checks the primal point and
the duality gap from the raw program data.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field

import clarabel
import numpy as np
import scipy.sparse as sp

logger = logging.getLogger(__name__)


class Status(str, enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    MAX_ITER = "MaxIter"
    NUMERICAL_FAILURE = "NumericalFailure"

    def __str__(self) -> str:
        return self.value


@dataclass
class SecondOrderCone:
    """Constraint ``||A x + b|| <= c . x + d``.

    ``A`` may have zero rows, in which case the constraint is the affine
    inequality ``c . x + d >= 0``.
    """

    A: np.ndarray
    b: np.ndarray
    c: np.ndarray
    d: float

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float).ravel()
        self.A = np.asarray(self.A, dtype=float).reshape(-1, self.c.size)
        self.b = np.asarray(self.b, dtype=float).ravel()
        self.d = float(self.d)
        if self.b.size != self.A.shape[0]:
            raise ValueError("cone offset b does not match A")

    def violation(self, x: np.ndarray) -> float:
        lhs = np.linalg.norm(self.A @ x + self.b) if self.A.shape[0] else 0.0
        rhs = self.c @ x + self.d
        return max(0.0, lhs - rhs) / (1.0 + abs(rhs))


@dataclass
class ConicProgram:
    """``minimize objective . x`` subject to equalities, cones and box bounds."""

    objective: np.ndarray
    cones: list = field(default_factory=list)
    eq_A: np.ndarray | None = None
    eq_b: np.ndarray | None = None
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None

    def __post_init__(self):
        self.objective = np.asarray(self.objective, dtype=float).ravel()
        n = self.objective.size
        if self.eq_A is not None:
            self.eq_A = np.asarray(self.eq_A, dtype=float).reshape(-1, n)
            self.eq_b = np.asarray(self.eq_b, dtype=float).ravel()
            if self.eq_b.size != self.eq_A.shape[0]:
                raise ValueError("equality right-hand side has wrong length")
        for name in ("lower", "upper"):
            v = getattr(self, name)
            if v is not None:
                v = np.broadcast_to(np.asarray(v, dtype=float), (n,)).copy()
                setattr(self, name, v)
        for cone in self.cones:
            if cone.c.size != n:
                raise ValueError("cone dimension does not match the variable")
        has_bounds = any(
            v is not None and np.any(np.isfinite(v)) for v in (self.lower, self.upper)
        )
        if not (self.cones or self.eq_A is not None or has_bounds):
            raise ValueError("program needs at least one constraint or bound")

    @property
    def n(self) -> int:
        return self.objective.size

    def is_finite(self) -> bool:
        arrays = [self.objective]
        if self.eq_A is not None:
            arrays += [self.eq_A, self.eq_b]
        for cone in self.cones:
            arrays += [cone.A, cone.b, cone.c, np.array([cone.d])]
        ok = all(np.all(np.isfinite(a)) for a in arrays)
        # infinite bounds mean "unbounded"; NaN never is
        for v in (self.lower, self.upper):
            if v is not None and np.any(np.isnan(v)):
                ok = False
        if self.lower is not None and np.any(self.lower == np.inf):
            ok = False
        if self.upper is not None and np.any(self.upper == -np.inf):
            ok = False
        return ok


@dataclass
class ConicSolution:
    x: np.ndarray | None
    status: Status
    objective: float
    primal_residual: float
    gap: float
    iterations: int = 0
    message: str = ""

    @property
    def ok(self) -> bool:
        return self.status is Status.OPTIMAL


def residuals(program: ConicProgram, x: np.ndarray) -> float:
    """Largest scaled constraint violation of ``x``.

    Each violation is divided by ``1 + |right-hand side|`` so the number is
    comparable across constraints of different magnitude.
    """
    x = np.asarray(x, dtype=float)
    worst = 0.0
    if program.eq_A is not None and program.eq_A.shape[0]:
        r = np.abs(program.eq_A @ x - program.eq_b) / (1.0 + np.abs(program.eq_b))
        worst = max(worst, float(r.max()))
    for cone in program.cones:
        worst = max(worst, cone.violation(x))
    if program.lower is not None:
        lo = program.lower
        m = np.isfinite(lo)
        if m.any():
            worst = max(worst, float(np.max(np.maximum(lo[m] - x[m], 0.0) / (1 + np.abs(lo[m])))))
    if program.upper is not None:
        up = program.upper
        m = np.isfinite(up)
        if m.any():
            worst = max(worst, float(np.max(np.maximum(x[m] - up[m], 0.0) / (1 + np.abs(up[m])))))
    return worst


def _standard_form(p: ConicProgram):
    """Stack into Clarabel's ``A x + s = b, s in K`` form.

    Returns (A, b, cones) with cones ordered zero / nonnegative / second-order.
    """
    n = p.n
    rows, rhs, cones = [], [], []
    if p.eq_A is not None and p.eq_A.shape[0]:
        rows.append(p.eq_A)
        rhs.append(p.eq_b)
        cones.append(clarabel.ZeroConeT(p.eq_A.shape[0]))

    lin_rows, lin_rhs = [], []
    eye = np.eye(n)
    if p.lower is not None:
        for i in np.flatnonzero(np.isfinite(p.lower)):
            lin_rows.append(-eye[i])
            lin_rhs.append(-p.lower[i])
    if p.upper is not None:
        for i in np.flatnonzero(np.isfinite(p.upper)):
            lin_rows.append(eye[i])
            lin_rhs.append(p.upper[i])
    socs = []
    for cone in p.cones:
        if cone.A.shape[0] == 0:
            lin_rows.append(-cone.c)
            lin_rhs.append(cone.d)
        else:
            socs.append(cone)
    if lin_rows:
        rows.append(np.array(lin_rows))
        rhs.append(np.array(lin_rhs))
        cones.append(clarabel.NonnegativeConeT(len(lin_rows)))
    for cone in socs:
        rows.append(np.vstack([-cone.c[None, :], -cone.A]))
        rhs.append(np.concatenate([[cone.d], cone.b]))
        cones.append(clarabel.SecondOrderConeT(cone.A.shape[0] + 1))
    A = np.vstack(rows)
    b = np.concatenate(rhs)
    return A, b, cones


_INFEASIBLE = {"PrimalInfeasible", "AlmostPrimalInfeasible"}
_SOLVED = {"Solved", "AlmostSolved"}


def solve(
    program: ConicProgram,
    feas_tol: float = 1e-8,
    gap_tol: float = 1e-8,
    max_iter: int = 200,
) -> ConicSolution:
    if not program.is_finite():
        return ConicSolution(None, Status.NUMERICAL_FAILURE, np.nan, np.inf, np.inf,
                             message="non-finite problem data")
    A, b, cones = _standard_form(program)
    n = program.n
    # the backend sees a unit-size objective, so positive rescaling of the
    # objective cannot change its iterates
    c_scale = float(np.max(np.abs(program.objective))) or 1.0
    settings = clarabel.DefaultSettings()
    settings.verbose = False
    settings.max_iter = int(max_iter)
    # ask the backend for a margin below the tolerances re-checked afterwards
    settings.tol_feas = feas_tol * 0.1
    settings.tol_gap_abs = gap_tol * 0.1
    settings.tol_gap_rel = gap_tol * 0.1
    settings.tol_ktratio = min(settings.tol_ktratio, gap_tol)
    try:
        solver = clarabel.DefaultSolver(
            sp.csc_matrix((n, n)), program.objective / c_scale, sp.csc_matrix(A), b, cones, settings
        )
        result = solver.solve()
    except Exception as exc:  # backend rejects malformed data by raising
        logger.warning("conic backend raised: %s", exc)
        return ConicSolution(None, Status.NUMERICAL_FAILURE, np.nan, np.inf, np.inf,
                             message=str(exc))

    backend = str(result.status)
    iters = int(result.iterations)
    if backend in _INFEASIBLE:
        return ConicSolution(None, Status.INFEASIBLE, np.nan, np.inf, np.inf, iters, backend)

    x = np.asarray(result.x, dtype=float)
    z = np.asarray(result.z, dtype=float)
    if not np.all(np.isfinite(x)):
        return ConicSolution(None, Status.NUMERICAL_FAILURE, np.nan, np.inf, np.inf, iters, backend)
    pobj = float(program.objective @ x)
    dobj = float(-b @ z) * c_scale if np.all(np.isfinite(z)) else np.nan
    gap = abs(pobj - dobj) / max(1.0, abs(pobj), abs(dobj)) if np.isfinite(dobj) else np.inf
    pres = residuals(program, x)

    if pres <= feas_tol and gap <= gap_tol:
        status = Status.OPTIMAL
    elif backend == "MaxIterations":
        status = Status.MAX_ITER
    else:
        status = Status.NUMERICAL_FAILURE
    if status is not Status.OPTIMAL:
        logger.debug("solve: backend=%s pres=%.2e gap=%.2e -> %s", backend, pres, gap, status)
    return ConicSolution(x, status, pobj, pres, gap, iters, backend)


def quadratic_to_soc(weights, center, rhs_coef, rhs_const: float) -> SecondOrderCone:
    """Cone form of ``sum_i w_i (x_i - center_i)^2 <= rhs_coef . x + rhs_const``.

    Uses ``||y||^2 <= s  <=>  ||(y, (s - 1)/2)|| <= (s + 1)/2``. Weights must
    be nonnegative (a diagonal, positive semidefinite curvature); coordinates
    with zero weight drop out and an all-zero weight vector leaves the affine
    constraint ``rhs_coef . x + rhs_const >= 0``.
    """
    w = np.asarray(weights, dtype=float).ravel()
    center = np.broadcast_to(np.asarray(center, dtype=float), w.shape)
    e = np.asarray(rhs_coef, dtype=float).ravel()
    if e.size != w.size:
        raise ValueError("weights and rhs_coef must have the same length")
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise ValueError("quadratic term must be positive semidefinite")
    if not np.any(w > 0):
        return SecondOrderCone(np.zeros((0, w.size)), np.zeros(0), e, rhs_const)
    idx = np.flatnonzero(w > 0)
    root = np.sqrt(w[idx])
    A = np.zeros((idx.size + 1, w.size))
    A[np.arange(idx.size), idx] = root
    A[-1] = e / 2
    b = np.concatenate([-root * center[idx], [(rhs_const - 1.0) / 2]])
    return SecondOrderCone(A, b, e / 2, (rhs_const + 1.0) / 2)
