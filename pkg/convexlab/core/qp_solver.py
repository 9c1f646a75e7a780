#!/usr/bin/env python3

"""
Convex QP solver and the finite element problems built on it.

    minimize    1/2 u'Pu + q'u + constant
    subject to  A u >= 0,  u[i] = value for pinned i

Pinned dofs are eliminated first. The reduced problem is solved with an
operator-splitting scheme (relaxed ADMM on the KKT system, Ruiz scaling,
adaptive penalty) and polished by primal-dual active-set passes on the
reduced KKT system with iterative refinement.

Multipliers are reported with the sign convention lambda >= 0, so that
P u + q - A'lambda = 0 at an optimum.

Part of the ConvexLab project.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple, Union

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from convexlab.core import fem_core
from convexlab.core.constraints import (
    LinearConstraintSet,
    conformal_convexity_constraints,
    monopolist_constraints,
)
from convexlab.core.errors import InvalidArgumentError, SolverError
from convexlab.core.mesh import Mesh

# Configure logging
logger = logging.getLogger('qp_solver')

STATUS_OPTIMAL = "optimal"
STATUS_MAX_ITER = "max-iter"
STATUS_INFEASIBLE = "infeasible"

MIN_SCALING = 1e-4
MAX_SCALING = 1e4
RHO_MIN = 1e-6
RHO_MAX = 1e6


@dataclass
class SolverConfig:
    """Tolerances and iteration parameters."""
    eps_abs: float = 1e-8
    eps_rel: float = 1e-8
    max_iter: int = 200_000
    rho: float = 0.1
    sigma: float = 1e-6
    alpha: float = 1.6
    adaptive_rho_interval: int = 25
    adaptive_rho_tolerance: float = 5.0
    scaling_iter: int = 10
    polish: bool = True
    polish_passes: int = 30
    polish_delta: float = 1e-7
    polish_refine_iter: int = 5
    first_polish: int = 50
    check_interval: int = 10
    eps_prim_inf: float = 1e-6

    @classmethod
    def from_settings(cls, settings) -> "SolverConfig":
        """Build from a SolverSettings section."""
        return cls(
            eps_abs=settings.eps_abs,
            eps_rel=settings.eps_rel,
            max_iter=settings.max_iter,
            rho=settings.rho,
            sigma=settings.sigma,
            alpha=settings.alpha,
            adaptive_rho_interval=settings.adaptive_rho_interval,
            scaling_iter=settings.scaling_iter,
            polish=settings.polish,
            polish_passes=settings.polish_passes,
        )


@dataclass
class QPProblem:
    """Quadratic objective, inequality rows A u >= 0 and pinned dofs."""
    P: sp.spmatrix
    q: np.ndarray
    constraints: Optional[Union[LinearConstraintSet, sp.spmatrix, np.ndarray]] = None
    pinned: Dict[int, float] = field(default_factory=dict)
    constant: float = 0.0

    def __post_init__(self):
        self.P = sp.csr_matrix(self.P, dtype=float)
        self.q = np.asarray(self.q, dtype=float).ravel()
        n = self.q.size
        if self.P.shape != (n, n):
            raise InvalidArgumentError(f"P has shape {self.P.shape}, q has {n} entries")
        if self.constraints is None:
            self.constraints = LinearConstraintSet.empty(n)
        elif not isinstance(self.constraints, LinearConstraintSet):
            matrix = sp.csr_matrix(self.constraints, dtype=float)
            self.constraints = LinearConstraintSet(matrix, [f"row:{i}" for i in range(matrix.shape[0])])
        if self.constraints.num_dofs != n:
            raise InvalidArgumentError(f"Constraints act on {self.constraints.num_dofs} dofs, problem has {n}")
        scale = float(abs(self.P).max()) if self.P.nnz else 0.0
        asym = float(abs(self.P - self.P.T).max()) if self.P.nnz else 0.0
        if asym > 1e-12 * max(1.0, scale):
            raise InvalidArgumentError(f"P is not symmetric (asymmetry {asym:.3e})")
        for dof in self.pinned:
            if not 0 <= dof < n:
                raise InvalidArgumentError(f"Pinned dof {dof} out of range")

    @property
    def n(self) -> int:
        return self.q.size

    @property
    def A(self) -> sp.csr_matrix:
        return self.constraints.A

    def objective(self, u: np.ndarray) -> float:
        return float(0.5 * u @ (self.P @ u) + self.q @ u + self.constant)


@dataclass
class QPSolution:
    """Solver output; multipliers follow lambda >= 0."""
    u: np.ndarray
    objective: float
    primal_residual: float
    dual_residual: float
    complementarity: float
    iterations: int
    status: str
    multipliers: np.ndarray
    tolerances: Tuple[float, float, float] = (0.0, 0.0, 0.0)
    polished: bool = False
    history: List[float] = field(default_factory=list)

    @property
    def optimal(self) -> bool:
        return self.status == STATUS_OPTIMAL

    def active_rows(self, tol: float = 1e-10) -> np.ndarray:
        scale = max(1.0, float(np.abs(self.multipliers).max())) if self.multipliers.size else 1.0
        return np.flatnonzero(self.multipliers > tol * scale)


@dataclass
class _Iterate:
    x: np.ndarray
    lam: np.ndarray
    prim: float
    dual: float
    comp: float
    eps: Tuple[float, float, float]

    @property
    def converged(self) -> bool:
        return self.prim <= self.eps[0] and self.dual <= self.eps[1] and self.comp <= self.eps[2]


def _kkt(P: sp.spmatrix, q: np.ndarray, A: sp.spmatrix, l: np.ndarray,
         x: np.ndarray, lam: np.ndarray, cfg: SolverConfig) -> _Iterate:
    """KKT residuals of (x, lambda) for min 1/2 x'Px + q'x s.t. Ax >= l."""
    Ax = A @ x
    Px = P @ x
    Atl = A.T @ lam
    prim = float(max(0.0, np.max(l - Ax))) if l.size else 0.0
    dual = float(np.max(np.abs(Px + q - Atl))) if q.size else 0.0
    comp = float(abs(lam @ (Ax - l))) if l.size else 0.0

    def norm(v):
        return float(np.max(np.abs(v))) if v.size else 0.0

    eps_prim = cfg.eps_abs + cfg.eps_rel * max(norm(Ax), norm(l))
    eps_dual = cfg.eps_abs + cfg.eps_rel * max(norm(Px), norm(Atl), norm(q))
    eps_comp = cfg.eps_abs + cfg.eps_rel * float(np.abs(lam) @ (np.abs(Ax) + np.abs(l))) if l.size else cfg.eps_abs
    if lam.size and lam.min() < -eps_dual:
        dual = max(dual, float(-lam.min()))
    return _Iterate(x, lam, prim, dual, comp, (eps_prim, eps_dual, eps_comp))


class _ADMMSolver:
    """Relaxed ADMM on the scaled problem min 1/2 x'Px + q'x s.t. Ax >= l."""

    def __init__(self, P: sp.spmatrix, q: np.ndarray, A: sp.spmatrix, l: np.ndarray, cfg: SolverConfig):
        self.P = sp.csc_matrix(P)
        self.q = q
        self.A = sp.csr_matrix(A)
        self.l = l
        self.cfg = cfg
        self.n = P.shape[0]
        self.m = A.shape[0]
        self.rho = cfg.rho
        self.history: List[float] = []
        self.best: Optional[_Iterate] = None
        self._scale_data()
        self._factor()

    def _scale_data(self) -> None:
        """Ruiz equilibration of the KKT matrix followed by cost scaling."""
        D = np.ones(self.n)
        E = np.ones(self.m)
        Ps, As = self.P, self.A
        for _ in range(self.cfg.scaling_iter):
            col_p = abs(Ps).max(axis=0).toarray().ravel()
            col_a = abs(As).max(axis=0).toarray().ravel()
            row_a = abs(As).max(axis=1).toarray().ravel()
            d = np.maximum(col_p, col_a)
            d = np.where(d < MIN_SCALING, 1.0, np.minimum(d, MAX_SCALING))
            e = np.where(row_a < MIN_SCALING, 1.0, np.minimum(row_a, MAX_SCALING))
            d = 1.0 / np.sqrt(d)
            e = 1.0 / np.sqrt(e)
            D *= d
            E *= e
            Ps = sp.diags(d) @ Ps @ sp.diags(d)
            As = sp.diags(e) @ As @ sp.diags(d)

        qs = D * self.q
        mean_col = float(np.mean(abs(Ps).max(axis=0).toarray())) if self.n else 1.0
        c = max(mean_col, float(np.max(np.abs(qs))) if qs.size else 0.0)
        c = 1.0 / min(max(c, MIN_SCALING), MAX_SCALING)

        self.D, self.E, self.c = D, E, c
        self.Ps = sp.csc_matrix(c * Ps)
        self.qs = c * qs
        self.As = sp.csr_matrix(As)
        self.ls = E * self.l

    def _factor(self) -> None:
        kkt = sp.bmat([
            [self.Ps + self.cfg.sigma * sp.eye(self.n), self.As.T],
            [self.As, -1.0 / self.rho * sp.eye(self.m)],
        ], format='csc')
        try:
            self.kkt_factor = spla.splu(kkt)
        except RuntimeError as e:
            raise SolverError(f"KKT factorization failed: {e}") from e

    def _unscale(self, x: np.ndarray, y: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Original variables and lambda = -y."""
        return self.D * x, -(self.E * y) / self.c

    def _is_primal_infeasible(self, dy: np.ndarray) -> bool:
        dyu = self.E * dy / self.c
        norm = float(np.max(np.abs(dyu)))
        if norm < 1e-30:
            return False
        eps = self.cfg.eps_prim_inf * norm
        return (float(np.max(np.abs(self.A.T @ dyu))) <= eps
                and float(np.max(dyu)) <= eps
                and float(self.l @ np.minimum(dyu, 0.0)) < -eps)

    def _update_rho(self, x: np.ndarray, z: np.ndarray, y: np.ndarray) -> None:
        Ax = self.As @ x
        Px = self.Ps @ x
        Aty = self.As.T @ y
        prim = np.max(np.abs(Ax - z)) / max(np.max(np.abs(Ax)), np.max(np.abs(z)), 1e-30)
        dual = np.max(np.abs(Px + self.qs + Aty)) / max(np.max(np.abs(Px)), np.max(np.abs(Aty)),
                                                        np.max(np.abs(self.qs)), 1e-30)
        new_rho = self.rho * math.sqrt(prim / max(dual, 1e-30))
        new_rho = min(max(new_rho, RHO_MIN), RHO_MAX)
        tol = self.cfg.adaptive_rho_tolerance
        if new_rho > self.rho * tol or new_rho < self.rho / tol:
            logger.debug(f"rho {self.rho:.3e} -> {new_rho:.3e}")
            self.rho = new_rho
            self._factor()

    def _solve_reduced(self, active: np.ndarray) -> Optional[Tuple[np.ndarray, np.ndarray]]:
        """Regularized equality-constrained KKT solve with iterative refinement."""
        delta = self.cfg.polish_delta
        Aa = self.As[active]
        k = active.size
        if k:
            kkt = sp.bmat([[self.Ps + delta * sp.eye(self.n), Aa.T], [Aa, -delta * sp.eye(k)]], format='csc')
        else:
            kkt = sp.csc_matrix(self.Ps + delta * sp.eye(self.n))
        rhs = np.concatenate([-self.qs, self.ls[active]])
        try:
            factor = spla.splu(kkt)
        except RuntimeError as e:
            logger.debug(f"Polish factorization failed: {e}")
            return None
        sol = factor.solve(rhs)
        for _ in range(self.cfg.polish_refine_iter):
            x, w = sol[:self.n], sol[self.n:]
            residual = rhs - np.concatenate([self.Ps @ x + Aa.T @ w, Aa @ x])
            sol = sol + factor.solve(residual)
        if not np.all(np.isfinite(sol)):
            return None
        return sol[:self.n], sol[self.n:]

    def _record(self, candidate: _Iterate) -> None:
        """Keep the best feasible polished point; history is nonincreasing."""
        if candidate.prim > candidate.eps[0]:
            return
        x = candidate.x
        objective = float(0.5 * x @ (self.P @ x) + self.q @ x)
        if not self.history or objective <= self.history[-1] + 1e-12 * max(1.0, abs(self.history[-1])):
            self.history.append(objective)
            self.best = candidate

    def polish(self, x: np.ndarray, z: np.ndarray, y: np.ndarray) -> Optional[_Iterate]:
        """Primal-dual active-set passes started from the ADMM guess."""
        active_mask = (z - self.ls) < -y
        seen = set()
        last = None
        for _ in range(self.cfg.polish_passes):
            key = active_mask.tobytes()
            if key in seen:
                break
            seen.add(key)
            active = np.flatnonzero(active_mask)
            solved = self._solve_reduced(active)
            if solved is None:
                break
            xs, w = solved
            lam_s = np.zeros(self.m)
            lam_s[active] = -w
            xu, lam_u = self._unscale(xs, -lam_s)
            candidate = _kkt(self.P, self.q, self.A, self.l, xu, np.maximum(lam_u, 0.0), self.cfg)
            self._record(candidate)
            last = candidate
            if candidate.converged:
                return candidate
            slack = self.As @ xs - self.ls
            scale = max(1.0, float(np.max(np.abs(lam_s))), float(np.max(np.abs(self.ls))))
            new_mask = (lam_s - slack) > 1e-13 * scale
            if np.array_equal(new_mask, active_mask):
                break
            active_mask = new_mask
        return last

    def run(self) -> Tuple[_Iterate, int, str]:
        cfg = self.cfg
        x = np.zeros(self.n)
        z = np.zeros(self.m)
        y = np.zeros(self.m)

        if cfg.polish:
            polished = self.polish(x, np.maximum(z, self.ls), y)
            if polished is not None and polished.converged:
                return polished, 0, STATUS_OPTIMAL

        next_polish = cfg.first_polish
        current = None
        for k in range(1, cfg.max_iter + 1):
            x_prev, z_prev, y_prev = x, z, y

            rhs = np.concatenate([cfg.sigma * x_prev - self.qs, z_prev - y_prev / self.rho])
            sol = self.kkt_factor.solve(rhs)
            x_tilde = sol[:self.n]
            z_tilde = z_prev + (sol[self.n:] - y_prev) / self.rho

            x = cfg.alpha * x_tilde + (1.0 - cfg.alpha) * x_prev
            z_relaxed = cfg.alpha * z_tilde + (1.0 - cfg.alpha) * z_prev
            z = np.maximum(z_relaxed + y_prev / self.rho, self.ls)
            y = y_prev + self.rho * (z_relaxed - z)

            if k % cfg.check_interval == 0 or k == cfg.max_iter:
                xu, lam = self._unscale(x, y)
                current = _kkt(self.P, self.q, self.A, self.l, xu, lam, cfg)
                logger.debug(f"iter {k}: prim={current.prim:.3e} dual={current.dual:.3e} "
                             f"comp={current.comp:.3e} rho={self.rho:.3e}")
                if current.converged:
                    if cfg.polish:
                        polished = self.polish(x, z, y)
                        if polished is not None and polished.converged:
                            return polished, k, STATUS_OPTIMAL
                    return current, k, STATUS_OPTIMAL
                if self._is_primal_infeasible(y - y_prev):
                    logger.warning(f"Primal infeasibility certificate found at iteration {k}")
                    return current, k, STATUS_INFEASIBLE

            if cfg.adaptive_rho_interval and k % cfg.adaptive_rho_interval == 0:
                self._update_rho(x, z, y)

            if cfg.polish and k >= next_polish:
                next_polish *= 2
                polished = self.polish(x, z, y)
                if polished is not None and polished.converged:
                    return polished, k, STATUS_OPTIMAL

        if current is None:
            xu, lam = self._unscale(x, y)
            current = _kkt(self.P, self.q, self.A, self.l, xu, lam, cfg)
        logger.warning(f"Iteration cap {cfg.max_iter} reached (prim={current.prim:.3e}, dual={current.dual:.3e})")
        return current, cfg.max_iter, STATUS_MAX_ITER


def _solve_unconstrained(P: sp.spmatrix, q: np.ndarray, cfg: SolverConfig) -> np.ndarray:
    try:
        return spla.splu(sp.csc_matrix(P)).solve(-q)
    except RuntimeError as e:
        raise SolverError(f"Unconstrained system is singular: {e}") from e


def solve_qp(problem: QPProblem, cfg: Optional[SolverConfig] = None) -> QPSolution:
    """
    Solve a convex QP.

    Args:
        problem: Objective, constraint rows and pinned dofs
        cfg: Solver configuration (defaults when None)

    Returns:
        QPSolution; status is "optimal", "max-iter" or "infeasible"
    """
    cfg = cfg or SolverConfig()
    n = problem.n
    A = problem.A
    m = A.shape[0]

    pinned_idx = np.array(sorted(problem.pinned), dtype=np.int64)
    pinned_val = np.array([problem.pinned[i] for i in pinned_idx], dtype=float)
    free_mask = np.ones(n, dtype=bool)
    free_mask[pinned_idx] = False
    free_idx = np.flatnonzero(free_mask)

    P_free = problem.P[free_idx][:, free_idx]
    q_free = problem.q[free_idx]
    lower = np.zeros(m)
    if pinned_idx.size:
        q_free = q_free + problem.P[free_idx][:, pinned_idx] @ pinned_val
        lower = -(A[:, pinned_idx] @ pinned_val)
    A_free = sp.csr_matrix(A[:, free_idx])
    A_free.eliminate_zeros()

    # Rows touching only pinned dofs are checks, not constraints
    fixed_rows = np.diff(A_free.indptr) == 0
    kept = np.flatnonzero(~fixed_rows)
    fixed_violation = float(max(0.0, np.max(lower[fixed_rows]))) if fixed_rows.any() else 0.0
    A_red = A_free[kept]
    l_red = lower[kept]

    u = np.zeros(n)
    u[pinned_idx] = pinned_val
    multipliers = np.zeros(m)
    history: List[float] = []
    polished = False

    if free_idx.size == 0:
        iterate = _kkt(P_free, q_free, A_red, l_red, np.zeros(0), np.zeros(kept.size), cfg)
        iterations, status = 0, STATUS_OPTIMAL
    elif kept.size == 0:
        x = _solve_unconstrained(P_free, q_free, cfg)
        iterate = _kkt(P_free, q_free, A_red, l_red, x, np.zeros(0), cfg)
        iterations, status = 0, STATUS_OPTIMAL if iterate.converged else STATUS_MAX_ITER
    else:
        solver = _ADMMSolver(P_free, q_free, A_red, l_red, cfg)
        iterate, iterations, status = solver.run()
        history = solver.history
        polished = solver.best is iterate
        if status == STATUS_MAX_ITER and solver.best is not None and solver.best.prim <= solver.best.eps[0]:
            iterate = solver.best
            polished = True

    if fixed_violation > cfg.eps_abs:
        logger.warning(f"Rows on pinned dofs only are violated by {fixed_violation:.3e}")
        status = STATUS_INFEASIBLE

    u[free_idx] = iterate.x
    multipliers[kept] = iterate.lam
    prim = max(iterate.prim, fixed_violation)
    if status == STATUS_OPTIMAL and not iterate.converged:
        status = STATUS_MAX_ITER

    solution = QPSolution(
        u=u,
        objective=problem.objective(u),
        primal_residual=prim,
        dual_residual=iterate.dual,
        complementarity=iterate.comp,
        iterations=iterations,
        status=status,
        multipliers=multipliers,
        tolerances=iterate.eps,
        polished=polished,
        history=list(history),
    )
    logger.debug(f"QP n={n} m={m} pinned={pinned_idx.size}: {status} after {iterations} iterations, "
                 f"objective {solution.objective:.12g}")
    return solution


# ----------------------------------------------------------------------
# Finite element problems
# ----------------------------------------------------------------------

def _check_rows(mesh: Mesh, degree: int, constraint_set: Optional[LinearConstraintSet]) -> LinearConstraintSet:
    size = fem_core.dof_count(mesh, degree)
    if constraint_set is None:
        return LinearConstraintSet.empty(size, degree)
    if constraint_set.num_dofs != size:
        raise InvalidArgumentError(f"Constraint set acts on {constraint_set.num_dofs} dofs, P{degree} space has {size}")
    return constraint_set


def projection_h10_problem(mesh: Mesh, degree: int, constraint_set: Optional[LinearConstraintSet],
                           f: fem_core.ScalarField, g: fem_core.ScalarField) -> QPProblem:
    """Minimize integral |grad u|^2/2 + f u with u = g on the boundary."""
    P = fem_core.assemble_stiffness(mesh, degree)
    q = fem_core.assemble_load(mesh, degree, f)
    boundary = np.flatnonzero(fem_core.boundary_dof_mask(mesh, degree))
    values = fem_core.evaluate_field(g, fem_core.dof_coordinates(mesh, degree)[boundary])
    pinned = {int(i): float(v) for i, v in zip(boundary, values)}
    return QPProblem(P, q, _check_rows(mesh, degree, constraint_set), pinned)


def solve_projection_h10(mesh: Mesh, degree: int, constraint_set: Optional[LinearConstraintSet],
                         f: fem_core.ScalarField, g: fem_core.ScalarField,
                         cfg: Optional[SolverConfig] = None) -> QPSolution:
    return solve_qp(projection_h10_problem(mesh, degree, constraint_set, f, g), cfg)


def l2_projection_problem(mesh: Mesh, target: fem_core.ScalarField,
                          constraint_set: Optional[LinearConstraintSet] = None) -> QPProblem:
    """Objective (u - I t)' M (u - I t) over P1 functions."""
    M = fem_core.assemble_mass(mesh, 1)
    t = fem_core.interpolate(mesh, 1, target).dofs
    Mt = M @ t
    return QPProblem(2.0 * M, -2.0 * Mt, _check_rows(mesh, 1, constraint_set), constant=float(t @ Mt))


def min_l2_distance_convex(mesh: Mesh, target: fem_core.ScalarField, cfg: Optional[SolverConfig] = None,
                           constraint_set: Optional[LinearConstraintSet] = None) -> Tuple[QPSolution, float]:
    """
    Closest conformal-convex P1 function to a target.

    Returns:
        (solution, L2 distance between the minimizer and the target by quadrature)
    """
    if constraint_set is None:
        constraint_set = conformal_convexity_constraints(mesh, 1)
    solution = solve_qp(l2_projection_problem(mesh, target, constraint_set), cfg)
    distance = fem_core.l2_distance(fem_core.FEFunction(mesh, 1, solution.u), target)
    return solution, distance


def monopolist_problem(mesh: Mesh, alpha: float, C: Optional[np.ndarray] = None,
                       constraint_set: Optional[LinearConstraintSet] = None) -> QPProblem:
    """
    J(u) = integral 1/2 grad u' C grad u - x . grad u + (1 - alpha) u.
    At alpha = 1 the lower-left corner is pinned to zero.
    """
    if not 0.0 <= alpha <= 1.0:
        raise InvalidArgumentError(f"alpha must lie in [0, 1], got {alpha!r}")
    C = np.eye(2) if C is None else np.asarray(C, dtype=float)
    if C.shape != (2, 2) or np.linalg.eigvalsh(0.5 * (C + C.T)).min() <= 0.0:
        raise InvalidArgumentError("C must be a 2x2 SPD matrix")
    P = fem_core.assemble_stiffness(mesh, 1, C)
    q = -fem_core.assemble_vector_load(mesh, 1, lambda x, y: (x, y))
    if alpha < 1.0:
        q = q + (1.0 - alpha) * fem_core.assemble_load(mesh, 1, lambda x, y: np.ones_like(x))
    pinned = {}
    if alpha == 1.0:
        pinned[mesh.find_vertex(mesh.domain.lower_left)] = 0.0
    if constraint_set is None:
        constraint_set = monopolist_constraints(mesh)
    return QPProblem(P, q, _check_rows(mesh, 1, constraint_set), pinned)


def monopolist_exact(C: Optional[np.ndarray], anchor: np.ndarray) -> Callable[[np.ndarray, np.ndarray], np.ndarray]:
    """Closed-form alpha = 1 minimizer x'C^-1 x/2 vanishing at ``anchor``."""
    C = np.eye(2) if C is None else np.asarray(C, dtype=float)
    m = np.linalg.inv(C)
    x0, y0 = float(anchor[0]), float(anchor[1])
    offset = 0.5 * (m[0, 0] * x0 * x0 + 2.0 * m[0, 1] * x0 * y0 + m[1, 1] * y0 * y0)

    def u_exact(x, y):
        return 0.5 * (m[0, 0] * x * x + 2.0 * m[0, 1] * x * y + m[1, 1] * y * y) - offset

    return u_exact
