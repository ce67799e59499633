"""Single Dirichlet solves: operator(D2 u, x) = f in the interior, u = phi
on the boundary.

Linear operators (Laplacian, diagonal-coefficient) go through one sparse LU
factorization per (operator, grid) pair, cached so that repeated solves in
a fixed-point loop reuse it. The Pucci operators use policy iteration:
freeze the extremal direction pair and curvature weights node by node,
solve the resulting linear problem, re-extremalize, and stop when the
nonlinear residual is below tolerance. Each frozen policy yields an
M-matrix, so every linear step is well posed.

The right-hand side is clamped to its positive part at solve time; all
sources in this package are powers of positive parts anyway.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .errors import BadEllipticityConstantsError, NonFiniteIterateError
from .grid import BoundaryData, Grid, ScalarField
from .operators import FRAMES, OperatorSpec, apply_operator_field

COEFF_RTOL = 1e-12


@dataclass(frozen=True)
class ScalarProblem:
    """One Dirichlet subproblem: operator, source field, boundary trace."""

    operator: OperatorSpec
    rhs: ScalarField
    boundary: BoundaryData

    def __post_init__(self):
        if self.rhs.grid != self.boundary.grid:
            raise ValueError("rhs and boundary data live on different grids")
        if self.operator.kind == "diagonal":
            _check_diagonal_coeffs(self.operator, self.grid)

    @property
    def grid(self) -> Grid:
        return self.rhs.grid


@dataclass
class SolveReport:
    iterations: int
    residual: float
    converged: bool


def _check_diagonal_coeffs(op: OperatorSpec, grid: Grid) -> None:
    for k, coeff in enumerate(op.coeffs):
        a_k = np.asarray(coeff(*grid.mesh), dtype=float)
        lo, hi = float(np.min(a_k)), float(np.max(a_k))
        slack = COEFF_RTOL * max(1.0, op.Lam)
        if lo < op.lam - slack or hi > op.Lam + slack:
            raise BadEllipticityConstantsError(
                f"axis-{k} coefficient range [{lo}, {hi}] leaves "
                f"[{op.lam}, {op.Lam}]")


def default_scalar_tolerance(rhs: ScalarField, boundary: BoundaryData) -> float:
    return 1e-10 * max(1.0, rhs.sup_norm() + boundary.sup())


def _axis_strides(grid: Grid):
    """Flat-index stride of the +1 neighbor along each axis."""
    if grid.dimension == 1:
        return (1,)
    return (grid.shape[1], 1)


def _diagonal_coefficient_arrays(op: OperatorSpec, grid: Grid):
    out = []
    for k in range(grid.dimension):
        if op.kind == "laplacian":
            out.append(np.ones(grid.n_nodes))
        else:
            a_k = np.asarray(op.coeffs[k](*grid.mesh), dtype=float)
            if a_k.shape == ():
                a_k = np.full(grid.shape, float(a_k))
            out.append(a_k.reshape(-1))
    return out


@lru_cache(maxsize=16)
def _interior_linear_system(op: OperatorSpec, grid: Grid):
    """Interior stencil matrix A and boundary-neighbor terms for a linear
    operator, so that the discrete equation reads
    A u_int + (boundary terms) = rhs_int.

    Returns (A, (rows, boundary_flats, weights)); the triple moves known
    boundary values to the right-hand side.
    """
    interior = grid.interior_indices
    local = np.full(grid.n_nodes, -1, dtype=int)
    local[interior] = np.arange(interior.size)
    strides = _axis_strides(grid)
    coeffs = _diagonal_coefficient_arrays(op, grid)
    h2 = grid.h ** 2
    interior_flag = grid.interior_mask.reshape(-1)

    rows, cols, vals = [], [], []
    b_rows, b_flats, b_weights = [], [], []
    diag = np.zeros(interior.size)
    for k, stride in enumerate(strides):
        w = coeffs[k][interior] / h2
        diag -= 2.0 * w
        for sign in (+1, -1):
            nb = interior + sign * stride
            is_int = interior_flag[nb]
            rows.extend(np.arange(interior.size)[is_int])
            cols.extend(local[nb[is_int]])
            vals.extend(w[is_int])
            b_rows.extend(np.arange(interior.size)[~is_int])
            b_flats.extend(nb[~is_int])
            b_weights.extend(w[~is_int])
    rows.extend(np.arange(interior.size))
    cols.extend(np.arange(interior.size))
    vals.extend(diag)
    A = sp.csc_matrix((vals, (rows, cols)),
                      shape=(interior.size, interior.size))
    return A, (np.asarray(b_rows, dtype=int), np.asarray(b_flats, dtype=int),
               np.asarray(b_weights))


@lru_cache(maxsize=16)
def _linear_factorization(op: OperatorSpec, grid: Grid):
    A, bdry = _interior_linear_system(op, grid)
    return splu(A), bdry


def _solve_linear(problem: ScalarProblem, rhs_values: np.ndarray) -> np.ndarray:
    grid = problem.grid
    lu, (b_rows, b_flats, b_weights) = _linear_factorization(problem.operator, grid)
    interior = grid.interior_indices
    full_bdry = problem.boundary.as_full().reshape(-1)
    b = rhs_values.reshape(-1)[interior].copy()
    np.subtract.at(b, b_rows, b_weights * full_bdry[b_flats])
    x = lu.solve(b)
    u = full_bdry.copy()
    u[interior] = x
    return u.reshape(grid.shape)


def _pucci_policy(op: OperatorSpec, field: ScalarField):
    """Current extremal frame and direction weights per interior node."""
    from .operators import directional_second_difference

    grid = field.grid
    minus = op.kind == "pucci_minus"
    if grid.dimension == 1:
        d2 = directional_second_difference(field, (1,)).reshape(-1)
        d2i = d2[grid.interior_indices]
        if minus:
            w = np.where(d2i > 0, op.lam, op.Lam)
        else:
            w = np.where(d2i > 0, op.Lam, op.lam)
        return None, [((1,), w)]

    frames = FRAMES[op.directions]
    interior = grid.interior_indices
    frame_vals = np.full((len(frames), interior.size), np.nan)
    frame_w = []
    for fi, (off_a, off_b) in enumerate(frames):
        d2a = directional_second_difference(field, off_a).reshape(-1)[interior]
        d2b = directional_second_difference(field, off_b).reshape(-1)[interior]
        if minus:
            wa = np.where(d2a > 0, op.lam, op.Lam)
            wb = np.where(d2b > 0, op.lam, op.Lam)
        else:
            wa = np.where(d2a > 0, op.Lam, op.lam)
            wb = np.where(d2b > 0, op.Lam, op.lam)
        frame_vals[fi] = wa * d2a + wb * d2b
        frame_w.append((wa, wb))
    masked = np.where(np.isnan(frame_vals), np.inf if minus else -np.inf,
                      frame_vals)
    best = np.argmin(masked, axis=0) if minus else np.argmax(masked, axis=0)
    return best, frame_w


def _policy_system(op: OperatorSpec, grid: Grid, frame_choice, frame_w):
    """Interior matrix + boundary terms of one frozen Pucci policy."""
    interior = grid.interior_indices
    local = np.full(grid.n_nodes, -1, dtype=int)
    local[interior] = np.arange(interior.size)
    interior_flag = grid.interior_mask.reshape(-1)
    h2 = grid.h ** 2
    n = interior.size

    rows, cols, vals = [], [], []
    b_rows, b_flats, b_weights = [], [], []
    diag = np.zeros(n)

    def add_direction(node_sel, offset, w):
        if grid.dimension == 1:
            stride = offset[0]
            scale = (offset[0] * grid.h) ** 2
        else:
            stride = offset[0] * grid.shape[1] + offset[1]
            scale = (offset[0] ** 2 + offset[1] ** 2) * h2
        weight = w / scale
        idx = np.flatnonzero(node_sel)
        diag[idx] -= 2.0 * weight[idx]
        for sign in (+1, -1):
            nb = interior[idx] + sign * stride
            is_int = interior_flag[nb]
            rows.extend(idx[is_int])
            cols.extend(local[nb[is_int]])
            vals.extend(weight[idx][is_int])
            b_rows.extend(idx[~is_int])
            b_flats.extend(nb[~is_int])
            b_weights.extend(weight[idx][~is_int])

    if frame_choice is None:
        (offset, w), = frame_w
        add_direction(np.ones(n, dtype=bool), offset, w)
    else:
        frames = FRAMES[op.directions]
        for fi, (off_a, off_b) in enumerate(frames):
            sel = frame_choice == fi
            if not np.any(sel):
                continue
            wa, wb = frame_w[fi]
            add_direction(sel, off_a, wa)
            add_direction(sel, off_b, wb)

    rows.extend(np.arange(n))
    cols.extend(np.arange(n))
    vals.extend(diag)
    A = sp.csc_matrix((vals, (rows, cols)), shape=(n, n))
    return A, (np.asarray(b_rows, dtype=int), np.asarray(b_flats, dtype=int),
               np.asarray(b_weights))


def _solve_policy(op: OperatorSpec, grid: Grid, boundary: BoundaryData,
                  rhs_values: np.ndarray, frame_choice, frame_w) -> np.ndarray:
    A, (b_rows, b_flats, b_weights) = _policy_system(op, grid, frame_choice, frame_w)
    interior = grid.interior_indices
    full_bdry = boundary.as_full().reshape(-1)
    b = rhs_values.reshape(-1)[interior].copy()
    np.subtract.at(b, b_rows, b_weights * full_bdry[b_flats])
    x = splu(A).solve(b)
    u = full_bdry.copy()
    u[interior] = x
    return u.reshape(grid.shape)


def solve_dirichlet(problem: ScalarProblem, tol: float | None = None,
                    max_iter: int = 100) -> tuple[ScalarField, SolveReport]:
    """Solve operator(D2 u, x) = rhs_+ with u = phi on the boundary.

    Returns the field and a report; a non-converged run returns the best
    iterate with ``converged=False`` rather than raising.
    """
    if tol is None:
        tol = default_scalar_tolerance(problem.rhs, problem.boundary)
    if tol <= 0:
        raise ValueError("tol must be positive")
    grid = problem.grid
    rhs_plus = np.maximum(problem.rhs.values, 0.0)

    def residual_of(u_vals: np.ndarray) -> float:
        fld = ScalarField(grid, u_vals)
        diff = apply_operator_field(problem.operator, fld) - rhs_plus
        return float(np.max(np.abs(diff[grid.interior_mask])))

    if problem.operator.is_linear:
        u = _solve_linear(problem, rhs_plus)
        if not np.all(np.isfinite(u)):
            raise NonFiniteIterateError("linear solve produced non-finite values")
        res = residual_of(u)
        its = 1
        # a round of iterative refinement if roundoff left us above tol
        while res > tol and its < max_iter:
            defect = np.zeros(grid.shape)
            fld = ScalarField(grid, u)
            defect_full = rhs_plus - apply_operator_field(problem.operator, fld)
            defect[grid.interior_mask] = defect_full[grid.interior_mask]
            corr_problem = ScalarProblem(problem.operator, ScalarField(grid, defect),
                                         BoundaryData.zero(grid))
            u = u + _solve_linear(corr_problem, defect)
            res = residual_of(u)
            its += 1
        return ScalarField(grid, u), SolveReport(its, res, bool(res <= tol))

    # Pucci: policy iteration started from the mean-coefficient Laplacian
    mean = 0.5 * (problem.operator.lam + problem.operator.Lam)
    lap_problem = ScalarProblem(OperatorSpec("laplacian"),
                                problem.rhs, problem.boundary)
    u = _solve_linear(lap_problem, rhs_plus / mean)
    best_u, best_res = u, np.inf
    for it in range(1, max_iter + 1):
        if not np.all(np.isfinite(u)):
            raise NonFiniteIterateError("policy iterate picked up NaN/Inf")
        res = residual_of(u)
        if res < best_res:
            best_u, best_res = u, res
        if res <= tol:
            return ScalarField(grid, u), SolveReport(it, res, True)
        frame_choice, frame_w = _pucci_policy(problem.operator,
                                              ScalarField(grid, u))
        u = _solve_policy(problem.operator, grid, problem.boundary, rhs_plus,
                          frame_choice, frame_w)
    res = residual_of(best_u)
    return ScalarField(grid, best_u), SolveReport(max_iter, res, bool(res <= tol))


def maximum_principle_check(field: ScalarField, boundary: BoundaryData,
                            rhs: ScalarField) -> bool:
    """True iff the field's maximum sits on the boundary (to 1e-10*scale).

    Requires rhs >= 0 on the interior, the regime where the discrete
    maximum principle applies.
    """
    interior_rhs = rhs.values[field.grid.interior_mask]
    if np.any(interior_rhs < 0):
        raise ValueError("maximum_principle_check needs rhs >= 0 on the interior")
    scale = max(1.0, field.sup_norm())
    return bool(np.max(field.values) <= np.max(boundary.values) + 1e-10 * scale)
