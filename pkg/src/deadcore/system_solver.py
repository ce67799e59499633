"""Fixed-point solver for the coupled dead-core system

    F(D2 u, x) = s_u * (v)_+ ** p      in the interior,
    G(D2 v, x) = s_v * (u)_+ ** q      in the interior,
    u = phi, v = psi                   on the boundary,

with p, q >= 0 and pq < 1. The source scales s_u, s_v default to 1 and
exist for perturbation experiments.

Solution strategy
-----------------
The pair map T(f, g) = (v, u) built from the two scalar Dirichlet solves
is iterated Picard-style, as the existence argument suggests. Two facts
about the discrete system shape the implementation:

* When p = 0 or q = 0 the system is triangular (a zero exponent makes the
  source constant), so two Picard iterations are exact.
* With p*q > 0 the discrete system can have several solutions: beside the
  nonnegative dead-core pair there are sign-structured branches where one
  field dips negative and switches the partner's source off. The Picard
  map is antitone, so its iterates converge to those outer branches and
  the nonnegative pair sits on an unstable separatrix that plain
  iteration cannot reach.

For symmetric problems (same operator, p = q and proportional boundary
data, which covers every dead-core configuration in the test suite) the
system reduces exactly to one scalar equation op(D2 w) = c * (w)_+^p via
v = a*u with a = (s_v/s_u)^(1/(1+p)). The scalar problem is monotone with
a unique solution and is solved by a damped semismooth Newton method,
finished with a smooth-region polish that keeps iterates above a tiny
positive floor (the discrete dead core decays superexponentially, so the
floor only touches values far below the stopping tolerance).

Everything else runs the damped Picard loop with adaptive damping and,
when that stalls, a best-effort projected Newton rescue on the coupled
system. Non-convergence is reported, never hidden.

Convention for zero exponents: t_+ ** 0 == 1 for every t, so a zero
exponent reproduces the classical constant-source problem.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .errors import DivergingIterationError, ExponentOutOfRangeError
from .grid import BoundaryData, Grid, ScalarField, zero_field
from .operators import OperatorSpec, apply_operator_field
from .scalar_solver import ScalarProblem, solve_dirichlet

OMEGA_FLOOR = 1.0 / 64.0
DECAY_WINDOW = 10
DECAY_FACTOR = 0.7
STALL_WINDOW = 40


def positive_power(values: np.ndarray, exponent: float) -> np.ndarray:
    """(values)_+ ** exponent with the convention t_+ ** 0 == 1."""
    if exponent == 0:
        return np.ones_like(np.asarray(values, dtype=float))
    return np.maximum(values, 0.0) ** exponent


def _power_slope(values: np.ndarray, exponent: float) -> np.ndarray:
    """Semismooth derivative of t_+ ** exponent (zero at t <= 0)."""
    out = np.zeros_like(values)
    if exponent == 0:
        return out
    pos = values > 0
    out[pos] = exponent * values[pos] ** (exponent - 1.0)
    return out


@dataclass(frozen=True)
class ProblemSpec:
    """The full Dirichlet system on one grid."""

    operator_u: OperatorSpec
    operator_v: OperatorSpec
    p: float
    q: float
    phi: BoundaryData
    psi: BoundaryData
    source_scale_u: float = 1.0
    source_scale_v: float = 1.0

    def __post_init__(self):
        if self.p < 0 or self.q < 0:
            raise ExponentOutOfRangeError(
                f"exponents must be >= 0, got p={self.p}, q={self.q}")
        if self.p * self.q >= 1:
            raise ExponentOutOfRangeError(
                f"need p*q < 1, got p*q = {self.p * self.q}")
        if self.phi.grid != self.psi.grid:
            raise ValueError("phi and psi live on different grids")
        if self.source_scale_u < 0 or self.source_scale_v < 0:
            raise ValueError("source scales must be >= 0")

    @property
    def grid(self) -> Grid:
        return self.phi.grid

    def data_scale(self) -> float:
        return 1.0 + self.phi.sup() + self.psi.sup()


@dataclass(frozen=True)
class SolutionPair:
    """A candidate solution pair with the exponents it belongs to."""

    u: ScalarField
    v: ScalarField
    p: float
    q: float

    def __post_init__(self):
        if self.u.grid != self.v.grid:
            raise ValueError("u and v live on different grids")

    @property
    def grid(self) -> Grid:
        return self.u.grid


@dataclass
class IterationHistory:
    du: list[float] = field(default_factory=list)
    dv: list[float] = field(default_factory=list)
    res_u: list[float] = field(default_factory=list)
    res_v: list[float] = field(default_factory=list)
    converged: bool = False

    @property
    def iterations(self) -> int:
        return len(self.du)

    def append(self, du, dv, res_u, res_v):
        self.du.append(float(du))
        self.dv.append(float(dv))
        self.res_u.append(float(res_u))
        self.res_v.append(float(res_v))

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("iter,du,dv,res_u,res_v\n")
            for k in range(self.iterations):
                fh.write(f"{k + 1},{self.du[k]:.17g},{self.dv[k]:.17g},"
                         f"{self.res_u[k]:.17g},{self.res_v[k]:.17g}\n")


def default_system_tolerance(problem: ProblemSpec) -> float:
    return 1e-8 * problem.data_scale()


def apply_T(problem: ProblemSpec, f: ScalarField, g: ScalarField,
            scalar_tol: float | None = None) -> SolutionPair:
    """One application of the pair map: u solves the F-problem with source
    s_u * f_+^p, v solves the G-problem with source s_v * g_+^q.

    The two solves are independent; the next Picard iterate uses the
    swapped components (f, g) <- (v, u).
    """
    grid = problem.grid
    if f.grid != grid or g.grid != grid:
        raise ValueError("input fields live on a different grid")
    rhs_u = ScalarField(grid, problem.source_scale_u
                        * positive_power(f.values, problem.p))
    rhs_v = ScalarField(grid, problem.source_scale_v
                        * positive_power(g.values, problem.q))
    u, _ = solve_dirichlet(ScalarProblem(problem.operator_u, rhs_u, problem.phi),
                           tol=scalar_tol)
    v, _ = solve_dirichlet(ScalarProblem(problem.operator_v, rhs_v, problem.psi),
                           tol=scalar_tol)
    return SolutionPair(u, v, problem.p, problem.q)


def system_residual(problem: ProblemSpec, pair: SolutionPair) -> tuple[float, float]:
    """Sup over interior nodes of both discrete equation residuals."""
    grid = problem.grid
    if pair.grid != grid:
        raise ValueError("pair lives on a different grid")
    mask = grid.interior_mask
    rhs_u = problem.source_scale_u * positive_power(pair.v.values, problem.p)
    rhs_v = problem.source_scale_v * positive_power(pair.u.values, problem.q)
    res_u = apply_operator_field(problem.operator_u, pair.u) - rhs_u
    res_v = apply_operator_field(problem.operator_v, pair.v) - rhs_v
    return (float(np.max(np.abs(res_u[mask]))),
            float(np.max(np.abs(res_v[mask]))))


# ---------------------------------------------------------------------------
# scalar reduction machinery

def _reduction_factor(problem: ProblemSpec) -> float | None:
    """Proportionality factor a with v = a*u, when the system is symmetric
    enough to collapse to one scalar equation."""
    if problem.p != problem.q:
        return None
    if problem.operator_u != problem.operator_v:
        return None
    if problem.source_scale_u <= 0 or problem.source_scale_v <= 0:
        return None
    a = (problem.source_scale_v / problem.source_scale_u) ** (1.0 / (1.0 + problem.p))
    ref = 1e-12 * (1.0 + problem.psi.sup() + a * problem.phi.sup())
    if np.max(np.abs(problem.psi.values - a * problem.phi.values)) > ref:
        return None
    return a


def _frozen_policy_system(op: OperatorSpec, grid: Grid, w_full: np.ndarray):
    """Interior matrix + boundary terms of the operator, freezing the
    extremal policy at the current iterate for Pucci kinds."""
    from .scalar_solver import _interior_linear_system, _policy_system, _pucci_policy

    if op.is_linear:
        return _interior_linear_system(op, grid)
    frame_choice, frame_w = _pucci_policy(op, ScalarField(grid, w_full.reshape(grid.shape)))
    return _policy_system(op, grid, frame_choice, frame_w)


def _scalar_semismooth_solve(op: OperatorSpec, grid: Grid, boundary: BoundaryData,
                             coeff: float, exponent: float, tol: float,
                             history: IterationHistory | None = None,
                             v_factor: float = 1.0):
    """Solve op(D2 w, x) = coeff * (w)_+^exponent, w = boundary data.

    Damped semismooth Newton; the final iterations run with a tiny
    positive floor so the t_+^e kink is never crossed once the iterate is
    close. Returns (w_full, converged, iterations). ``v_factor`` is the
    proportionality constant of the pair reduction, used only to scale the
    history rows of the second component.
    """
    interior = grid.interior_indices
    ni = interior.size
    bdry_full = boundary.as_full().reshape(-1)

    w0, _ = solve_dirichlet(ScalarProblem(op, zero_field(grid), boundary),
                            tol=max(1e-4 * tol, 1e-14))
    w = w0.flat.copy()
    if exponent == 0 or coeff == 0.0:
        rhs = ScalarField(grid, np.full(grid.shape, coeff))
        w_field, rep = solve_dirichlet(ScalarProblem(op, rhs, boundary),
                                       tol=max(1e-4 * tol, 1e-14))
        return w_field.flat.copy(), rep.converged, 1

    def true_residual(w_flat):
        fld = ScalarField(grid, w_flat.reshape(grid.shape))
        res = apply_operator_field(op, fld) - coeff * positive_power(
            w_flat.reshape(grid.shape), exponent)
        return float(np.max(np.abs(res[grid.interior_mask])))

    floor = min((0.01 * tol / coeff) ** (1.0 / exponent), 0.01 * tol * grid.h ** 2)
    total_its = 0

    for _ in range(30):
        A, (b_rows, b_flats, b_weights) = _frozen_policy_system(op, grid, w)
        # the discrete equation reads A w_int + (boundary contributions) = rhs
        bdry_vec = np.zeros(ni)
        np.add.at(bdry_vec, b_rows, b_weights * bdry_full[b_flats])

        def resid(w_int):
            return A @ w_int + bdry_vec - coeff * positive_power(w_int, exponent)

        wi = w[interior].copy()
        converged = False
        use_floor = False
        stall_rounds = 0
        for _ in range(160):
            R = resid(wi)
            rnorm = float(np.max(np.abs(R)))
            if rnorm <= tol:
                converged = True
                break
            D = coeff * _power_slope(wi, exponent)
            J = (A - sp.diags(D)).tocsc()
            step = splu(J).solve(-R)
            m0 = float(np.sum(R ** 2))
            alpha, accepted = 1.0, False
            for _ in range(45):
                wn = wi + alpha * step
                if use_floor:
                    wn = np.maximum(wn, floor)
                Rn = resid(wn)
                if float(np.sum(Rn ** 2)) < m0 * (1 - 1e-6 * alpha):
                    accepted = True
                    break
                alpha *= 0.5
            if not accepted:
                if not use_floor:
                    # enter the smooth region: clip, seed consistent core
                    # values, and keep a positive floor from here on
                    use_floor = True
                    wi = np.maximum(wi, 0.0)
                    lifted = np.maximum((A @ wi + bdry_vec) / coeff, 0.0)
                    wi = np.maximum(wi, np.minimum(lifted ** (1.0 / exponent),
                                                   10 * floor))
                    wi = np.maximum(wi, floor)
                    continue
                stall_rounds += 1
                if stall_rounds > 2:
                    break
                wi = np.maximum(wi, floor)
            else:
                wi = wn
                total_its += 1
                if history is not None:
                    hist_r = float(np.max(np.abs(resid(wi))))
                    dw = float(np.max(np.abs(alpha * step)))
                    history.append(dw, v_factor * dw, hist_r, v_factor * hist_r)
        w[interior] = wi
        if op.is_linear:
            return w, converged and true_residual(w) <= tol, total_its
        # Pucci: verify against the true extremal application
        if true_residual(w) <= tol:
            return w, True, total_its
        if not converged:
            break
    return w, true_residual(w) <= tol, total_its


# ---------------------------------------------------------------------------
# coupled Newton rescue (best effort, general data)

def _coupled_newton_rescue(problem: ProblemSpec, u0: np.ndarray, v0: np.ndarray,
                           tol: float, history: IterationHistory):
    """Projected semismooth Newton on the coupled system from (u0, v0).

    A soft corridor keeps the iterates away from the deep-negative
    branches; a released, floored polish finishes. Best effort: returns
    (u, v, converged).
    """
    grid = problem.grid
    if not (problem.operator_u.is_linear and problem.operator_v.is_linear):
        return u0, v0, False
    from .scalar_solver import _interior_linear_system

    interior = grid.interior_indices
    ni = interior.size
    p, q = problem.p, problem.q
    su, sv = problem.source_scale_u, problem.source_scale_v
    phi_full = problem.phi.as_full().reshape(-1)
    psi_full = problem.psi.as_full().reshape(-1)
    Au, (ru, fu, wu) = _interior_linear_system(problem.operator_u, grid)
    Av, (rv, fv, wv) = _interior_linear_system(problem.operator_v, grid)
    bu = np.zeros(ni)
    np.add.at(bu, ru, wu * phi_full[fu])
    bv = np.zeros(ni)
    np.add.at(bv, rv, wv * psi_full[fv])

    def resid(ui, vi):
        Ru = Au @ ui + bu - su * positive_power(vi, p)
        Rv = Av @ vi + bv - sv * positive_power(ui, q)
        return Ru, Rv

    def assemble(ui, vi):
        Dv = su * _power_slope(vi, p)
        Du = sv * _power_slope(ui, q)
        return sp.bmat([[Au, -sp.diags(Dv)], [-sp.diags(Du), Av]], format="csc")

    ui = u0.reshape(-1)[interior].copy()
    vi = v0.reshape(-1)[interior].copy()
    scale = problem.data_scale()
    mu = 10 * tol
    floor_u = min((0.01 * tol / max(sv, 1e-300)) ** (1.0 / q) if q > 0 else np.inf,
                  0.01 * tol * grid.h ** 2)
    floor_v = min((0.01 * tol / max(su, 1e-300)) ** (1.0 / p) if p > 0 else np.inf,
                  0.01 * tol * grid.h ** 2)

    def run(max_it, floor, merit_l2):
        nonlocal ui, vi
        for _ in range(max_it):
            Ru, Rv = resid(ui, vi)
            rnorm = max(float(np.max(np.abs(Ru))), float(np.max(np.abs(Rv))))
            if rnorm <= tol:
                return True
            J = assemble(ui, vi)
            try:
                step = splu(J).solve(-np.concatenate([Ru, Rv]))
            except RuntimeError:
                return False
            m0 = float(np.sum(Ru ** 2) + np.sum(Rv ** 2))
            alpha, accepted = 1.0, False
            for _ in range(45):
                un = ui + alpha * step[:ni]
                vn = vi + alpha * step[ni:]
                if floor is not None:
                    un = np.maximum(un, floor[0])
                    vn = np.maximum(vn, floor[1])
                Run, Rvn = resid(un, vn)
                if merit_l2:
                    good = float(np.sum(Run ** 2) + np.sum(Rvn ** 2)) < m0 * (1 - 1e-6 * alpha)
                else:
                    good = max(float(np.max(np.abs(Run))),
                               float(np.max(np.abs(Rvn)))) < rnorm
                if good:
                    accepted = True
                    break
                alpha *= 0.5
            if not accepted:
                return False
            du = float(np.max(np.abs(un - ui)))
            ui_new, vi_new = un, vn
            Ru2, Rv2 = resid(ui_new, vi_new)
            history.append(du, float(np.max(np.abs(vn - vi))),
                           float(np.max(np.abs(Ru2))), float(np.max(np.abs(Rv2))))
            ui, vi = ui_new, vi_new
        Ru, Rv = resid(ui, vi)
        return max(float(np.max(np.abs(Ru))), float(np.max(np.abs(Rv)))) <= tol

    ok = False
    for _ in range(3):
        ok = run(80, (-mu, -mu), True)
        if ok:
            break
        ui = np.maximum(ui, 0.0)
        vi = np.maximum(vi, 0.0)
        if p > 0:
            vi = np.maximum(vi, np.minimum(
                np.maximum((Au @ ui + bu) / su, 0.0) ** (1.0 / p), 10 * floor_v))
            vi = np.maximum(vi, floor_v)
        if q > 0:
            ui = np.maximum(ui, np.minimum(
                np.maximum((Av @ vi + bv) / sv, 0.0) ** (1.0 / q), 10 * floor_u))
            ui = np.maximum(ui, floor_u)
        ok = run(50, (floor_u, floor_v), False)
        if ok:
            break
        mu /= 100.0

    u_full = phi_full.copy()
    u_full[interior] = ui
    v_full = psi_full.copy()
    v_full[interior] = vi
    return u_full, v_full, ok


# ---------------------------------------------------------------------------

def fixed_point_solve(problem: ProblemSpec, tol: float | None = None,
                      max_outer: int = 500, damping: float = 1.0,
                      ) -> tuple[SolutionPair, IterationHistory]:
    """Solve the coupled system.

    Symmetric problems collapse to the scalar reduction, which delivers
    the nonnegative solution; triangular problems (p = 0 or q = 0)
    converge in two Picard iterations. Everything else runs the damped
    Picard loop with adaptive damping and falls back to a projected
    Newton rescue when the loop stalls; for non-symmetric dead-core
    configurations the returned solution may be one of the system's
    sign-structured branches (the system is not unique). Stopping is
    always on the discrete equation residuals (iterate stagnation alone
    does not certify a solution); a run that exhausts its budget returns
    the best iterate seen with ``converged=False``.
    """
    if tol is None:
        tol = default_system_tolerance(problem)
    if tol <= 0:
        raise ValueError("tol must be positive")
    if not 0 < damping <= 1:
        raise ValueError("damping must lie in (0, 1]")

    grid = problem.grid
    history = IterationHistory()

    # symmetric reduction: v = a * u solves one scalar equation
    a = _reduction_factor(problem)
    if a is not None and problem.p * problem.q > 0:
        coeff = problem.source_scale_u * a ** problem.p
        w, ok, _ = _scalar_semismooth_solve(
            problem.operator_u, grid, problem.phi, coeff, problem.p, tol,
            history=history, v_factor=a)
        pair = SolutionPair(ScalarField(grid, w.reshape(grid.shape)),
                            ScalarField(grid, (a * w).reshape(grid.shape)),
                            problem.p, problem.q)
        res_u, res_v = system_residual(problem, pair)
        history.converged = max(res_u, res_v) <= tol
        if history.iterations == 0:
            history.append(pair.u.sup_norm(), pair.v.sup_norm(), res_u, res_v)
        return pair, history

    # damped Picard on the pair map
    omega = damping
    scalar_tol = max(1e-4 * tol, 1e-15)
    f_vals = np.zeros(grid.shape)
    g_vals = np.zeros(grid.shape)
    prev_u = prev_v = None
    best_pair, best_res = None, np.inf
    changes: list[float] = []
    since_adjust = 0
    stalled = False
    diverging = False

    picard_budget = max_outer
    for k in range(picard_budget):
        pair = apply_T(problem, ScalarField(grid, f_vals),
                       ScalarField(grid, g_vals), scalar_tol=scalar_tol)
        res_u, res_v = system_residual(problem, pair)
        if prev_u is None:
            du = pair.u.sup_norm()
            dv = pair.v.sup_norm()
        else:
            du = float(np.max(np.abs(pair.u.values - prev_u)))
            dv = float(np.max(np.abs(pair.v.values - prev_v)))
        history.append(du, dv, res_u, res_v)

        res = max(res_u, res_v)
        if res < best_res:
            best_pair, best_res = pair, res
        if res <= tol:
            history.converged = True
            return pair, history

        changes.append(max(du, dv))
        since_adjust += 1
        if since_adjust >= DECAY_WINDOW:
            ref = changes[-DECAY_WINDOW]
            if changes[-1] > DECAY_FACTOR * ref:
                if omega <= OMEGA_FLOOR:
                    stalled = True
                    diverging = changes[-1] > ref * (1 + 1e-12)
                    break
                omega *= 0.5
                since_adjust = 0
        if len(history.res_u) >= STALL_WINDOW:
            recent = max(history.res_u[-1], history.res_v[-1])
            old = max(history.res_u[-STALL_WINDOW], history.res_v[-STALL_WINDOW])
            if recent > 0.5 * old:
                stalled = True
                break

        f_vals = (1 - omega) * f_vals + omega * pair.v.values
        g_vals = (1 - omega) * g_vals + omega * pair.u.values
        prev_u, prev_v = pair.u.values, pair.v.values

    if stalled and problem.p * problem.q > 0:
        u0, _ = solve_dirichlet(ScalarProblem(problem.operator_u,
                                              zero_field(grid), problem.phi),
                                tol=scalar_tol)
        v0, _ = solve_dirichlet(ScalarProblem(problem.operator_v,
                                              zero_field(grid), problem.psi),
                                tol=scalar_tol)
        u_full, v_full, ok = _coupled_newton_rescue(
            problem, u0.flat, v0.flat, tol, history)
        pair = SolutionPair(ScalarField(grid, u_full.reshape(grid.shape)),
                            ScalarField(grid, v_full.reshape(grid.shape)),
                            problem.p, problem.q)
        res_u, res_v = system_residual(problem, pair)
        if max(res_u, res_v) <= tol:
            history.converged = True
            return pair, history
        if max(res_u, res_v) < best_res:
            best_pair = pair
    elif stalled and diverging:
        raise DivergingIterationError(
            "iterate changes keep growing at the smallest damping factor")

    return best_pair, history
