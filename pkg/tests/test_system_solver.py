import numpy as np
import pytest

from deadcore import (
    BoundaryData,
    ProblemSpec,
    RadialBarrier,
    apply_T,
    build_grid,
    fixed_point_solve,
    laplacian,
    positive_power,
    radial_pair,
    sample_function,
    system_residual,
    zero_field,
)
from deadcore.errors import ExponentOutOfRangeError


def radial_problem(nodes=257, p=0.5, q=0.5, rho=0.3):
    grid = build_grid(1, (-1.0, 1.0), nodes)
    barrier = RadialBarrier(p=p, q=q, n=1, rho=rho, center=(0.0,))
    exact = radial_pair(barrier, grid)
    phi = BoundaryData.from_field(exact.u)
    psi = BoundaryData.from_field(exact.v)
    return ProblemSpec(laplacian(), laplacian(), p, q, phi, psi), exact


def test_problem_spec_rejects_bad_exponents():
    grid = build_grid(1, (-1.0, 1.0), 9)
    zero = BoundaryData.zero(grid)
    with pytest.raises(ExponentOutOfRangeError):
        ProblemSpec(laplacian(), laplacian(), 2.0, 1.0, zero, zero)
    with pytest.raises(ExponentOutOfRangeError):
        ProblemSpec(laplacian(), laplacian(), -0.5, 0.5, zero, zero)


def test_positive_power_zero_exponent_convention():
    vals = np.array([-1.0, 0.0, 2.0])
    assert np.array_equal(positive_power(vals, 0.0), np.ones(3))
    assert np.array_equal(positive_power(vals, 0.5), [0.0, 0.0, np.sqrt(2.0)])


def test_apply_T_constant_for_zero_exponents():
    grid = build_grid(1, (-1.0, 1.0), 33)
    zero = BoundaryData.zero(grid)
    problem = ProblemSpec(laplacian(), laplacian(), 0.0, 0.0, zero, zero)
    f1 = sample_function(grid, lambda x: 1.0 + x ** 2)
    f2 = sample_function(grid, lambda x: 5.0 + np.cos(x))
    pair1 = apply_T(problem, f1, f1)
    pair2 = apply_T(problem, f2, f2)
    assert np.max(np.abs(pair1.u.values - pair2.u.values)) < 1e-12
    exact = (grid.coords[:, 0] ** 2 - 1.0) / 2.0
    assert np.max(np.abs(pair1.u.flat - exact)) < 1e-12


def test_apply_T_zero_inputs_give_harmonic_extensions():
    problem, exact = radial_problem(nodes=65)
    grid = problem.grid
    pair = apply_T(problem, zero_field(grid), zero_field(grid))
    # rhs vanishes, so both solves return the data's harmonic extensions
    from deadcore import ScalarProblem, solve_dirichlet
    hu, _ = solve_dirichlet(ScalarProblem(laplacian(), zero_field(grid), problem.phi))
    assert np.max(np.abs(pair.u.values - hu.values)) < 1e-12


def test_exact_radial_pair_is_near_fixed_point():
    problem, exact = radial_problem(nodes=257)
    pair = apply_T(problem, exact.v, exact.u)
    err = max(np.max(np.abs(pair.u.values - exact.u.values)),
              np.max(np.abs(pair.v.values - exact.v.values)))
    assert err <= 10 * problem.grid.h ** 2


def test_fixed_point_zero_exponents_two_iterations():
    grid = build_grid(1, (-1.0, 1.0), 129)
    zero = BoundaryData.zero(grid)
    problem = ProblemSpec(laplacian(), laplacian(), 0.0, 0.0, zero, zero)
    pair, history = fixed_point_solve(problem)
    assert history.converged
    assert history.iterations <= 2
    exact = (grid.coords[:, 0] ** 2 - 1.0) / 2.0
    assert np.max(np.abs(pair.u.flat - exact)) <= 10 * grid.h ** 2


def test_fixed_point_zero_data_trivial():
    grid = build_grid(1, (-1.0, 1.0), 65)
    zero = BoundaryData.zero(grid)
    problem = ProblemSpec(laplacian(), laplacian(), 0.5, 0.5, zero, zero)
    pair, history = fixed_point_solve(problem)
    assert history.converged
    assert pair.u.sup_norm() == 0.0 and pair.v.sup_norm() == 0.0
    assert system_residual(problem, pair) == (0.0, 0.0)


def test_fixed_point_recovers_exact_radial():
    problem, exact = radial_problem(nodes=257)
    pair, history = fixed_point_solve(problem)
    assert history.converged
    assert np.max(np.abs(pair.u.values - exact.u.values)) <= 10 * problem.grid.h ** 2


def test_system_residual_examples():
    grid = build_grid(1, (-1.0, 1.0), 33)
    zero = BoundaryData.zero(grid)
    problem = ProblemSpec(laplacian(), laplacian(), 0.5, 0.5, zero, zero)
    pair_zero = apply_T(problem, zero_field(grid), zero_field(grid))
    assert system_residual(problem, pair_zero) == (0.0, 0.0)

    # constructed mismatch: u = (x^2-1)/2 solves with rhs 1, but v_+^p != 1
    from deadcore import SolutionPair
    u = sample_function(grid, lambda x: (x ** 2 - 1.0) / 2.0)
    v = sample_function(grid, lambda x: 0.25 * np.ones_like(x))
    pair = SolutionPair(u, v, 0.0, 0.0)
    prob0 = ProblemSpec(laplacian(), laplacian(), 0.0, 0.0, zero, zero)
    res_u, res_v = system_residual(prob0, pair)
    assert res_u == pytest.approx(0.0, abs=1e-12)     # v_+^0 == 1 == u''
    pair2 = SolutionPair(u, v, 0.5, 0.5)
    prob5 = ProblemSpec(laplacian(), laplacian(), 0.5, 0.5, zero, zero)
    res_u, _ = system_residual(prob5, pair2)
    assert res_u == pytest.approx(abs(1.0 - 0.5), abs=1e-12)


def test_residual_of_sampled_exact_pair_truncation():
    problem, exact = radial_problem(nodes=513)
    res_u, res_v = system_residual(problem, exact)
    assert max(res_u, res_v) <= 10 * problem.grid.h ** 2


def test_converged_solution_bounds_and_sign():
    # converged dead-core solutions stay essentially nonnegative and
    # bounded by their boundary data
    problem, exact = radial_problem(nodes=257)
    pair, history = fixed_point_solve(problem)
    assert history.converged
    scale = problem.data_scale()
    assert pair.u.values.min() >= -1e-8 * scale
    assert pair.v.values.min() >= -1e-8 * scale
    assert pair.u.values.max() <= problem.phi.sup() + 1e-8 * scale
    assert pair.v.values.max() <= problem.psi.sup() + 1e-8 * scale


def test_reapplying_T_is_stable_at_the_fixed_point():
    problem, _ = radial_problem(nodes=129)
    tol = 1e-8 * problem.data_scale()
    pair, history = fixed_point_solve(problem, tol=tol)
    assert history.converged
    again = apply_T(problem, pair.v, pair.u)
    drift = max(np.max(np.abs(again.u.values - pair.u.values)),
                np.max(np.abs(again.v.values - pair.v.values)))
    assert drift <= 100 * tol


def test_refinement_convergence_against_oracle():
    errs = {}
    for nodes in (129, 257):
        problem, exact = radial_problem(nodes=nodes)
        pair, history = fixed_point_solve(problem)
        assert history.converged
        x = problem.grid.coords[:, 0]
        err = np.abs(pair.u.values.reshape(-1) - exact.u.flat)
        errs[nodes] = {
            "global": err.max(),
            "smooth": err[np.abs(np.abs(x) - 0.3) > 2 * problem.grid.h].max(),
        }
    assert np.log2(errs[129]["global"] / errs[257]["global"]) >= 1.0
    assert np.log2(errs[129]["smooth"] / errs[257]["smooth"]) >= 1.9


def test_asymmetric_exponents_converge():
    grid = build_grid(1, (-1.0, 1.0), 129)
    barrier = RadialBarrier(p=0.25, q=0.5, n=1, rho=0.0, center=(0.0,))
    exact = radial_pair(barrier, grid)
    phi = BoundaryData(grid, 0.5 * BoundaryData.from_field(exact.u).values)
    psi = BoundaryData(grid, 0.5 * BoundaryData.from_field(exact.v).values)
    problem = ProblemSpec(laplacian(), laplacian(), 0.25, 0.5, phi, psi)
    pair, history = fixed_point_solve(problem)
    assert history.converged
    res = system_residual(problem, pair)
    assert max(res) <= 1e-8 * problem.data_scale()


def test_history_csv(tmp_path):
    problem, _ = radial_problem(nodes=65)
    _, history = fixed_point_solve(problem)
    path = tmp_path / "history.csv"
    history.to_csv(path)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "iter,du,dv,res_u,res_v"
    assert len(lines) == history.iterations + 1


def test_2d_dead_core_symmetric():
    grid = build_grid(2, [(-1.0, 1.0), (-1.0, 1.0)], 65)
    barrier = RadialBarrier(p=0.5, q=0.5, n=2, rho=0.4, center=(0.0, 0.0))
    trace = radial_pair(barrier, grid)
    problem = ProblemSpec(laplacian(), laplacian(), 0.5, 0.5,
                          BoundaryData.from_field(trace.u),
                          BoundaryData.from_field(trace.v))
    pair, history = fixed_point_solve(problem)
    assert history.converged
    core = np.linalg.norm(grid.coords, axis=1) <= 0.3
    assert np.max(np.abs(pair.u.flat[core])) <= 1e-10


def test_pucci_system_zero_exponents():
    from deadcore import pucci_minus

    grid = build_grid(1, (-1.0, 1.0), 129)
    zero = BoundaryData.zero(grid)
    problem = ProblemSpec(pucci_minus(1.0, 2.0), pucci_minus(1.0, 2.0),
                          0.0, 0.0, zero, zero)
    pair, history = fixed_point_solve(problem)
    assert history.converged
    # rhs is the unit source; the convex branch weights curvature by lam
    exact = (grid.coords[:, 0] ** 2 - 1.0) / 2.0
    assert np.max(np.abs(pair.u.flat - exact)) < 1e-10


def test_pucci_symmetric_system_with_core():
    from deadcore import pucci_minus

    grid = build_grid(1, (-1.0, 1.0), 129)
    barrier = RadialBarrier(p=0.5, q=0.5, n=1, ellipticity=2.0, rho=0.2,
                            center=(0.0,))
    trace = radial_pair(barrier, grid)
    problem = ProblemSpec(pucci_minus(1.0, 2.0), pucci_minus(1.0, 2.0),
                          0.5, 0.5, BoundaryData.from_field(trace.u),
                          BoundaryData.from_field(trace.v))
    pair, history = fixed_point_solve(problem)
    assert history.converged
    assert max(system_residual(problem, pair)) <= 1e-8 * problem.data_scale()


def test_unreachable_tolerance_reports_not_raises():
    grid = build_grid(1, (-1.0, 1.0), 65)
    zero = BoundaryData.zero(grid)
    problem = ProblemSpec(laplacian(), laplacian(), 0.0, 0.0, zero, zero)
    pair, history = fixed_point_solve(problem, tol=1e-300, max_outer=80)
    assert not history.converged
    assert np.all(np.isfinite(pair.u.values))
