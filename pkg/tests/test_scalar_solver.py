import numpy as np
import pytest

from deadcore import (
    BoundaryData,
    ScalarField,
    ScalarProblem,
    build_grid,
    laplacian,
    maximum_principle_check,
    pucci_minus,
    sample_function,
    solve_dirichlet,
    zero_field,
)

A4 = 1.0 / 144.0  # amplitude of the quartic kink profile (|x|-0.3)_+^4 / 144


def kink_exact(x):
    return A4 * np.maximum(np.abs(x) - 0.3, 0.0) ** 4


def kink_rhs(x):
    # second derivative of the profile away from the kink: 12*A*(|x|-0.3)_+^2
    return 12.0 * A4 * np.maximum(np.abs(x) - 0.3, 0.0) ** 2


def test_poisson_constant_source_exact():
    grid = build_grid(1, (-1.0, 1.0), 33)
    rhs = sample_function(grid, lambda x: np.ones_like(x))
    u, rep = solve_dirichlet(ScalarProblem(laplacian(), rhs, BoundaryData.zero(grid)))
    assert rep.converged
    exact = (grid.coords[:, 0] ** 2 - 1.0) / 2.0
    assert np.max(np.abs(u.flat - exact)) < 1e-12
    assert u.flat[grid.coords[:, 0] == 0.0][0] == pytest.approx(-0.5, abs=1e-13)


def test_harmonic_linear_interpolant():
    grid = build_grid(1, (-1.0, 1.0), 33)
    bd = BoundaryData(grid, np.array([0.0, 1.0]))
    u, rep = solve_dirichlet(ScalarProblem(laplacian(), zero_field(grid), bd))
    assert rep.converged
    exact = (grid.coords[:, 0] + 1.0) / 2.0
    assert np.max(np.abs(u.flat - exact)) < 1e-12


def test_kink_source_within_truncation():
    grid = build_grid(1, (-1.0, 1.0), 257)
    rhs = sample_function(grid, kink_rhs)
    bd = BoundaryData.from_function(grid, kink_exact)
    u, rep = solve_dirichlet(ScalarProblem(laplacian(), rhs, bd))
    assert rep.converged
    err = np.max(np.abs(u.flat - kink_exact(grid.coords[:, 0])))
    assert err <= 10 * grid.h ** 2


def test_kink_source_mesh_convergence():
    errs = {}
    for nodes in (129, 257):
        grid = build_grid(1, (-1.0, 1.0), nodes)
        rhs = sample_function(grid, kink_rhs)
        bd = BoundaryData.from_function(grid, kink_exact)
        u, _ = solve_dirichlet(ScalarProblem(laplacian(), rhs, bd))
        x = grid.coords[:, 0]
        err = np.abs(u.flat - kink_exact(x))
        errs[nodes] = {
            "global": err.max(),
            "smooth": err[np.abs(np.abs(x) - 0.3) > 2 * grid.h].max(),
        }
    order_global = np.log2(errs[129]["global"] / errs[257]["global"])
    order_smooth = np.log2(errs[129]["smooth"] / errs[257]["smooth"])
    assert order_global >= 1.0
    assert order_smooth >= 1.9


def test_maximum_principle_cases():
    grid = build_grid(1, (-1.0, 1.0), 33)
    rhs = sample_function(grid, lambda x: np.ones_like(x))
    zero_bd = BoundaryData.zero(grid)
    u, _ = solve_dirichlet(ScalarProblem(laplacian(), rhs, zero_bd))
    assert maximum_principle_check(u, zero_bd, rhs)

    const = ScalarField(grid, np.full(grid.shape, 5.0))
    bd5 = BoundaryData.constant(grid, 5.0)
    assert maximum_principle_check(const, bd5, zero_field(grid))

    kgrid = build_grid(1, (-1.0, 1.0), 257)
    krhs = sample_function(kgrid, kink_rhs)
    kbd = BoundaryData.from_function(kgrid, kink_exact)
    ku, _ = solve_dirichlet(ScalarProblem(laplacian(), krhs, kbd))
    assert maximum_principle_check(ku, kbd, krhs)


def test_maximum_principle_rejects_negative_rhs():
    grid = build_grid(1, (-1.0, 1.0), 9)
    with pytest.raises(ValueError):
        maximum_principle_check(zero_field(grid), BoundaryData.zero(grid),
                                sample_function(grid, lambda x: -np.ones_like(x)))


def test_scalar_comparison_property():
    # rhs1 >= rhs2 and phi1 <= phi2 imply u1 <= u2 (+ tiny slack)
    rng = np.random.default_rng(31)
    grid = build_grid(1, (-1.0, 1.0), 65)
    for _ in range(8):
        base = rng.uniform(0.0, 1.0, size=grid.shape)
        extra = rng.uniform(0.0, 1.0, size=grid.shape)
        rhs1 = ScalarField(grid, base + extra)
        rhs2 = ScalarField(grid, base)
        b2 = rng.uniform(0.0, 1.0, size=2)
        b1 = b2 - rng.uniform(0.0, 0.5, size=2)
        u1, _ = solve_dirichlet(ScalarProblem(laplacian(), rhs1, BoundaryData(grid, b1)))
        u2, _ = solve_dirichlet(ScalarProblem(laplacian(), rhs2, BoundaryData(grid, b2)))
        scale = max(1.0, u1.sup_norm(), u2.sup_norm())
        assert np.all(u1.values <= u2.values + 1e-8 * scale)


def test_pucci_solve_1d_convex():
    # rhs 2*lam with convex data is solved exactly by x^2
    grid = build_grid(1, (-1.0, 1.0), 65)
    lam, Lam = 1.0, 2.0
    rhs = sample_function(grid, lambda x: 2.0 * lam * np.ones_like(x))
    bd = BoundaryData.from_function(grid, lambda x: x ** 2)
    u, rep = solve_dirichlet(ScalarProblem(pucci_minus(lam, Lam), rhs, bd))
    assert rep.converged
    assert np.max(np.abs(u.flat - grid.coords[:, 0] ** 2)) < 1e-10


def test_pucci_solve_2d_saddle_exact():
    # Lam x^2 - lam y^2 has extremal value zero: solved by rhs 0
    grid = build_grid(2, [(-1.0, 1.0), (-1.0, 1.0)], 33)
    lam, Lam = 1.0, 3.0
    exact = lambda x, y: Lam * x ** 2 - lam * y ** 2
    bd = BoundaryData.from_function(grid, exact)
    u, rep = solve_dirichlet(ScalarProblem(pucci_minus(lam, Lam), zero_field(grid), bd))
    assert rep.converged
    target = sample_function(grid, exact)
    assert np.max(np.abs(u.values - target.values)) < 1e-8


def test_nonconverged_reported_not_raised():
    grid = build_grid(2, [(-1.0, 1.0), (-1.0, 1.0)], 17)
    bd = BoundaryData.from_function(grid, lambda x, y: x * y)
    rhs = sample_function(grid, lambda x, y: np.exp(x + y))
    u, rep = solve_dirichlet(ScalarProblem(pucci_minus(1.0, 2.0), rhs, bd),
                             max_iter=1, tol=1e-300)
    assert not rep.converged
    assert np.all(np.isfinite(u.values))


def test_diagonal_solve_manufactured_2d():
    from deadcore import diagonal

    a1 = lambda x, y: 1.0 + (x + 1.0) / 4.0   # in [1, 1.5]
    a2 = lambda x, y: 2.0 - (y + 1.0) / 4.0   # in [1.5, 2]
    op = diagonal((a1, a2), 1.0, 2.0)
    grid = build_grid(2, [(-1.0, 1.0), (-1.0, 1.0)], 33)
    rhs = sample_function(grid, lambda x, y: 2 * a1(x, y) + 2 * a2(x, y))
    bd = BoundaryData.from_function(grid, lambda x, y: x ** 2 + y ** 2)
    u, rep = solve_dirichlet(ScalarProblem(op, rhs, bd))
    assert rep.converged
    exact = sample_function(grid, lambda x, y: x ** 2 + y ** 2)
    assert np.max(np.abs(u.values - exact.values)) < 1e-12


def test_diagonal_coefficients_out_of_range_rejected():
    from deadcore import diagonal
    from deadcore.errors import BadEllipticityConstantsError

    op = diagonal((lambda x: 3.0 + 0.0 * x,), 1.0, 2.0)
    grid = build_grid(1, (-1.0, 1.0), 9)
    with pytest.raises(BadEllipticityConstantsError):
        ScalarProblem(op, zero_field(grid), BoundaryData.zero(grid))
