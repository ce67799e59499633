import numpy as np
import pytest

from deadcore import (
    RadialBarrier,
    barrier_constants,
    build_grid,
    exponents,
    is_exact_solution,
    laplacian,
    pucci_minus,
    radial_pair,
)
from deadcore.errors import ExponentOutOfRangeError


def test_exponent_examples():
    assert exponents(0.0, 0.0) == (2.0, 2.0, 2.0)
    alpha, beta, gamma = exponents(0.5, 0.5)
    assert (alpha, beta) == (4.0, 4.0)
    assert gamma == pytest.approx(8.0 / 3.0, rel=1e-15)

    alpha, beta, gamma = exponents(1.0 / 3.0, 0.25)
    assert alpha == pytest.approx(32.0 / 11.0, rel=1e-14)
    assert beta == pytest.approx(30.0 / 11.0, rel=1e-14)
    assert gamma == pytest.approx(24.0 / 11.0, rel=1e-14)
    assert alpha - 2 == pytest.approx((1.0 / 3.0) * beta, rel=1e-13)


def test_exponent_range_rejected():
    with pytest.raises(ExponentOutOfRangeError):
        exponents(2.0, 1.0)
    with pytest.raises(ExponentOutOfRangeError):
        exponents(-0.1, 0.5)


def test_exponent_identities_seeded():
    rng = np.random.default_rng(512)
    count = 0
    while count < 1000:
        p, q = rng.uniform(0.0, 1.4, size=2)
        if p * q >= 0.95:
            continue
        count += 1
        alpha, beta, gamma = exponents(p, q)
        assert alpha - 2 == pytest.approx(p * beta, rel=1e-12, abs=1e-12)
        assert beta - 2 == pytest.approx(q * alpha, rel=1e-12, abs=1e-12)
        assert alpha == pytest.approx(gamma * (1 + p), rel=1e-12)
        assert beta == pytest.approx(gamma * (1 + q), rel=1e-12)


def test_barrier_constant_examples():
    A, B = barrier_constants(0.5, 0.5, 1, 1.0)
    assert A == pytest.approx(1.0 / 144.0, rel=1e-14)
    assert B == pytest.approx(1.0 / 144.0, rel=1e-14)

    A, B = barrier_constants(0.5, 0.5, 2, 1.0)
    assert A == pytest.approx(1.0 / 256.0, rel=1e-14)

    A, B = barrier_constants(0.5, 0.5, 1, 2.0)
    assert A == pytest.approx(1.0 / 576.0, rel=1e-14)
    # defining equation: E * B * beta * (beta + n - 2) = A^q
    assert 2.0 * B * 4.0 * 3.0 == pytest.approx(A ** 0.5, rel=1e-13)


def test_barrier_constant_equations_seeded():
    rng = np.random.default_rng(77)
    count = 0
    while count < 1000:
        p, q = rng.uniform(0.0, 1.4, size=2)
        if p * q >= 0.95:
            continue
        count += 1
        n = int(rng.integers(1, 3))
        E = rng.uniform(0.5, 4.0)
        alpha, beta, _ = exponents(p, q)
        A, B = barrier_constants(p, q, n, E)
        assert A > 0 and B > 0
        lhs_a = E * A * alpha * (alpha + n - 2)
        lhs_b = E * B * beta * (beta + n - 2)
        assert lhs_a == pytest.approx(B ** p, rel=1e-12)
        assert lhs_b == pytest.approx(A ** q, rel=1e-12)


def test_swap_duality():
    A, B = barrier_constants(0.3, 0.7, 2, 1.5)
    B2, A2 = barrier_constants(0.7, 0.3, 2, 1.5)
    assert A == pytest.approx(A2, rel=1e-13)
    assert B == pytest.approx(B2, rel=1e-13)
    a1, b1, _ = exponents(0.3, 0.7)
    b2, a2, _ = exponents(0.7, 0.3)
    assert (a1, b1) == (a2, b2)


def test_radial_pair_values():
    grid = build_grid(1, (-1.0, 1.0), 5)
    flat = radial_pair(RadialBarrier(p=0.5, q=0.5, n=1, rho=0.0, center=(0.0,)), grid)
    assert flat.u.flat[3] == pytest.approx(0.00043402777777777775, rel=1e-15)

    core = radial_pair(RadialBarrier(p=0.5, q=0.5, n=1, rho=0.3, center=(0.0,)), grid)
    x = grid.coords[:, 0]
    assert core.u.flat[np.argmin(np.abs(x - 0.0))] == 0.0
    assert core.u.flat[0] == pytest.approx(0.0016673611111111108, rel=1e-15)


def test_radial_pair_inside_core_is_zero():
    grid = build_grid(1, (-1.0, 1.0), 11)
    pair = radial_pair(RadialBarrier(p=0.5, q=0.5, n=1, rho=0.3, center=(0.0,)), grid)
    x = grid.coords[:, 0]
    assert np.all(pair.u.flat[np.abs(x) <= 0.3] == 0.0)


def test_is_exact_solution_classification():
    lap = laplacian()
    b1 = RadialBarrier(p=0.5, q=0.5, n=1, ellipticity=1.0, rho=0.3, center=(0.0,))
    ok, _ = is_exact_solution(b1, lap)
    assert ok

    b2 = RadialBarrier(p=0.5, q=0.5, n=2, ellipticity=1.0, rho=0.0, center=(0.0, 0.0))
    ok, _ = is_exact_solution(b2, lap)
    assert ok

    b3 = RadialBarrier(p=0.5, q=0.5, n=2, ellipticity=1.0, rho=0.3, center=(0.0, 0.0))
    ok, reason = is_exact_solution(b3, lap)
    assert not ok and reason == "super-solution only"

    b4 = RadialBarrier(p=0.5, q=0.5, n=1, ellipticity=2.0, rho=0.0, center=(0.0,))
    ok, reason = is_exact_solution(b4, pucci_minus(1.0, 2.0))
    assert not ok and reason == "super-solution only"

    b5 = RadialBarrier(p=0.5, q=0.5, n=1, ellipticity=1.0, rho=0.0, center=(0.0,))
    ok, reason = is_exact_solution(b5, pucci_minus(1.0, 2.0))
    assert not ok and reason == "sub-solution only"


def test_scaling_invariance_of_radial_pair():
    # (u, v)(x) -> (s^(gamma(1+p)) u(x/s), s^(gamma(1+q)) v(x/s)) fixes the pair
    barrier = RadialBarrier(p=0.5, q=0.25, n=1, rho=0.0, center=(0.0,))
    grid = build_grid(1, (-1.0, 1.0), 65)
    pair = radial_pair(barrier, grid)
    s = 2.0
    x = grid.coords[:, 0]
    inner = np.abs(x) <= 0.5
    u_sc = s ** (barrier.gamma * (1 + barrier.p)) * barrier.u_at((x[inner] / s)[:, None])
    v_sc = s ** (barrier.gamma * (1 + barrier.q)) * barrier.v_at((x[inner] / s)[:, None])
    assert np.max(np.abs(u_sc - pair.u.flat[inner])) <= 1e-10 * max(1.0, pair.u.sup_norm())
    assert np.max(np.abs(v_sc - pair.v.flat[inner])) <= 1e-10 * max(1.0, pair.v.sup_norm())


def test_exact_barriers_residual_under_refinement():
    # every barrier flagged exact satisfies the system to truncation order,
    # away from the kink sphere
    from deadcore import ProblemSpec, BoundaryData, system_residual

    cases = [
        dict(p=0.5, q=0.5, n=1, rho=0.3),
        dict(p=0.25, q=0.5, n=1, rho=0.2),
        dict(p=0.5, q=0.5, n=2, rho=0.0),
    ]
    for case in cases:
        n = case.pop("n")
        for nodes in ((129, 257) if n == 1 else (33, 65)):
            if n == 1:
                grid = build_grid(1, (-1.0, 1.0), nodes)
                center = (0.0,)
            else:
                grid = build_grid(2, [(-1.0, 1.0)] * 2, nodes)
                center = (0.0, 0.0)
            barrier = RadialBarrier(n=n, center=center, ellipticity=1.0, **case)
            ok, _ = is_exact_solution(barrier, laplacian())
            assert ok
            pair = radial_pair(barrier, grid)
            problem = ProblemSpec(laplacian(), laplacian(), barrier.p, barrier.q,
                                  BoundaryData.from_field(pair.u),
                                  BoundaryData.from_field(pair.v))
            # exclude nodes within 2h of the kink sphere |x| = rho
            from deadcore.operators import apply_operator_field
            from deadcore.system_solver import positive_power
            r = np.linalg.norm(grid.coords - np.asarray(center), axis=1)
            keep = (np.abs(r - barrier.rho) > 2 * grid.h) & grid.interior_mask.reshape(-1)
            res_u = (apply_operator_field(laplacian(), pair.u).reshape(-1)
                     - positive_power(pair.v.flat, barrier.p))
            res_v = (apply_operator_field(laplacian(), pair.v).reshape(-1)
                     - positive_power(pair.u.flat, barrier.q))
            worst = max(np.max(np.abs(res_u[keep])), np.max(np.abs(res_v[keep])))
            assert worst <= 10 * grid.h ** 2, (case, nodes, worst)
        case["n"] = n


def test_super_solution_signed_residual():
    # with E = Lambda > 1 the sampled barrier sits on the super-solution
    # side: the signed residual stays below truncation at smooth nodes
    from deadcore.operators import apply_operator_field
    from deadcore.system_solver import positive_power

    grid = build_grid(1, (-1.0, 1.0), 257)
    barrier = RadialBarrier(p=0.5, q=0.5, n=1, ellipticity=2.0, rho=0.0,
                            center=(0.0,))
    pair = radial_pair(barrier, grid)
    r = np.abs(grid.coords[:, 0])
    keep = (r > 2 * grid.h) & grid.interior_mask.reshape(-1)
    res = (apply_operator_field(laplacian(), pair.u).reshape(-1)
           - positive_power(pair.v.flat, 0.5))
    assert np.max(res[keep]) <= 10 * grid.h ** 2
    # and it is a genuine inequality: strictly negative somewhere
    assert np.min(res[keep]) < 0
