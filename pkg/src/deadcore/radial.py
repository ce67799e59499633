"""Closed-form radial profiles: growth exponents, barrier constants, and
exact or barrier solution pairs.

For exponents p, q with pq < 1 the growth rates are

    alpha = 2(1+p)/(1-pq),   beta = 2(1+q)/(1-pq),   gamma = 2/(1-pq),

and the amplitudes A, B solve the coupled algebraic system

    E * A * alpha * (alpha + n - 2) = B**p,
    E * B * beta  * (beta  + n - 2) = A**q,

where E is the ellipticity constant carried by the barrier (the upper
constant for super-solutions, the lower one for sub-solutions). The
profile pair is

    u(x) = A * (|x - c| - rho)_+ ** alpha,
    v(x) = B * (|x - c| - rho)_+ ** beta.

With the plain Laplacian and E = 1 this pair solves the system exactly in
1D for any rho >= 0, and in any dimension when rho = 0. For n >= 2 with
rho > 0 the first-order radial term has denominator r rather than r - rho,
so the pair is a super-solution only; the classifier below says so rather
than asserting exactness.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ExponentOutOfRangeError
from .grid import Grid, ScalarField
from .operators import OperatorSpec
from .system_solver import SolutionPair


def exponents(p: float, q: float) -> tuple[float, float, float]:
    """(alpha, beta, gamma); requires p, q >= 0 and pq < 1."""
    if p < 0 or q < 0 or p * q >= 1:
        raise ExponentOutOfRangeError(
            f"need p, q >= 0 with p*q < 1, got p={p}, q={q}")
    denom = 1.0 - p * q
    return 2 * (1 + p) / denom, 2 * (1 + q) / denom, 2 / denom


def barrier_constants(p: float, q: float, n: int, E: float) -> tuple[float, float]:
    """Amplitudes (A, B) of the radial pair for ellipticity constant E."""
    if n < 1:
        raise ValueError(f"dimension must be >= 1, got {n}")
    if E <= 0:
        raise ValueError(f"ellipticity constant must be positive, got {E}")
    alpha, beta, _ = exponents(p, q)
    k_a = alpha * (alpha + n - 2)
    k_b = beta * (beta + n - 2)
    inv = 1.0 / (p * q - 1.0)  # negative
    A = E ** ((p + 1) * inv) * k_a ** inv * k_b ** (p * inv)
    B = E ** ((q + 1) * inv) * k_b ** inv * k_a ** (q * inv)
    return float(A), float(B)


@dataclass(frozen=True)
class RadialBarrier:
    """A radial profile pair with its derived exponents and amplitudes."""

    p: float
    q: float
    n: int
    ellipticity: float = 1.0
    rho: float = 0.0
    center: tuple[float, ...] = (0.0,)
    alpha: float = field(init=False)
    beta: float = field(init=False)
    gamma: float = field(init=False)
    A: float = field(init=False)
    B: float = field(init=False)

    def __post_init__(self):
        if self.rho < 0:
            raise ValueError(f"dead-core radius must be >= 0, got {self.rho}")
        if len(self.center) != self.n:
            raise ValueError("center dimension does not match n")
        alpha, beta, gamma = exponents(self.p, self.q)
        A, B = barrier_constants(self.p, self.q, self.n, self.ellipticity)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "gamma", gamma)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)

    def u_at(self, points: np.ndarray) -> np.ndarray:
        d = self._radii(points)
        return self.A * np.maximum(d - self.rho, 0.0) ** self.alpha

    def v_at(self, points: np.ndarray) -> np.ndarray:
        d = self._radii(points)
        return self.B * np.maximum(d - self.rho, 0.0) ** self.beta

    def _radii(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return np.linalg.norm(pts - np.asarray(self.center), axis=1)


def radial_pair(barrier: RadialBarrier, grid: Grid) -> SolutionPair:
    """Sample the barrier's (u, v) profile on the grid nodes."""
    if grid.dimension != barrier.n:
        raise ValueError(
            f"barrier dimension {barrier.n} != grid dimension {grid.dimension}")
    u = barrier.u_at(grid.coords).reshape(grid.shape)
    v = barrier.v_at(grid.coords).reshape(grid.shape)
    return SolutionPair(ScalarField(grid, u), ScalarField(grid, v),
                        barrier.p, barrier.q)


def is_exact_solution(barrier: RadialBarrier,
                      operator: OperatorSpec) -> tuple[bool, str]:
    """Whether the sampled pair satisfies the system identically.

    Exact cases: plain Laplacian with E = 1 and either n = 1 (any rho) or
    rho = 0 (any n). Everything else is classified by which ellipticity
    constant the barrier was built with.
    """
    if (operator.kind == "laplacian" and barrier.ellipticity == 1.0
            and (barrier.n == 1 or barrier.rho == 0.0)):
        return True, "exact solution of the Laplacian system"
    if barrier.ellipticity >= operator.Lam:
        return False, "super-solution only"
    if barrier.ellipticity <= operator.lam:
        return False, "sub-solution only"
    return False, "barrier with intermediate ellipticity constant"
