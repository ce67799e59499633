"""Discrete uniformly elliptic operators on structured grids.

Four operator kinds are shipped:

* ``laplacian``         sum of second differences, exact on quadratics
* ``diagonal``          sum_i a_i(x) * (second difference along axis i),
                        with lambda <= a_i(x) <= Lambda
* ``pucci_minus``       extremal operator weighting positive curvature by
                        lambda and negative curvature by Lambda
* ``pucci_plus``        the dual extremal operator

In 2D the Pucci operators use a wide stencil: directional second
differences along K grid directions, extremalized over orthogonal
direction pairs (K = 8 means the axis pair plus the diagonal pair).
Directions whose neighbors leave the grid are dropped at that node, so the
axis pair is always available on interior nodes.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import (
    BadEllipticityConstantsError,
    BoundaryNodeError,
    StencilOutOfRangeError,
)
from .grid import Grid, ScalarField

KINDS = ("laplacian", "diagonal", "pucci_minus", "pucci_plus")

# Orthogonal direction pairs per direction count K. Each entry is a pair of
# integer offsets; the second is the first rotated by 90 degrees.
FRAMES = {
    4: [((1, 0), (0, 1))],
    8: [((1, 0), (0, 1)), ((1, 1), (-1, 1))],
    16: [((1, 0), (0, 1)), ((1, 1), (-1, 1)),
         ((2, 1), (-1, 2)), ((1, 2), (-2, 1))],
}


@dataclass(frozen=True)
class HessianSample:
    """A symmetric n x n matrix; only the upper triangle is stored, so
    symmetry is exact by construction."""

    n: int
    upper: tuple[float, ...]  # row-major upper triangle including diagonal

    def __post_init__(self):
        if len(self.upper) != self.n * (self.n + 1) // 2:
            raise ValueError("upper triangle length does not match n")

    @classmethod
    def from_matrix(cls, M: np.ndarray) -> "HessianSample":
        M = np.asarray(M, dtype=float)
        n = M.shape[0]
        sym = 0.5 * (M + M.T)
        idx = np.triu_indices(n)
        return cls(n, tuple(sym[idx]))

    def matrix(self) -> np.ndarray:
        M = np.zeros((self.n, self.n))
        M[np.triu_indices(self.n)] = self.upper
        return M + np.triu(M, 1).T

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.matrix())


@dataclass(frozen=True)
class OperatorSpec:
    """A uniformly elliptic operator choice with constants (lam, Lam)."""

    kind: str
    lam: float = 1.0
    Lam: float = 1.0
    coeffs: tuple[Callable, ...] | None = None
    directions: int = 8

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown operator kind {self.kind!r}")
        if not (0 < self.lam <= self.Lam):
            raise BadEllipticityConstantsError(
                f"need 0 < lambda <= Lambda, got ({self.lam}, {self.Lam})")
        if self.kind == "diagonal" and not self.coeffs:
            raise ValueError("diagonal operator needs per-axis coefficients")
        if self.kind.startswith("pucci"):
            if self.directions not in FRAMES:
                raise ValueError(
                    f"direction count must be one of {sorted(FRAMES)}, "
                    f"got {self.directions}")

    @property
    def is_linear(self) -> bool:
        return self.kind in ("laplacian", "diagonal")


def laplacian() -> OperatorSpec:
    return OperatorSpec("laplacian", 1.0, 1.0)


def pucci_minus(lam: float, Lam: float, directions: int = 8) -> OperatorSpec:
    return OperatorSpec("pucci_minus", lam, Lam, directions=directions)


def pucci_plus(lam: float, Lam: float, directions: int = 8) -> OperatorSpec:
    return OperatorSpec("pucci_plus", lam, Lam, directions=directions)


def diagonal(coeffs: Sequence[Callable], lam: float, Lam: float) -> OperatorSpec:
    return OperatorSpec("diagonal", lam, Lam, coeffs=tuple(coeffs))


def pucci_minus_value(eigenvalues, lam: float, Lam: float) -> float:
    """lam * (sum of positive eigenvalues) + Lam * (sum of negative ones)."""
    if not (0 < lam <= Lam):
        raise BadEllipticityConstantsError(
            f"need 0 < lambda <= Lambda, got ({lam}, {Lam})")
    e = np.asarray(eigenvalues, dtype=float)
    return float(lam * e[e > 0].sum() + Lam * e[e < 0].sum())


def pucci_plus_value(eigenvalues, lam: float, Lam: float) -> float:
    """Lam * (sum of positive eigenvalues) + lam * (sum of negative ones)."""
    if not (0 < lam <= Lam):
        raise BadEllipticityConstantsError(
            f"need 0 < lambda <= Lambda, got ({lam}, {Lam})")
    e = np.asarray(eigenvalues, dtype=float)
    return float(Lam * e[e > 0].sum() + lam * e[e < 0].sum())


def _pucci_combine(d2_a: np.ndarray, d2_b: np.ndarray, lam, Lam, minus: bool):
    """Pucci value of a frame from its two directional second differences."""
    if minus:
        return (np.where(d2_a > 0, lam, Lam) * d2_a
                + np.where(d2_b > 0, lam, Lam) * d2_b)
    return (np.where(d2_a > 0, Lam, lam) * d2_a
            + np.where(d2_b > 0, Lam, lam) * d2_b)


def directional_second_difference(field: ScalarField, offset) -> np.ndarray:
    """(u(x + o*h) - 2 u(x) + u(x - o*h)) / (|o| h)^2 on the full grid.

    Entries where a neighbor leaves the grid are NaN.
    """
    grid = field.grid
    vals = field.values
    out = np.full(grid.shape, np.nan)
    if grid.dimension == 1:
        (a,) = offset if not np.isscalar(offset) else (offset,)
        a = int(a)
        scale = (a * grid.h) ** 2
        out[a:-a or None] = (vals[2 * a:] - 2 * vals[a:-a] + vals[:-2 * a]) / scale
        return out
    a, b = int(offset[0]), int(offset[1])
    scale = (a * a + b * b) * grid.h ** 2
    nx, ny = grid.shape
    ia, ib = abs(a), abs(b)
    i0, i1 = ia, nx - ia
    j0, j1 = ib, ny - ib
    if i1 <= i0 or j1 <= j0:
        return out
    core = (slice(i0, i1), slice(j0, j1))
    plus = (slice(i0 + a, i1 + a), slice(j0 + b, j1 + b))
    minus = (slice(i0 - a, i1 - a), slice(j0 - b, j1 - b))
    out[core] = (vals[plus] - 2 * vals[core] + vals[minus]) / scale
    return out


def apply_operator_field(op: OperatorSpec, field: ScalarField) -> np.ndarray:
    """Operator values on the full grid; boundary entries are NaN."""
    grid = field.grid
    h2 = grid.h ** 2
    vals = field.values
    if op.kind == "laplacian":
        out = np.full(grid.shape, np.nan)
        if grid.dimension == 1:
            out[1:-1] = (vals[2:] - 2 * vals[1:-1] + vals[:-2]) / h2
        else:
            out[1:-1, 1:-1] = (
                vals[2:, 1:-1] + vals[:-2, 1:-1]
                + vals[1:-1, 2:] + vals[1:-1, :-2]
                - 4 * vals[1:-1, 1:-1]) / h2
        return out
    if op.kind == "diagonal":
        out = np.zeros(grid.shape)
        for k in range(grid.dimension):
            a_k = np.asarray(op.coeffs[k](*grid.mesh), dtype=float)
            if a_k.shape == ():
                a_k = np.full(grid.shape, float(a_k))
            d2 = directional_second_difference(
                field, (1,) if grid.dimension == 1 else ((1, 0) if k == 0 else (0, 1)))
            out = out + a_k * d2
        return out
    # Pucci kinds
    minus = op.kind == "pucci_minus"
    if grid.dimension == 1:
        d2 = directional_second_difference(field, (1,))
        w = np.where(d2 > 0, op.lam, op.Lam) if minus else np.where(d2 > 0, op.Lam, op.lam)
        return w * d2
    frame_vals = []
    for off_a, off_b in FRAMES[op.directions]:
        d2a = directional_second_difference(field, off_a)
        d2b = directional_second_difference(field, off_b)
        frame_vals.append(_pucci_combine(d2a, d2b, op.lam, op.Lam, minus))
    stack = np.stack(frame_vals)
    with warnings.catch_warnings():
        # boundary nodes carry NaN in every frame by construction
        warnings.simplefilter("ignore", RuntimeWarning)
        out = np.nanmin(stack, axis=0) if minus else np.nanmax(stack, axis=0)
    return out


def apply_operator(op: OperatorSpec, field: ScalarField, node) -> float:
    """Pointwise stencil application at one interior node.

    ``node`` is a flat index or a multi-index tuple.
    """
    grid = field.grid
    flat = grid.flat_index(node) if not np.isscalar(node) else int(node)
    if not grid.is_interior(flat):
        raise BoundaryNodeError(f"node {grid.multi_index(flat)} is on the boundary")
    value = apply_operator_field(op, field).reshape(-1)[flat]
    if np.isnan(value):
        raise StencilOutOfRangeError(
            f"no stencil direction pair fits at node {grid.multi_index(flat)}")
    return float(value)


def matrix_value(op: OperatorSpec, sample: HessianSample, point=None) -> float:
    """Pointwise matrix form of the operator on a Hessian sample."""
    M = sample.matrix()
    if op.kind == "laplacian":
        return float(np.trace(M))
    if op.kind == "diagonal":
        a = [float(np.asarray(c(*point))) for c in op.coeffs]
        return float(sum(a[k] * M[k, k] for k in range(sample.n)))
    eigs = sample.eigenvalues()
    if op.kind == "pucci_minus":
        return pucci_minus_value(eigs, op.lam, op.Lam)
    return pucci_plus_value(eigs, op.lam, op.Lam)


def check_ellipticity(op: OperatorSpec, sample_count: int,
                      dimension: int = 2, grid: Grid | None = None,
                      seed: int = 20240) -> dict:
    """Sample difference quotients (F(M+N) - F(M)) / ||N|| for random
    symmetric M and positive semidefinite N.

    ||N|| is the largest eigenvalue of N. Quotients of every shipped
    operator land in [lambda, n*Lambda]; the report's ``passed`` flag
    checks that band. Sampling is seeded, so reports reproduce exactly.
    """
    if sample_count < 1:
        raise ValueError("sample_count must be >= 1")
    if op.kind == "diagonal" and grid is None:
        raise ValueError("diagonal operators need a grid for coefficient samples")
    n = grid.dimension if grid is not None else dimension
    rng = np.random.default_rng(seed)
    qmin, qmax = np.inf, -np.inf
    taken = 0
    while taken < sample_count:
        A = rng.standard_normal((n, n))
        M = HessianSample.from_matrix(A)
        B = rng.standard_normal((n, n))
        N = HessianSample.from_matrix(B @ B.T)
        norm = float(np.max(N.eigenvalues()))
        if norm <= 1e-6:
            # tiny increments amplify cancellation noise in the quotient
            continue
        if op.kind == "diagonal":
            point = grid.coords[rng.integers(grid.n_nodes)]
        else:
            point = None
        shifted = HessianSample.from_matrix(M.matrix() + N.matrix())
        q = (matrix_value(op, shifted, point) - matrix_value(op, M, point)) / norm
        qmin = min(qmin, q)
        qmax = max(qmax, q)
        taken += 1
    lo = op.lam * (1 - 1e-8) - 1e-12
    hi = n * op.Lam * (1 + 1e-8) + 1e-12
    return {
        "kind": op.kind,
        "lambda": op.lam,
        "Lambda": op.Lam,
        "min_quotient": qmin,
        "max_quotient": qmax,
        "samples": sample_count,
        "seed": seed,
        "band": [op.lam, n * op.Lam],
        "passed": bool(lo <= qmin and qmax <= hi),
    }
