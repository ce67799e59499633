"""Structured rectangular grids, nodal scalar fields, and boundary data.

Everything in the package runs on uniform grids: a single spacing ``h``
shared by all axes, dimension 1 or 2. Nodes are ordered row-major
(C order), so in 2D node (i, j) has flat index ``i * shape[1] + j`` and
coordinates ``(lower[0] + i*h, lower[1] + j*h)``. CSV dumps follow this
ordering, which makes repeated runs byte-for-byte reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Sequence

import numpy as np

from .errors import (
    BadCornersError,
    CenterOutsideDomainError,
    NonFiniteSampleError,
    NonuniformSpacingError,
    TooFewNodesError,
)

SPACING_RTOL = 1e-12


@dataclass(frozen=True)
class Grid:
    """Uniform rectangular grid, dimension 1 or 2. Immutable and hashable."""

    lower: tuple[float, ...]
    upper: tuple[float, ...]
    shape: tuple[int, ...]
    h: float

    @property
    def dimension(self) -> int:
        return len(self.shape)

    @property
    def n_nodes(self) -> int:
        return int(np.prod(self.shape))

    def axis(self, k: int) -> np.ndarray:
        return self.lower[k] + self.h * np.arange(self.shape[k])

    @cached_property
    def mesh(self) -> tuple[np.ndarray, ...]:
        return tuple(np.meshgrid(*[self.axis(k) for k in range(self.dimension)],
                                 indexing="ij"))

    @cached_property
    def coords(self) -> np.ndarray:
        """(n_nodes, dimension) node coordinates in row-major order."""
        return np.column_stack([m.reshape(-1) for m in self.mesh])

    @cached_property
    def boundary_mask(self) -> np.ndarray:
        mask = np.zeros(self.shape, dtype=bool)
        for k in range(self.dimension):
            sl_lo = [slice(None)] * self.dimension
            sl_hi = [slice(None)] * self.dimension
            sl_lo[k] = 0
            sl_hi[k] = -1
            mask[tuple(sl_lo)] = True
            mask[tuple(sl_hi)] = True
        return mask

    @cached_property
    def interior_mask(self) -> np.ndarray:
        return ~self.boundary_mask

    @cached_property
    def boundary_indices(self) -> np.ndarray:
        return np.flatnonzero(self.boundary_mask.reshape(-1))

    @cached_property
    def interior_indices(self) -> np.ndarray:
        return np.flatnonzero(self.interior_mask.reshape(-1))

    def multi_index(self, flat: int) -> tuple[int, ...]:
        return tuple(int(v) for v in np.unravel_index(flat, self.shape))

    def flat_index(self, multi: Sequence[int]) -> int:
        return int(np.ravel_multi_index(tuple(multi), self.shape))

    def node_coords(self, flat: int) -> np.ndarray:
        return self.coords[flat]

    def is_interior(self, flat: int) -> bool:
        multi = self.multi_index(flat)
        return all(0 < m < s - 1 for m, s in zip(multi, self.shape))

    def distance_to_boundary(self, point: Sequence[float]) -> float:
        """Distance from a point to the nearest face of the bounding box."""
        p = np.asarray(point, dtype=float)
        lo = np.asarray(self.lower)
        hi = np.asarray(self.upper)
        return float(min(np.min(p - lo), np.min(hi - p)))

    def center(self) -> np.ndarray:
        return 0.5 * (np.asarray(self.lower) + np.asarray(self.upper))


def build_grid(dimension: int,
               corners: Sequence,
               nodes_per_axis: int | Sequence[int]) -> Grid:
    """Build a validated uniform grid.

    Parameters
    ----------
    dimension : 1 or 2.
    corners : per-axis (lower, upper) pairs; for 1D a plain (lo, hi) pair
        of scalars is accepted.
    nodes_per_axis : node count, a single int applied to every axis or one
        int per axis. Must be >= 3 so interior nodes carry full stencils.

    The resulting per-axis spacings must agree to 1e-12 relative, since the
    whole scheme is written in a single h.
    """
    if dimension not in (1, 2):
        raise ValueError(f"dimension must be 1 or 2, got {dimension}")

    corners = list(corners)
    if dimension == 1 and len(corners) == 2 and np.isscalar(corners[0]):
        corners = [tuple(corners)]
    if len(corners) != dimension:
        raise BadCornersError(
            f"expected {dimension} corner pairs, got {len(corners)}")

    lower, upper = [], []
    for pair in corners:
        lo, hi = float(pair[0]), float(pair[1])
        if not np.isfinite(lo) or not np.isfinite(hi) or not lo < hi:
            raise BadCornersError(f"corners must satisfy lower < upper, got ({lo}, {hi})")
        lower.append(lo)
        upper.append(hi)

    if np.isscalar(nodes_per_axis):
        nodes = [int(nodes_per_axis)] * dimension
    else:
        nodes = [int(n) for n in nodes_per_axis]
        if len(nodes) != dimension:
            raise TooFewNodesError(
                f"expected {dimension} node counts, got {len(nodes)}")
    for n in nodes:
        if n < 3:
            raise TooFewNodesError(f"need at least 3 nodes per axis, got {n}")

    spacings = [(u - l) / (n - 1) for l, u, n in zip(lower, upper, nodes)]
    h = spacings[0]
    for s in spacings[1:]:
        if abs(s - h) > SPACING_RTOL * max(abs(s), abs(h)):
            raise NonuniformSpacingError(
                f"axis spacings differ: {spacings} (uniform h required)")

    return Grid(lower=tuple(lower), upper=tuple(upper), shape=tuple(nodes), h=h)


@dataclass(frozen=True)
class ScalarField:
    """One real value per grid node. Values are stored read-only."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != self.grid.shape:
            raise ValueError(
                f"values shape {vals.shape} != grid shape {self.grid.shape}")
        if not np.all(np.isfinite(vals)):
            raise NonFiniteSampleError("field contains NaN or Inf")
        vals = vals.copy()
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    @property
    def flat(self) -> np.ndarray:
        return self.values.reshape(-1)

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))

    def boundary_sup(self) -> float:
        return float(np.max(np.abs(self.flat[self.grid.boundary_indices])))

    def with_values(self, values: np.ndarray) -> "ScalarField":
        return ScalarField(self.grid, values)


def zero_field(grid: Grid) -> ScalarField:
    return ScalarField(grid, np.zeros(grid.shape))


def sample_function(grid: Grid, fn: Callable) -> ScalarField:
    """Sample a pointwise function onto the grid nodes.

    ``fn`` is called with one positional argument per axis (x, or x and y)
    and may be numpy-vectorized or plain scalar.
    """
    try:
        vals = np.asarray(fn(*grid.mesh), dtype=float)
        if vals.shape == ():
            vals = np.full(grid.shape, float(vals))
        if vals.shape != grid.shape:
            raise ValueError
    except NonFiniteSampleError:
        raise
    except Exception:
        vals = np.array([float(fn(*pt)) for pt in grid.coords],
                        dtype=float).reshape(grid.shape)
    if not np.all(np.isfinite(vals)):
        raise NonFiniteSampleError("sampled values contain NaN or Inf")
    return ScalarField(grid, vals)


@dataclass(frozen=True)
class BoundaryData:
    """Real values on exactly the boundary-node set.

    Values align with ``grid.boundary_indices`` (row-major flat order).
    """

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        n_bdry = self.grid.boundary_indices.size
        if vals.shape != (n_bdry,):
            raise ValueError(
                f"boundary data needs {n_bdry} values, got shape {vals.shape}")
        if not np.all(np.isfinite(vals)):
            raise NonFiniteSampleError("boundary data contains NaN or Inf")
        vals = vals.copy()
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_function(cls, grid: Grid, fn: Callable) -> "BoundaryData":
        pts = grid.coords[grid.boundary_indices]
        vals = np.array([float(fn(*pt)) for pt in pts])
        return cls(grid, vals)

    @classmethod
    def constant(cls, grid: Grid, value: float) -> "BoundaryData":
        return cls(grid, np.full(grid.boundary_indices.size, float(value)))

    @classmethod
    def zero(cls, grid: Grid) -> "BoundaryData":
        return cls.constant(grid, 0.0)

    @classmethod
    def from_field(cls, field: ScalarField) -> "BoundaryData":
        return cls(field.grid, field.flat[field.grid.boundary_indices])

    def as_full(self, fill: float = 0.0) -> np.ndarray:
        full = np.full(self.grid.n_nodes, fill)
        full[self.grid.boundary_indices] = self.values
        return full.reshape(self.grid.shape)

    def sup(self) -> float:
        return float(np.max(np.abs(self.values)))


def grid_ball(grid: Grid, center: Sequence[float], r: float) -> np.ndarray:
    """Flat indices of nodes with Euclidean distance <= r from center.

    The center must lie inside the grid bounding box; the result may be
    empty when r is below the nearest-node distance.
    """
    if r <= 0:
        raise ValueError(f"ball radius must be positive, got {r}")
    c = np.atleast_1d(np.asarray(center, dtype=float))
    if c.shape != (grid.dimension,):
        raise ValueError(f"center must have {grid.dimension} coordinates")
    lo = np.asarray(grid.lower)
    hi = np.asarray(grid.upper)
    if np.any(c < lo) or np.any(c > hi):
        raise CenterOutsideDomainError(f"center {tuple(c)} outside the domain box")
    dist = np.linalg.norm(grid.coords - c, axis=1)
    return np.flatnonzero(dist <= r)


def field_to_csv(field: ScalarField, path) -> None:
    """Dump a field as CSV: header x[,y],value, one node per row, row-major,
    17 significant digits."""
    grid = field.grid
    header = ("x,value" if grid.dimension == 1 else "x,y,value")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(header + "\n")
        flat = field.flat
        for i in range(grid.n_nodes):
            pt = grid.coords[i]
            cols = [f"{v:.17g}" for v in pt] + [f"{flat[i]:.17g}"]
            fh.write(",".join(cols) + "\n")
