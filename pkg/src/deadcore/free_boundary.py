"""Magnitude of a solution pair, dead-core / positivity decomposition, and
free-boundary node extraction.

The magnitude of a pair is u_+^{1/(1+p)} + v_+^{1/(1+q)}; its vanishing
set is the dead core. Nodes are labeled by thresholding the magnitude at
``eps`` and the free boundary is taken on the dead-core side: dead nodes
with at least one positivity neighbor in the axis stencil.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NegativeInputError
from .grid import Grid, ScalarField
from .system_solver import SolutionPair

LABEL_CORE = 0
LABEL_POSITIVE = 1
LABEL_FB = 2

NEGATIVE_TOL = 1e-8


def magnitude(pair: SolutionPair) -> ScalarField:
    """Nodewise u_+^{1/(1+p)} + v_+^{1/(1+q)}.

    Values below -1e-8 * scale are rejected; small negative noise is
    clamped to zero.
    """
    scale = max(1.0, pair.u.sup_norm(), pair.v.sup_norm())
    floor = -NEGATIVE_TOL * scale
    if np.min(pair.u.values) < floor or np.min(pair.v.values) < floor:
        raise NegativeInputError(
            f"pair has values below {floor:.3e}; not a nonnegative solution")
    u_plus = np.maximum(pair.u.values, 0.0)
    v_plus = np.maximum(pair.v.values, 0.0)
    vals = u_plus ** (1.0 / (1.0 + pair.p)) + v_plus ** (1.0 / (1.0 + pair.q))
    return ScalarField(pair.grid, vals)


def default_epsilon(pair: SolutionPair) -> float:
    """h^2 * (1 + boundary sups), the solver's truncation-error scale."""
    return pair.grid.h ** 2 * (1.0 + pair.u.boundary_sup() + pair.v.boundary_sup())


@dataclass(frozen=True)
class RegionDecomposition:
    """Node labels: dead core (magnitude <= eps), positivity set, and the
    free-boundary nodes (dead-core nodes with a positivity axis-neighbor).
    """

    grid: Grid
    eps: float
    labels: np.ndarray  # flat, values in {LABEL_CORE, LABEL_POSITIVE, LABEL_FB}
    magnitude_values: np.ndarray  # flat

    @property
    def dead_core(self) -> np.ndarray:
        """Flat indices of the dead core (free-boundary nodes included)."""
        return np.flatnonzero(self.labels != LABEL_POSITIVE)

    @property
    def positive(self) -> np.ndarray:
        return np.flatnonzero(self.labels == LABEL_POSITIVE)

    @property
    def free_boundary(self) -> np.ndarray:
        return np.flatnonzero(self.labels == LABEL_FB)


def decompose(pair: SolutionPair, eps: float | None = None) -> RegionDecomposition:
    """Threshold the magnitude at eps and extract the free boundary."""
    if eps is None:
        eps = default_epsilon(pair)
    if eps <= 0:
        raise ValueError("eps must be positive")
    grid = pair.grid
    mag = magnitude(pair).flat
    dead = mag <= eps

    dead_grid = dead.reshape(grid.shape)
    positive_grid = ~dead_grid
    has_positive_neighbor = np.zeros(grid.shape, dtype=bool)
    for k in range(grid.dimension):
        for sign in (+1, -1):
            shifted = np.zeros(grid.shape, dtype=bool)
            src = [slice(None)] * grid.dimension
            dst = [slice(None)] * grid.dimension
            if sign > 0:
                src[k] = slice(1, None)
                dst[k] = slice(None, -1)
            else:
                src[k] = slice(None, -1)
                dst[k] = slice(1, None)
            shifted[tuple(dst)] = positive_grid[tuple(src)]
            has_positive_neighbor |= shifted

    labels = np.full(grid.n_nodes, LABEL_POSITIVE, dtype=np.int8)
    labels[dead] = LABEL_CORE
    fb = dead & (has_positive_neighbor.reshape(-1))
    labels[fb] = LABEL_FB
    return RegionDecomposition(grid, float(eps), labels, mag)


def regions_to_csv(decomposition: RegionDecomposition, path) -> None:
    """CSV dump: node coords, magnitude, label in {core, positive, fb}."""
    grid = decomposition.grid
    names = {LABEL_CORE: "core", LABEL_POSITIVE: "positive", LABEL_FB: "fb"}
    header = ("x,magnitude,label" if grid.dimension == 1 else "x,y,magnitude,label")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(header + "\n")
        for i in range(grid.n_nodes):
            pt = grid.coords[i]
            cols = [f"{v:.17g}" for v in pt]
            cols.append(f"{decomposition.magnitude_values[i]:.17g}")
            cols.append(names[int(decomposition.labels[i])])
            fh.write(",".join(cols) + "\n")
