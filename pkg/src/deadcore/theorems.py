"""Executable checks of the qualitative theory: growth and non-degeneracy
exponents at the free boundary, weak comparison, flattening under source
scaling, density/porosity/box-dimension of the free boundary, and
Liouville-type threshold experiments on expanding domains.

All constants these experiments produce are measurements; none are
asserted as exact. Ball suprema use node maxima, so every estimate
carries an O(h) sampling bias that the tolerances of the test suite
absorb.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .errors import (
    BallLeavesDomainError,
    BoundaryOrderingViolatedError,
    EmptyFreeBoundaryError,
    NotAFreeBoundaryPointError,
    RangeViolationError,
)
from .free_boundary import LABEL_POSITIVE, RegionDecomposition, decompose, magnitude
from .grid import grid_ball
from .radial import barrier_constants, exponents
from .system_solver import ProblemSpec, SolutionPair, fixed_point_solve


@dataclass
class GrowthProfile:
    """Radii-vs-sup table around a free-boundary node with a log-log fit."""

    center: np.ndarray
    center_index: int
    radii: np.ndarray
    sups: np.ndarray
    slope: float          # fitted exponent
    intercept: float
    r_squared: float
    gamma: float          # theoretical exponent 2/(1-pq)
    ratios: np.ndarray    # sup_k / r_k**gamma

    def ratio_bounds(self) -> tuple[float, float]:
        return float(np.min(self.ratios)), float(np.max(self.ratios))


def growth_profile(pair: SolutionPair, x0, r_min: float | None = None,
                   r_max: float | None = None, levels: int = 8,
                   radii: Sequence[float] | None = None,
                   decomposition: RegionDecomposition | None = None,
                   eps: float | None = None) -> GrowthProfile:
    """Fit the growth rate of the magnitude around a free-boundary node.

    ``x0`` is a flat node index or a coordinate tuple (snapped to the
    nearest node) and must lie within one node of the detected free
    boundary. Radii are geometric between r_min and r_max unless given
    explicitly; the fit window is restricted to r >= 4h and
    r <= dist(x0, boundary)/2.
    """
    grid = pair.grid
    if decomposition is None:
        decomposition = decompose(pair, eps)
    fb = decomposition.free_boundary
    if fb.size == 0:
        raise NotAFreeBoundaryPointError("decomposition has no free boundary")

    if np.isscalar(x0):
        idx = int(x0)
    else:
        pt = np.atleast_1d(np.asarray(x0, dtype=float))
        idx = int(np.argmin(np.linalg.norm(grid.coords - pt, axis=1)))
    center = grid.coords[idx]

    fb_multi = np.array([grid.multi_index(i) for i in fb])
    own = np.array(grid.multi_index(idx))
    if np.min(np.max(np.abs(fb_multi - own), axis=1)) > 1:
        raise NotAFreeBoundaryPointError(
            f"node {tuple(own)} is not within one node of the free boundary")

    h = grid.h
    max_r = grid.distance_to_boundary(center) / 2.0
    if radii is None:
        if r_min is None:
            r_min = 4 * h
        if r_max is None:
            r_max = max_r
        if levels < 4:
            raise ValueError("need at least 4 radii levels")
        radii = np.geomspace(r_min, r_max, levels)
    radii = np.asarray(sorted(float(r) for r in radii))
    if radii[0] < 4 * h - 1e-12 * h:
        raise ValueError(f"radii must start at >= 4h = {4 * h}")
    if radii[-1] > max_r * (1 + 1e-12):
        raise BallLeavesDomainError(
            f"largest radius {radii[-1]} exceeds dist(x0, boundary)/2 = {max_r}")

    mag = decomposition.magnitude_values
    sups = np.array([float(np.max(mag[grid_ball(grid, center, r)]))
                     for r in radii])

    pos = sups > 0
    if np.count_nonzero(pos) >= 2:
        lr, ls = np.log(radii[pos]), np.log(sups[pos])
        slope, intercept = np.polyfit(lr, ls, 1)
        fit = slope * lr + intercept
        ss_res = float(np.sum((ls - fit) ** 2))
        ss_tot = float(np.sum((ls - np.mean(ls)) ** 2))
        r_squared = 1.0 if ss_tot == 0 else 1.0 - ss_res / ss_tot
    else:
        # a single usable radius carries no slope information
        slope = intercept = r_squared = float("nan")

    _, _, gamma = exponents(pair.p, pair.q)
    return GrowthProfile(center=center, center_index=idx, radii=radii,
                         sups=sups, slope=float(slope), intercept=float(intercept),
                         r_squared=r_squared, gamma=gamma,
                         ratios=sups / radii ** gamma)


def nondegeneracy_ratios(profile: GrowthProfile,
                         gamma: float | None = None) -> tuple[float, float]:
    """Min and max of sup_k / r_k**gamma over the profile radii."""
    if profile.radii.size == 0:
        raise ValueError("empty profile")
    g = profile.gamma if gamma is None else gamma
    ratios = profile.sups / profile.radii ** g
    return float(np.min(ratios)), float(np.max(ratios))


def weak_compare(pair_super: SolutionPair, pair_sub: SolutionPair,
                 tol: float | None = None) -> tuple[float, bool]:
    """min over nodes of max{u* - u_-, v* - v_-} and a pass verdict.

    Requires the pairs ordered on the boundary; the verdict allows a
    truncation-sized slack 10 h^2 * scale.
    """
    grid = pair_super.grid
    if pair_sub.grid != grid:
        raise ValueError("pairs live on different grids")
    bidx = grid.boundary_indices
    scale = max(1.0, pair_super.u.sup_norm(), pair_super.v.sup_norm(),
                pair_sub.u.sup_norm(), pair_sub.v.sup_norm())
    slack = 1e-10 * scale
    du_b = pair_super.u.flat[bidx] - pair_sub.u.flat[bidx]
    dv_b = pair_super.v.flat[bidx] - pair_sub.v.flat[bidx]
    if np.min(du_b) < -slack or np.min(dv_b) < -slack:
        raise BoundaryOrderingViolatedError(
            "super-solution data must dominate the sub-solution data on the boundary")
    if tol is None:
        tol = 10 * grid.h ** 2 * scale
    gap = np.maximum(pair_super.u.values - pair_sub.u.values,
                     pair_super.v.values - pair_sub.v.values)
    min_gap = float(np.min(gap))
    return min_gap, bool(min_gap >= -tol)


@dataclass
class FlatteningTable:
    deltas: np.ndarray
    sups: np.ndarray            # sup of the magnitude over the half ball
    window_radius: float
    nonincreasing: bool         # in delta, within 5 percent

    def rows(self):
        return list(zip(self.deltas, self.sups))


def _run_jobs(fn, args, workers: int):
    """Map fn over args, optionally with a thread pool; order preserved."""
    if workers <= 1 or len(args) <= 1:
        return [fn(a) for a in args]
    from concurrent.futures import ThreadPoolExecutor
    with ThreadPoolExecutor(max_workers=min(workers, len(args))) as pool:
        return list(pool.map(fn, args))


def flattening_experiment(problem_family: Callable[[float], ProblemSpec],
                          delta_list: Sequence[float],
                          window_radius: float = 0.5,
                          range_tol: float = 1e-6,
                          tol: float | None = None,
                          workers: int = 1,
                          ) -> FlatteningTable:
    """Solve the family with source scaling delta^2 on the first equation
    and tabulate sup of the magnitude over the ball of ``window_radius``
    around the domain center.

    Solutions must stay in [0, 1] up to ``range_tol``; the monotone-trend
    flag checks that the sups are nonincreasing in delta within 5%.
    """
    deltas = np.asarray(sorted(float(d) for d in delta_list))

    def one(d: float) -> float:
        problem = problem_family(float(d))
        pair, history = fixed_point_solve(problem, tol=tol)
        lo = min(float(np.min(pair.u.values)), float(np.min(pair.v.values)))
        hi = max(float(np.max(pair.u.values)), float(np.max(pair.v.values)))
        if lo < -range_tol or hi > 1 + range_tol:
            raise RangeViolationError(
                f"solve at delta={d} left [0,1]: range [{lo}, {hi}]")
        grid = problem.grid
        ball = grid_ball(grid, grid.center(), window_radius)
        return float(np.max(magnitude(pair).flat[ball]))

    sups = np.asarray(_run_jobs(one, list(deltas), workers))
    ok = all(sups[k + 1] <= sups[k] * 1.05 for k in range(len(sups) - 1))
    return FlatteningTable(deltas=deltas, sups=sups,
                           window_radius=window_radius, nonincreasing=bool(ok))


@dataclass
class MeasureReport:
    """Density fractions, porosity, and box-counting dimension estimates."""

    rho_list: np.ndarray | None = None
    fractions: np.ndarray | None = None       # (n_fb, n_rho)
    min_fractions: np.ndarray | None = None   # per rho
    sigma: float | None = None
    box_sizes: np.ndarray | None = None
    box_counts: np.ndarray | None = None
    box_dimension: float | None = None


def density_scan(decomposition: RegionDecomposition,
                 rho_list: Sequence[float]) -> MeasureReport:
    """Fraction of positivity nodes in balls around free-boundary nodes."""
    fb = decomposition.free_boundary
    if fb.size == 0:
        raise EmptyFreeBoundaryError("density scan needs a free boundary")
    grid = decomposition.grid
    positive = decomposition.labels == LABEL_POSITIVE
    rhos = np.asarray([float(r) for r in rho_list])
    fractions = np.zeros((fb.size, rhos.size))
    for i, node in enumerate(fb):
        center = grid.coords[node]
        for j, rho in enumerate(rhos):
            ball = grid_ball(grid, center, rho)
            fractions[i, j] = float(np.mean(positive[ball]))
    return MeasureReport(rho_list=rhos, fractions=fractions,
                         min_fractions=fractions.min(axis=0))


def porosity_and_dimension(decomposition: RegionDecomposition,
                           r_list: Sequence[float],
                           t_samples: int = 19) -> MeasureReport:
    """Porosity constant and box-counting dimension of the free boundary.

    For each free-boundary node x and radius r, candidate empty-ball
    centers lie on the ray from x toward its nearest positivity node; the
    porosity is the smallest over (x, r) of the best achievable empty
    fraction. Box counts run over dyadic box sizes down to 2h.
    """
    fb = decomposition.free_boundary
    if fb.size == 0:
        raise EmptyFreeBoundaryError("porosity needs a free boundary")
    grid = decomposition.grid
    fb_coords = grid.coords[fb]
    pos_idx = decomposition.positive
    fb_tree = cKDTree(fb_coords)
    pos_tree = cKDTree(grid.coords[pos_idx]) if pos_idx.size else None

    lo = np.asarray(grid.lower)
    hi = np.asarray(grid.upper)
    h = grid.h
    ts = np.linspace(0.1, 0.9, t_samples)

    sigma = np.inf
    for node in fb:
        x = grid.coords[node]
        if pos_tree is None:
            break
        _, j = pos_tree.query(x)
        direction = grid.coords[pos_idx[j]] - x
        norm = np.linalg.norm(direction)
        if norm == 0:
            continue
        direction = direction / norm
        for r in r_list:
            best = 0.0
            for t in ts:
                y = x + t * r * direction
                y_snap = lo + np.round((y - lo) / h) * h
                if np.any(y_snap < lo - 1e-12) or np.any(y_snap > hi + 1e-12):
                    continue
                d_fb, _ = fb_tree.query(y_snap)
                avail = min(float(d_fb), float(r - np.linalg.norm(y_snap - x)))
                best = max(best, avail / r)
            sigma = min(sigma, best)
    if not np.isfinite(sigma):
        sigma = 0.0

    extent = float(np.max(hi - lo))
    k_max = int(np.floor(np.log2(extent / (2 * h))))
    k_min = max(1, k_max - 5)
    if k_max - k_min + 1 < 4:
        k_min = max(1, k_max - 3)
    sizes, counts = [], []
    for k in range(k_min, k_max + 1):
        s = extent / 2 ** k
        cells = np.floor((fb_coords - lo) / s).astype(int)
        counts.append(len({tuple(row) for row in cells}))
        sizes.append(s)
    sizes = np.asarray(sizes, dtype=float)
    counts = np.asarray(counts, dtype=float)
    slope, _ = np.polyfit(np.log(1.0 / sizes), np.log(counts), 1)
    dim = float(min(max(slope, 0.0), grid.dimension))
    return MeasureReport(sigma=float(sigma), box_sizes=sizes,
                         box_counts=counts, box_dimension=dim)


@dataclass
class LiouvilleReport:
    """Scaling of boundary magnitude against the entire-solution threshold.

    The limsup of the theory is proxied by the largest tested radius; the
    report says so explicitly in ``note``.
    """

    radii: np.ndarray
    boundary_sups: np.ndarray     # S_R over the outermost node layer
    ratios: np.ndarray            # S_R / R**gamma
    threshold: float              # min{A^(1/(1+p)), B^(1/(1+q))}
    window_sups: np.ndarray       # sup of magnitude near the center
    window_radius: float
    verdict: str
    note: str = "limsup proxied by the largest tested radius"
    histories: list = field(default_factory=list)


def liouville_experiment(problem_family: Callable[[float], ProblemSpec],
                         r_list: Sequence[float],
                         window_radius: float = 0.5,
                         tol: float | None = None,
                         workers: int = 1) -> LiouvilleReport:
    """Solve on expanding domains and compare boundary-magnitude ratios
    against the triviality threshold."""
    radii = np.asarray(sorted(float(r) for r in r_list))
    problem0 = problem_family(float(radii[0]))
    p, q = problem0.p, problem0.q
    n = problem0.grid.dimension
    _, _, gamma = exponents(p, q)
    A, B = barrier_constants(p, q, n, problem0.operator_u.Lam)
    threshold = min(A ** (1.0 / (1.0 + p)), B ** (1.0 / (1.0 + q)))

    def one(R: float):
        problem = problem_family(float(R))
        pair, history = fixed_point_solve(problem, tol=tol)
        mag = magnitude(pair).flat
        grid = problem.grid
        s = float(np.max(mag[grid.boundary_indices]))
        ball = grid_ball(grid, grid.center(), window_radius)
        return s, float(np.max(mag[ball])), history

    rows = _run_jobs(one, list(radii), workers)
    s_r = np.asarray([row[0] for row in rows])
    window = np.asarray([row[1] for row in rows])
    histories = [row[2] for row in rows]
    ratios = s_r / radii ** gamma
    if np.all(ratios < threshold):
        decays = window[-1] <= 0.5 * window[0] + 1e-30
        verdict = "consistent-with-liouville" if decays else "inconsistent"
    elif np.all(ratios >= threshold):
        verdict = "above-threshold"
    else:
        verdict = "mixed"
    return LiouvilleReport(radii=radii, boundary_sups=s_r, ratios=ratios,
                           threshold=threshold, window_sups=window,
                           window_radius=window_radius, verdict=verdict,
                           histories=histories)
