"""Command line entry point: deadcore <subcommand> --config <path>
[--set section.key=value]...

Each subcommand runs one experiment and writes CSV tables, JSON reports,
figures (PNG), and a run manifest into the output directory. Outputs are
deterministic given (config, seed); the only field that varies between
identical runs is the wall time.

Exit codes: 0 success, 2 non-converged solve, 1 error (with a
machine-readable error JSON on stdout).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

import numpy as np

from . import __version__
from .config import EXPERIMENTS, RunConfig, config_as_dict, parse_config
from .errors import DeadcoreError
from .free_boundary import decompose, regions_to_csv
from .grid import BoundaryData, Grid, build_grid, field_to_csv
from .operators import OperatorSpec, laplacian, pucci_minus, pucci_plus
from .radial import RadialBarrier, barrier_constants, exponents, radial_pair
from .system_solver import ProblemSpec, fixed_point_solve, system_residual
from .theorems import (
    density_scan,
    flattening_experiment,
    growth_profile,
    liouville_experiment,
    nondegeneracy_ratios,
    porosity_and_dimension,
    weak_compare,
)


def _worker_count() -> int:
    """DEADCORE_THREADS bounds the worker count for experiment sweeps."""
    raw = os.environ.get("DEADCORE_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _make_operator(kind: str, config: RunConfig) -> OperatorSpec:
    if kind == "laplacian":
        return laplacian()
    if kind == "pucci_minus":
        return pucci_minus(config.lam, config.Lam, config.directions)
    return pucci_plus(config.lam, config.Lam, config.directions)


def _make_grid(config: RunConfig, lower=None, upper=None, nodes=None) -> Grid:
    lo = config.lower if lower is None else lower
    hi = config.upper if upper is None else upper
    n = config.nodes if nodes is None else nodes
    corners = [(lo, hi)] * config.dimension
    return build_grid(config.dimension, corners, n)


def _barrier(config: RunConfig, grid: Grid, ellipticity=None, rho=None) -> RadialBarrier:
    center = tuple(grid.center())
    return RadialBarrier(p=config.p, q=config.q, n=config.dimension,
                         ellipticity=config.barrier_e if ellipticity is None else ellipticity,
                         rho=config.rho if rho is None else rho, center=center)


def _boundary_data(config: RunConfig, grid: Grid) -> tuple[BoundaryData, BoundaryData]:
    if config.boundary == "zero":
        return BoundaryData.zero(grid), BoundaryData.zero(grid)
    if config.boundary == "constant":
        bd = BoundaryData.constant(grid, config.boundary_value)
        return bd, bd
    barrier = _barrier(config, grid)
    pair = radial_pair(barrier, grid)
    phi = BoundaryData(grid, config.boundary_scale
                       * BoundaryData.from_field(pair.u).values)
    psi = BoundaryData(grid, config.boundary_scale
                       * BoundaryData.from_field(pair.v).values)
    return phi, psi


def _make_problem(config: RunConfig, grid: Grid | None = None) -> ProblemSpec:
    grid = grid or _make_grid(config)
    phi, psi = _boundary_data(config, grid)
    return ProblemSpec(_make_operator(config.operator_f, config),
                       _make_operator(config.operator_g, config),
                       config.p, config.q, phi, psi)


def _write_json(path, payload) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _json_default(value):
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    raise TypeError(f"not JSON serializable: {type(value)}")


def _write_manifest(outdir, config: RunConfig, wall: float) -> None:
    _write_json(os.path.join(outdir, "manifest.json"), {
        "config": config_as_dict(config),
        "package_version": __version__,
        "numpy_version": np.__version__,
        "wall_time_s": wall,
    })


def _solve_with_pair(config: RunConfig):
    problem = _make_problem(config)
    pair, history = fixed_point_solve(problem, tol=config.tol,
                                      max_outer=config.max_outer,
                                      damping=config.damping)
    return problem, pair, history


# experiment runners ---------------------------------------------------------

def _run_solve(config: RunConfig, outdir: str) -> tuple[int, dict]:
    problem, pair, history = _solve_with_pair(config)
    res_u, res_v = system_residual(problem, pair)
    field_to_csv(pair.u, os.path.join(outdir, "u.csv"))
    field_to_csv(pair.v, os.path.join(outdir, "v.csv"))
    history.to_csv(os.path.join(outdir, "history.csv"))
    dec = decompose(pair, config.epsilon)
    regions_to_csv(dec, os.path.join(outdir, "regions.csv"))
    if config.figures:
        from . import figures
        figures.render_solution(pair, os.path.join(outdir, "solution.png"))
        figures.render_history(history, os.path.join(outdir, "history.png"))
        figures.render_regions(dec, os.path.join(outdir, "regions.png"))
    report = {
        "experiment": "solve",
        "converged": history.converged,
        "iterations": history.iterations,
        "res_u": res_u,
        "res_v": res_v,
        "p": config.p,
        "q": config.q,
        "h": problem.grid.h,
        "epsilon": dec.eps,
        "n_dead_core": int(dec.dead_core.size),
        "n_free_boundary": int(dec.free_boundary.size),
        "seed": config.seed,
    }
    return (0 if history.converged else 2), report


def _run_radial(config: RunConfig, outdir: str) -> tuple[int, dict]:
    alpha, beta, gamma = exponents(config.p, config.q)
    A, B = barrier_constants(config.p, config.q, config.dimension, config.barrier_e)
    report = {
        "experiment": "radial",
        "p": config.p, "q": config.q,
        "n": config.dimension, "E": config.barrier_e,
        "alpha": alpha, "beta": beta, "gamma": gamma,
        "A": A, "B": B,
        "seed": config.seed,
    }
    print(json.dumps({k: report[k] for k in
                      ("alpha", "beta", "gamma", "A", "B")}, sort_keys=True))
    return 0, report


def _source_pair(config: RunConfig):
    """Computed solution or sampled radial pair, per [experiment] source."""
    if config.source == "radial":
        grid = _make_grid(config)
        pair = radial_pair(_barrier(config, grid), grid)
        converged = True
    else:
        _, pair, history = _solve_with_pair(config)
        converged = history.converged
    return pair, converged


def _run_fit_exponent(config: RunConfig, outdir: str) -> tuple[int, dict]:
    pair, converged = _source_pair(config)
    grid = pair.grid
    dec = decompose(pair, config.epsilon)
    fb = dec.free_boundary
    if fb.size == 0:
        raise DeadcoreError("no free boundary detected; adjust epsilon")
    # deterministic center: the detected node farthest from the domain center
    center_dist = np.linalg.norm(grid.coords[fb] - grid.center(), axis=1)
    x0 = int(fb[np.argmax(center_dist)])
    profile = growth_profile(pair, x0, r_min=config.r_min, r_max=config.r_max,
                             levels=config.levels, decomposition=dec)
    c_min, c_max = nondegeneracy_ratios(profile)
    with open(os.path.join(outdir, "profile.csv"), "w", encoding="utf-8") as fh:
        fh.write("r,sup,ratio\n")
        for r, s, c in zip(profile.radii, profile.sups, profile.ratios):
            fh.write(f"{r:.17g},{s:.17g},{c:.17g}\n")
    if config.figures:
        from . import figures
        figures.render_profile(profile, os.path.join(outdir, "exponent.png"))
    report = {
        "experiment": "fit-exponent",
        "converged_source": converged,
        "center": profile.center.tolist(),
        "gamma_hat": profile.slope,
        "gamma_theory": profile.gamma,
        "intercept": profile.intercept,
        "r_squared": profile.r_squared,
        "c_min": c_min,
        "c_max": c_max,
        "epsilon": dec.eps,
        "seed": config.seed,
    }
    return (0 if converged else 2), report


def _run_measure(config: RunConfig, outdir: str) -> tuple[int, dict]:
    pair, converged = _source_pair(config)
    dec = decompose(pair, config.epsilon)
    density = density_scan(dec, config.rho_list)
    poro = porosity_and_dimension(dec, config.r_list)
    with open(os.path.join(outdir, "density.csv"), "w", encoding="utf-8") as fh:
        fh.write("rho,min_fraction\n")
        for r, frac in zip(density.rho_list, density.min_fractions):
            fh.write(f"{r:.17g},{frac:.17g}\n")
    if config.figures:
        from . import figures
        merged = density
        merged.sigma = poro.sigma
        merged.box_sizes = poro.box_sizes
        merged.box_counts = poro.box_counts
        merged.box_dimension = poro.box_dimension
        figures.render_measure(merged, os.path.join(outdir, "measure.png"))
    report = {
        "experiment": "measure",
        "converged_source": converged,
        "rho_list": list(density.rho_list),
        "min_fractions": list(density.min_fractions),
        "sigma": poro.sigma,
        "box_dimension": poro.box_dimension,
        "box_sizes": list(poro.box_sizes),
        "box_counts": list(poro.box_counts),
        "epsilon": dec.eps,
        "seed": config.seed,
    }
    return (0 if converged else 2), report


def _run_compare(config: RunConfig, outdir: str) -> tuple[int, dict]:
    grid = _make_grid(config)
    op_f = _make_operator(config.operator_f, config)
    barrier = _barrier(config, grid, ellipticity=op_f.Lam, rho=0.0)
    super_pair = radial_pair(barrier, grid)
    phi = BoundaryData(grid, config.compare_scale
                       * BoundaryData.from_field(super_pair.u).values)
    psi = BoundaryData(grid, config.compare_scale
                       * BoundaryData.from_field(super_pair.v).values)
    problem = ProblemSpec(op_f, _make_operator(config.operator_g, config),
                          config.p, config.q, phi, psi)
    sub_pair, history = fixed_point_solve(problem, tol=config.tol,
                                          max_outer=config.max_outer)
    min_gap, passed = weak_compare(super_pair, sub_pair)
    gap = np.maximum(super_pair.u.values - sub_pair.u.values,
                     super_pair.v.values - sub_pair.v.values).reshape(-1)
    header = "x,gap" if grid.dimension == 1 else "x,y,gap"
    with open(os.path.join(outdir, "compare.csv"), "w", encoding="utf-8") as fh:
        fh.write(header + "\n")
        for i in range(grid.n_nodes):
            cols = [f"{v:.17g}" for v in grid.coords[i]] + [f"{gap[i]:.17g}"]
            fh.write(",".join(cols) + "\n")
    if config.figures:
        from . import figures
        figures.render_compare(super_pair, sub_pair, os.path.join(outdir, "compare.png"))
    report = {
        "experiment": "compare",
        "converged": history.converged,
        "min_gap": min_gap,
        "passed": passed,
        "tolerance": 10 * grid.h ** 2 * max(1.0, super_pair.u.sup_norm(),
                                            super_pair.v.sup_norm()),
        "seed": config.seed,
    }
    return (0 if history.converged else 2), report


def _flatten_family(config: RunConfig):
    grid = _make_grid(config)
    barrier = _barrier(config, grid)
    base = radial_pair(barrier, grid)
    phi_vals = BoundaryData.from_field(base.u).values

    def family(delta: float) -> ProblemSpec:
        s_u = delta ** 2
        s_v = config.gamma_c
        a = (s_v / s_u) ** (1.0 / (1.0 + config.p))
        phi = BoundaryData(grid, phi_vals)
        psi = BoundaryData(grid, a * phi_vals)
        return ProblemSpec(_make_operator(config.operator_f, config),
                           _make_operator(config.operator_g, config),
                           config.p, config.q, phi, psi,
                           source_scale_u=s_u, source_scale_v=s_v)

    return family


def _run_flatten(config: RunConfig, outdir: str) -> tuple[int, dict]:
    table = flattening_experiment(_flatten_family(config), config.delta_list,
                                  window_radius=config.window_radius,
                                  tol=config.tol, workers=_worker_count())
    with open(os.path.join(outdir, "flatten.csv"), "w", encoding="utf-8") as fh:
        fh.write("delta,sup\n")
        for d, s in table.rows():
            fh.write(f"{d:.17g},{s:.17g}\n")
    if config.figures:
        from . import figures
        figures.render_flatten(table, os.path.join(outdir, "flatten.png"))
    report = {
        "experiment": "flatten",
        "deltas": list(table.deltas),
        "sups": list(table.sups),
        "nonincreasing": table.nonincreasing,
        "window_radius": table.window_radius,
        "seed": config.seed,
    }
    return 0, report


def _liouville_family(config: RunConfig):
    alpha, beta, gamma = exponents(config.p, config.q)
    A, B = barrier_constants(config.p, config.q, config.dimension, config.Lam)
    m = min(A ** (1.0 / (1.0 + config.p)), B ** (1.0 / (1.0 + config.q)))

    def family(R: float) -> ProblemSpec:
        nodes = int(round(config.nodes_per_unit * R)) + 1
        nodes = max(nodes, 9)
        corners = [(-R, R)] * config.dimension
        grid = build_grid(config.dimension, corners, nodes)
        if config.data == "radial":
            barrier = RadialBarrier(p=config.p, q=config.q, n=config.dimension,
                                    ellipticity=config.Lam, rho=0.0,
                                    center=tuple(grid.center()))
            pair = radial_pair(barrier, grid)
            phi = BoundaryData.from_field(pair.u)
            psi = BoundaryData.from_field(pair.v)
        else:
            level = config.theta * m * R ** gamma
            phi = BoundaryData.constant(grid, (level / 2) ** (1 + config.p))
            psi = BoundaryData.constant(grid, (level / 2) ** (1 + config.q))
        return ProblemSpec(_make_operator(config.operator_f, config),
                           _make_operator(config.operator_g, config),
                           config.p, config.q, phi, psi)

    return family


def _run_liouville(config: RunConfig, outdir: str) -> tuple[int, dict]:
    report_obj = liouville_experiment(_liouville_family(config),
                                      config.big_r_list,
                                      window_radius=config.window_radius,
                                      tol=config.tol, workers=_worker_count())
    with open(os.path.join(outdir, "liouville.csv"), "w", encoding="utf-8") as fh:
        fh.write("R,S_R,ratio,window_sup\n")
        for R, s, c, w in zip(report_obj.radii, report_obj.boundary_sups,
                              report_obj.ratios, report_obj.window_sups):
            fh.write(f"{R:.17g},{s:.17g},{c:.17g},{w:.17g}\n")
    if config.figures:
        from . import figures
        figures.render_liouville(report_obj, os.path.join(outdir, "liouville.png"))
    report = {
        "experiment": "liouville",
        "radii": list(report_obj.radii),
        "boundary_sups": list(report_obj.boundary_sups),
        "ratios": list(report_obj.ratios),
        "threshold": report_obj.threshold,
        "window_sups": list(report_obj.window_sups),
        "verdict": report_obj.verdict,
        "note": report_obj.note,
        "seed": config.seed,
    }
    converged = all(h.converged for h in report_obj.histories)
    return (0 if converged else 2), report


_RUNNERS = {
    "solve": _run_solve,
    "radial": _run_radial,
    "fit-exponent": _run_fit_exponent,
    "measure": _run_measure,
    "compare": _run_compare,
    "flatten": _run_flatten,
    "liouville": _run_liouville,
}


def run(config: RunConfig) -> int:
    """Run one experiment; returns the process exit code."""
    outdir = config.output_dir
    os.makedirs(outdir, exist_ok=True)
    start = time.time()
    try:
        code, report = _RUNNERS[config.experiment](config, outdir)
    except DeadcoreError as exc:
        payload = {"error": type(exc).__name__, "message": str(exc)}
        print(json.dumps(payload, sort_keys=True))
        _write_json(os.path.join(outdir, "error.json"), payload)
        return 1
    wall = time.time() - start
    report["wall_time_s"] = wall
    _write_json(os.path.join(outdir, "report.json"), report)
    _write_manifest(outdir, config, wall)
    return code


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="deadcore",
        description="Finite-difference laboratory for fully nonlinear "
                    "dead-core systems.")
    sub = parser.add_subparsers(dest="experiment", required=True)
    for name in EXPERIMENTS:
        sp = sub.add_parser(name, help=f"run the {name} experiment")
        sp.add_argument("--config", default=None, help="path to a config file")
        sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override section.key=value (flags win)")
    args = parser.parse_args(argv)

    text = ""
    if args.config:
        with open(args.config, "r", encoding="utf-8") as fh:
            text = fh.read()
    overrides = {}
    for item in args.set:
        if "=" not in item:
            print(json.dumps({"error": "UnknownKeyError",
                              "message": f"--set needs KEY=VALUE, got {item!r}"}))
            return 1
        key, value = item.split("=", 1)
        overrides[key.strip()] = value.strip()
    try:
        config = parse_config(text, overrides=overrides,
                              default_experiment=args.experiment)
        config.experiment = args.experiment  # subcommand wins
    except DeadcoreError as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)},
                         sort_keys=True))
        return 1
    return run(config)


if __name__ == "__main__":
    sys.exit(main())
