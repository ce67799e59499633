"""Run configuration: a small sectioned key-value format, validated
against the same invariants as the target modules.

Schema (all keys optional unless noted, types in parentheses):

    [run]
    experiment   = solve | radial | fit-exponent | measure | compare
                 | flatten | liouville            (required unless the CLI
                                                   subcommand provides it)
    seed         = 1234            (int)  seed echoed into reports
    output_dir   = out             (str)
    figures      = true            (bool) render PNG figures next to CSVs

    [grid]
    dimension    = 1               (1 or 2)
    lower        = -1.0            (float, same for every axis)
    upper        = 1.0             (float)
    nodes        = 513             (int, >= 3, per axis)

    [problem]
    operator_f   = laplacian | pucci_minus | pucci_plus   (str)
    operator_g   = laplacian | ...
    lambda       = 1.0             (float > 0)
    Lambda       = 1.0             (float >= lambda)
    directions   = 8               (wide-stencil direction count, 2D Pucci)
    p            = 0.5             (float >= 0)
    q            = 0.5             (float >= 0, p*q < 1)
    boundary     = radial | zero | constant               (str)
    boundary_value = 0.0           (float, for boundary = constant)
    boundary_scale = 1.0           (float, multiplies the radial trace)
    rho          = 0.3             (float >= 0, radial dead-core radius)
    barrier_e    = 1.0             (float > 0, barrier ellipticity constant)

    [solver]
    tol          = auto            (float or "auto")
    max_outer    = 500             (int)
    damping      = 1.0             (float in (0, 1])

    [experiment]
    epsilon      = auto            (float or "auto"; decomposition threshold)
    r_min, r_max = auto            (floats; profile radii window)
    levels       = 8               (int >= 4)
    rho_list     = 0.1,0.2         (floats; density-scan ball radii)
    r_list       = 0.2,0.3         (floats; porosity radii)
    delta_list   = 1,0.5,0.25      (floats; flattening scalings)
    gamma_c      = 1.0             (float > 0; the fixed second scaling)
    big_r_list   = 1,2,4           (floats; liouville domain radii)
    theta        = 0.5             (float; threshold fraction)
    data         = threshold | radial    (liouville boundary data family)
    window_radius = 0.5            (float)
    nodes_per_unit = 64            (int; liouville resolution per unit length)
    source       = solve | radial  (fit-exponent/measure input)
    compare_scale = 0.5            (float; sub-solution data scale)

Unknown keys are rejected with their line number. Values are `key = value`
pairs, `#` starts a comment, section headers are `[name]`.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

from .errors import ConstraintViolationError, MissingKeyError, UnknownKeyError

EXPERIMENTS = ("solve", "radial", "fit-exponent", "measure", "compare",
               "flatten", "liouville")
OPERATOR_KINDS = ("laplacian", "pucci_minus", "pucci_plus")
BOUNDARY_KINDS = ("radial", "zero", "constant")


@dataclass
class RunConfig:
    # run
    experiment: str = ""
    seed: int = 1234
    output_dir: str = "out"
    figures: bool = True
    # grid
    dimension: int = 1
    lower: float = -1.0
    upper: float = 1.0
    nodes: int = 513
    # problem
    operator_f: str = "laplacian"
    operator_g: str = "laplacian"
    lam: float = 1.0
    Lam: float = 1.0
    directions: int = 8
    p: float = 0.5
    q: float = 0.5
    boundary: str = "radial"
    boundary_value: float = 0.0
    boundary_scale: float = 1.0
    rho: float = 0.3
    barrier_e: float = 1.0
    # solver
    tol: float | None = None
    max_outer: int = 500
    damping: float = 1.0
    # experiment
    epsilon: float | None = None
    r_min: float | None = None
    r_max: float | None = None
    levels: int = 8
    rho_list: tuple = (0.1, 0.2)
    r_list: tuple = (0.2, 0.3)
    delta_list: tuple = (1.0, 0.5, 0.25, 0.125)
    gamma_c: float = 1.0
    big_r_list: tuple = (1.0, 2.0, 4.0)
    theta: float = 0.5
    data: str = "threshold"
    window_radius: float = 0.5
    nodes_per_unit: int = 64
    source: str = "solve"
    compare_scale: float = 0.5


# (section, key) -> (attribute, parser)
def _float_or_auto(text: str):
    return None if text.strip().lower() == "auto" else float(text)


def _float_list(text: str):
    return tuple(float(tok) for tok in text.split(",") if tok.strip())


def _bool(text: str):
    t = text.strip().lower()
    if t in ("true", "yes", "1", "on"):
        return True
    if t in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


_SCHEMA = {
    ("run", "experiment"): ("experiment", str.strip),
    ("run", "seed"): ("seed", int),
    ("run", "output_dir"): ("output_dir", str.strip),
    ("run", "figures"): ("figures", _bool),
    ("grid", "dimension"): ("dimension", int),
    ("grid", "lower"): ("lower", float),
    ("grid", "upper"): ("upper", float),
    ("grid", "nodes"): ("nodes", int),
    ("problem", "operator_f"): ("operator_f", str.strip),
    ("problem", "operator_g"): ("operator_g", str.strip),
    ("problem", "lambda"): ("lam", float),
    ("problem", "Lambda"): ("Lam", float),
    ("problem", "directions"): ("directions", int),
    ("problem", "p"): ("p", float),
    ("problem", "q"): ("q", float),
    ("problem", "boundary"): ("boundary", str.strip),
    ("problem", "boundary_value"): ("boundary_value", float),
    ("problem", "boundary_scale"): ("boundary_scale", float),
    ("problem", "rho"): ("rho", float),
    ("problem", "barrier_e"): ("barrier_e", float),
    ("solver", "tol"): ("tol", _float_or_auto),
    ("solver", "max_outer"): ("max_outer", int),
    ("solver", "damping"): ("damping", float),
    ("experiment", "epsilon"): ("epsilon", _float_or_auto),
    ("experiment", "r_min"): ("r_min", _float_or_auto),
    ("experiment", "r_max"): ("r_max", _float_or_auto),
    ("experiment", "levels"): ("levels", int),
    ("experiment", "rho_list"): ("rho_list", _float_list),
    ("experiment", "r_list"): ("r_list", _float_list),
    ("experiment", "delta_list"): ("delta_list", _float_list),
    ("experiment", "gamma_c"): ("gamma_c", float),
    ("experiment", "big_r_list"): ("big_r_list", _float_list),
    ("experiment", "theta"): ("theta", float),
    ("experiment", "data"): ("data", str.strip),
    ("experiment", "window_radius"): ("window_radius", float),
    ("experiment", "nodes_per_unit"): ("nodes_per_unit", int),
    ("experiment", "source"): ("source", str.strip),
    ("experiment", "compare_scale"): ("compare_scale", float),
}


def parse_config(text: str, overrides: dict | None = None,
                 default_experiment: str | None = None) -> RunConfig:
    """Parse and validate a config; the first violated invariant is
    reported by name."""
    config = RunConfig()
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            if not any(sec == section for sec, _ in _SCHEMA):
                raise UnknownKeyError(f"line {lineno}: unknown section [{section}]")
            continue
        if "=" not in line:
            raise UnknownKeyError(f"line {lineno}: expected key = value, got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if section is None:
            raise UnknownKeyError(f"line {lineno}: key {key!r} before any section")
        entry = _SCHEMA.get((section, key))
        if entry is None:
            raise UnknownKeyError(f"line {lineno}: unknown key {key!r} in [{section}]")
        attr, parser = entry
        try:
            setattr(config, attr, parser(value))
        except (ValueError, TypeError) as exc:
            raise ConstraintViolationError(
                f"line {lineno}: bad value for {key!r}: {exc}") from exc

    if overrides:
        apply_overrides(config, overrides)
    if not config.experiment and default_experiment:
        config.experiment = default_experiment
    validate_config(config)
    return config


def apply_overrides(config: RunConfig, overrides: dict) -> None:
    """Apply section.key=value overrides (flags win over the file)."""
    for dotted, value in overrides.items():
        if "." not in dotted:
            raise UnknownKeyError(f"override {dotted!r} must be section.key")
        section, key = dotted.split(".", 1)
        entry = _SCHEMA.get((section, key))
        if entry is None:
            raise UnknownKeyError(f"unknown override key {dotted!r}")
        attr, parser = entry
        try:
            setattr(config, attr, parser(value))
        except (ValueError, TypeError) as exc:
            raise ConstraintViolationError(
                f"bad override value for {dotted!r}: {exc}") from exc


def validate_config(config: RunConfig) -> None:
    if not config.experiment:
        raise MissingKeyError("missing required key: [run] experiment")
    if config.experiment not in EXPERIMENTS:
        raise ConstraintViolationError(
            f"experiment must be one of {EXPERIMENTS}, got {config.experiment!r}")
    if config.dimension not in (1, 2):
        raise ConstraintViolationError("dimension in {1, 2}")
    if config.nodes < 3:
        raise ConstraintViolationError("nodes >= 3")
    if not config.lower < config.upper:
        raise ConstraintViolationError("lower < upper")
    if not (0 < config.lam <= config.Lam):
        raise ConstraintViolationError("0 < lambda <= Lambda")
    if config.p < 0 or config.q < 0:
        raise ConstraintViolationError("p >= 0 and q >= 0")
    if config.p * config.q >= 1:
        raise ConstraintViolationError("p*q < 1")
    if config.operator_f not in OPERATOR_KINDS or config.operator_g not in OPERATOR_KINDS:
        raise ConstraintViolationError(f"operators must be one of {OPERATOR_KINDS}")
    if config.boundary not in BOUNDARY_KINDS:
        raise ConstraintViolationError(f"boundary must be one of {BOUNDARY_KINDS}")
    if config.rho < 0:
        raise ConstraintViolationError("rho >= 0")
    if config.barrier_e <= 0:
        raise ConstraintViolationError("barrier_e > 0")
    if config.tol is not None and config.tol <= 0:
        raise ConstraintViolationError("tol > 0")
    if not (0 < config.damping <= 1):
        raise ConstraintViolationError("damping in (0, 1]")
    if config.levels < 4:
        raise ConstraintViolationError("levels >= 4")
    if config.theta <= 0:
        raise ConstraintViolationError("theta > 0")
    if config.gamma_c <= 0:
        raise ConstraintViolationError("gamma_c > 0")
    if config.data not in ("threshold", "radial"):
        raise ConstraintViolationError("data must be threshold or radial")
    if config.source not in ("solve", "radial"):
        raise ConstraintViolationError("source must be solve or radial")


def config_as_dict(config: RunConfig) -> dict:
    out = {}
    for f in fields(config):
        value = getattr(config, f.name)
        if isinstance(value, tuple):
            value = list(value)
        out[f.name] = value
    return out
