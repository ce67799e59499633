"""Finite-difference laboratory for fully nonlinear dead-core systems."""

from .errors import DeadcoreError
from .grid import (
    BoundaryData,
    Grid,
    ScalarField,
    build_grid,
    field_to_csv,
    grid_ball,
    sample_function,
    zero_field,
)
from .operators import (
    HessianSample,
    OperatorSpec,
    apply_operator,
    apply_operator_field,
    check_ellipticity,
    diagonal,
    laplacian,
    pucci_minus,
    pucci_minus_value,
    pucci_plus,
    pucci_plus_value,
)
from .scalar_solver import (
    ScalarProblem,
    SolveReport,
    maximum_principle_check,
    solve_dirichlet,
)
from .system_solver import (
    IterationHistory,
    ProblemSpec,
    SolutionPair,
    apply_T,
    fixed_point_solve,
    positive_power,
    system_residual,
)
from .radial import (
    RadialBarrier,
    barrier_constants,
    exponents,
    is_exact_solution,
    radial_pair,
)
from .free_boundary import (
    RegionDecomposition,
    decompose,
    default_epsilon,
    magnitude,
    regions_to_csv,
)
from .theorems import (
    FlatteningTable,
    GrowthProfile,
    LiouvilleReport,
    MeasureReport,
    density_scan,
    flattening_experiment,
    growth_profile,
    liouville_experiment,
    nondegeneracy_ratios,
    porosity_and_dimension,
    weak_compare,
)
from .config import RunConfig, parse_config

__version__ = "0.1.0"
