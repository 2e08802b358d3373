"""Heat flow on hyperbolic space: exact kernels, a radial solver, and the
numerical experiments around ballistic mass transport."""

from .counterexample import (
    DisplacedConfig,
    axis_ratio,
    displaced_value_log,
    far_field_delayed_bound,
    pointwise_gap,
    positive_part_l1,
    two_mass_ratio,
    two_mass_value,
)
from .errors import HyperHeatError, ValidationError
from .experiments import run_experiment
from .horo import HoroField, exact_drift_solution, horo_error
from .kernel import (
    DaviesEnvelope,
    KernelSpec,
    LogScalar,
    davies_log,
    geodesic_distance,
    kernel,
    kernel_log,
    kernel_mass,
    q_profile,
)
from .mass import (
    DriftFrame,
    MassProfile,
    annulus_mass_fraction,
    gaussian_l1_error,
    half_mass_radius,
    mass_function,
    rescaled_profile,
    sign_change_radius,
)
from .report import ExperimentReport, write_report
from .solver import (
    ForcingTerm,
    RadialField,
    RadialGrid,
    SolverConfig,
    build_grid,
    distance_metrics,
    evolve,
    harnack_check,
    intersection_count,
)

__version__ = "0.1.0"
