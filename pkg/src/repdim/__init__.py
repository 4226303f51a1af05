"""Dimension of conformal repellers and random Julia sets from pressure zeros."""

__version__ = "0.1.0"

from .geometry import (
    DomainConstants,
    HyperbolicAnnulus,
    core_geodesic_length,
    distortion_sequence,
    domain_constants,
    epsilon_ell,
    example_domains,
    hyperbolic_density,
    hyperbolic_distance,
    inclusion_contraction,
)
from .maps import (
    IFSBranch,
    MapDescriptor,
    PreimageSet,
    branch_radius,
    circle_power,
    condition_number,
    conformal_derivative,
    degree_area_check,
    evaluate,
    linear_ifs,
    power_plus_c,
    preimages,
)
from .transfer import (
    Grid,
    GridFunction,
    PressureEstimate,
    apply_operator,
    cocycle_pressure,
    contraction_rate,
    iterate_sequence,
    normalized_iterate,
    pressure_bracket,
)
from .solver import DimensionResult, critical_exponents, dimension_bounds, solve_dimension
from .ensemble import (
    EnsembleSpec,
    SweepResult,
    ensemble_statistics,
    parameter_sweep,
    random_dimension,
    random_pressure,
    sample_sequence,
)
from .boxcount import PointCloud, backward_orbit, box_dimension, default_radii
from .components import ComponentDecomposition, class_pressure, critical_class, decompose
