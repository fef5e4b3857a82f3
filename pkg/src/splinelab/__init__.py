"""Surface-spline scattered-data interpolation and a convergence laboratory.

The library fits polyharmonic (surface-spline) interpolants to scattered
data, measures point-set geometry (fill distance, separation, mesh ratio),
constructs vanishing-moment mollifiers, and runs empirical convergence and
instability studies whose fitted exponents are compared against the
predicted orders.
"""

from .geometry import (
    Domain,
    PointSet,
    fill_distance,
    generate_clustered,
    generate_quasi_uniform,
    load_points_csv,
    mesh_ratio,
    save_points_csv,
    separation,
)
from .polybasis import (
    Polynomial,
    PolySpace,
    UnisolvencyError,
    blh_coefficients,
    check_unisolvent,
    lagrange_project,
    multi_indices,
    pick_unisolvent_in_ball,
    poly_dim,
)
from .spline import (
    BasicFunction,
    ConditioningError,
    SurfaceSplineModel,
    assemble,
    basic_function,
    evaluate,
    fit,
    load_model,
    nbc_residual,
    save_model,
)
from .mollifier import (
    Mollifier,
    SmoothedData,
    build_mollifier,
    mollified_partial,
    mollify,
    moment,
    smoothed_interpolation_data,
    verify_moments,
)
from .functions import TestFunction, catalog_names, get_function
from .analysis import (
    InstabilityConfig,
    StudyConfig,
    StudyReport,
    beppo_levi_seminorm,
    beta_rate,
    convergence_study,
    convolution_scaling_check,
    fit_rate,
    instability_study,
    lp_error,
    scaling_check_cov,
)

__version__ = "0.1.0"
