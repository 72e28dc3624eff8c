"""Numerical laboratory for a two-component coupled mean-field system."""

from .bubbles import (
    BubbleParams,
    SlopeFit,
    SlopeFitReport,
    asymptotic_slope_table,
    bubble_quantities,
    fit_slopes,
    liouville_pde_residual,
    liouville_value,
    standard_bubble,
)
from .cartan import CartanMatrix, cartan_su, lower_bound_condition, margin_condition, subset_margin
from .cli import emit_identity_suite, main, parse_and_dispatch
from .functional import (
    EnergyBreakdown,
    MultiField,
    energy,
    energy_gradient,
    energy_u,
    euler_lagrange_residuals,
    normalize_components,
    precondition_gradient,
    u_from_v,
    v_from_u,
)
from .grid import (
    GridSpec,
    ScalarField,
    dirichlet_pairing,
    disk_mass,
    integral,
    inverse_laplacian,
    laplacian,
    log_integral_exp,
    mean,
    random_smooth_field,
    sample_function,
)
from .minimizer import (
    MinimizeConfig,
    MinimizeReport,
    NonFiniteEnergyError,
    classify_boundedness,
    detect_concentration,
    minimize,
    sweep,
    write_region_csv,
)
from .pohozaev import DiskBalance, disk_balance, radius_scan, write_balance_csv
from .radial import (
    BlowUpError,
    MassReport,
    RadialSolution,
    ball_pohozaev,
    check_mass_relation,
    flux_residuals,
    integrate_radial,
    masses_and_exponents,
    sweep_shooting,
    write_solution_csv,
)

__version__ = "0.1.0"
