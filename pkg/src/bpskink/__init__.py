"""Closed-form BPS kinks, their energies, residual diagnostics and
energy-descent relaxation."""

from .closed_form import (
    ClosedFormKink,
    alpha_exact,
    default_grid,
    derivatives_exact,
    kappa_exact,
    sample,
    sigma,
)
from .core import (
    FieldConfig,
    Grid,
    KinkParams,
    ModelParams,
    SingularityError,
    ValidationError,
    fd_derivative,
    fd_second_derivative,
    make_grid,
)
from .dynamics import (
    PQReport,
    ResidualReport,
    StepSizeError,
    bps_residuals,
    el_residuals,
    integrate_bps,
    pq_flow,
    pq_matrix,
    residual_report,
)
from .energy import (
    EnergyReport,
    bogomolny_decomposition,
    energy_density,
    potential_density,
    total_energy,
)
from .relax import (
    DescentError,
    RelaxConfig,
    RelaxResult,
    discrete_gradient,
    relax,
    verify_bps_convergence,
)

__version__ = "0.1.0"
