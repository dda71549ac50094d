"""Rotating shallow water on surfaces of revolution: operators, kernel
projection, time integration, fast-rotation averaging and blow-up models."""

from .errors import (
    ZonalSimError, InvalidProfile, PoleNode, GridMismatch, GaugeViolation, BadOrder,
    DegenerateInput, NotZonal, TooLarge, InsufficientData, ConfigError, BlowupDetected,
    NonConvergentAverage,
)
from .geometry import SurfaceProfile, sphere, bump, trig_profile, parse_profile, validate_surface
from .fields import (
    Grid, ScalarField, VectorField, State, Params, grad, div, curl, J, Jinv,
    laplacian_scalar, laplacian_vector, inverse_laplacian, hodge, hk_norm, l2_norm, inner,
    random_scalar, random_vector, random_state,
)
from .operators import (
    CoriolisProfile, coriolis_cos, coriolis_exact, coriolis_perturbed, parse_coriolis,
    apply_L, apply_N, CorrectorCoeffs, commutator_defect, verify_operators,
)
from .kernel import ZonalProfilePair, zonal_mean_velocity, project_kernel, build_kernel_state, kernel_distance_report
from .dynamics import ChristoffelSamples, IntegratorConfig, nonlinearity_B, rhs, integrate
from .averaging import OperatorMatrix, assemble_operator, exp_L, averaged_B, integrate_limit_equation, zonal_time_average

__version__ = "0.1.0"
