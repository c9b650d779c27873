"""Numerical laboratory for the stochastic viscous Burgers system.

    y(t) = phi + int_0^t [nu Lap y - (y, d/dx) y] ds + eta(t)

on a periodic box, with exact (Cole-Hopf) and probabilistic (FBSDE) oracles.
"""

__version__ = "0.1.0"

from .colehopf import PotentialInit, residual_check, solve_potential
from .errors import (
    BurgersLabError,
    DegenerateFieldError,
    DimensionError,
    DivergenceError,
    FieldFormatError,
    InvalidFieldError,
    InvalidPointError,
    ParameterError,
    ResolutionError,
    SizeError,
    StepSizeError,
    SynthesisError,
    UnderflowError,
    VerdictError,
)
from .fbsde import (
    McConfig,
    McVerifyReport,
    simulate_forward,
    uniform_bound_check,
    verify,
    verify_point,
)
from .fields import (
    Grid,
    HolderEstimate,
    ScalarField,
    VectorField,
    advect,
    curl_defect,
    divergence,
    estimate_holder,
    gradient,
    interpolate,
    laplacian,
)
from .initial_data import (
    CutoffSpec,
    FbsParams,
    cutting_function,
    fbs_covariance,
    make_initial,
    mollify,
    sample_fbs,
)
from .noise import (
    NoiseSpec,
    TimeGrid,
    build_noise,
    eta_calculus,
    fourier_mode,
    mollify_path,
    reseed_suffix,
    zero_path,
)
from .solver import SolverConfig, Trajectory, forcing_f, max_norm_series, solve, step
