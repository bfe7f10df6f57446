"""Spatial-cycle HYL model: Bose functions, ideal-gas thermodynamics, the
kappa-indexed variational pressure with its zero sets, and a finite-volume
cycle-count simulator."""

__version__ = "0.1.0"

from .bose import bose, bose_g, bose_g_expansion, zeta_value
from .errors import (
    AmbiguityError,
    ConvergenceError,
    CutoffError,
    DivergenceError,
    DomainError,
    HylError,
    InsufficientSamplesError,
    NoSolutionError,
    StateSpaceError,
    TailMassError,
)
from .ideal_gas import (
    GasParams,
    critical_density,
    cycle_weight,
    free_energy_f0,
    pressure_p0,
    pressure_p0_deriv,
    s_beta,
)
from .variational import (
    HylParams,
    PhaseDiagramRow,
    PhasePoint,
    TransitionPotentials,
    ZeroSet,
    condensate_delta,
    condensate_rho,
    mu_hat_star_kappa,
    mu_r,
    mu_star,
    mu_star_kappa,
    mu_t,
    phase_diagram,
    pressure,
    rate_function_value,
    x_tilde_1,
    x_tilde_2,
    x_tilde_3,
    zero_set,
)
