"""
par_nonlocal_pucci - nonlocal Pucci operators with certified quadrature

This library provides:
- Normalizing constants of the fractional Laplacian and Riesz potential
- The fractional Hessian D^sigma u and the dual fractional Laplacian
- Exact fractional Pucci extremal operators over the ellipticity class
- Riesz potentials and their inversion by the dual Laplacian
- Inf-convolution and mollification of bounded fields
- The radial family u_N that defeats the ABP estimate at p = p0
"""

from .counterexample import (
    CEReport,
    CERow,
    CounterexampleParams,
    UNProfile,
    fit_exponents,
    mminus_field,
    mminus_uN,
    mminus_uN_norms,
    phi_profile,
    run_report,
    u_N_consistency,
    u_N_eval,
    u_N_profile,
)
from .errors import (
    ConfigError,
    DomainError,
    InfeasibleClassError,
    NonlocalError,
    QuadratureAccuracyError,
    ResolutionError,
)
from .fields import (
    GridField,
    InfConvParams,
    RadialProfile,
    ScalarField,
    bump,
    from_radial,
    inf_convolution,
    mollify,
    tabulate,
)
from .matrixcore import EllipticityClass, a_sigma_map, pucci_extremal_trace, pucci_oracle_batch
from .nonlocal_ops import (
    abp_ratio,
    hessian_consistency,
    infconv_suite,
    pucci_minus,
    pucci_plus,
    riesz_inf_ratio,
    riesz_inversion,
    riesz_profile,
)
from .quad import (
    QuadratureSpec,
    QuadResult,
    fractional_hessian,
    fractional_laplacian_dual,
    radial_reduce_hessian,
    radial_reduce_laplacian,
    riesz_potential,
)
from .special import Constants, KernelParams, compute_M0, constants, norm_const_neg, norm_const_pos

__version__ = "0.1.0"
__all__ = [
    # Parameters and constants
    "Constants",
    "KernelParams",
    "compute_M0",
    "constants",
    "norm_const_neg",
    "norm_const_pos",
    # Fields
    "GridField",
    "InfConvParams",
    "RadialProfile",
    "ScalarField",
    "bump",
    "from_radial",
    "inf_convolution",
    "mollify",
    "tabulate",
    # Operators
    "EllipticityClass",
    "QuadratureSpec",
    "QuadResult",
    "a_sigma_map",
    "fractional_hessian",
    "fractional_laplacian_dual",
    "pucci_extremal_trace",
    "pucci_oracle_batch",
    "pucci_minus",
    "pucci_plus",
    "radial_reduce_hessian",
    "radial_reduce_laplacian",
    "riesz_potential",
    # Checks
    "abp_ratio",
    "hessian_consistency",
    "infconv_suite",
    "riesz_inf_ratio",
    "riesz_inversion",
    "riesz_profile",
    # Counterexample
    "CEReport",
    "CERow",
    "CounterexampleParams",
    "UNProfile",
    "fit_exponents",
    "mminus_field",
    "mminus_uN",
    "mminus_uN_norms",
    "phi_profile",
    "run_report",
    "u_N_consistency",
    "u_N_eval",
    "u_N_profile",
    # Errors
    "ConfigError",
    "DomainError",
    "InfeasibleClassError",
    "NonlocalError",
    "QuadratureAccuracyError",
    "ResolutionError",
]
