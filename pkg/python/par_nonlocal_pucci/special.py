"""Gamma function, normalizing constants and the kernel parameter bundle.

Every nonlocal operator in the package is normalized by one of three
constants built from the Gamma function:

- ``norm_const_pos(n, sigma)``  the Riesz potential constant of order 2 - sigma,
- ``norm_const_neg(n, s)``      the fractional-Laplacian constant of order s,
  used both for the sigma-order Hessian (s = sigma) and for the dual
  (2 - sigma)-order operator (s = 2 - sigma).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from scipy import special as sp

from .errors import DomainError

__all__ = [
    "Constants",
    "KernelParams",
    "compute_M0",
    "constants",
    "gamma_fn",
    "kernel_ratio",
    "kernel_ratio_limits",
    "m0_expression",
    "norm_const_neg",
    "norm_const_pos",
    "sphere_area",
    "split_integral_constants",
]


@dataclass(frozen=True)
class KernelParams:
    """Dimension, order and ellipticity bounds shared by every operator.

    Attributes:
        n: Space dimension (>= 2).
        sigma: Order of the operator, in (0, 2).
        lam: Lower ellipticity bound lambda > 0.
        Lam: Upper ellipticity bound Lambda >= lambda.
        eta: Lower matrix cutoff (A >= eta Id), 0 <= eta <= lambda.
    """

    n: int = 2
    sigma: float = 1.5
    lam: float = 1.0
    Lam: float = 4.0
    eta: float = 0.0

    def __post_init__(self) -> None:
        if int(self.n) != self.n or self.n < 2:
            raise DomainError(f"dimension n must be an integer >= 2, got {self.n}")
        if not 0.0 < self.sigma < 2.0:
            raise DomainError(f"sigma must lie in (0, 2), got {self.sigma}")
        if not 0.0 < self.lam <= self.Lam:
            raise DomainError(f"need 0 < lambda <= Lambda, got lambda={self.lam}, Lambda={self.Lam}")
        if not 0.0 <= self.eta <= self.lam:
            raise DomainError(f"need 0 <= eta <= lambda, got eta={self.eta}")

    def with_sigma(self, sigma: float) -> KernelParams:
        return KernelParams(n=self.n, sigma=sigma, lam=self.lam, Lam=self.Lam, eta=self.eta)

    def with_eta(self, eta: float) -> KernelParams:
        return KernelParams(n=self.n, sigma=self.sigma, lam=self.lam, Lam=self.Lam, eta=eta)


def gamma_fn(x: float) -> float:
    """Gamma function on the real line.

    Negative arguments go through the reflection formula
    Gamma(x) = pi / (sin(pi x) Gamma(1 - x)).

    Raises:
        DomainError: If x is zero or a negative integer.
    """
    x = float(x)
    if x <= 0.0 and x == math.floor(x):
        raise DomainError(f"Gamma has a pole at {x}")
    if x < 0.0:
        return math.pi / (math.sin(math.pi * x) * float(sp.gamma(1.0 - x)))
    return float(sp.gamma(x))


def _check_order(s: float, name: str = "sigma") -> None:
    if not 0.0 < s < 2.0:
        raise DomainError(f"{name} must lie in (0, 2), got {s}")


def norm_const_pos(n: int, sigma: float) -> float:
    """Riesz potential constant A(n, 2 - sigma).

    Returns Gamma((n+sigma-2)/2) / (pi^{n/2} 2^{2-sigma} Gamma((2-sigma)/2)).
    """
    _check_order(sigma)
    if n < 2:
        raise DomainError(f"dimension n must be >= 2, got {n}")
    return gamma_fn((n + sigma - 2.0) / 2.0) / (
        math.pi ** (n / 2.0) * 2.0 ** (2.0 - sigma) * gamma_fn((2.0 - sigma) / 2.0)
    )


def norm_const_neg(n: int, s: float) -> float:
    """Fractional Laplacian constant A(n, -s).

    Returns 2^s Gamma((n+s)/2) / (pi^{n/2} |Gamma(-s/2)|), where
    |Gamma(-s/2)| is evaluated as Gamma(1 - s/2) / (s/2) so that no negative
    argument reaches the Gamma function.
    """
    _check_order(s, "s")
    if n < 2:
        raise DomainError(f"dimension n must be >= 2, got {n}")
    abs_gamma_neg = gamma_fn(1.0 - s / 2.0) / (s / 2.0)
    return 2.0**s * gamma_fn((n + s) / 2.0) / (math.pi ** (n / 2.0) * abs_gamma_neg)


def m0_expression(n: int, sigma: float, m0: float) -> float:
    """Left-hand side ((3 M0 - 3) / 6)^{-n + (2 - sigma)} of the M0 condition."""
    return ((3.0 * m0 - 3.0) / 6.0) ** (-n + (2.0 - sigma))


def compute_M0(n: int, sigma: float) -> float:
    """Smallest M0 with ((3 M0 - 3)/6)^{-n+(2-sigma)} <= 1/2.

    The condition is solved with equality: M0 = 1 + 2 * 2^{1/(n-2+sigma)}.
    """
    q = n - 2.0 + sigma
    if n < 2 or q <= 0.0:
        raise DomainError(f"M0 needs n >= 2 and n - 2 + sigma > 0, got n={n}, sigma={sigma}")
    return 1.0 + 2.0 * 2.0 ** (1.0 / q)


def sphere_area(n: int) -> float:
    """Surface measure of the unit sphere in R^n."""
    return 2.0 * math.pi ** (n / 2.0) / gamma_fn(n / 2.0)


def kernel_ratio(n: int, s: float) -> float:
    """A(n, -s) / (s (2 - s)), bounded above and below on (0, 2)."""
    return norm_const_neg(n, s) / (s * (2.0 - s))


def kernel_ratio_limits(n: int) -> tuple[float, float]:
    """Closed-form limits of ``kernel_ratio(n, s)`` as s -> 0+ and s -> 2-.

    Writing |Gamma(-s/2)| = Gamma(1 - s/2)/(s/2) the ratio equals
    2^{s-1} Gamma((n+s)/2) / (pi^{n/2} Gamma(1 - s/2) (2 - s)), which tends to
    Gamma(n/2)/(4 pi^{n/2}) at s = 0 and Gamma((n+2)/2)/pi^{n/2} at s = 2.
    """
    at_zero = gamma_fn(n / 2.0) / (4.0 * math.pi ** (n / 2.0))
    at_two = gamma_fn((n + 2.0) / 2.0) / math.pi ** (n / 2.0)
    return at_zero, at_two


def split_integral_constants(n: int, sigma: float, p: float) -> tuple[float, float]:
    """Closed forms of the near/far split integrals behind the ABP bound.

    Returns:
        (near, far) with near = int_{B_1} |y|^{-n-n/p+sigma} dy = |dB_1|/(sigma - n/p)
        and far = int_{|y|>1} 4 |y|^{-n-(2-sigma)} dy = 4 |dB_1|/(2 - sigma).
    """
    _check_order(sigma)
    if sigma <= n / p:
        raise DomainError(f"near-origin integral diverges for sigma={sigma} <= n/p={n / p}")
    area = sphere_area(n)
    return area / (sigma - n / p), 4.0 * area / (2.0 - sigma)


@dataclass(frozen=True)
class Constants:
    """Normalizing constants attached to one KernelParams."""

    a_pos: float
    a_neg: float
    a_neg_dual: float
    m0: float

    @classmethod
    def from_params(cls, params: KernelParams) -> Constants:
        return cls(
            a_pos=norm_const_pos(params.n, params.sigma),
            a_neg=norm_const_neg(params.n, params.sigma),
            a_neg_dual=norm_const_neg(params.n, 2.0 - params.sigma),
            m0=compute_M0(params.n, params.sigma),
        )

    def identity_residual(self, params: KernelParams) -> float:
        """Relative residual of A(n,-sigma) = sigma (n + sigma - 2) A(n, 2 - sigma)."""
        expected = params.sigma * (params.n + params.sigma - 2.0) * self.a_pos
        return abs(self.a_neg - expected) / abs(expected)


def constants(params: KernelParams) -> Constants:
    return Constants.from_params(params)
