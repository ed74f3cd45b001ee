"""Fractional Pucci operators and the consistency checks built on them.

This module binds the quadrature layer to the exact extremal traces:

- ``pucci_minus`` / ``pucci_plus``       M^-u(x), M^+u(x) with propagated error bounds
- ``riesz_profile``                      Riesz potential of a radial field as a spline profile
- ``riesz_inversion``                    the dual Laplacian undoes the Riesz potential
- ``hessian_consistency``                [D^2 P]_sigma against D^sigma v
- ``riesz_inf_ratio``                    infimum of P outside B_{M0 r} against inside
- ``abp_ratio``                          normalized ABP quotient for trend studies
- ``infconv_suite``                      inf-convolution and standard modification checks
"""

from __future__ import annotations

import math
from collections.abc import Callable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Any, TypeVar

import numpy as np
import numpy.typing as npt
from scipy import integrate
from scipy.stats import qmc

from .debug import LogTimer, debug_info, log_report_row
from .errors import DomainError
from .fields import (
    InfConvParams,
    RadialProfile,
    ScalarField,
    fd_hessian,
    from_radial,
    inf_convolution,
    infconv_operator_bound,
    mollify,
    radial_hessian,
    semiconcavity_check,
    tabulate,
)
from .matrixcore import EllipticityClass, Sign, a_sigma_map, pucci_extremal_trace
from .quad import (
    QuadratureSpec,
    QuadResult,
    fractional_hessian,
    fractional_laplacian_dual,
    radial_reduce_hessian,
    riesz_potential,
)
from .rules import gauss_nodes, sphere_rule
from .special import KernelParams, compute_M0, sphere_area

FloatArray = npt.NDArray[np.float64]
T = TypeVar("T")
R = TypeVar("R")

__all__ = [
    "ABPReport",
    "ConsistencyReport",
    "InfConvReport",
    "InfRatioReport",
    "InversionReport",
    "RieszProfile",
    "abp_ratio",
    "ball_points",
    "hessian_consistency",
    "infconv_suite",
    "inversion_points",
    "lp_norm_ball",
    "parallel_map",
    "pucci_minus",
    "pucci_plus",
    "riesz_inf_ratio",
    "riesz_inversion",
    "riesz_profile",
]


def parallel_map(func: Callable[[T], R], items: Sequence[T], workers: int) -> list[R]:
    """Ordered map, threaded when workers > 1."""
    if workers <= 1 or len(items) <= 1:
        return [func(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, items))


def _axis_point(n: int, r: float) -> FloatArray:
    x = np.zeros(n)
    x[0] = r
    return x


# ---------------------------------------------------------------------------
# Pucci operators
# ---------------------------------------------------------------------------


def _pucci(
    u: ScalarField, x: npt.ArrayLike, params: KernelParams, spec: QuadratureSpec, sign: Sign, radial: bool
) -> QuadResult:
    hess = radial_reduce_hessian if radial else fractional_hessian
    d, err = hess(u, x, params, spec)
    value, _ = pucci_extremal_trace(d, params, sign)
    # |inf_A Tr(A D) - inf_A Tr(A D')| <= max_A |A|_F |D - D'|_F
    scale = float(np.max(np.linalg.norm(EllipticityClass(params).vertices(), axis=1)))
    return QuadResult(value, scale * err)


def pucci_minus(
    u: ScalarField, x: npt.ArrayLike, params: KernelParams, spec: QuadratureSpec, radial: bool = False
) -> QuadResult:
    """M^-u(x) = inf over the ellipticity class of Tr(A D^sigma u(x))."""
    return _pucci(u, x, params, spec, "-", radial)


def pucci_plus(
    u: ScalarField, x: npt.ArrayLike, params: KernelParams, spec: QuadratureSpec, radial: bool = False
) -> QuadResult:
    """M^+u(x) = sup over the ellipticity class of Tr(A D^sigma u(x))."""
    return _pucci(u, x, params, spec, "+", radial)


# ---------------------------------------------------------------------------
# Riesz potentials of radial fields
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class RieszProfile:
    """Riesz potential of a radial field tabulated as a spline profile.

    ``coarse`` is the same construction on every other radius; the gap between
    the two measures the interpolation error.
    """

    profile: RadialProfile
    coarse: RadialProfile
    potential: ScalarField
    radii: FloatArray
    values: FloatArray
    err_bound: float

    def interpolation_error(self, r: float) -> float:
        """|D^2 P - D^2 P_coarse| at radius r (Frobenius)."""
        n = self.potential.n
        if r == 0.0:
            at = np.array([0.0])
            gap = float(abs(self.profile.ddphi(at)[0] - self.coarse.ddphi(at)[0]))
            return gap * math.sqrt(n)
        x = _axis_point(n, r)
        return float(np.linalg.norm(radial_hessian(self.profile, x) - radial_hessian(self.coarse, x)))


def default_profile_radii(support: float) -> FloatArray:
    dense = np.linspace(0.0, 2.0 * support, 81)
    far = np.geomspace(2.0 * support, 32.0 * support, 17)
    return np.unique(np.concatenate([dense, far]))


def riesz_profile(
    v: ScalarField,
    params: KernelParams,
    spec: QuadratureSpec,
    radii: npt.ArrayLike | None = None,
    workers: int = 1,
) -> RieszProfile:
    """Riesz potential P of a radial, compactly supported v as a cubic-spline profile.

    Beyond the last radius P continues as c r^{-(n-2+sigma)}, its exact decay
    rate outside the support.

    Raises:
        DomainError: If v is not radial or not compactly supported.
    """
    if v.radial is None:
        raise DomainError(f"riesz_profile needs a radial field, got {v.name}")
    if not math.isfinite(v.support_radius) or v.support_radius <= 0.0:
        raise DomainError(f"riesz_profile needs a compactly supported field, got {v.name}")
    n = params.n
    rr = default_profile_radii(v.support_radius) if radii is None else np.asarray(radii, dtype=float)
    decay = n - 2.0 + params.sigma
    with LogTimer("NONLOCAL", f"riesz_profile {v.name} at {rr.size} radii"):
        results = parallel_map(lambda r: riesz_potential(v, _axis_point(n, float(r)), params, spec), list(rr), workers)
    values = np.array([res.value for res in results])
    err = max(res.err_bound for res in results)
    profile = RadialProfile.from_samples(rr, values, decay_exponent=decay, name=f"P[{v.name}]")
    coarse_idx = np.unique(np.concatenate([np.arange(0, rr.size, 2), [rr.size - 1]]))
    coarse = RadialProfile.from_samples(rr[coarse_idx], values[coarse_idx], decay_exponent=decay)
    sup = float(np.max(np.abs(values)))
    potential = from_radial(profile, n, sup_bound=sup, name=f"P[{v.name}]")
    return RieszProfile(profile, coarse, potential, rr, values, err)


@dataclass
class InversionReport:
    """v(x) against the dual Laplacian of its Riesz potential."""

    points: list[list[float]]
    v_values: list[float]
    recovered: list[float]
    err_bounds: list[float]
    rel_errors: list[float]
    rel_tol: float

    @property
    def passed(self) -> bool:
        return all(e <= self.rel_tol for e in self.rel_errors)

    def to_dict(self) -> dict[str, Any]:
        out = asdict(self)
        out["passed"] = self.passed
        return out


def riesz_inversion(
    v: ScalarField,
    points: npt.ArrayLike,
    params: KernelParams,
    spec: QuadratureSpec,
    rel_tol: float = 1e-2,
    potential: RieszProfile | None = None,
    workers: int = 1,
) -> InversionReport:
    """Check that (-Delta)^{(2-sigma)/2} recovers v from its Riesz potential."""
    prof = riesz_profile(v, params, spec, workers=workers) if potential is None else potential
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    results = parallel_map(
        lambda x: fractional_laplacian_dual(prof.potential, x, params, spec), list(pts), workers
    )
    v_vals = v(pts)
    floor = rel_tol * max(v.sup_bound if math.isfinite(v.sup_bound) else 1.0, 1e-300)
    rel = [abs(res.value - float(vx)) / max(abs(float(vx)), floor) for res, vx in zip(results, v_vals)]
    report = InversionReport(
        points=pts.tolist(),
        v_values=[float(a) for a in v_vals],
        recovered=[float(res.value) for res in results],
        err_bounds=[float(res.err_bound) for res in results],
        rel_errors=rel,
        rel_tol=rel_tol,
    )
    debug_info("NONLOCAL", f"riesz_inversion {v.name}: max rel error {max(rel):.3e}")
    return report


# ---------------------------------------------------------------------------
# Hessian consistency
# ---------------------------------------------------------------------------


@dataclass
class ConsistencyReport:
    """[D^2 P(x)]_sigma (lhs) against D^sigma v(x) (rhs)."""

    x: list[float]
    lhs: list[list[float]]
    rhs: list[list[float]]
    discrepancy: float
    relative: float
    budget: float
    rel_tol: float
    interp_err: float = 0.0

    @property
    def within_budget(self) -> bool:
        return self.discrepancy <= self.budget

    @property
    def passed(self) -> bool:
        return self.within_budget or self.relative <= self.rel_tol

    def to_dict(self) -> dict[str, Any]:
        out = asdict(self)
        out["passed"] = self.passed
        return out


def _fd_potential_hessian(
    v: ScalarField, x: FloatArray, params: KernelParams, spec: QuadratureSpec, step: float
) -> tuple[FloatArray, float]:
    """Central differences of the quadrature potential, with an error estimate from step halving."""

    def evaluate(h: float) -> tuple[FloatArray, float]:
        pot_errs: list[float] = []

        def pot(y: FloatArray) -> FloatArray:
            flat = np.atleast_2d(y)
            res = [riesz_potential(v, row, params, spec) for row in flat]
            pot_errs.extend(r.err_bound for r in res)
            return np.array([r.value for r in res]).reshape(np.shape(y)[:-1])

        trial = ScalarField(n=v.n, func=pot, name=f"P[{v.name}]")
        hess = fd_hessian(trial, x, h)
        return hess, 4.0 * max(pot_errs) / h**2

    coarse, _ = evaluate(step)
    fine, quad_err = evaluate(0.5 * step)
    return fine, float(np.linalg.norm(fine - coarse)) + quad_err


def hessian_consistency(
    v: ScalarField,
    x: npt.ArrayLike,
    params: KernelParams,
    spec: QuadratureSpec,
    potential: ScalarField | RieszProfile | None = None,
    rel_tol: float = 5e-3,
    fd_step: float = 0.05,
    radial: bool = False,
    reference: ScalarField | None = None,
) -> ConsistencyReport:
    """Compare a_sigma_map(D^2 P(x)) with D^sigma v(x), P the Riesz potential of v.

    D^2 P comes from ``potential`` when it carries a Hessian (an analytic P or
    a ``riesz_profile``), from a fresh ``riesz_profile`` when v is radial, and
    from central differences of the quadrature potential otherwise.

    Args:
        radial: Evaluate D^sigma v on the radial fast path.
        reference: A second interpolant of the same v; the gap between the
            two D^sigma values joins the budget as interpolation error.
    """
    n = params.n
    xx = np.asarray(x, dtype=float).reshape(n)
    hess = radial_reduce_hessian if radial else fractional_hessian
    rhs, rhs_err = hess(v, xx, params, spec)
    interp_err = 0.0
    if reference is not None:
        ref, ref_err = hess(reference, xx, params, spec)
        interp_err = float(np.linalg.norm(np.asarray(rhs) - np.asarray(ref))) + ref_err
    if potential is None and v.radial is not None and math.isfinite(v.support_radius) and v.sup_bound > 0.0:
        potential = riesz_profile(v, params, spec)
    if isinstance(potential, RieszProfile):
        d2p = potential.potential.hessian(xx)
        assert d2p is not None
        lhs_err = potential.interpolation_error(float(np.linalg.norm(xx)))
    elif potential is not None and potential.hessian_fn is not None:
        d2p = potential.hessian(xx)
        assert d2p is not None
        lhs_err = 0.0
    elif v.sup_bound == 0.0:
        d2p, lhs_err = np.zeros((n, n)), 0.0
    else:
        d2p, lhs_err = _fd_potential_hessian(v, xx, params, spec, fd_step)
    # the A_sigma map does not increase the Frobenius norm
    lhs = a_sigma_map(d2p, params)
    disc = float(np.linalg.norm(lhs - rhs))
    scale = float(np.linalg.norm(rhs))
    report = ConsistencyReport(
        x=xx.tolist(),
        lhs=lhs.tolist(),
        rhs=np.asarray(rhs).tolist(),
        discrepancy=disc,
        relative=disc / scale if scale > 0.0 else disc,
        budget=rhs_err + lhs_err + interp_err,
        rel_tol=rel_tol,
        interp_err=interp_err,
    )
    log_report_row("consistency", {"x": report.x, "discrepancy": disc, "budget": report.budget})
    return report


# ---------------------------------------------------------------------------
# Sampling helpers
# ---------------------------------------------------------------------------


def inversion_points(n: int, count: int = 10, radius: float = 0.7) -> FloatArray:
    """``count`` points on a spiral in the (x1, x2) plane, |x| from 0 to ``radius``."""
    if n < 2:
        raise DomainError(f"inversion points need n >= 2, got n={n}")
    radii = np.linspace(0.0, radius, count)
    turns = np.arange(count, dtype=float)
    points = np.zeros((count, n))
    points[:, 0] = radii * np.cos(turns)
    points[:, 1] = radii * np.sin(turns)
    return points


def ball_points(n: int, radius: float, m: int, seed: int = 0, inner: float = 0.0) -> FloatArray:
    """2^m scrambled Sobol points, uniform in volume on inner <= |x| <= radius."""
    u = qmc.Sobol(d=n, scramble=True, seed=seed).random_base2(m)
    r = (inner**n + u[:, 0] * (radius**n - inner**n)) ** (1.0 / n)
    if n == 2:
        theta = 2.0 * math.pi * u[:, 1]
        dirs = np.stack([np.cos(theta), np.sin(theta)], axis=1)
    elif n == 3:
        z = 2.0 * u[:, 1] - 1.0
        phi = 2.0 * math.pi * u[:, 2]
        s = np.sqrt(1.0 - z * z)
        dirs = np.stack([s * np.cos(phi), s * np.sin(phi), z], axis=1)
    else:
        raise DomainError(f"ball sampling supports n in {{2, 3}}, got n={n}")
    return r[:, None] * dirs


def lp_norm_ball(
    f: ScalarField,
    p: float,
    radius: float = 1.0,
    positive_part: bool = True,
    spec: QuadratureSpec | None = None,
) -> float:
    """||f^+||_{L^p(B_radius)} (or ||f||) by 1-D quadrature for radial f, polar Gauss otherwise.

    The polar rule uses max(6, ``spec.gauss_order``) nodes per radial panel and the
    sphere rule of ``spec``.
    """
    n = f.n
    spec = spec or QuadratureSpec()

    def power(vals: FloatArray) -> FloatArray:
        base = np.maximum(vals, 0.0) if positive_part else np.abs(vals)
        return base**p

    if f.radial is not None:
        prof = f.radial
        breaks = [b for b in prof.breakpoints if 0.0 < b < radius]
        val, _ = integrate.quad(
            lambda r: float(power(prof.phi(np.array([r])))[0]) * r ** (n - 1),
            0.0,
            radius,
            points=breaks or None,
            limit=200,
        )
        return (sphere_area(n) * val) ** (1.0 / p)
    kinks = [k for k in f.kink_radii if 0.0 < k < radius]
    linear = np.linspace(0.0, radius, 17)
    geometric = np.geomspace(1e-4 * radius, radius, 33)
    edges = np.unique(np.concatenate([linear, geometric, kinks]))
    t, wt = gauss_nodes(edges, max(6, spec.gauss_order))
    dirs, wd = sphere_rule(n, spec.angular_for(n))
    vals = power(f(t[:, None, None] * dirs[None, :, :]))
    return float((wt * t ** (n - 1)) @ vals @ wd) ** (1.0 / p)


# ---------------------------------------------------------------------------
# Infimum relation for Riesz potentials of non-positive fields
# ---------------------------------------------------------------------------


@dataclass
class InfRatioReport:
    """Infima of P inside B_{M0 r} and on the shell M0 r <= |x| <= 4 M0 r."""

    m0: float
    inf_inside: float
    inf_outside: float
    slack: float
    inside_points: int
    outside_points: int

    @property
    def margin(self) -> float:
        """-(1/2) inf_inside + slack + inf_outside; non-negative when the relation holds."""
        return -0.5 * self.inf_inside + self.slack + self.inf_outside

    @property
    def passed(self) -> bool:
        return self.margin >= 0.0

    def to_dict(self) -> dict[str, Any]:
        out = asdict(self)
        out.update(margin=self.margin, passed=self.passed)
        return out


def riesz_inf_ratio(
    v: ScalarField,
    r: float,
    params: KernelParams,
    spec: QuadratureSpec,
    inside_m: int = 7,
    outside_m: int = 6,
    seed: int = 0,
    workers: int = 1,
) -> InfRatioReport:
    """Check -inf_{outside B_{M0 r}} P <= -(1/2) inf_{B_{M0 r}} P for v <= 0 supported in B_r.

    Raises:
        DomainError: If v is positive at a sample or its support exceeds r.
    """
    n = params.n
    if v.support_radius > r:
        raise DomainError(f"support radius {v.support_radius} exceeds r={r}")
    m0 = compute_M0(n, params.sigma)
    trial = ball_points(n, r, 8, seed=seed)
    if np.any(v(trial) > 0.0):
        raise DomainError(f"{v.name} must be non-positive")
    inside = np.vstack([np.zeros((1, n)), ball_points(n, m0 * r, inside_m, seed=seed)])
    outside = ball_points(n, 4.0 * m0 * r, outside_m, seed=seed + 1, inner=m0 * r)
    evaluate = lambda x: riesz_potential(v, x, params, spec)  # noqa: E731
    with LogTimer("NONLOCAL", f"riesz_inf_ratio {v.name}: {inside.shape[0]}+{outside.shape[0]} points"):
        res_in = parallel_map(evaluate, list(inside), workers)
        res_out = parallel_map(evaluate, list(outside), workers)
    slack = max(res.err_bound for res in res_in + res_out)
    report = InfRatioReport(
        m0=m0,
        inf_inside=min(res.value for res in res_in),
        inf_outside=min(res.value for res in res_out),
        slack=1.5 * slack,
        inside_points=inside.shape[0],
        outside_points=outside.shape[0],
    )
    log_report_row("inf_ratio", report.to_dict())
    return report


# ---------------------------------------------------------------------------
# ABP quotient
# ---------------------------------------------------------------------------


@dataclass
class ABPReport:
    """Data for the ABP estimate; carries no verdict."""

    p: float
    lhs: float
    f_norm: float
    factor: float
    ratio: float
    outside_nonnegative: bool
    samples: int
    outside_samples: int = 0

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


def abp_factor(params: KernelParams, p: float) -> float:
    """sigma M0^{2 - n/p} / (sigma - n/p)."""
    n, sigma = params.n, params.sigma
    if p <= n / sigma:
        raise DomainError(f"ABP factor needs p > n/sigma = {n / sigma:.6g}, got p={p}")
    m0 = compute_M0(n, sigma)
    return sigma * m0 ** (2.0 - n / p) / (sigma - n / p)


def abp_ratio(
    u: ScalarField,
    f_plus: ScalarField,
    p: float,
    params: KernelParams,
    spec: QuadratureSpec | None = None,
    m: int = 9,
    seed: int = 0,
    outside_tol: float = 0.0,
) -> ABPReport:
    """(-inf_{B_1} u) / (factor ||f^+||_{L^p(B_1)}) with factor = sigma M0^{2-n/p}/(sigma - n/p).

    u is sampled, not minimized: the origin plus 2^m scrambled Sobol points in
    B_1 for the infimum, and 2^(m-2) Sobol points in the shell 1 <= |x| <= 3
    for the sign check outside the ball (within ``outside_tol``). Both counts
    are reported. ||f^+|| is computed by quadrature with ``spec``.

    Raises:
        DomainError: If p <= n/sigma.
    """
    n = params.n
    factor = abp_factor(params, p)
    inside = np.vstack([np.zeros((1, n)), ball_points(n, 1.0, m, seed=seed)])
    outside = ball_points(n, 3.0, m - 2, seed=seed + 1, inner=1.0)
    lhs = -float(np.min(u(inside)))
    outside_ok = bool(np.min(u(outside)) >= -outside_tol)
    f_norm = lp_norm_ball(f_plus, p, spec=spec)
    if f_norm > 0.0:
        ratio = lhs / (factor * f_norm)
    else:
        ratio = 0.0 if lhs <= 0.0 else math.inf
    report = ABPReport(
        p=p,
        lhs=lhs,
        f_norm=f_norm,
        factor=factor,
        ratio=ratio,
        outside_nonnegative=outside_ok,
        samples=inside.shape[0],
        outside_samples=outside.shape[0],
    )
    log_report_row("abp", report.to_dict())
    return report


# ---------------------------------------------------------------------------
# Inf-convolution suite
# ---------------------------------------------------------------------------


@dataclass
class InfConvReport:
    """Checks on u_h and the standard modification u_{h,eps}."""

    h: float
    eps_ladder: list[float]
    max_above_u: float
    max_displacement_sq: float
    displacement_limit: float
    semiconcavity_violation: float
    semiconcavity_tol: float
    cauchy_rows: list[dict[str, float]] = field(default_factory=list)
    operator_bound: float = math.inf
    max_pucci_plus: float = -math.inf

    @property
    def checks(self) -> dict[str, bool]:
        return {
            "below_u": self.max_above_u <= 1e-12,
            "displacement": self.max_displacement_sq <= self.displacement_limit,
            "semiconcavity": self.semiconcavity_violation <= self.semiconcavity_tol,
            "cauchy": all(row["d2"] <= row["d1"] + row["err"] for row in self.cauchy_rows),
            "operator_bound": self.max_pucci_plus <= self.operator_bound,
        }

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    def to_dict(self) -> dict[str, Any]:
        out = asdict(self)
        out.update(checks=self.checks, passed=self.passed)
        return out


def infconv_suite(
    u: ScalarField,
    infconv: InfConvParams,
    params: KernelParams,
    spec: QuadratureSpec,
    eps_ladder: Sequence[float] = (0.1, 0.05, 0.025),
    points: npt.ArrayLike | None = None,
    samples: int = 10_000,
    seed: int = 0,
    table_step: float = 0.01,
    half_width: float = 1.5,
    workers: int = 1,
) -> InfConvReport:
    """Run the inf-convolution checks on a bounded field u.

    u_h <= u and the argmin displacement are sampled at 128 points,
    semiconcavity at ``samples`` pairs. u_h is then tabulated, mollified at each
    eps of the ladder and D^sigma u_{h,eps} is computed at ``points``; the
    successive differences must not grow beyond the quadrature error.
    """
    if len(eps_ladder) < 3:
        raise DomainError("eps_ladder needs at least three values")
    n = params.n
    rng = np.random.default_rng(seed)
    u_h, argmin = inf_convolution(u, infconv)
    trial = rng.uniform(-1.2, 1.2, size=(128, n))
    above = float(np.max(u_h(trial) - u(trial)))
    disp = float(np.max(np.sum((argmin(trial) - trial) ** 2, axis=1)))
    limit = 4.0 * infconv.h * u.sup_bound + infconv.displacement_slack(n, u.sup_bound)
    semi = semiconcavity_check(u_h, infconv.h, samples=samples, seed=seed, grid_step=infconv.grid_step)
    with LogTimer("INFCONV", f"tabulate u_h of {u.name}"):
        table = tabulate(u_h, half_width, table_step)
    pts = (
        np.array([[0.0] * n, [0.3] + [0.0] * (n - 1), [0.0] * (n - 1) + [-0.5], [0.4] * n, [-0.7] + [0.2] * (n - 1)])
        if points is None
        else np.atleast_2d(np.asarray(points, dtype=float))
    )
    hessians: list[list[QuadResult]] = []
    max_plus = -math.inf
    for eps in eps_ladder:
        smooth = mollify(table, eps)
        results = parallel_map(lambda x, s=smooth: fractional_hessian(s, x, params, spec), list(pts), workers)
        hessians.append(results)
        for res in results:
            max_plus = max(max_plus, pucci_extremal_trace(res.value, params, "+")[0])
    rows = []
    for i in range(pts.shape[0]):
        for k in range(len(eps_ladder) - 2):
            a, b, c = hessians[k][i], hessians[k + 1][i], hessians[k + 2][i]
            rows.append(
                {
                    "point": i,
                    "eps": float(eps_ladder[k + 2]),
                    "d1": float(np.linalg.norm(b.value - a.value)),
                    "d2": float(np.linalg.norm(c.value - b.value)),
                    "err": a.err_bound + 2.0 * b.err_bound + c.err_bound,
                }
            )
    report = InfConvReport(
        h=infconv.h,
        eps_ladder=[float(e) for e in eps_ladder],
        max_above_u=above,
        max_displacement_sq=disp,
        displacement_limit=limit,
        semiconcavity_violation=semi.max_violation,
        semiconcavity_tol=semi.tol,
        cauchy_rows=rows,
        operator_bound=infconv_operator_bound(infconv.h, u.sup_bound, params),
        max_pucci_plus=max_plus,
    )
    log_report_row("infconv", {"checks": report.checks})
    return report

