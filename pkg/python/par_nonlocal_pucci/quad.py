"""Quadrature for the sigma-order Hessian, the dual fractional Laplacian and the Riesz potential.

All three operators are singular integrals over R^n evaluated in polar
coordinates centred at x. The shell [r_inner, r_outer] is integrated with
composite Gauss-Legendre rules on geometric shells (uniform in log t) times a
sphere rule; the two remaining pieces are handled analytically:

- ``|y| < r_inner``: the second difference is replaced by its Taylor
  polynomial y^T D^2u(x) y, integrated in closed form, with the remainder
  bounded by the oscillation of D^2u on the ball; fields without a usable
  Hessian fall back to |delta| <= L |y|^2.
- ``|y| > r_outer``: the u(x) part of the second difference is integrated
  exactly, the rest bounded through ``ScalarField.sup_outside``.

Every result is a ``QuadResult(value, err_bound)`` where err_bound adds the
discretization estimate (difference between two refinement levels), the
near-origin bound, the tail bound and a floating-point rounding floor.
"""

from __future__ import annotations

import math
from collections.abc import Callable
from dataclasses import dataclass, replace
from typing import Any, Literal, NamedTuple

import numpy as np
import numpy.typing as npt

from .debug import log_accuracy_failure, log_quadrature_result, log_refinement
from .errors import DomainError, QuadratureAccuracyError
from .fields import ScalarField
from .rules import gauss_nodes, shell_edges, sphere_rule
from .special import KernelParams, norm_const_neg, norm_const_pos, sphere_area

FloatArray = npt.NDArray[np.float64]
Kind = Literal["hessian", "dual", "one_sided"]

_EVAL_CHUNK = 1 << 20
_MAX_OUTER = 1e6
_EPS = float(np.finfo(float).eps)

ANGULAR_DEFAULTS = {2: 96, 3: 512}
ANGULAR_MINIMUM = {2: 8, 3: 26}

__all__ = [
    "QuadResult",
    "QuadratureSpec",
    "fractional_hessian",
    "fractional_laplacian_dual",
    "radial_reduce_hessian",
    "radial_reduce_laplacian",
    "riesz_potential",
]


@dataclass(frozen=True)
class QuadratureSpec:
    """Quadrature resolution and accuracy target.

    Attributes:
        r_inner: Inner radius of the shell grid; chosen from ``tol`` when None.
        r_outer: Tail truncation radius; chosen from ``tol`` when None.
        radial_levels: Minimum number of geometric shells.
        angular_points: Sphere rule size; defaults to 96 (n=2) and 512 (n=3).
        tol: Absolute accuracy target for the reported error bound.
        shell_ratio: Ratio between consecutive shell radii.
        gauss_order: Gauss-Legendre nodes per shell.
        max_refinements: Refinement steps before giving up.
    """

    r_inner: float | None = None
    r_outer: float | None = None
    radial_levels: int | None = None
    angular_points: int | None = None
    tol: float = 1e-4
    shell_ratio: float = 1.15
    gauss_order: int = 4
    max_refinements: int = 2

    def __post_init__(self) -> None:
        if self.r_inner is not None and self.r_inner <= 0.0:
            raise DomainError(f"r_inner must be positive, got {self.r_inner}")
        if self.r_outer is not None and self.r_inner is not None and self.r_outer <= self.r_inner:
            raise DomainError(f"need r_inner < r_outer, got {self.r_inner} and {self.r_outer}")
        if self.radial_levels is not None and self.radial_levels < 8:
            raise DomainError(f"radial_levels must be >= 8, got {self.radial_levels}")
        if self.tol <= 0.0:
            raise DomainError(f"tol must be positive, got {self.tol}")
        if self.shell_ratio <= 1.0:
            raise DomainError(f"shell_ratio must exceed 1, got {self.shell_ratio}")
        if self.gauss_order < 2 or self.max_refinements < 0:
            raise DomainError("gauss_order must be >= 2 and max_refinements >= 0")

    def angular_for(self, n: int) -> int:
        if n not in ANGULAR_DEFAULTS:
            raise DomainError(f"quadrature supports n in {{2, 3}}, got n={n}")
        if self.angular_points is None:
            return ANGULAR_DEFAULTS[n]
        if self.angular_points < ANGULAR_MINIMUM[n]:
            raise DomainError(f"angular_points must be >= {ANGULAR_MINIMUM[n]} for n={n}")
        return self.angular_points

    def with_tol(self, tol: float) -> QuadratureSpec:
        return replace(self, tol=tol)


class QuadResult(NamedTuple):
    value: Any
    err_bound: float


@dataclass(frozen=True)
class _Form:
    kind: Kind
    order: float
    # prefactor of the symmetrized integrand delta(u, x, y) |y|^{-n-order}
    c_sym: float

    @classmethod
    def build(cls, kind: Kind, params: KernelParams) -> _Form:
        if kind == "hessian":
            return cls(kind, params.sigma, 0.5 * norm_const_neg(params.n, params.sigma))
        s = 2.0 - params.sigma
        return cls(kind, s, 0.5 * norm_const_neg(params.n, s))

    @property
    def is_matrix(self) -> bool:
        return self.kind == "hessian"


def _point(x: npt.ArrayLike, n: int) -> FloatArray:
    xx = np.asarray(x, dtype=float).ravel()
    if xx.size != n:
        raise DomainError(f"expected a point in R^{n}, got {xx.size} coordinates")
    return xx


def _check_field(u: ScalarField, params: KernelParams, spec: QuadratureSpec) -> None:
    if u.n != params.n:
        raise DomainError(f"field {u.name} lives in R^{u.n}, params have n={params.n}")
    spec.angular_for(params.n)


def _kinks(u: ScalarField) -> list[float]:
    ks = list(u.kink_radii)
    if math.isfinite(u.support_radius) and u.support_radius > 0.0:
        ks.append(u.support_radius)
    return ks


def _shell_cuts(u: ScalarField, rx: float) -> tuple[float, ...]:
    """Radii |y| at which the sphere |x + y| = k meets the shell grid."""
    cuts = set()
    for k in _kinks(u):
        for c in (abs(k - rx), k + rx):
            if c > 0.0:
                cuts.add(c)
    return tuple(sorted(cuts))


def _hessian_oscillation(u: ScalarField, x: FloatArray, r: float) -> float:
    """2 max |D^2u(x + z) - D^2u(x)| over a stencil of z in B_r(0)."""
    n = u.n
    eye = np.eye(n)
    offsets = [s * e for e in eye for s in (1.0, -1.0)]
    for i in range(n):
        for j in range(i + 1, n):
            for si in (1.0, -1.0):
                for sj in (1.0, -1.0):
                    offsets.append((si * eye[i] + sj * eye[j]) / math.sqrt(2.0))
    h0 = u.hessian(x)
    assert h0 is not None
    worst = 0.0
    for scale in (r, 0.5 * r):
        for z in offsets:
            hz = u.hessian(x + scale * z)
            assert hz is not None
            worst = max(worst, float(np.linalg.norm(hz - h0)))
    return 2.0 * worst


def _near_model(form: _Form, u: ScalarField, x: FloatArray, r: float, area: float) -> tuple[Any, float]:
    """(closed-form contribution of B_r, bound on what it misses)."""
    n = u.n
    gap = 2.0 - form.order
    shell = area * r**gap / gap
    zero: Any = np.zeros((n, n)) if form.is_matrix else 0.0
    options: list[tuple[Any, float]] = []
    if u.c11_seminorm is not None:
        options.append((zero, form.c_sym * u.c11_seminorm * shell))
    if u.taylor_valid(x, r):
        h = u.hessian(x)
        assert h is not None
        bound = form.c_sym * _hessian_oscillation(u, x, r) * shell
        if form.is_matrix:
            corr = form.c_sym * shell / (n * (n + 2)) * (np.trace(h) * np.eye(n) + 2.0 * h)
        else:
            corr = -form.c_sym * float(np.trace(h)) * shell / n
        options.append((corr, bound))
    if not options:
        raise DomainError(f"no near-origin model for {u.name} at {x}: needs a C^{{1,1}} seminorm or a Hessian")
    return min(options, key=lambda item: item[1])


def _rounding_floor(form: _Form, u0: float, r: float, area: float) -> float:
    return form.c_sym * 4.0 * _EPS * max(abs(u0), 1e-300) * area * r ** (-form.order) / form.order


def _tail_bound(form: _Form, u: ScalarField, rx: float, radius: float, area: float) -> float:
    sup = u.sup_outside(max(radius - rx, 0.0))
    if sup == 0.0:
        return 0.0
    return 2.0 * form.c_sym * sup * area * radius ** (-form.order) / form.order


def _tail_exact(form: _Form, w0: float, radius: float, area: float, n: int) -> Any:
    mass = area * radius ** (-form.order) / form.order
    if form.is_matrix:
        return -2.0 * w0 * form.c_sym * mass / n * np.eye(n)
    return 2.0 * w0 * form.c_sym * mass


def _outer_radius(form: _Form, u: ScalarField, rx: float, spec: QuadratureSpec, area: float) -> float:
    if spec.r_outer is not None:
        return spec.r_outer
    if math.isfinite(u.support_radius):
        return max(rx + u.support_radius, 1.0)
    radius = max(1.0, 2.0 * rx)
    while _tail_bound(form, u, rx, radius, area) > spec.tol / 4.0 and radius < _MAX_OUTER:
        radius *= 2.0
    return radius


def _inner_radius(
    form: _Form, u: ScalarField, x: FloatArray, u0: float, spec: QuadratureSpec, outer: float, area: float
) -> tuple[float, Any, float]:
    """Pick r_inner; return (r_inner, near contribution, near bound + rounding floor)."""
    if spec.r_inner is not None:
        corr, bound = _near_model(form, u, x, spec.r_inner, area)
        return spec.r_inner, corr, bound + _rounding_floor(form, u0, spec.r_inner, area)
    best: tuple[float, Any, float] | None = None
    for j in range(2, 25):
        r = outer * 10.0 ** (-j / 2.0)
        try:
            corr, bound = _near_model(form, u, x, r, area)
        except DomainError:
            continue
        floor = _rounding_floor(form, u0, r, area)
        if bound <= spec.tol / 4.0 and floor <= spec.tol / 4.0:
            return r, corr, bound + floor
        if best is None or bound + floor < best[2]:
            best = (r, corr, bound + floor)
    if best is None:
        raise DomainError(f"no near-origin model for {u.name} at {x}: needs a C^{{1,1}} seminorm or a Hessian")
    return best


def _refine(
    operation: str,
    compute: Callable[[int], tuple[Any, int]],
    analytic: float,
    spec: QuadratureSpec,
) -> tuple[Any, float]:
    """Compare consecutive levels until the total bound meets spec.tol."""
    prev, _ = compute(0)
    cur, err = prev, math.inf
    for level in range(spec.max_refinements + 1):
        cur, nodes = compute(level + 1)
        err = float(np.linalg.norm(np.asarray(cur) - np.asarray(prev))) + analytic
        log_refinement(operation, level, nodes, err, spec.tol)
        if err <= spec.tol:
            return cur, err
        prev = cur
    log_accuracy_failure(operation, err, spec.tol)
    raise QuadratureAccuracyError(
        f"{operation}: error bound {err:.3e} above tol {spec.tol:.3e} after {spec.max_refinements} refinements",
        value=cur,
        err_bound=err,
    )


def _shell_nodes(
    r_in: float, outer: float, cuts: tuple[float, ...], spec: QuadratureSpec, level: int
) -> tuple[FloatArray, FloatArray]:
    ratio = spec.shell_ratio ** (0.5**level)
    edges = shell_edges(r_in, outer, ratio, spec.radial_levels or 0, cuts)
    return gauss_nodes(edges, spec.gauss_order, log_scale=True)


def _sphere_core(
    form: _Form,
    u: ScalarField,
    x: FloatArray,
    u0: float,
    r_in: float,
    outer: float,
    spec: QuadratureSpec,
    level: int,
) -> tuple[Any, int]:
    n = u.n
    t, wt = _shell_nodes(r_in, outer, _shell_cuts(u, float(np.linalg.norm(x))), spec, level)
    kern = wt * t ** (-1.0 - form.order)
    # symmetric forms see y and -y together: half the sphere suffices
    half = form.kind != "one_sided"
    dirs, wd = sphere_rule(n, spec.angular_for(n) * 2**level, half=half)
    acc = np.zeros(dirs.shape[0])
    chunk = max(1, _EVAL_CHUNK // dirs.shape[0])
    for start in range(0, t.size, chunk):
        y = t[start : start + chunk, None, None] * dirs[None, :, :]
        if form.kind == "one_sided":
            vals = u0 - u(x + y)
        else:
            vals = u(x + y) + u(x - y) - 2.0 * u0
            if form.kind == "dual":
                vals = -vals
        acc += kern[start : start + chunk] @ vals
    weights = 2.0 * form.c_sym * acc * wd
    nodes = t.size * dirs.shape[0]
    if form.is_matrix:
        return np.einsum("j,ja,jb->ab", weights, dirs, dirs), nodes
    return float(weights.sum()), nodes


def _theta_nodes(
    rx: float, t: float, breakpoints: FloatArray, panels: int, order: int, both_sides: bool
) -> tuple[FloatArray, FloatArray]:
    """Gauss nodes on [0, pi] split where |x +- t omega| crosses a breakpoint."""
    cuts = [np.linspace(0.0, math.pi, panels + 1)]
    denom = 2.0 * rx * t
    for b in breakpoints:
        c = (b * b - rx * rx - t * t) / denom
        if -1.0 < c < 1.0:
            theta = math.acos(c)
            cuts.append(np.array([theta, math.pi - theta] if both_sides else [theta]))
    edges = np.unique(np.concatenate(cuts))
    edges = edges[np.concatenate([[True], np.diff(edges) > 1e-12])]
    return gauss_nodes(edges, order)


def _profile_breaks(u: ScalarField) -> FloatArray:
    assert u.radial is not None
    return np.array(_kinks(u) + list(u.radial.breakpoints), dtype=float)


def _radial_core(
    form: _Form,
    u: ScalarField,
    x: FloatArray,
    r_in: float,
    outer: float,
    spec: QuadratureSpec,
    level: int,
) -> tuple[Any, int]:
    profile = u.radial
    assert profile is not None
    n = u.n
    rx = float(np.linalg.norm(x))
    phi_r = float(profile.phi(np.array([rx]))[0])
    t, wt = _shell_nodes(r_in, outer, _shell_cuts(u, rx), spec, level)
    kern = wt * t ** (-1.0 - form.order)
    area = sphere_area(n)
    if rx == 0.0:
        radial = float(kern @ (2.0 * (profile.phi(t) - phi_r)))
        if form.is_matrix:
            return form.c_sym * area / n * radial * np.eye(n), t.size
        return -form.c_sym * area * radial, t.size
    breaks = _profile_breaks(u)
    panels = max(4, spec.angular_for(n) // 16) * 2**level
    owner, thetas, wthetas = [], [], []
    for k, tk in enumerate(t):
        th, wth = _theta_nodes(rx, float(tk), breaks, panels, spec.gauss_order, both_sides=True)
        owner.append(np.full(th.size, k))
        thetas.append(th)
        wthetas.append(wth)
    idx = np.concatenate(owner)
    theta = np.concatenate(thetas)
    ct = np.cos(theta)
    tt = t[idx]
    plus = np.sqrt(rx * rx + tt * tt + 2.0 * rx * tt * ct)
    minus = np.sqrt(np.maximum(rx * rx + tt * tt - 2.0 * rx * tt * ct, 0.0))
    delta = profile.phi(plus) + profile.phi(minus) - 2.0 * phi_r
    w = np.concatenate(wthetas) * sphere_area(n - 1) * np.sin(theta) ** (n - 2) * kern[idx]
    if not form.is_matrix:
        return -form.c_sym * float(np.sum(w * delta)), theta.size
    rad = form.c_sym * float(np.sum(w * delta * ct * ct))
    tan = form.c_sym * float(np.sum(w * delta * (1.0 - ct * ct))) / (n - 1)
    xhat = x / rx
    proj = np.outer(xhat, xhat)
    return rad * proj + tan * (np.eye(n) - proj), theta.size


def _evaluate_form(
    kind: Kind,
    u: ScalarField,
    x: npt.ArrayLike,
    params: KernelParams,
    spec: QuadratureSpec,
    radial: bool,
) -> QuadResult:
    _check_field(u, params, spec)
    n = params.n
    xx = _point(x, n)
    rx = float(np.linalg.norm(xx))
    form = _Form.build(kind, params)
    area = sphere_area(n)
    u0 = u.value(xx)
    w0 = float(u.centered(xx.reshape(1, n))[0])
    outer = _outer_radius(form, u, rx, spec, area)
    tail_bound = _tail_bound(form, u, rx, outer, area)
    if not math.isfinite(tail_bound):
        raise DomainError(f"{u.name} is not bounded outside B_{outer:g}; the tail integral diverges")
    r_in, near, near_bound = _inner_radius(form, u, xx, u0, spec, outer, area)
    operation = f"{'radial_' if radial else ''}{kind}[{u.name}]"

    def compute(level: int) -> tuple[Any, int]:
        if radial:
            return _radial_core(form, u, xx, r_in, outer, spec, level)
        return _sphere_core(form, u, xx, u0, r_in, outer, spec, level)

    core, err = _refine(operation, compute, near_bound + tail_bound, spec)
    value = core + near + _tail_exact(form, w0, outer, area, n)
    if form.is_matrix:
        value = 0.5 * (value + value.T)
    log_quadrature_result(operation, xx, value, err)
    return QuadResult(value, err)


def fractional_hessian(u: ScalarField, x: npt.ArrayLike, params: KernelParams, spec: QuadratureSpec) -> QuadResult:
    """D^sigma u(x) = (A(n,-sigma)/2) int delta(u,x,y) (y (x) y) |y|^{-n-2-sigma} dy.

    Always uses the full sphere rule, so it stays independent of the radial
    fast path.

    Raises:
        DomainError: If u has neither a C^{1,1} bound nor a Hessian near x, or
            is unbounded at infinity.
        QuadratureAccuracyError: If ``spec.tol`` is not reached.
    """
    return _evaluate_form("hessian", u, x, params, spec, radial=False)


def fractional_laplacian_dual(
    p: ScalarField,
    x: npt.ArrayLike,
    params: KernelParams,
    spec: QuadratureSpec,
    one_sided: bool = False,
) -> QuadResult:
    """(A(n,-(2-sigma))/2) int -delta(P,x,y) |y|^{-n-(2-sigma)} dy.

    With ``one_sided`` the principal-value form
    A(n,-(2-sigma)) int (P(x) - P(x+y)) |y|^{-n-(2-sigma)} dy is integrated
    instead, on the full sphere; both agree for any field.
    """
    return _evaluate_form("one_sided" if one_sided else "dual", p, x, params, spec, radial=False)


def _require_radial(u: ScalarField) -> None:
    if u.radial is None:
        raise DomainError(f"{u.name} is not radial")
    if u.slope is not None and np.any(u.slope):
        raise DomainError(f"{u.name} has a non-radial affine part")


def radial_reduce_hessian(
    u: ScalarField, x: npt.ArrayLike, params: KernelParams, spec: QuadratureSpec
) -> QuadResult:
    """D^sigma u(x) for radial u via a 2-D integral in (|y|, angle to x).

    D^sigma u(x) has one eigenvalue along x/|x| and n-1 equal tangential ones,
    so only two scalar integrals are computed.

    Raises:
        DomainError: If u carries no radial profile.
    """
    _require_radial(u)
    return _evaluate_form("hessian", u, x, params, spec, radial=True)


def radial_reduce_laplacian(
    p: ScalarField, x: npt.ArrayLike, params: KernelParams, spec: QuadratureSpec
) -> QuadResult:
    """Radial fast path for ``fractional_laplacian_dual``."""
    _require_radial(p)
    return _evaluate_form("dual", p, x, params, spec, radial=True)


# ---------------------------------------------------------------------------
# Riesz potential
# ---------------------------------------------------------------------------


def _riesz_polar(
    v: ScalarField, x: FloatArray, r_in: float, outer: float, params: KernelParams, spec: QuadratureSpec, level: int
) -> tuple[float, int]:
    n = v.n
    rx = float(np.linalg.norm(x))
    t, wt = _shell_nodes(r_in, outer, _shell_cuts(v, rx), spec, level)
    kern = wt * t ** (1.0 - params.sigma)
    if v.radial is not None:
        profile = v.radial
        if rx == 0.0:
            return sphere_area(n) * float(kern @ profile.phi(t)), t.size
        breaks = _profile_breaks(v)
        panels = max(4, spec.angular_for(n) // 16) * 2**level
        total = 0.0
        count = 0
        for k, tk in enumerate(t):
            th, wth = _theta_nodes(rx, float(tk), breaks, panels, spec.gauss_order, both_sides=False)
            dist = np.sqrt(np.maximum(rx * rx + tk * tk + 2.0 * rx * tk * np.cos(th), 0.0))
            weight = wth * sphere_area(n - 1) * np.sin(th) ** (n - 2)
            total += kern[k] * float(weight @ profile.phi(dist))
            count += th.size
        return total, count
    dirs, wd = sphere_rule(n, spec.angular_for(n) * 2**level)
    acc = np.zeros(dirs.shape[0])
    chunk = max(1, _EVAL_CHUNK // dirs.shape[0])
    for start in range(0, t.size, chunk):
        pts = x + t[start : start + chunk, None, None] * dirs[None, :, :]
        acc += kern[start : start + chunk] @ v(pts)
    return float(acc @ wd), t.size * dirs.shape[0]


def _riesz_far(
    v: ScalarField, x: FloatArray, rho: float, params: KernelParams, spec: QuadratureSpec, level: int
) -> tuple[float, int]:
    """Origin-centred rule for |x| >= 2 rho, where the kernel is smooth on the support."""
    n = v.n
    edges = np.unique(np.concatenate([np.linspace(0.0, rho, 9), [k for k in v.kink_radii if 0.0 < k < rho]]))
    if level:
        mids = 0.5 * (edges[:-1] + edges[1:])
        for _ in range(level):
            edges = np.unique(np.concatenate([edges, mids]))
            mids = 0.5 * (edges[:-1] + edges[1:])
    t, wt = gauss_nodes(edges, spec.gauss_order)
    dirs, wd = sphere_rule(n, spec.angular_for(n) * 2**level)
    pts = t[:, None, None] * dirs[None, :, :]
    dist = np.linalg.norm(x - pts, axis=-1)
    vals = v(pts) * dist ** (-(n - 2.0 + params.sigma))
    return float((wt * t ** (n - 1)) @ vals @ wd), t.size * dirs.shape[0]


def riesz_potential(v: ScalarField, x: npt.ArrayLike, params: KernelParams, spec: QuadratureSpec) -> QuadResult:
    """P(x) = A(n, 2-sigma) int v(y) |x - y|^{-(n-2+sigma)} dy for compactly supported v.

    Radial v use a reduced (|y - x|, angle) rule; points at least twice the
    support radius away switch to an origin-centred rule.

    Raises:
        DomainError: If v is not compactly supported.
        QuadratureAccuracyError: If ``spec.tol`` is not reached.
    """
    _check_field(v, params, spec)
    n = params.n
    xx = _point(x, n)
    if not math.isfinite(v.support_radius) or (v.slope is not None and np.any(v.slope)) or v.offset != 0.0:
        raise DomainError(f"riesz_potential needs a compactly supported field, got {v.name}")
    rho = v.support_radius
    a_pos = norm_const_pos(n, params.sigma)
    if rho == 0.0 or v.sup_bound == 0.0:
        return QuadResult(0.0, 0.0)
    rx = float(np.linalg.norm(xx))
    operation = f"riesz[{v.name}]"
    if rx >= 2.0 * rho:

        def compute(level: int) -> tuple[float, int]:
            return _riesz_far(v, xx, rho, params, spec, level)

        raw, err = _refine(operation, compute, 0.0, spec.with_tol(spec.tol / a_pos))
    else:
        outer = rx + rho
        gap = 2.0 - params.sigma
        area = sphere_area(n)
        if spec.r_inner is not None:
            r_in = spec.r_inner
        else:
            r_in = (spec.tol / 4.0 * gap / (a_pos * v.sup_bound * area)) ** (1.0 / gap)
        r_in = min(r_in, 0.1 * outer)
        near = v.sup_bound * area * r_in**gap / gap

        def compute(level: int) -> tuple[float, int]:
            return _riesz_polar(v, xx, r_in, outer, params, spec, level)

        raw, err = _refine(operation, compute, near, spec.with_tol(spec.tol / a_pos))
    value = a_pos * raw
    err_bound = a_pos * err
    log_quadrature_result(operation, xx, value, err_bound)
    return QuadResult(value, err_bound)

