"""Scalar fields on R^n with the analytic metadata the quadrature needs.

A ``ScalarField`` wraps a vectorized evaluator (points of shape (..., n) in,
values of shape (...) out) together with bounds used for certified error
estimates: the sup norm, the support radius, a C^{1,1} seminorm L with
|delta(u, x, y)| <= L |y|^2, an optional exact Hessian and, for radial
fields, the ``RadialProfile`` it was built from.

Fields may carry an affine part l(x) = slope . x + offset. Support radius and
the tail bounds then refer to u - l, which the second difference never sees.
"""

from __future__ import annotations

import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import numpy.typing as npt
from scipy import integrate, ndimage
from scipy.interpolate import CubicSpline

from .debug import LogTimer, debug_info, debug_log
from .errors import DomainError, ResolutionError
from .rules import gauss_nodes, sphere_rule
from .special import KernelParams, norm_const_neg, sphere_area

FloatArray = npt.NDArray[np.float64]
RadialFn = Callable[[FloatArray], FloatArray]
Piece = tuple[RadialFn, RadialFn, RadialFn]

_EVAL_CHUNK = 1 << 20

__all__ = [
    "GridField",
    "InfConvParams",
    "InfConvolution",
    "RadialProfile",
    "ScalarField",
    "SemiconcavityReport",
    "affine",
    "bump",
    "cone",
    "constant",
    "delta_second_diff",
    "fd_hessian",
    "from_radial",
    "inf_convolution",
    "infconv_operator_bound",
    "mollifier_density",
    "mollifier_mass",
    "mollifier_weight",
    "mollify",
    "neg_bump",
    "plateau",
    "quadratic",
    "radial_hessian",
    "rescale",
    "scaled",
    "semiconcavity_check",
    "tabulate",
]


def _zeros(r: FloatArray) -> FloatArray:
    return np.zeros_like(r)


ZERO_PIECE: Piece = (_zeros, _zeros, _zeros)


class RadialProfile:
    """Piecewise radial data phi, phi', phi'' on [0, inf).

    ``pieces[k]`` is used on [breakpoints[k-1], breakpoints[k]) with
    breakpoints[-1] = 0 and breakpoints[len] = inf, so evaluation at a
    breakpoint is right-continuous.
    """

    def __init__(
        self,
        breakpoints: Sequence[float],
        pieces: Sequence[Piece],
        monotone: bool = False,
        support: float = math.inf,
        decay: tuple[float, float, float] | None = None,
        name: str = "profile",
    ) -> None:
        bps = np.asarray(breakpoints, dtype=float)
        if len(pieces) != bps.size + 1:
            raise DomainError(f"need {bps.size + 1} pieces for {bps.size} breakpoints, got {len(pieces)}")
        if bps.size and (bps[0] <= 0.0 or np.any(np.diff(bps) <= 0.0)):
            raise DomainError("breakpoints must be positive and strictly increasing")
        self.breakpoints = bps
        self.pieces = tuple(pieces)
        self.monotone = monotone
        self.support = support
        # (r0, value, k): phi(r) = value (r / r0)^-k for r >= r0
        self.decay = decay
        self.name = name

    def _eval(self, r: npt.ArrayLike, which: int) -> FloatArray:
        rr = np.asarray(r, dtype=float)
        out = np.zeros(rr.shape)
        idx = np.searchsorted(self.breakpoints, rr, side="right")
        for k, piece in enumerate(self.pieces):
            mask = idx == k
            if np.any(mask):
                out[mask] = piece[which](rr[mask])
        return out

    def phi(self, r: npt.ArrayLike) -> FloatArray:
        return self._eval(r, 0)

    def dphi(self, r: npt.ArrayLike) -> FloatArray:
        return self._eval(r, 1)

    def ddphi(self, r: npt.ArrayLike) -> FloatArray:
        return self._eval(r, 2)

    def continuity_gaps(self) -> tuple[float, float]:
        """Largest jump of (phi, phi') across the breakpoints."""
        gap_phi = 0.0
        gap_dphi = 0.0
        for k, b in enumerate(self.breakpoints):
            left, right = self.pieces[k], self.pieces[k + 1]
            at = np.array([b])
            gap_phi = max(gap_phi, float(abs(left[0](at)[0] - right[0](at)[0])))
            gap_dphi = max(gap_dphi, float(abs(left[1](at)[0] - right[1](at)[0])))
        return gap_phi, gap_dphi

    def _sample_radii(self, lo: float, hi: float) -> FloatArray:
        radii = [np.linspace(lo, hi, 4001)]
        if lo > 0.0:
            radii.append(np.geomspace(lo, hi, 2001))
        else:
            radii.append(np.geomspace(max(hi * 1e-9, 1e-300), hi, 2001))
        inside = self.breakpoints[(self.breakpoints >= lo) & (self.breakpoints <= hi)]
        radii.append(inside)
        radii.append(np.nextafter(inside, -np.inf))
        return np.unique(np.concatenate(radii))

    def sup_on(self, lo: float, hi: float) -> float:
        """Sampled max of |phi| on [lo, hi]."""
        if hi <= lo:
            return float(abs(self.phi(np.array([lo]))[0]))
        return float(np.max(np.abs(self.phi(self._sample_radii(lo, hi)))))

    def _finite_extent(self) -> float:
        if math.isfinite(self.support):
            return self.support
        if self.decay is not None:
            return self.decay[0]
        if self.breakpoints.size:
            return 2.0 * float(self.breakpoints[-1])
        return 1.0

    def sup_beyond(self, rho: float) -> float:
        """Bound on |phi| over [rho, inf)."""
        rho = max(rho, 0.0)
        if rho >= self.support:
            return 0.0
        extent = self._finite_extent()
        best = self.sup_on(rho, extent) if rho < extent else 0.0
        if self.decay is not None:
            r0, value, k = self.decay
            best = max(best, abs(value) * (max(rho, r0) / r0) ** (-k))
        elif not math.isfinite(self.support):
            best = max(best, float(abs(self.phi(np.array([max(rho, extent)]))[0])))
        return best

    def c11_estimate(self) -> float:
        """Sampled sup of max(|phi''|, |phi'/r|), the C^{1,1} seminorm of phi(|x|)."""
        radii = self._sample_radii(0.0, self._finite_extent())
        radii = radii[radii > 0.0]
        vals = np.maximum(np.abs(self.ddphi(radii)), np.abs(self.dphi(radii) / radii))
        return float(np.max(vals))

    def rescaled(self, s: float) -> RadialProfile:
        """Profile of r -> phi(s r)."""

        def wrap(piece: Piece) -> Piece:
            f, df, ddf = piece
            return (
                lambda r: f(s * r),
                lambda r: s * df(s * r),
                lambda r: s * s * ddf(s * r),
            )

        decay = None
        if self.decay is not None:
            decay = (self.decay[0] / s, self.decay[1], self.decay[2])
        return RadialProfile(
            self.breakpoints / s,
            [wrap(p) for p in self.pieces],
            monotone=self.monotone,
            support=self.support / s,
            decay=decay,
            name=f"{self.name}(s={s:g})",
        )

    def scaled(self, factor: float) -> RadialProfile:
        """Profile of factor * phi."""

        def wrap(piece: Piece) -> Piece:
            f, df, ddf = piece
            return (lambda r: factor * f(r), lambda r: factor * df(r), lambda r: factor * ddf(r))

        decay = None
        if self.decay is not None:
            decay = (self.decay[0], factor * self.decay[1], self.decay[2])
        return RadialProfile(
            self.breakpoints,
            [wrap(p) for p in self.pieces],
            monotone=self.monotone and factor >= 0.0,
            support=self.support,
            decay=decay,
            name=f"{factor:g}*{self.name}",
        )

    @classmethod
    def from_samples(
        cls,
        radii: npt.ArrayLike,
        values: npt.ArrayLike,
        breakpoints: Sequence[float] = (),
        decay_exponent: float | None = None,
        name: str = "sampled",
    ) -> RadialProfile:
        """Piecewise cubic-spline profile through (radii, values).

        A separate spline is fitted between consecutive ``breakpoints`` (each
        must be one of the radii). A spline starting at r = 0 is clamped to zero
        slope there. Beyond the last radius the profile continues as
        value * (r / r_last)^(-decay_exponent), or as a constant when no
        exponent is given.
        """
        r = np.asarray(radii, dtype=float)
        v = np.asarray(values, dtype=float)
        if r.ndim != 1 or r.shape != v.shape or r.size < 4:
            raise DomainError("need at least 4 matching radii and values")
        if np.any(np.diff(r) <= 0.0) or r[0] < 0.0:
            raise DomainError("radii must be non-negative and strictly increasing")
        cuts = [0]
        for b in breakpoints:
            hits = np.nonzero(np.isclose(r, b, rtol=0.0, atol=1e-12 * max(1.0, abs(b))))[0]
            if hits.size == 0:
                raise DomainError(f"breakpoint {b} is not one of the sample radii")
            if 0 < hits[0] < r.size - 1:
                cuts.append(int(hits[0]))
        cuts = sorted(set(cuts)) + [r.size - 1]
        pieces: list[Piece] = []
        bps: list[float] = []
        if r[0] > 0.0:
            first = r[0]
            v0 = v[0]
            pieces.append((lambda rr, v0=v0: np.full_like(rr, v0), _zeros, _zeros))
            bps.append(float(first))
        for a, b in zip(cuts[:-1], cuts[1:]):
            seg_r, seg_v = r[a : b + 1], v[a : b + 1]
            if seg_r.size < 3:
                raise DomainError("each spline segment needs at least 3 samples")
            bc = ((1, 0.0), "not-a-knot") if seg_r[0] == 0.0 else "not-a-knot"
            spline = CubicSpline(seg_r, seg_v, bc_type=bc)
            pieces.append((spline, lambda rr, s=spline: s(rr, 1), lambda rr, s=spline: s(rr, 2)))
            if b < r.size - 1:
                bps.append(float(r[b]))
        r_last, v_last = float(r[-1]), float(v[-1])
        bps.append(r_last)
        decay = None
        if decay_exponent is None:
            pieces.append((lambda rr: np.full_like(rr, v_last), _zeros, _zeros))
        else:
            k = decay_exponent
            pieces.append(
                (
                    lambda rr: v_last * (rr / r_last) ** (-k),
                    lambda rr: -k * v_last / r_last * (rr / r_last) ** (-k - 1.0),
                    lambda rr: k * (k + 1.0) * v_last / r_last**2 * (rr / r_last) ** (-k - 2.0),
                )
            )
            decay = (r_last, v_last, k)
        return cls(bps, pieces, support=math.inf, decay=decay, name=name)


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Evaluable function on R^n with metadata for error bounds.

    Attributes:
        n: Dimension.
        func: Vectorized evaluator, (..., n) -> (...).
        sup_bound: Bound on sup |u| (inf when unbounded).
        support_radius: u - l vanishes outside this ball (l the affine part).
        c11_seminorm: L with |delta(u, x, y)| <= L |y|^2, or None if unknown.
        radial: Profile with u(x) = phi(|x|), when u is radial.
        hessian_fn: Exact (or spline-exact) Hessian at a point, when available.
        kink_radii: Spheres |x| = k across which the Hessian may jump.
        slope, offset: Affine part l(x) = slope . x + offset.
        remainder_bound: Bound on sup |u - l|; defaults to sup_bound.
        tail_sup: rho -> bound on |u - l| outside B_rho (overrides the default).
        name: Label used in logs and reports.
    """

    n: int
    func: Callable[[FloatArray], FloatArray]
    sup_bound: float = math.inf
    support_radius: float = math.inf
    c11_seminorm: float | None = None
    radial: RadialProfile | None = None
    hessian_fn: Callable[[FloatArray], FloatArray] | None = None
    kink_radii: tuple[float, ...] = ()
    slope: FloatArray | None = None
    offset: float = 0.0
    remainder_bound: float | None = None
    tail_sup: Callable[[float], float] | None = None
    name: str = "field"

    def __call__(self, x: npt.ArrayLike) -> FloatArray:
        pts = np.asarray(x, dtype=float)
        if pts.shape[-1] != self.n:
            raise DomainError(f"{self.name}: expected points in R^{self.n}, got shape {pts.shape}")
        return np.asarray(self.func(pts), dtype=float)

    def value(self, x: npt.ArrayLike) -> float:
        return float(self(np.asarray(x, dtype=float).reshape(self.n)))

    def affine_part(self, x: npt.ArrayLike) -> FloatArray:
        pts = np.asarray(x, dtype=float)
        base = np.full(pts.shape[:-1], self.offset)
        if self.slope is None:
            return base
        return base + pts @ self.slope

    def centered(self, x: npt.ArrayLike) -> FloatArray:
        """u - l, the part the tail estimates act on."""
        return self(x) - self.affine_part(x)

    def sup_outside(self, rho: float) -> float:
        """Bound on |u - l| outside B_rho."""
        if self.tail_sup is not None:
            return self.tail_sup(rho)
        if rho >= self.support_radius:
            return 0.0
        return self.sup_bound if self.remainder_bound is None else self.remainder_bound

    def hessian(self, x: npt.ArrayLike) -> FloatArray | None:
        if self.hessian_fn is None:
            return None
        return np.asarray(self.hessian_fn(np.asarray(x, dtype=float).reshape(self.n)), dtype=float)

    def taylor_valid(self, x: npt.ArrayLike, r: float) -> bool:
        """True when the exact Hessian is available and continuous on B_r(x)."""
        if self.hessian_fn is None:
            return False
        rx = float(np.linalg.norm(np.asarray(x, dtype=float)))
        return all(abs(rx - k) > r for k in self.kink_radii)


def delta_second_diff(u: ScalarField, x: npt.ArrayLike, y: npt.ArrayLike) -> FloatArray:
    """u(x + y) + u(x - y) - 2 u(x), broadcast over y."""
    xx = np.asarray(x, dtype=float)
    yy = np.asarray(y, dtype=float)
    return u(xx + yy) + u(xx - yy) - 2.0 * u(xx)


def radial_hessian(p: RadialProfile, x: npt.ArrayLike) -> FloatArray:
    """phi''(|x|) xhat xhat^T + phi'(|x|)/|x| (Id - xhat xhat^T).

    Raises:
        DomainError: At x = 0, where the tangential term is undefined.
    """
    xx = np.asarray(x, dtype=float).ravel()
    r = float(np.linalg.norm(xx))
    if r == 0.0:
        raise DomainError("radial Hessian is undefined at x = 0")
    xhat = xx / r
    proj = np.outer(xhat, xhat)
    ddp = float(p.ddphi(np.array([r]))[0])
    dp = float(p.dphi(np.array([r]))[0])
    return ddp * proj + (dp / r) * (np.eye(xx.size) - proj)


def _profile_hessian(p: RadialProfile, n: int) -> Callable[[FloatArray], FloatArray]:
    def hess(x: FloatArray) -> FloatArray:
        if float(np.linalg.norm(x)) < 1e-12:
            return float(p.ddphi(np.array([0.0]))[0]) * np.eye(n)
        return radial_hessian(p, x)

    return hess


def fd_hessian(u: ScalarField, x: npt.ArrayLike, h: float) -> FloatArray:
    """Central second differences with step h."""
    n = u.n
    xx = np.asarray(x, dtype=float).reshape(n)
    eye = np.eye(n) * h
    f0 = u.value(xx)
    hess = np.empty((n, n))
    for i in range(n):
        plus, minus = u(xx + eye[i]), u(xx - eye[i])
        hess[i, i] = (float(plus) - 2.0 * f0 + float(minus)) / h**2
        for j in range(i + 1, n):
            stencil = np.stack(
                [xx + eye[i] + eye[j], xx + eye[i] - eye[j], xx - eye[i] + eye[j], xx - eye[i] - eye[j]]
            )
            v = u(stencil)
            hess[i, j] = hess[j, i] = (v[0] - v[1] - v[2] + v[3]) / (4.0 * h**2)
    return hess


def from_radial(
    profile: RadialProfile,
    n: int,
    sup_bound: float | None = None,
    c11_seminorm: float | None = None,
    name: str | None = None,
) -> ScalarField:
    """Radial field u(x) = phi(|x|) with metadata derived from the profile."""
    sup = profile.sup_beyond(0.0) if sup_bound is None else sup_bound
    c11 = profile.c11_estimate() if c11_seminorm is None else c11_seminorm

    def func(x: FloatArray) -> FloatArray:
        return profile.phi(np.linalg.norm(x, axis=-1))

    return ScalarField(
        n=n,
        func=func,
        sup_bound=sup,
        support_radius=profile.support,
        c11_seminorm=c11,
        radial=profile,
        hessian_fn=_profile_hessian(profile, n),
        kink_radii=tuple(float(b) for b in profile.breakpoints),
        tail_sup=profile.sup_beyond,
        name=name or profile.name,
    )


def constant(n: int, c: float) -> ScalarField:
    profile = RadialProfile([], [(lambda r: np.full_like(r, c), _zeros, _zeros)], name=f"const({c:g})")
    return ScalarField(
        n=n,
        func=lambda x: np.full(x.shape[:-1], float(c)),
        sup_bound=abs(c),
        c11_seminorm=0.0,
        radial=profile,
        hessian_fn=lambda x: np.zeros((n, n)),
        offset=float(c),
        remainder_bound=0.0,
        support_radius=0.0,
        name=f"const({c:g})",
    )


def affine(n: int, slope: npt.ArrayLike, offset: float = 0.0, remainder: ScalarField | None = None) -> ScalarField:
    """l(x) = slope . x + offset, optionally plus a bounded remainder field."""
    b = np.asarray(slope, dtype=float).reshape(n)
    if remainder is not None and remainder.n != n:
        raise DomainError("remainder dimension does not match")

    def func(x: FloatArray) -> FloatArray:
        base = x @ b + offset
        return base if remainder is None else base + remainder(x)

    def hess(x: FloatArray) -> FloatArray:
        if remainder is None:
            return np.zeros((n, n))
        h = remainder.hessian(x)
        if h is None:
            raise DomainError("remainder has no Hessian")
        return h

    bounded = not np.any(b)
    rem_sup = 0.0 if remainder is None else remainder.sup_bound
    return ScalarField(
        n=n,
        func=func,
        sup_bound=abs(offset) + rem_sup if bounded else math.inf,
        support_radius=0.0 if remainder is None else remainder.support_radius,
        c11_seminorm=0.0 if remainder is None else remainder.c11_seminorm,
        hessian_fn=hess if remainder is None or remainder.hessian_fn is not None else None,
        kink_radii=() if remainder is None else remainder.kink_radii,
        slope=b,
        offset=float(offset),
        remainder_bound=rem_sup,
        tail_sup=None if remainder is None else remainder.sup_outside,
        name="affine" if remainder is None else f"affine+{remainder.name}",
    )


def quadratic(n: int) -> ScalarField:
    """|x|^2, with delta = 2 |y|^2."""
    profile = RadialProfile([], [(lambda r: r * r, lambda r: 2.0 * r, lambda r: np.full_like(r, 2.0))], name="|x|^2")
    return ScalarField(
        n=n,
        func=lambda x: np.sum(x * x, axis=-1),
        c11_seminorm=2.0,
        radial=profile,
        hessian_fn=lambda x: 2.0 * np.eye(n),
        name="|x|^2",
    )


def bump_profile() -> RadialProfile:
    """(1 - r^2)_+^2."""
    inside: Piece = (
        lambda r: (1.0 - r * r) ** 2,
        lambda r: -4.0 * r * (1.0 - r * r),
        lambda r: -4.0 + 12.0 * r * r,
    )
    return RadialProfile([1.0], [inside, ZERO_PIECE], support=1.0, name="bump")


def bump(n: int) -> ScalarField:
    """(1 - |x|^2)_+^2 on B_1: sup 1, C^{1,1} seminorm 8."""
    return from_radial(bump_profile(), n, sup_bound=1.0, c11_seminorm=8.0, name="bump")


def neg_bump(n: int) -> ScalarField:
    return scaled(bump(n), -1.0)


def cone(n: int) -> ScalarField:
    """-|x|: Lipschitz and concave, no C^{1,1} bound."""
    profile = RadialProfile([], [(lambda r: -r, lambda r: np.full_like(r, -1.0), _zeros)], name="-|x|")
    return ScalarField(
        n=n,
        func=lambda x: -np.linalg.norm(x, axis=-1),
        radial=profile,
        name="-|x|",
    )


def plateau(n: int, width: float = 0.1) -> ScalarField:
    """Smooth indicator approximant of B_1: 1 on B_{1-width}, smoothstep down to 0 at r = 1."""
    if not 0.0 < width < 0.5:
        raise DomainError(f"plateau width must lie in (0, 0.5), got {width}")
    r0 = 1.0 - width

    def s(r: FloatArray) -> FloatArray:
        return (r - r0) / width

    ramp: Piece = (
        lambda r: 1.0 - 3.0 * s(r) ** 2 + 2.0 * s(r) ** 3,
        lambda r: (-6.0 * s(r) + 6.0 * s(r) ** 2) / width,
        lambda r: (-6.0 + 12.0 * s(r)) / width**2,
    )
    flat: Piece = (lambda r: np.ones_like(r), _zeros, _zeros)
    profile = RadialProfile([r0, 1.0], [flat, ramp, ZERO_PIECE], support=1.0, name=f"plateau({width:g})")
    return from_radial(profile, n, sup_bound=1.0, c11_seminorm=6.0 / width**2)


def scaled(u: ScalarField, factor: float) -> ScalarField:
    """factor * u."""
    hess = u.hessian_fn
    tail = u.tail_sup
    return ScalarField(
        n=u.n,
        func=lambda x: factor * u.func(x),
        sup_bound=abs(factor) * u.sup_bound,
        support_radius=u.support_radius,
        c11_seminorm=None if u.c11_seminorm is None else abs(factor) * u.c11_seminorm,
        radial=None if u.radial is None else u.radial.scaled(factor),
        hessian_fn=None if hess is None else (lambda x: factor * hess(x)),
        kink_radii=u.kink_radii,
        slope=None if u.slope is None else factor * u.slope,
        offset=factor * u.offset,
        remainder_bound=None if u.remainder_bound is None else abs(factor) * u.remainder_bound,
        tail_sup=None if tail is None else (lambda rho: abs(factor) * tail(rho)),
        name=f"{factor:g}*{u.name}",
    )


def rescale(u: ScalarField, s: float) -> ScalarField:
    """u_s(x) = u(s x)."""
    if s <= 0.0:
        raise DomainError(f"scale must be positive, got {s}")
    hess = u.hessian_fn
    return ScalarField(
        n=u.n,
        func=lambda x: u.func(s * x),
        sup_bound=u.sup_bound,
        support_radius=u.support_radius / s,
        c11_seminorm=None if u.c11_seminorm is None else s * s * u.c11_seminorm,
        radial=None if u.radial is None else u.radial.rescaled(s),
        hessian_fn=None if hess is None else (lambda x: s * s * hess(s * x)),
        kink_radii=tuple(k / s for k in u.kink_radii),
        slope=None if u.slope is None else s * u.slope,
        offset=u.offset,
        remainder_bound=u.remainder_bound,
        tail_sup=lambda rho: u.sup_outside(rho * s),
        name=f"{u.name}(s={s:g}x)",
    )


# ---------------------------------------------------------------------------
# Tabulated fields
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class GridField(ScalarField):
    """Field backed by a cubic B-spline on a uniform tensor grid."""

    origin: FloatArray | None = None
    step: float = 0.0
    values: FloatArray | None = None


def _grid_points(n: int, half_width: float, step: float) -> tuple[FloatArray, FloatArray]:
    m = math.ceil(half_width / step)
    axis = np.arange(-m, m + 1) * step
    mesh = np.meshgrid(*([axis] * n), indexing="ij")
    return axis, np.stack(mesh, axis=-1)


def _eval_chunked(u: ScalarField, pts: FloatArray, chunk: int = 1 << 14) -> FloatArray:
    flat = pts.reshape(-1, u.n)
    out = np.empty(flat.shape[0])
    for start in range(0, flat.shape[0], chunk):
        out[start : start + chunk] = u(flat[start : start + chunk])
    return out.reshape(pts.shape[:-1])


def _grid_field(
    template: ScalarField,
    axis: FloatArray,
    values: FloatArray,
    support_radius: float,
    outside: ScalarField | None,
    name: str,
) -> GridField:
    n = template.n
    step = float(axis[1] - axis[0])
    origin = np.full(n, axis[0])
    coeffs = ndimage.spline_filter(values, order=3, mode="nearest")
    size = values.shape[0]
    box = float(axis[-1])
    # support inside the box: outside points are exact zeros
    fallback = None if support_radius <= box else outside

    def func(x: FloatArray) -> FloatArray:
        pts = np.asarray(x, dtype=float)
        flat = pts.reshape(-1, n)
        coords = ((flat - origin) / step).T
        inside = np.all((coords >= 0.0) & (coords <= size - 1), axis=0)
        out = np.zeros(flat.shape[0])
        if np.any(inside):
            out[inside] = ndimage.map_coordinates(coeffs, coords[:, inside], order=3, mode="nearest", prefilter=False)
        if fallback is not None and not np.all(inside):
            out[~inside] = fallback(flat[~inside])
        return out.reshape(pts.shape[:-1])

    field_ref: list[GridField] = []

    def hess(x: FloatArray) -> FloatArray:
        return fd_hessian(field_ref[0], x, 0.05 * step)

    gf = GridField(
        n=n,
        func=func,
        sup_bound=template.sup_bound,
        support_radius=support_radius,
        c11_seminorm=template.c11_seminorm,
        hessian_fn=hess,
        tail_sup=None if fallback is not None else (lambda rho: 0.0 if rho >= support_radius else template.sup_bound),
        name=name,
        origin=origin,
        step=step,
        values=values,
    )
    field_ref.append(gf)
    return gf


def tabulate(u: ScalarField, half_width: float, step: float) -> GridField:
    """Sample u on the grid [-half_width, half_width]^n and interpolate with cubic B-splines.

    Points outside the box evaluate to 0 when the support of u fits inside the
    box and fall back to u itself otherwise.
    """
    if step <= 0.0 or half_width <= step:
        raise DomainError(f"bad tabulation grid: half_width={half_width}, step={step}")
    if u.slope is not None and np.any(u.slope):
        raise DomainError("tabulation needs a bounded field without affine part")
    axis, pts = _grid_points(u.n, half_width, step)
    with LogTimer("FIELD", f"tabulate {u.name} on {pts.shape[:-1]} grid"):
        values = _eval_chunked(u, pts)
    debug_info("FIELD", f"tabulated {u.name}: {values.size} nodes, step={step:g}")
    return _grid_field(u, axis, values, u.support_radius, u, f"grid[{u.name}]")


# ---------------------------------------------------------------------------
# Mollification
# ---------------------------------------------------------------------------


def mollifier_weight(r: npt.ArrayLike) -> FloatArray:
    """Unnormalized standard bump exp(-1/(1 - r^2)) on [0, 1)."""
    rr = np.asarray(r, dtype=float)
    out = np.zeros(rr.shape)
    inside = rr < 1.0
    out[inside] = np.exp(-1.0 / (1.0 - rr[inside] ** 2))
    return out


@lru_cache(maxsize=8)
def mollifier_mass(n: int) -> float:
    """Integral of exp(-1/(1 - |x|^2)) over B_1 in R^n."""
    radial, _ = integrate.quad(lambda r: math.exp(-1.0 / (1.0 - r * r)) * r ** (n - 1), 0.0, 1.0)
    return sphere_area(n) * radial


def mollifier_density(x: npt.ArrayLike, epsilon: float) -> FloatArray:
    """Unit-mass mollifier epsilon^-n rho(x / epsilon) at points of shape (..., n)."""
    pts = np.asarray(x, dtype=float)
    n = pts.shape[-1]
    return mollifier_weight(np.linalg.norm(pts, axis=-1) / epsilon) / (mollifier_mass(n) * epsilon**n)


@lru_cache(maxsize=8)
def _mollifier_nodes(n: int) -> tuple[FloatArray, FloatArray]:
    r, wr = gauss_nodes(np.linspace(0.0, 1.0, 5), 6)
    dirs, wd = sphere_rule(n, 32 if n == 2 else 128)
    pts = (r[:, None, None] * dirs[None, :, :]).reshape(-1, n)
    w = (mollifier_weight(r) * r ** (n - 1) * wr)[:, None] * wd[None, :]
    w = w.ravel()
    # weights sum to exactly one so constants are reproduced
    return pts, w / w.sum()


def mollify(u: ScalarField, epsilon: float) -> ScalarField:
    """Convolution with the unit-mass mollifier epsilon^-n rho(x / epsilon).

    Tabulated fields are convolved exactly on their grid with the sampled,
    normalized mollifier; other fields use a fixed polar Gauss rule.
    """
    if epsilon <= 0.0:
        raise DomainError(f"epsilon must be positive, got {epsilon}")
    if isinstance(u, GridField) and u.values is not None and u.origin is not None:
        return _mollify_grid(u, epsilon)
    pts, w = _mollifier_nodes(u.n)
    shift = epsilon * pts

    def func(x: FloatArray) -> FloatArray:
        xx = np.asarray(x, dtype=float)
        flat = xx.reshape(-1, u.n)
        out = np.empty(flat.shape[0])
        chunk = max(1, _EVAL_CHUNK // shift.shape[0])
        for start in range(0, flat.shape[0], chunk):
            block = flat[start : start + chunk]
            out[start : start + chunk] = u(block[:, None, :] - shift[None, :, :]) @ w
        return out.reshape(xx.shape[:-1])

    field_ref: list[ScalarField] = []

    def hess(x: FloatArray) -> FloatArray:
        return fd_hessian(field_ref[0], x, 0.01 * epsilon)

    result = ScalarField(
        n=u.n,
        func=func,
        sup_bound=u.sup_bound,
        support_radius=u.support_radius + epsilon,
        c11_seminorm=u.c11_seminorm,
        hessian_fn=hess,
        name=f"moll[{u.name},{epsilon:g}]",
    )
    field_ref.append(result)
    return result


def _mollify_grid(u: GridField, epsilon: float) -> GridField:
    assert u.values is not None and u.origin is not None
    n, step = u.n, u.step
    m = math.ceil(epsilon / step)
    offs = np.arange(-m, m + 1) * step
    mesh = np.stack(np.meshgrid(*([offs] * n), indexing="ij"), axis=-1)
    kernel = mollifier_weight(np.linalg.norm(mesh, axis=-1) / epsilon)
    if kernel.sum() == 0.0:
        kernel[(m,) * n] = 1.0
    kernel /= kernel.sum()
    box = float(u.origin[0] + step * (u.values.shape[0] - 1))
    mode = "constant" if u.support_radius + epsilon <= box else "nearest"
    values = ndimage.convolve(u.values, kernel, mode=mode, cval=0.0)
    axis = u.origin[0] + step * np.arange(u.values.shape[0])
    debug_log("FIELD", f"mollified {u.name} at eps={epsilon:g} with {kernel.size}-point stencil")
    return _grid_field(u, axis, values, u.support_radius + epsilon, None, f"moll[{u.name},{epsilon:g}]")


# ---------------------------------------------------------------------------
# Inf-convolution
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class InfConvParams:
    """Inf-convolution and mollification parameters.

    Attributes:
        h: Inf-convolution parameter.
        epsilon: Mollification radius for the standard modification.
        search_radius: Radius of the argmin search ball; defaults to
            2 sqrt(h ||u||) + 3 grid_step.
        grid_step: Lattice step of the search.
        polish: Refine the lattice minimum with a separable parabola fit.
    """

    h: float
    epsilon: float = 0.05
    search_radius: float | None = None
    grid_step: float = 0.02
    polish: bool = True

    def __post_init__(self) -> None:
        if self.h <= 0.0 or self.epsilon <= 0.0 or self.grid_step <= 0.0:
            raise DomainError("h, epsilon and grid_step must be positive")
        if self.search_radius is not None and self.search_radius <= self.grid_step:
            raise DomainError("search_radius must exceed grid_step")

    def radius_for(self, sup_bound: float) -> float:
        """Search radius for a field with the given sup norm."""
        if self.search_radius is None:
            if not math.isfinite(sup_bound):
                raise DomainError("an unbounded field needs an explicit search_radius")
            return 2.0 * math.sqrt(self.h * sup_bound) + 3.0 * self.grid_step
        minimum = 2.0 * math.sqrt(self.h * sup_bound) + self.grid_step
        if math.isfinite(sup_bound) and self.search_radius < minimum:
            raise DomainError(f"search_radius {self.search_radius} is below 2 sqrt(h ||u||) + grid_step = {minimum}")
        return self.search_radius

    def displacement_slack(self, n: int, sup_bound: float) -> float:
        """Extra room over 4 h ||u|| allowed for |argmin - x|^2 after polishing."""
        reach = 2.0 * math.sqrt(self.h * sup_bound) if math.isfinite(sup_bound) else 0.0
        half = 0.5 * math.sqrt(n) * self.grid_step if self.polish else 0.0
        return 2.0 * reach * half + half * half


class InfConvolution:
    """u_h(x) = min_y u(y) + |x - y|^2 / (2h) over the lattice x + grid_step Z^n in the search ball."""

    def __init__(self, u: ScalarField, params: InfConvParams) -> None:
        self.u = u
        self.params = params
        self.radius = params.radius_for(u.sup_bound)
        step = params.grid_step
        m = math.ceil(self.radius / step)
        axis = np.arange(-m, m + 1) * step
        mesh = np.stack(np.meshgrid(*([axis] * u.n), indexing="ij"), axis=-1).reshape(-1, u.n)
        keep = np.linalg.norm(mesh, axis=1) <= self.radius + 1e-12
        self.offsets = mesh[keep]
        self.penalty = np.sum(self.offsets**2, axis=1) / (2.0 * params.h)
        debug_log("INFCONV", f"{u.name}: h={params.h:g} radius={self.radius:.4f} offsets={self.offsets.shape[0]}")

    def _objective(self, x: FloatArray, z: FloatArray) -> FloatArray:
        return self.u(x + z) + np.sum(z * z, axis=-1) / (2.0 * self.params.h)

    def evaluate(self, x: npt.ArrayLike) -> tuple[FloatArray, FloatArray]:
        """Return (u_h(x), argmin(x)) for points of shape (..., n)."""
        pts = np.asarray(x, dtype=float)
        n = self.u.n
        flat = pts.reshape(-1, n)
        values = np.empty(flat.shape[0])
        argmins = np.empty_like(flat)
        step = self.params.grid_step
        k_off = self.offsets.shape[0]
        chunk = max(1, _EVAL_CHUNK // k_off)
        for start in range(0, flat.shape[0], chunk):
            block = flat[start : start + chunk]
            objective = self.u(block[:, None, :] + self.offsets[None, :, :]) + self.penalty[None, :]
            best = np.argmin(objective, axis=1)
            z = self.offsets[best]
            g0 = objective[np.arange(block.shape[0]), best]
            if np.any(np.linalg.norm(z, axis=1) > self.radius - step):
                raise ResolutionError(
                    f"inf-convolution argmin reached the search boundary (radius {self.radius:.4f}); "
                    "increase search_radius"
                )
            value = g0.copy()
            if self.params.polish:
                shift = np.zeros_like(z)
                for i in range(n):
                    e = np.zeros(n)
                    e[i] = step
                    gp = self._objective(block, z + e)
                    gm = self._objective(block, z - e)
                    curv = gp - 2.0 * g0 + gm
                    ok = curv > 0.0
                    value[ok] -= (gp[ok] - gm[ok]) ** 2 / (8.0 * curv[ok])
                    shift[ok, i] = step * (gm[ok] - gp[ok]) / (2.0 * curv[ok])
                z = z + shift
            values[start : start + chunk] = value
            argmins[start : start + chunk] = block + z
        return values.reshape(pts.shape[:-1]), argmins.reshape(pts.shape)

    def argmin(self, x: npt.ArrayLike) -> FloatArray:
        return self.evaluate(x)[1]

    def field(self) -> ScalarField:
        u, h = self.u, self.params.h
        support = math.inf
        pure = u.slope is None or not np.any(u.slope)
        if pure and u.offset == 0.0 and math.isfinite(u.support_radius) and math.isfinite(u.sup_bound):
            support = u.support_radius + math.sqrt(2.0 * h * u.sup_bound)
        # semiconcave with constant 1/h; two-sided only when hC < 1
        c11: float | None = None
        if u.c11_seminorm is not None and h * u.c11_seminorm < 1.0:
            c11 = max(1.0 / h, u.c11_seminorm / (1.0 - h * u.c11_seminorm))
        return ScalarField(
            n=u.n,
            func=lambda x: self.evaluate(x)[0],
            sup_bound=u.sup_bound,
            support_radius=support,
            c11_seminorm=c11,
            name=f"infconv[{u.name},h={h:g}]",
        )


def inf_convolution(u: ScalarField, params: InfConvParams) -> tuple[ScalarField, Callable[[npt.ArrayLike], FloatArray]]:
    """Inf-convolution u_h and its argmin map.

    Raises:
        DomainError: If the search radius cannot cover the argmin ball.
        ResolutionError: On evaluation, if an argmin lands in the outer lattice layer.
    """
    conv = InfConvolution(u, params)
    return conv.field(), conv.argmin


@dataclass(frozen=True)
class SemiconcavityReport:
    samples: int
    max_violation: float
    tol: float

    @property
    def passed(self) -> bool:
        return self.max_violation <= self.tol


def semiconcavity_check(
    u_h: ScalarField,
    h: float,
    samples: int = 10_000,
    seed: int = 0,
    tol: float | None = None,
    box: float = 1.5,
    max_step: float = 0.25,
    grid_step: float = 0.02,
) -> SemiconcavityReport:
    """Sample delta(u_h, x, y) - |y|^2 / h over random x in [-box, box]^n and |y| <= max_step."""
    rng = np.random.default_rng(seed)
    n = u_h.n
    tol = 2.0 * grid_step**2 / h if tol is None else tol
    x = rng.uniform(-box, box, size=(samples, n))
    direction = rng.normal(size=(samples, n))
    direction /= np.linalg.norm(direction, axis=1, keepdims=True)
    y = direction * (max_step * rng.random(samples) ** (1.0 / n))[:, None]
    excess = delta_second_diff(u_h, x, y) - np.sum(y * y, axis=1) / h
    worst = float(max(0.0, np.max(excess)))
    debug_info("INFCONV", f"semiconcavity {u_h.name}: samples={samples} max_violation={worst:.3e} tol={tol:.3e}")
    return SemiconcavityReport(samples=samples, max_violation=worst, tol=tol)


def infconv_operator_bound(h: float, sup_bound: float, params: KernelParams) -> float:
    """Upper bound on M^+ u_{h,eps} from semiconcavity of u_h.

    delta(u_h, x, y) <= |y|^2 / h near the origin and <= 4 ||u|| beyond |y| = 1,
    so every eigenvalue of D^sigma u_{h,eps} is below
    (A(n,-sigma)/2) (|S|/n) (1/(h (2 - sigma)) + 4 ||u|| / sigma).
    """
    n, sigma = params.n, params.sigma
    half_const = 0.5 * norm_const_neg(n, sigma)
    per_eig = half_const * sphere_area(n) / n * (1.0 / (h * (2.0 - sigma)) + 4.0 * sup_bound / sigma)
    return n * params.Lam * per_eig
