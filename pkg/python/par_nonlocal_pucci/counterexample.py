"""The radial family u_N that defeats the ABP and W^{sigma,p0} estimates at p = p0.

With tau = (sigma+1)/(sigma+n) and p0 = n tau, P_N(x) = phi_N(|x|) is a
non-positive C^{1,1} radial profile built so that

    tau phi_N'' + (1 - tau) phi_N'/r = r^{-1/tau}   on (1/N, 1 - tau),

which makes M^-u_N at most lambda (n + sigma) r^{-1/tau} there. Then
||(M^-u_N)^+||_{L^p0} grows like log((1-tau)N)^{1/p0} while -u_N(0) grows like
log N, and the ABP quotient blows up. u_N itself is the dual Laplacian of P_N.

Everything radial is integrated in one dimension with the weight
|dB_1| r^{n-1}; only u_N needs the singular quadrature.
"""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import asdict, dataclass, field, replace
from typing import Any

import numpy as np
import numpy.typing as npt
from scipy import integrate, optimize

from .debug import LogTimer, debug_error, debug_info, log_report_row
from .errors import DomainError, QuadratureAccuracyError
from .fields import RadialProfile, ScalarField, from_radial, radial_hessian
from .matrixcore import EllipticityClass, a_sigma_map, pucci_extremal_trace
from .nonlocal_ops import ConsistencyReport, hessian_consistency, parallel_map
from .quad import QuadratureSpec, QuadResult, fractional_laplacian_dual, radial_reduce_laplacian
from .special import KernelParams, norm_const_neg, sphere_area

FloatArray = npt.NDArray[np.float64]

DEFAULT_LADDER = (16, 64, 256, 1024)
FIT_TOLERANCE = 0.15
UN_NODES_PER_SEGMENT = 16
UN_SAMPLED_EXTENT = 3.0

__all__ = [
    "CERow",
    "CEReport",
    "CounterexampleParams",
    "DEFAULT_LADDER",
    "UNProfile",
    "branch_identity_residual",
    "fit_exponents",
    "origin_bound_constant",
    "growth_fit",
    "mminus_uN",
    "mminus_field",
    "mminus_uN_array",
    "mminus_uN_norms",
    "p_field",
    "phi_dd_lower_bound",
    "phi_profile",
    "psi",
    "run_report",
    "sigma_frobenius_norm",
    "u_N_consistency",
    "u_N_consistency_radii",
    "u_N_depth",
    "u_N_eval",
    "u_N_profile",
    "u_N_radii",
    "u_N_zero_oracle",
]


@dataclass(frozen=True)
class CounterexampleParams:
    """Parameters of one member of the family.

    Attributes:
        n: Dimension, 2 or 3.
        sigma: Order, in (sqrt(n), 2).
        N: Inner scale, with N (1 - tau) > 1.
        lam: Lower ellipticity bound.
        Lam: Upper ellipticity bound, at least (1 + sigma) lam.
    """

    n: int = 2
    sigma: float = 1.6
    N: int = 16
    lam: float = 1.0
    Lam: float = 4.0

    def __post_init__(self) -> None:
        if self.n not in (2, 3):
            raise DomainError(f"the construction needs n in {{2, 3}}, got n={self.n}")
        if not math.sqrt(self.n) < self.sigma < 2.0:
            raise DomainError(
                f"sigma={self.sigma} is outside the construction's range (sqrt(n), 2) = ({math.sqrt(self.n):.6g}, 2)"
            )
        if int(self.N) != self.N or self.N < 2:
            raise DomainError(f"N must be an integer >= 2, got {self.N}")
        if self.lam <= 0.0 or self.Lam < (1.0 + self.sigma) * self.lam:
            raise DomainError(
                f"need Lambda >= (1 + sigma) lambda > 0, got lambda={self.lam}, Lambda={self.Lam}"
            )
        if self.N * (1.0 - self.tau) <= 1.0:
            raise DomainError(f"need N (1 - tau) > 1, got N={self.N}, tau={self.tau:.6g}")

    @property
    def tau(self) -> float:
        return (self.sigma + 1.0) / (self.sigma + self.n)

    @property
    def p0(self) -> float:
        return self.n * self.tau

    @property
    def log_scale(self) -> float:
        """log((1 - tau) N)."""
        return math.log((1.0 - self.tau) * self.N)

    @property
    def c0(self) -> float:
        return (1.0 - self.tau) ** ((1.0 - self.tau) / self.tau)

    @property
    def k(self) -> float:
        return (1.0 - self.tau) / self.tau

    def kernel_params(self) -> KernelParams:
        return KernelParams(n=self.n, sigma=self.sigma, lam=self.lam, Lam=self.Lam)

    def with_N(self, N: int) -> CounterexampleParams:
        return replace(self, N=N)


def phi_profile(params: CounterexampleParams) -> RadialProfile:
    """phi_N with its first two derivatives.

    Pieces: constant on [0, 1/N), the log branch on [1/N, 1 - tau), the
    parabola on [1 - tau, 1), zero beyond. The log branch's antiderivative is
    anchored so that phi_N is continuous at 1 - tau.
    """
    tau, N, k = params.tau, float(params.N), params.k
    L, c0 = params.log_scale, params.c0
    a = 1.0 - k
    inner_edge, outer_edge = 1.0 / N, 1.0 - tau

    def anti(r: FloatArray) -> FloatArray:
        ra = r**a
        return (ra * np.log(r * N) - tau * ra / (2.0 * tau - 1.0)) / (2.0 * tau - 1.0)

    anchor = -L / (2.0 * c0) - float(anti(np.array([outer_edge]))[0])

    def log_phi(r: FloatArray) -> FloatArray:
        return anti(r) + anchor

    def log_dphi(r: FloatArray) -> FloatArray:
        return r ** (-k) * np.log(r * N) / tau

    def log_ddphi(r: FloatArray) -> FloatArray:
        return r ** (-k - 1.0) * (1.0 - k * np.log(r * N)) / tau

    floor = float(log_phi(np.array([inner_edge]))[0])
    curv = L / (tau * tau * c0)
    pieces = [
        (lambda r: np.full_like(r, floor), np.zeros_like, np.zeros_like),
        (log_phi, log_dphi, log_ddphi),
        (
            lambda r: -0.5 * (1.0 - r) ** 2 * curv,
            lambda r: (1.0 - r) * curv,
            lambda r: np.full_like(r, -curv),
        ),
        (np.zeros_like, np.zeros_like, np.zeros_like),
    ]
    return RadialProfile(
        [inner_edge, outer_edge, 1.0],
        pieces,
        monotone=True,
        support=1.0,
        name=f"phi_N(N={params.N})",
    )


def p_field(params: CounterexampleParams) -> ScalarField:
    """P_N(x) = phi_N(|x|)."""
    profile = phi_profile(params)
    sup = abs(float(profile.phi(np.array([0.0]))[0]))
    return from_radial(profile, params.n, sup_bound=sup, name=f"P_N(N={params.N})")


def branch_identity_residual(params: CounterexampleParams, samples: int = 1000) -> float:
    """Max relative residual of tau phi'' + (1 - tau) phi'/r = r^{-1/tau} on (1/N, 1 - tau)."""
    profile = phi_profile(params)
    lo, hi = 1.0 / params.N, 1.0 - params.tau
    r = np.geomspace(lo, hi, samples + 2)[1:-1]
    lhs = params.tau * profile.ddphi(r) + (1.0 - params.tau) * profile.dphi(r) / r
    rhs = r ** (-1.0 / params.tau)
    return float(np.max(np.abs(lhs - rhs) / rhs))


def psi(r: npt.ArrayLike, tau: float) -> FloatArray:
    """min{(1-r)/(tau^2 c0), 1/(tau r^{(1-tau)/tau})} on (0, 1], zero elsewhere."""
    rr = np.asarray(r, dtype=float)
    out = np.zeros(rr.shape)
    inside = (rr > 0.0) & (rr <= 1.0)
    c0 = (1.0 - tau) ** ((1.0 - tau) / tau)
    ri = rr[inside]
    out[inside] = np.minimum((1.0 - ri) / (tau * tau * c0), 1.0 / (tau * ri ** ((1.0 - tau) / tau)))
    return out


def origin_bound_constant(params: CounterexampleParams) -> float:
    """c with -u_N(0) >= c log(N/4): (A(n,-(2-sigma))/2) int_{B_1 minus B_1/2} psi(|y|) |y|^{-n+sigma-1} dy."""
    s = 2.0 - params.sigma
    radial, _ = integrate.quad(lambda t: float(psi(t, params.tau)) * t ** (params.sigma - 2.0), 0.5, 1.0)
    return 0.5 * norm_const_neg(params.n, s) * sphere_area(params.n) * radial


def u_N_zero_oracle(params: CounterexampleParams) -> float:
    """u_N(0) = -(A(n,-s) |dB_1| / s) int_0^1 phi_N'(t) t^{-s} dt with s = 2 - sigma."""
    s = 2.0 - params.sigma
    profile = phi_profile(params)
    val, _ = integrate.quad(
        lambda t: float(profile.dphi(np.array([t]))[0]) * t ** (-s),
        1.0 / params.N,
        1.0,
        points=[1.0 - params.tau],
        limit=200,
    )
    return -norm_const_neg(params.n, s) * sphere_area(params.n) / s * val


def u_N_eval(
    x: npt.ArrayLike, params: CounterexampleParams, spec: QuadratureSpec, radial: bool = True
) -> QuadResult:
    """u_N(x) = A(n,-(2-sigma)) int (P_N(x) - P_N(x+y)) |y|^{-n-(2-sigma)} dy.

    The radial fast path is the default; ``radial=False`` runs the full
    sphere rule in its one-sided form.
    """
    p = p_field(params)
    kp = params.kernel_params()
    if radial:
        return radial_reduce_laplacian(p, x, kp, spec)
    return fractional_laplacian_dual(p, x, kp, spec, one_sided=True)


def _axis(n: int, r: float) -> FloatArray:
    x = np.zeros(n)
    x[0] = r
    return x


def _segment_nodes(a: float, b: float, m: int, log: bool) -> FloatArray:
    """Chebyshev-Lobatto nodes on [a, b] (uniform in log r when ``log``), endpoints exact."""
    s = 0.5 * (1.0 - np.cos(np.pi * np.arange(m + 1) / m))
    nodes = np.exp(math.log(a) + (math.log(b) - math.log(a)) * s) if log else a + (b - a) * s
    nodes[0], nodes[-1] = a, b
    return nodes


def _radii_segments(params: CounterexampleParams, m: int) -> list[FloatArray]:
    if m < 4 or m % 2:
        raise DomainError(f"nodes per segment must be even and >= 4, got {m}")
    inner_edge, outer_edge = 1.0 / params.N, 1.0 - params.tau
    return [
        _segment_nodes(0.0, inner_edge, m, log=False),
        _segment_nodes(inner_edge, outer_edge, m, log=True),
        _segment_nodes(outer_edge, 1.0, m, log=False),
        _segment_nodes(1.0, UN_SAMPLED_EXTENT, m, log=False),
    ]


def u_N_radii(params: CounterexampleParams, per_segment: int = UN_NODES_PER_SEGMENT) -> FloatArray:
    """Sample radii for u_N: Chebyshev-Lobatto nodes between 0, 1/N, 1 - tau, 1 and 3.

    The kinks of P_N are segment ends, where the nodes cluster.
    """
    return np.unique(np.concatenate(_radii_segments(params, per_segment)))


@dataclass(frozen=True, eq=False)
class UNProfile:
    """u_N as a cubic spline split at 1/N, 1 - tau and 1.

    ``coarse`` is the spline through every other node of each segment; the
    largest gap between the two on [0, 3] is ``interp_err``. ``values`` are
    direct quadrature samples at ``radii``.
    """

    params: CounterexampleParams
    profile: RadialProfile
    coarse: RadialProfile
    radii: FloatArray
    values: FloatArray
    quad_err: float
    interp_err: float

    @property
    def err_bound(self) -> float:
        return self.quad_err + self.interp_err

    def field(self, coarse: bool = False) -> ScalarField:
        prof = self.coarse if coarse else self.profile
        label = "u_N coarse" if coarse else "u_N"
        return from_radial(prof, self.params.n, name=f"{label}(N={self.params.N})")


def _spline(params: CounterexampleParams, radii: FloatArray, values: FloatArray, name: str) -> RadialProfile:
    return RadialProfile.from_samples(
        radii,
        values,
        breakpoints=(1.0 / params.N, 1.0 - params.tau, 1.0),
        decay_exponent=params.n + 2.0 - params.sigma,
        name=name,
    )


def u_N_profile(
    params: CounterexampleParams,
    spec: QuadratureSpec,
    workers: int = 1,
    per_segment: int = UN_NODES_PER_SEGMENT,
) -> UNProfile:
    """u_N sampled by the radial fast path and interpolated between the kinks of P_N."""
    segments = _radii_segments(params, per_segment)
    rr = np.unique(np.concatenate(segments))
    results = parallel_map(lambda r: u_N_eval(_axis(params.n, float(r)), params, spec), list(rr), workers)
    values = np.array([res.value for res in results])
    coarse_r = np.unique(np.concatenate([seg[::2] for seg in segments]))
    coarse_v = values[np.searchsorted(rr, coarse_r)]
    fine = _spline(params, rr, values, f"u_N(N={params.N})")
    coarse = _spline(params, coarse_r, coarse_v, f"u_N coarse(N={params.N})")
    dense = np.unique(
        np.concatenate(
            [np.linspace(seg[0], seg[-1], 400) for seg in segments[::2]]
            + [np.geomspace(seg[0], seg[-1], 400) for seg in segments[1::2]]
        )
    )
    interp_err = float(np.max(np.abs(fine.phi(dense) - coarse.phi(dense))))
    quad_err = max(res.err_bound for res in results)
    debug_info("COUNTEREXAMPLE", f"u_N spline N={params.N}: {rr.size} nodes, interp_err={interp_err:.3e}")
    return UNProfile(params, fine, coarse, rr, values, quad_err, interp_err)


def u_N_depth(params: CounterexampleParams, spec: QuadratureSpec, un: UNProfile) -> tuple[float, float, float]:
    """max |u_N|, refined by a bounded search around the deepest sample.

    Returns:
        (depth, radius of the minimum, err_bound of the evaluations used).
    """
    i = int(np.argmin(un.values))
    lo = float(un.radii[max(i - 1, 0)])
    hi = float(un.radii[min(i + 1, un.radii.size - 1)])
    errs = [un.quad_err]

    def value(r: float) -> float:
        res = u_N_eval(_axis(params.n, r), params, spec)
        errs.append(res.err_bound)
        return float(res.value)

    best_r, best = float(un.radii[i]), float(un.values[i])
    found = optimize.minimize_scalar(value, bounds=(lo, hi), method="bounded", options={"xatol": 1e-4 * hi})
    if float(found.fun) < best:
        best_r, best = float(found.x), float(found.fun)
    depth = max(-best, float(np.max(np.abs(un.values))))
    return depth, best_r, max(errs)


def u_N_consistency_radii(params: CounterexampleParams) -> FloatArray:
    """Ten radii off the kinks: six on the log branch, four on the parabola."""
    inner_edge, outer_edge = 1.0 / params.N, 1.0 - params.tau
    return np.concatenate(
        [np.geomspace(inner_edge, outer_edge, 8)[1:-1], np.linspace(outer_edge, 1.0, 6)[1:-1]]
    )


def u_N_consistency(
    params: CounterexampleParams,
    spec: QuadratureSpec,
    radii: npt.ArrayLike | None = None,
    un: UNProfile | None = None,
    workers: int = 1,
) -> list[ConsistencyReport]:
    """[D^2 P_N]_sigma (exact) against D^sigma u_N computed on the u_N spline.

    The coarse spline is the reference, so each budget carries the
    interpolation error next to the quadrature bounds.
    """
    prof = u_N_profile(params, spec, workers=workers) if un is None else un
    rr = u_N_consistency_radii(params) if radii is None else np.asarray(radii, dtype=float)
    kp = params.kernel_params()
    potential = p_field(params)
    fine, coarse = prof.field(), prof.field(coarse=True)
    return parallel_map(
        lambda r: hessian_consistency(
            fine, _axis(params.n, float(r)), kp, spec, potential=potential, radial=True, reference=coarse
        ),
        list(rr),
        workers,
    )


def mminus_uN(r: float, params: CounterexampleParams) -> float:
    """M^-u_N at radius r, exactly: inf over the class of Tr(A_sigma D^2 P_N).

    Raises:
        DomainError: At r <= 0.
    """
    if r <= 0.0:
        raise DomainError(f"M^-u_N is evaluated at r > 0, got r={r}")
    kp = params.kernel_params()
    d2p = radial_hessian(phi_profile(params), _axis(params.n, r))
    return pucci_extremal_trace(a_sigma_map(d2p, kp), kp, "-")[0]


def _sigma_eigenvalues(r: FloatArray, params: CounterexampleParams) -> tuple[FloatArray, FloatArray]:
    """Radial and tangential eigenvalues of [D^2 P_N]_sigma at radii r > 0."""
    profile = phi_profile(params)
    n, sigma = params.n, params.sigma
    dd = profile.ddphi(r)
    d_over_r = profile.dphi(r) / r
    trace = dd + (n - 1) * d_over_r
    return (sigma * dd + trace) / (n + sigma), (sigma * d_over_r + trace) / (n + sigma)


def mminus_uN_array(r: npt.ArrayLike, params: CounterexampleParams) -> FloatArray:
    """Vectorized ``mminus_uN`` through the polytope vertices."""
    rr = np.asarray(r, dtype=float)
    if np.any(rr <= 0.0):
        raise DomainError("M^-u_N is evaluated at r > 0")
    rad, tan = _sigma_eigenvalues(rr.ravel(), params)
    eig = np.column_stack([rad] + [tan] * (params.n - 1))
    verts = EllipticityClass(params.kernel_params()).vertices()
    return np.min(eig @ verts.T, axis=1).reshape(rr.shape)


def sigma_frobenius_norm(r: npt.ArrayLike, params: CounterexampleParams) -> FloatArray:
    """|[D^2 P_N]_sigma|_F at radii r > 0."""
    rad, tan = _sigma_eigenvalues(np.asarray(r, dtype=float), params)
    return np.sqrt(rad**2 + (params.n - 1) * tan**2)


def _radial_power_integral(
    func: Any, lo: float, hi: float, n: int, p: float, breaks: Sequence[float] = ()
) -> float:
    """int_lo^hi |func(r)|^p r^{n-1} dr, integrated in log r piece by piece."""
    cuts = sorted({lo, hi, *[b for b in breaks if lo < b < hi]})
    total = 0.0
    for a, b in zip(cuts[:-1], cuts[1:]):
        val, _ = integrate.quad(
            lambda w: float(np.abs(func(np.array([math.exp(w)]))[0]) ** p) * math.exp(n * w),
            math.log(a),
            math.log(b),
            limit=200,
        )
        total += val
    return total


@dataclass(frozen=True)
class MminusNorms:
    """Split of ||M^-u_N||_{L^p0(B_1)}^{p0} / |dB_1| into its positive and non-positive parts."""

    inner_integral: float
    outer_integral: float
    area: float
    p0: float

    @property
    def positive_norm(self) -> float:
        """||(M^-u_N)^+||_{L^p0(B_1)}."""
        return (self.area * self.inner_integral) ** (1.0 / self.p0)

    @property
    def full_norm(self) -> float:
        """||M^-u_N||_{L^p0(B_1)}."""
        return (self.area * (self.inner_integral + self.outer_integral)) ** (1.0 / self.p0)


def mminus_uN_norms(params: CounterexampleParams) -> MminusNorms:
    """M^-u_N vanishes on B_{1/N}, is positive on (1/N, 1-tau) and non-positive on (1-tau, 1)."""
    n, p0 = params.n, params.p0
    inner_edge, outer_edge = 1.0 / params.N, 1.0 - params.tau

    def fn(r: FloatArray) -> FloatArray:
        return mminus_uN_array(r, params)

    inner = _radial_power_integral(lambda r: np.maximum(fn(r), 0.0), inner_edge, outer_edge, n, p0)
    outer = _radial_power_integral(fn, outer_edge, 1.0, n, p0)
    return MminusNorms(inner, outer, sphere_area(n), p0)


def mminus_field(params: CounterexampleParams) -> ScalarField:
    """(M^-u_N)^+ on R^n, zero on B_{1/N} and outside B_1."""
    inner_edge = 1.0 / params.N

    def func(x: FloatArray) -> FloatArray:
        r = np.linalg.norm(x, axis=-1)
        live = (r > inner_edge) & (r < 1.0)
        out = np.zeros_like(r)
        if np.any(live):
            out[live] = np.maximum(mminus_uN_array(r[live], params), 0.0)
        return out

    return ScalarField(
        n=params.n,
        func=func,
        support_radius=1.0,
        kink_radii=(inner_edge, 1.0 - params.tau, 1.0),
        name=f"(M^-u_N)^+(N={params.N})",
    )


def mminus_bound(params: CounterexampleParams) -> float:
    """lambda (n + sigma) (|dB_1| log((1-tau) N))^{1/p0}."""
    return params.lam * (params.n + params.sigma) * (sphere_area(params.n) * params.log_scale) ** (1.0 / params.p0)


def sigma_hessian_norm(params: CounterexampleParams) -> float:
    """||[D^2 P_N]_sigma||_{L^p0(B_1/2)} (Frobenius), which equals ||D^sigma u_N||."""
    n, p0 = params.n, params.p0
    inner_edge = 1.0 / params.N
    val = _radial_power_integral(
        lambda r: sigma_frobenius_norm(r, params), inner_edge, 0.5, n, p0, breaks=[1.0 - params.tau]
    )
    return (sphere_area(n) * val) ** (1.0 / p0)


@dataclass(frozen=True)
class PhiDDBound:
    closed_form: float
    quadrature: float

    @property
    def holds(self) -> bool:
        return self.quadrature >= self.closed_form * (1.0 - 1e-9)


def phi_dd_lower_bound(params: CounterexampleParams) -> PhiDDBound:
    """Lower bound on int_{B_1/2} |phi_N''(|x|)|^{p0} dx.

    On the log branch |phi''|^{p0} r^{n-1} = (k log(rN) - 1)^{p0} / (tau^{p0} r)
    wherever k log(rN) >= 1, whose integral up to r = 1 - tau is
    |dB_1| (k L - 1)_+^{p0+1} / (tau^{p0-1} (p0+1) (1-tau)) with L = log((1-tau)N).
    The quadrature integrates |phi''|^{p0} over all of B_1/2.
    """
    n, p0, tau, k = params.n, params.p0, params.tau, params.k
    area = sphere_area(n)
    excess = max(k * params.log_scale - 1.0, 0.0)
    closed = area * excess ** (p0 + 1.0) / (tau ** (p0 - 1.0) * (p0 + 1.0) * (1.0 - tau))
    profile = phi_profile(params)
    quad = area * _radial_power_integral(profile.ddphi, 1.0 / params.N, 0.5, n, p0, breaks=[1.0 - tau])
    return PhiDDBound(closed, quad)


def growth_fit(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Least-squares slope of log y against log x."""
    lx = np.log(np.asarray(xs, dtype=float))
    ly = np.log(np.asarray(ys, dtype=float))
    if lx.size < 2:
        raise DomainError("growth_fit needs at least two points")
    slope, _ = np.polyfit(lx, ly, 1)
    return float(slope)


def fit_exponents(rows: Sequence[CERow]) -> tuple[float, float]:
    """Growth exponents of C and F in log N over the unflagged rows (nan below two rows)."""
    good = [row for row in rows if not row.flagged]
    if len(good) < 2:
        return math.nan, math.nan
    xs = [math.log(row.N) for row in good]
    return growth_fit(xs, [row.C for row in good]), growth_fit(xs, [row.F for row in good])


@dataclass
class CERow:
    """One N of the report: A = -u_N(0), B = ||(M^-u_N)^+||, C = A/B, D = ||u_N||_inf,
    E = ||D^sigma u_N||_{L^p0(B_1/2)}, F = E/(B' + D)."""

    N: int
    A: float = math.nan
    A_bound: float = math.nan
    A_err: float = math.nan
    A_oracle: float = math.nan
    B: float = math.nan
    B_bound: float = math.nan
    B_prime: float = math.nan
    C: float = math.nan
    D: float = math.nan
    D_radius: float = math.nan
    E: float = math.nan
    F: float = math.nan
    interp_err: float = math.nan
    branch_residual: float = math.nan
    continuity_gap: float = math.nan
    outside_min: float = math.nan
    inside_max: float = math.nan
    err_bound: float = math.nan
    flagged: bool = False
    message: str = ""

    CSV_COLUMNS = ("N", "A", "A_bound", "B", "B_bound", "C", "D", "E", "F")

    def csv_values(self) -> list[float]:
        return [getattr(self, col) for col in self.CSV_COLUMNS]


@dataclass
class CEReport:
    n: int
    sigma: float
    lam: float
    Lam: float
    tau: float
    p0: float
    rows: list[CERow] = field(default_factory=list)
    slope_C: float = math.nan
    slope_F: float = math.nan

    @property
    def target_C(self) -> float:
        return 1.0 - 1.0 / self.p0

    @property
    def target_F(self) -> float:
        return 1.0 / self.p0

    @property
    def accuracy_failures(self) -> list[int]:
        return [row.N for row in self.rows if row.flagged]

    def _within(self, slope: float, target: float) -> bool:
        return math.isfinite(slope) and abs(slope - target) <= FIT_TOLERANCE

    @property
    def checks(self) -> dict[str, bool]:
        rows = [row for row in self.rows if not row.flagged]
        cs = [row.C for row in rows]
        fs = [row.F for row in rows]
        return {
            "C_increasing": all(b > a for a, b in zip(cs, cs[1:])),
            "F_increasing": all(b > a for a, b in zip(fs, fs[1:])),
            "C_exponent": self._within(self.slope_C, self.target_C),
            "F_exponent": self._within(self.slope_F, self.target_F),
            "A_lower_bound": all(row.A + row.A_err >= row.A_bound for row in rows),
            "B_upper_bound": all(row.B <= row.B_bound * (1.0 + 1e-6) for row in rows),
            "branch_identity": all(row.branch_residual <= 1e-10 for row in rows),
            "continuity": all(row.continuity_gap <= 1e-10 for row in rows),
            "outside_nonnegative": all(row.outside_min >= -row.err_bound for row in rows),
            "inside_nonpositive": all(row.inside_max <= row.err_bound for row in rows),
        }

    @property
    def fits(self) -> dict[str, dict[str, float | bool]]:
        """Exponents in log N against their targets, each within ``FIT_TOLERANCE``."""
        return {
            "C": {
                "slope": self.slope_C,
                "target": self.target_C,
                "within_tolerance": self._within(self.slope_C, self.target_C),
            },
            "F": {
                "slope": self.slope_F,
                "target": self.target_F,
                "within_tolerance": self._within(self.slope_F, self.target_F),
            },
        }

    @property
    def passed(self) -> bool:
        return not self.accuracy_failures and all(self.checks.values())

    def to_dict(self) -> dict[str, Any]:
        return {
            "n": self.n,
            "sigma": self.sigma,
            "lambda": self.lam,
            "Lambda": self.Lam,
            "tau": self.tau,
            "p0": self.p0,
            "rows": [{k: v for k, v in asdict(row).items()} for row in self.rows],
            "fits": self.fits,
            "checks": self.checks,
            "accuracy_failures": self.accuracy_failures,
            "passed": self.passed,
        }


def _row(params: CounterexampleParams, spec: QuadratureSpec) -> CERow:
    row = CERow(N=params.N)
    profile = phi_profile(params)
    gap_phi, gap_dphi = profile.continuity_gaps()
    row.continuity_gap = max(gap_phi, gap_dphi)
    row.branch_residual = branch_identity_residual(params)
    norms = mminus_uN_norms(params)
    row.B = norms.positive_norm
    row.B_prime = norms.full_norm
    row.B_bound = mminus_bound(params)
    row.E = sigma_hessian_norm(params)
    row.A_bound = origin_bound_constant(params) * math.log(params.N / 4.0)
    row.A_oracle = -u_N_zero_oracle(params)
    try:
        with LogTimer("COUNTEREXAMPLE", f"u_N samples N={params.N}"):
            un = u_N_profile(params, spec)
            row.D, row.D_radius, depth_err = u_N_depth(params, spec, un)
    except QuadratureAccuracyError as exc:
        debug_error("COUNTEREXAMPLE", f"N={params.N}: {exc}")
        row.flagged = True
        row.message = str(exc)
        return row
    radii, values = un.radii, un.values
    row.A = -float(values[0])
    row.A_err = un.quad_err
    row.err_bound = max(un.quad_err, depth_err)
    row.interp_err = un.interp_err
    # P_N is minimal on B_{1/N}, so every increment there is non-positive
    row.inside_max = float(np.max(values[radii <= 1.0 / params.N]))
    row.outside_min = float(np.min(values[radii > 1.0]))
    row.C = row.A / row.B
    row.F = row.E / (row.B_prime + row.D)
    log_report_row("counterexample", asdict(row))
    return row


def run_report(
    params_list: Sequence[CounterexampleParams], spec: QuadratureSpec, workers: int = 1
) -> CEReport:
    """Rows for an increasing N ladder sharing (n, sigma, lambda, Lambda), plus growth fits.

    Rows are computed independently (threaded with ``workers``) and reported
    in N order. A row whose quadrature misses ``spec.tol`` is flagged and
    excluded from the fits. The exponents of C and F in log N are hard checks
    with tolerance ``FIT_TOLERANCE``.
    """
    if not params_list:
        raise DomainError("run_report needs at least one parameter set")
    first = params_list[0]
    for p in params_list[1:]:
        if (p.n, p.sigma, p.lam, p.Lam) != (first.n, first.sigma, first.lam, first.Lam):
            raise DomainError("all rows must share n, sigma, lambda and Lambda")
    ordered = sorted(params_list, key=lambda p: p.N)
    if len({p.N for p in ordered}) != len(ordered):
        raise DomainError("N values must be distinct")
    rows = parallel_map(lambda p: _row(p, spec), ordered, workers)
    report = CEReport(
        n=first.n, sigma=first.sigma, lam=first.lam, Lam=first.Lam, tau=first.tau, p0=first.p0, rows=rows
    )
    report.slope_C, report.slope_F = fit_exponents(rows)
    debug_info(
        "COUNTEREXAMPLE",
        f"n={first.n} sigma={first.sigma}: slope_C={report.slope_C:.4f} slope_F={report.slope_F:.4f}",
    )
    return report
