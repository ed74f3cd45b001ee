"""Tests for the Pucci operators and the Riesz / ABP / inf-convolution checks."""

from __future__ import annotations

import math
import threading

import numpy as np
import pytest

from par_nonlocal_pucci.counterexample import CounterexampleParams, u_N_consistency
from par_nonlocal_pucci.errors import DomainError
from par_nonlocal_pucci.fields import InfConvParams, ScalarField, bump, cone, constant, neg_bump, scaled
from par_nonlocal_pucci.matrixcore import EllipticityClass, in_class, random_orthogonal
from par_nonlocal_pucci.nonlocal_ops import (
    abp_factor,
    abp_ratio,
    ball_points,
    hessian_consistency,
    infconv_suite,
    inversion_points,
    lp_norm_ball,
    parallel_map,
    pucci_minus,
    pucci_plus,
    riesz_inf_ratio,
    riesz_inversion,
    riesz_profile,
)
from par_nonlocal_pucci.quad import QuadratureSpec, radial_reduce_hessian
from par_nonlocal_pucci.special import KernelParams, compute_M0


@pytest.fixture
def params() -> KernelParams:
    return KernelParams(n=2, sigma=1.5, lam=1.0, Lam=4.0)


@pytest.fixture
def spec() -> QuadratureSpec:
    return QuadratureSpec(tol=1e-4)


def ones_without_profile(n: int) -> ScalarField:
    return ScalarField(n=n, func=lambda x: np.ones(x.shape[:-1]), sup_bound=1.0, name="ones")


class TestParallelMap:
    def test_preserves_order(self) -> None:
        assert parallel_map(lambda v: v * v, [3, 1, 2], workers=3) == [9, 1, 4]

    def test_single_worker_runs_inline(self) -> None:
        seen: set[int] = set()

        def record(_: int) -> None:
            seen.add(threading.get_ident())

        parallel_map(record, list(range(8)), workers=1)
        assert seen == {threading.get_ident()}


class TestPucci:
    def test_affine_fields_give_zero(self, params: KernelParams, spec: QuadratureSpec) -> None:
        res = pucci_minus(constant(2, 2.0), [0.1, 0.1], params, spec)
        assert res.value == pytest.approx(0.0, abs=1e-10)

    def test_minus_below_plus(self, params: KernelParams, spec: QuadratureSpec) -> None:
        x = [0.3, 0.2]
        lo = pucci_minus(bump(2), x, params, spec, radial=True)
        hi = pucci_plus(bump(2), x, params, spec, radial=True)
        assert lo.value <= hi.value + lo.err_bound + hi.err_bound

    def test_odd_symmetry(self, params: KernelParams, spec: QuadratureSpec) -> None:
        x = [0.4, 0.0]
        lo = pucci_minus(neg_bump(2), x, params, spec, radial=True)
        hi = pucci_plus(bump(2), x, params, spec, radial=True)
        assert lo.value == pytest.approx(-hi.value, abs=lo.err_bound + hi.err_bound)

    def test_error_scales_with_class(self, params: KernelParams, spec: QuadratureSpec) -> None:
        res = pucci_plus(bump(2), [0.0, 0.0], params, spec, radial=True)
        assert res.err_bound > 0.0

    @pytest.mark.timeout(60)
    def test_traces_sandwiched_by_extremes(self, params: KernelParams, spec: QuadratureSpec) -> None:
        x = [0.3, 0.2]
        d = radial_reduce_hessian(bump(2), x, params, spec).value
        lo = pucci_minus(bump(2), x, params, spec, radial=True).value
        hi = pucci_plus(bump(2), x, params, spec, radial=True).value
        rng = np.random.default_rng(5)
        diags = EllipticityClass(params).sample_diagonals(rng, 500)
        for a in diags:
            q = random_orthogonal(2, rng)
            mat = (q * a) @ q.T
            assert in_class(mat, params)
            trace = float(np.trace(mat @ d))
            assert lo - 1e-10 <= trace <= hi + 1e-10


class TestSampling:
    @pytest.mark.parametrize("n", [2, 3])
    def test_ball_points_in_shell(self, n: int) -> None:
        pts = ball_points(n, 2.0, 6, seed=3, inner=1.0)
        radii = np.linalg.norm(pts, axis=1)
        assert pts.shape == (64, n)
        assert np.all((radii >= 1.0 - 1e-12) & (radii <= 2.0 + 1e-12))

    def test_ball_points_dimension(self) -> None:
        with pytest.raises(DomainError):
            ball_points(4, 1.0, 4)

    def test_lp_norm_of_constant(self) -> None:
        assert lp_norm_ball(constant(2, 1.0), 3.0) == pytest.approx(math.pi ** (1.0 / 3.0))
        assert lp_norm_ball(ones_without_profile(2), 3.0) == pytest.approx(math.pi ** (1.0 / 3.0))

    def test_lp_norm_positive_part(self) -> None:
        assert lp_norm_ball(neg_bump(2), 2.0) == 0.0
        assert lp_norm_ball(neg_bump(2), 2.0, positive_part=False) > 0.0


class TestRieszProfile:
    def test_requires_radial_compact_field(self, params: KernelParams, spec: QuadratureSpec) -> None:
        with pytest.raises(DomainError):
            riesz_profile(ones_without_profile(2), params, spec)
        with pytest.raises(DomainError):
            riesz_profile(cone(2), params, spec)

    @pytest.mark.timeout(120)
    def test_profile_is_decreasing(self, params: KernelParams, spec: QuadratureSpec) -> None:
        radii = np.array([0.0, 0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 4.0, 8.0])
        prof = riesz_profile(bump(2), params, spec, radii=radii, workers=2)
        assert np.all(np.diff(prof.values) < 0.0)
        assert prof.potential.value([3.0, 0.0]) > prof.potential.value([6.0, 0.0]) > 0.0
        assert prof.err_bound <= spec.tol
        assert prof.interpolation_error(0.5) >= 0.0


class TestRieszChecks:
    @pytest.mark.slow
    @pytest.mark.timeout(900)
    def test_inversion_recovers_bump(self, params: KernelParams, spec: QuadratureSpec) -> None:
        report = riesz_inversion(bump(2), [[0.0, 0.0], [0.3, 0.2], [0.5, -0.4]], params, spec, workers=4)
        assert report.passed, report.to_dict()

    @pytest.mark.slow
    @pytest.mark.timeout(900)
    def test_hessian_consistency_at_origin(self, params: KernelParams, spec: QuadratureSpec) -> None:
        report = hessian_consistency(bump(2), [0.0, 0.0], params, spec)
        assert report.passed, report.to_dict()

    @pytest.mark.slow
    @pytest.mark.timeout(1800)
    def test_inversion_at_ten_interior_points(self, params: KernelParams, spec: QuadratureSpec) -> None:
        points = inversion_points(2)
        report = riesz_inversion(bump(2), points, params, spec, workers=4)
        assert len(report.points) == 10
        assert report.passed, report.to_dict()

    def test_inversion_points_spiral(self) -> None:
        pts = inversion_points(3)
        radii = np.linalg.norm(pts, axis=1)
        assert pts.shape == (10, 3)
        assert radii == pytest.approx(np.linspace(0.0, 0.7, 10))
        assert np.all(pts[:, 2] == 0.0)
        with pytest.raises(DomainError):
            inversion_points(1)

    def test_consistency_of_zero_field(self, params: KernelParams, spec: QuadratureSpec) -> None:
        report = hessian_consistency(constant(2, 0.0), [0.2, 0.1], params, spec)
        assert report.discrepancy == pytest.approx(0.0, abs=1e-10)
        assert report.passed

    @pytest.mark.timeout(60)
    def test_reference_gap_joins_budget(self, params: KernelParams, spec: QuadratureSpec) -> None:
        report = hessian_consistency(constant(2, 0.0), [0.2, 0.1], params, spec, radial=True, reference=bump(2))
        assert report.discrepancy == pytest.approx(0.0, abs=1e-10)
        assert report.interp_err > 0.0
        assert report.budget >= report.interp_err

    @pytest.mark.slow
    @pytest.mark.timeout(1800)
    def test_u_N_battery(self) -> None:
        ce = CounterexampleParams(n=2, sigma=1.6, N=16)
        reports = u_N_consistency(ce, QuadratureSpec(tol=1e-3), workers=4)
        assert len(reports) == 10
        assert all(rep.interp_err > 0.0 for rep in reports)
        assert all(rep.budget >= rep.interp_err for rep in reports)
        assert all(rep.passed for rep in reports), [rep.to_dict() for rep in reports]

    def test_inf_ratio_rejects_positive_field(self, params: KernelParams, spec: QuadratureSpec) -> None:
        with pytest.raises(DomainError):
            riesz_inf_ratio(bump(2), 1.0, params, spec)

    def test_inf_ratio_rejects_wide_support(self, params: KernelParams, spec: QuadratureSpec) -> None:
        with pytest.raises(DomainError):
            riesz_inf_ratio(neg_bump(2), 0.5, params, spec)

    @pytest.mark.slow
    @pytest.mark.timeout(900)
    def test_inf_ratio_for_negative_bump(self, params: KernelParams, spec: QuadratureSpec) -> None:
        report = riesz_inf_ratio(neg_bump(2), 1.0, params, spec, inside_m=4, outside_m=4, workers=4)
        assert report.m0 == pytest.approx(compute_M0(2, 1.5))
        assert report.inf_inside < report.inf_outside < 0.0
        assert report.passed

    @pytest.mark.slow
    @pytest.mark.timeout(1800)
    def test_inf_ratio_in_three_dimensions(self, spec: QuadratureSpec) -> None:
        params = KernelParams(n=3, sigma=1.0, lam=1.0, Lam=4.0)
        report = riesz_inf_ratio(neg_bump(3), 1.0, params, spec, inside_m=4, outside_m=4, workers=4)
        assert report.m0 == pytest.approx(compute_M0(3, 1.0))
        assert report.passed, report.to_dict()


class TestABP:
    def test_factor_closed_form(self, params: KernelParams) -> None:
        m0 = compute_M0(2, 1.5)
        assert abp_factor(params, 4.0) == pytest.approx(1.5 * m0**1.5)

    def test_factor_needs_large_p(self, params: KernelParams) -> None:
        with pytest.raises(DomainError):
            abp_factor(params, 1.0)

    def test_ratio_against_constant_source(self, params: KernelParams, spec: QuadratureSpec) -> None:
        report = abp_ratio(neg_bump(2), constant(2, 1.0), 4.0, params, spec, m=6)
        assert report.lhs == pytest.approx(1.0)
        assert report.f_norm == pytest.approx(math.pi**0.25)
        assert report.ratio == pytest.approx(1.0 / (report.factor * math.pi**0.25))
        assert report.outside_nonnegative
        assert report.samples == 65
        assert report.outside_samples == 16

    def test_zero_source(self, params: KernelParams, spec: QuadratureSpec) -> None:
        report = abp_ratio(neg_bump(2), scaled(constant(2, 1.0), 0.0), 4.0, params, spec, m=4)
        assert math.isinf(report.ratio)


class TestInfConvSuite:
    def test_needs_three_mollification_radii(self, params: KernelParams, spec: QuadratureSpec) -> None:
        with pytest.raises(DomainError):
            infconv_suite(neg_bump(2), InfConvParams(h=0.05), params, spec, eps_ladder=(0.1, 0.05))

    @pytest.mark.slow
    @pytest.mark.timeout(1800)
    def test_negative_bump(self, params: KernelParams) -> None:
        spec = QuadratureSpec(tol=1e-3)
        report = infconv_suite(
            neg_bump(2),
            InfConvParams(h=0.05),
            params,
            spec,
            points=[[0.0, 0.0], [0.3, 0.0]],
            samples=1000,
            table_step=0.02,
            workers=2,
        )
        assert report.checks["below_u"]
        assert report.checks["displacement"]
        assert report.checks["semiconcavity"]
        assert report.max_pucci_plus <= report.operator_bound
