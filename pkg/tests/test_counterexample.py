"""Tests for the u_N family and the ABP counterexample report."""

from __future__ import annotations

import math

import numpy as np
import pytest

from par_nonlocal_pucci.counterexample import (
    CEReport,
    CERow,
    CounterexampleParams,
    branch_identity_residual,
    fit_exponents,
    growth_fit,
    mminus_bound,
    mminus_field,
    mminus_uN,
    mminus_uN_array,
    mminus_uN_norms,
    origin_bound_constant,
    p_field,
    phi_dd_lower_bound,
    phi_profile,
    psi,
    run_report,
    sigma_frobenius_norm,
    u_N_consistency_radii,
    u_N_depth,
    u_N_eval,
    u_N_profile,
    u_N_radii,
    u_N_zero_oracle,
)
from par_nonlocal_pucci.errors import DomainError
from par_nonlocal_pucci.nonlocal_ops import abp_ratio
from par_nonlocal_pucci.quad import QuadratureSpec


@pytest.fixture
def params() -> CounterexampleParams:
    return CounterexampleParams(n=2, sigma=1.6, N=16, lam=1.0, Lam=4.0)


def _synthetic_report(params: CounterexampleParams, c_exp: float, f_exp: float) -> CEReport:
    """A report whose rows satisfy every bound check, with C and F growing as powers of log N."""
    rows = [
        CERow(
            N=N,
            A=1.0,
            A_bound=0.5,
            A_err=0.0,
            B=1.0,
            B_bound=2.0,
            C=math.log(N) ** c_exp,
            F=math.log(N) ** f_exp,
            branch_residual=0.0,
            continuity_gap=0.0,
            outside_min=0.0,
            inside_max=0.0,
            err_bound=0.0,
        )
        for N in (16, 64, 256, 1024)
    ]
    report = CEReport(
        n=params.n, sigma=params.sigma, lam=params.lam, Lam=params.Lam, tau=params.tau, p0=params.p0, rows=rows
    )
    report.slope_C, report.slope_F = fit_exponents(rows)
    return report


class TestParams:
    def test_derived_exponents(self, params: CounterexampleParams) -> None:
        assert params.tau == pytest.approx(2.6 / 3.6)
        assert params.p0 == pytest.approx(2.0 * 2.6 / 3.6)
        assert params.p0 > params.n / params.sigma
        assert params.log_scale == pytest.approx(math.log(16.0 * (1.0 - 2.6 / 3.6)))
        assert params.with_N(64).N == 64

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"n": 4},
            {"sigma": 1.3},
            {"sigma": 2.0},
            {"N": 16.5},
            {"Lam": 2.0},
            {"N": 3},
        ],
    )
    def test_rejects_invalid(self, kwargs: dict[str, float]) -> None:
        with pytest.raises(DomainError):
            CounterexampleParams(**kwargs)  # type: ignore[arg-type]

    def test_three_dimensions(self) -> None:
        params = CounterexampleParams(n=3, sigma=1.9, N=64, Lam=3.0)
        assert params.kernel_params().n == 3


class TestProfile:
    def test_continuity(self, params: CounterexampleParams) -> None:
        gap_phi, gap_dphi = phi_profile(params).continuity_gaps()
        assert gap_phi <= 1e-10
        assert gap_dphi <= 1e-10

    @pytest.mark.parametrize("N", [16, 256, 4096])
    def test_branch_identity(self, N: int) -> None:
        assert branch_identity_residual(CounterexampleParams(N=N)) <= 1e-10

    def test_non_positive_and_non_decreasing(self, params: CounterexampleParams) -> None:
        profile = phi_profile(params)
        r = np.linspace(0.0, 1.5, 3001)
        values = profile.phi(r)
        assert np.all(values <= 0.0)
        assert np.all(np.diff(values) >= -1e-12)
        assert np.all(values[r >= 1.0] == 0.0)

    def test_field_sup_is_depth(self, params: CounterexampleParams) -> None:
        field = p_field(params)
        assert field.sup_bound == pytest.approx(-field.value([0.0, 0.0]))
        assert field.support_radius == 1.0

    def test_psi_vanishes_outside_unit_interval(self) -> None:
        values = psi(np.array([-0.5, 0.0, 0.5, 1.0, 1.5]), 0.7)
        assert values[0] == values[1] == values[3] == values[4] == 0.0
        assert values[2] > 0.0


class TestUN:
    def test_origin_matches_oracle(self, params: CounterexampleParams) -> None:
        spec = QuadratureSpec(tol=1e-4)
        oracle = u_N_zero_oracle(params)
        result = u_N_eval(np.zeros(2), params, spec)
        assert result.value == pytest.approx(oracle, abs=result.err_bound + 1e-6)
        assert oracle < 0.0

    @pytest.mark.timeout(60)
    def test_one_sided_sphere_rule_at_origin(self, params: CounterexampleParams) -> None:
        spec = QuadratureSpec(tol=1e-4)
        full = u_N_eval(np.zeros(2), params, spec, radial=False)
        assert full.value == pytest.approx(u_N_zero_oracle(params), abs=full.err_bound + 1e-6)

    @pytest.mark.parametrize("N", [16, 64, 256])
    def test_origin_lower_bound(self, N: int) -> None:
        params = CounterexampleParams(N=N)
        assert -u_N_zero_oracle(params) >= origin_bound_constant(params) * math.log(N / 4.0)

    def test_depth_grows_with_N(self) -> None:
        depths = [-u_N_zero_oracle(CounterexampleParams(N=N)) for N in (16, 64, 256)]
        assert depths[0] < depths[1] < depths[2]

    def test_radii_split_at_kinks(self, params: CounterexampleParams) -> None:
        rr = u_N_radii(params)
        assert rr.size == 4 * 16 + 1
        assert rr[0] == 0.0 and rr[-1] == 3.0
        for kink in (1.0 / params.N, 1.0 - params.tau, 1.0):
            assert kink in rr
        with pytest.raises(DomainError):
            u_N_radii(params, per_segment=5)

    def test_consistency_radii_avoid_kinks(self, params: CounterexampleParams) -> None:
        rr = u_N_consistency_radii(params)
        assert rr.size == 10
        assert np.all((rr > 1.0 / params.N) & (rr < 1.0))
        assert not np.any(np.isclose(rr, 1.0 - params.tau))

    @pytest.mark.slow
    @pytest.mark.timeout(900)
    def test_profile_and_depth(self, params: CounterexampleParams) -> None:
        spec = QuadratureSpec(tol=1e-3)
        un = u_N_profile(params, spec, workers=4)
        assert set(un.profile.breakpoints) >= {1.0 / params.N, 1.0 - params.tau, 1.0}
        assert un.profile.phi(un.radii) == pytest.approx(un.values, abs=1e-9)
        assert un.err_bound == pytest.approx(un.quad_err + un.interp_err)
        depth, radius, err = u_N_depth(params, spec, un)
        assert depth >= float(np.max(np.abs(un.values)))
        assert 0.0 <= radius <= 3.0
        assert err >= un.quad_err
        assert un.interp_err <= 0.05 * depth


class TestMminus:
    def test_scalar_and_vector_paths_agree(self, params: CounterexampleParams) -> None:
        r = np.array([0.1, 0.2, 0.5, 0.9])
        assert np.allclose(mminus_uN_array(r, params), [mminus_uN(float(v), params) for v in r])

    def test_bounded_by_isotropic_choice(self, params: CounterexampleParams) -> None:
        """lambda I is admissible and Tr([M]_sigma) = Tr(M)."""
        profile = phi_profile(params)
        r = np.geomspace(1.01 / params.N, 0.99, 50)
        trace = profile.ddphi(r) + (params.n - 1) * profile.dphi(r) / r
        assert np.all(mminus_uN_array(r, params) <= params.lam * trace + 1e-9 * np.abs(trace) + 1e-12)

    def test_vanishes_on_inner_ball(self, params: CounterexampleParams) -> None:
        assert mminus_uN(0.5 / params.N, params) == pytest.approx(0.0, abs=1e-12)

    def test_origin_raises(self, params: CounterexampleParams) -> None:
        with pytest.raises(DomainError):
            mminus_uN(0.0, params)

    @pytest.mark.parametrize("N", [16, 256])
    def test_norms(self, N: int) -> None:
        params = CounterexampleParams(N=N)
        norms = mminus_uN_norms(params)
        assert 0.0 < norms.positive_norm <= mminus_bound(params) * (1.0 + 1e-6)
        assert norms.full_norm >= norms.positive_norm

    def test_field_is_positive_part(self, params: CounterexampleParams) -> None:
        field = mminus_field(params)
        pts = np.array([[0.0, 0.0], [0.3, 0.0], [0.0, 0.95], [1.5, 0.0]])
        values = field(pts)
        assert values[0] == 0.0
        assert values[1] == pytest.approx(max(float(mminus_uN(0.3, params)), 0.0))
        assert values[3] == 0.0
        assert np.all(values >= 0.0)
        assert 1.0 - params.tau in field.kink_radii

    def test_frobenius_norm_positive(self, params: CounterexampleParams) -> None:
        r = np.array([0.2, 0.5])
        assert np.all(sigma_frobenius_norm(r, params) > 0.0)

    def test_second_derivative_lower_bound(self) -> None:
        for N in (16, 1024):
            assert phi_dd_lower_bound(CounterexampleParams(N=N)).holds


class TestReport:
    def test_growth_fit(self) -> None:
        xs = [1.0, 2.0, 4.0, 8.0]
        assert growth_fit(xs, [x**0.5 for x in xs]) == pytest.approx(0.5)
        with pytest.raises(DomainError):
            growth_fit([1.0], [1.0])

    def test_row_csv_layout(self) -> None:
        row = CERow(N=16, A=1.0)
        assert len(row.csv_values()) == len(CERow.CSV_COLUMNS) == 9
        assert row.csv_values()[:2] == [16, 1.0]

    def test_exponents_fit_against_log_N(self) -> None:
        rows = [CERow(N=N, C=math.log(N) ** 0.3, F=math.log(N) ** 0.7) for N in (16, 64, 256, 1024)]
        slope_c, slope_f = fit_exponents(rows)
        assert slope_c == pytest.approx(0.3)
        assert slope_f == pytest.approx(0.7)

    def test_exponents_skip_flagged_rows(self) -> None:
        rows = [CERow(N=16, C=1.0, F=1.0), CERow(N=64, flagged=True)]
        assert all(math.isnan(s) for s in fit_exponents(rows))

    def test_exponents_gate_the_verdict(self, params: CounterexampleParams) -> None:
        good = _synthetic_report(params, 1.0 - 1.0 / params.p0, 1.0 / params.p0)
        assert good.checks["C_exponent"] and good.checks["F_exponent"]
        assert good.passed
        off = _synthetic_report(params, 1.0 - 1.0 / params.p0, 1.0 / params.p0 + 0.3)
        assert off.checks["F_increasing"]
        assert not off.checks["F_exponent"]
        assert not off.fits["F"]["within_tolerance"]
        assert not off.passed

    def test_missing_fit_fails(self, params: CounterexampleParams) -> None:
        report = _synthetic_report(params, 0.3, 0.7)
        report.slope_C = math.nan
        assert not report.checks["C_exponent"]
        assert not report.passed

    def test_ladder_validation(self) -> None:
        spec = QuadratureSpec()
        with pytest.raises(DomainError):
            run_report([], spec)
        with pytest.raises(DomainError):
            run_report([CounterexampleParams(N=16), CounterexampleParams(N=16)], spec)
        with pytest.raises(DomainError):
            run_report([CounterexampleParams(N=16), CounterexampleParams(N=64, sigma=1.7)], spec)

    @pytest.mark.slow
    @pytest.mark.timeout(1800)
    def test_report_on_short_ladder(self) -> None:
        ladder = [CounterexampleParams(N=N) for N in (64, 16, 256)]
        report = run_report(ladder, QuadratureSpec(tol=1e-3), workers=3)
        assert [row.N for row in report.rows] == [16, 64, 256]
        assert not report.accuracy_failures
        bounds = {k: ok for k, ok in report.checks.items() if not k.endswith("_exponent")}
        assert all(bounds.values()), bounds
        assert (report.slope_C, report.slope_F) == fit_exponents(report.rows)
        assert report.checks["C_exponent"] == (abs(report.slope_C - report.target_C) <= 0.15)
        assert report.checks["F_exponent"] == (abs(report.slope_F - report.target_F) <= 0.15)
        assert report.passed == all(report.checks.values())
        assert report.slope_C > 0.0

    @pytest.mark.slow
    @pytest.mark.timeout(3600)
    def test_report_on_full_ladder(self) -> None:
        ladder = [CounterexampleParams(N=N) for N in (16, 64, 256, 1024)]
        report = run_report(ladder, QuadratureSpec(tol=1e-3), workers=4)
        assert not report.accuracy_failures
        assert report.checks["C_increasing"]
        fits = report.fits
        assert fits["C"]["target"] == pytest.approx(1.0 - 1.0 / ladder[0].p0)
        assert fits["F"]["target"] == pytest.approx(1.0 / ladder[0].p0)
        for name in ("C", "F"):
            slope = fits[name]["slope"]
            assert math.isfinite(slope)
            assert fits[name]["within_tolerance"] == (abs(slope - fits[name]["target"]) <= 0.15)
            assert report.checks[f"{name}_exponent"] == fits[name]["within_tolerance"]
        assert report.passed == all(report.checks.values())


class TestABPTrend:
    @pytest.mark.slow
    @pytest.mark.timeout(3600)
    def test_ratio_grows_at_p0_and_levels_off_above(self) -> None:
        spec = QuadratureSpec(tol=1e-3)
        at_p0: list[float] = []
        above: list[float] = []
        for N in (16, 64, 256):
            ce = CounterexampleParams(N=N)
            un = u_N_profile(ce, spec, workers=4)
            u, f = un.field(), mminus_field(ce)
            kp = ce.kernel_params()
            at_p0.append(abp_ratio(u, f, ce.p0, kp, spec, outside_tol=un.err_bound).ratio)
            above.append(abp_ratio(u, f, ce.p0 + 0.3, kp, spec, outside_tol=un.err_bound).ratio)
        assert at_p0[0] < at_p0[1] < at_p0[2]
        assert above[1] - above[0] > above[2] - above[1]
