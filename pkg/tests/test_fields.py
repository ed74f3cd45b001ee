"""Tests for radial profiles, scalar fields, mollification and inf-convolution."""

from __future__ import annotations

import math

import numpy as np
import pytest

from par_nonlocal_pucci.errors import DomainError, ResolutionError
from par_nonlocal_pucci.fields import (
    GridField,
    InfConvParams,
    RadialProfile,
    affine,
    bump,
    bump_profile,
    constant,
    delta_second_diff,
    fd_hessian,
    inf_convolution,
    infconv_operator_bound,
    mollifier_density,
    mollifier_mass,
    mollify,
    neg_bump,
    plateau,
    quadratic,
    radial_hessian,
    rescale,
    scaled,
    semiconcavity_check,
    tabulate,
)
from par_nonlocal_pucci.special import KernelParams


class TestRadialProfile:
    def test_piece_count_must_match(self) -> None:
        with pytest.raises(DomainError):
            RadialProfile([1.0], [bump_profile().pieces[0]])

    def test_breakpoints_must_increase(self) -> None:
        piece = bump_profile().pieces[0]
        with pytest.raises(DomainError):
            RadialProfile([1.0, 0.5], [piece, piece, piece])

    def test_bump_is_c1_across_support(self) -> None:
        gap_phi, gap_dphi = bump_profile().continuity_gaps()
        assert gap_phi == 0.0
        assert gap_dphi == 0.0

    def test_sup_beyond(self) -> None:
        profile = bump_profile()
        assert profile.sup_beyond(0.0) == pytest.approx(1.0)
        assert profile.sup_beyond(0.5) == pytest.approx(0.5625)
        assert profile.sup_beyond(1.0) == 0.0

    def test_c11_estimate_of_bump(self) -> None:
        assert bump_profile().c11_estimate() == pytest.approx(8.0, rel=1e-3)

    def test_rescaled_and_scaled(self) -> None:
        profile = bump_profile()
        r = np.array([0.1, 0.3, 0.45])
        assert np.allclose(profile.rescaled(2.0).phi(r), profile.phi(2.0 * r))
        assert np.allclose(profile.rescaled(2.0).ddphi(r), 4.0 * profile.ddphi(2.0 * r))
        assert np.allclose(profile.scaled(-3.0).dphi(r), -3.0 * profile.dphi(r))
        assert profile.rescaled(2.0).support == pytest.approx(0.5)

    def test_from_samples_reproduces_quadratic(self) -> None:
        radii = np.linspace(0.0, 1.0, 21)
        profile = RadialProfile.from_samples(radii, radii**2, decay_exponent=2.0)
        assert profile.phi(np.array([0.37]))[0] == pytest.approx(0.37**2, abs=1e-12)
        assert profile.ddphi(np.array([0.6]))[0] == pytest.approx(2.0, abs=1e-9)
        assert profile.phi(np.array([2.0]))[0] == pytest.approx(0.25)

    def test_from_samples_breakpoint_must_be_a_radius(self) -> None:
        radii = np.linspace(0.0, 1.0, 11)
        with pytest.raises(DomainError):
            RadialProfile.from_samples(radii, radii, breakpoints=(0.55,))


class TestScalarFields:
    def test_bump_values(self) -> None:
        u = bump(2)
        assert u.value([0.0, 0.0]) == pytest.approx(1.0)
        assert u.value([0.5, 0.0]) == pytest.approx(0.5625)
        assert u.value([2.0, 0.0]) == 0.0
        assert u.sup_bound == 1.0
        assert u.c11_seminorm == 8.0

    def test_wrong_dimension_raises(self) -> None:
        with pytest.raises(DomainError):
            bump(2)(np.zeros(3))

    def test_radial_hessian_matches_finite_differences(self) -> None:
        u = bump(2)
        x = np.array([0.3, 0.2])
        assert np.allclose(radial_hessian(u.radial, x), fd_hessian(u, x, 1e-4), atol=1e-5)  # type: ignore[arg-type]

    def test_radial_hessian_undefined_at_origin(self) -> None:
        with pytest.raises(DomainError):
            radial_hessian(bump_profile(), np.zeros(2))

    def test_hessian_at_origin_uses_second_derivative(self) -> None:
        assert np.allclose(bump(3).hessian(np.zeros(3)), -4.0 * np.eye(3))  # type: ignore[arg-type]

    def test_second_difference_of_quadratic(self) -> None:
        y = np.array([[0.1, 0.2], [0.3, -0.4]])
        delta = delta_second_diff(quadratic(2), np.array([0.5, -0.2]), y)
        assert np.allclose(delta, 2.0 * np.sum(y * y, axis=1))

    def test_constant_and_affine(self) -> None:
        c = constant(2, 3.0)
        assert np.allclose(c(np.zeros((4, 2))), 3.0)
        assert c.sup_outside(0.0) == 0.0
        line = affine(2, [1.0, -2.0], offset=0.5, remainder=bump(2))
        x = np.array([[0.2, 0.1], [1.5, 0.0]])
        assert np.allclose(line.centered(x), bump(2)(x))
        assert math.isinf(line.sup_bound)

    def test_scaled_and_rescaled(self) -> None:
        u = neg_bump(2)
        assert u.value([0.0, 0.0]) == pytest.approx(-1.0)
        assert u.sup_bound == 1.0
        v = rescale(bump(2), 2.0)
        assert v.value([0.25, 0.0]) == pytest.approx(bump(2).value([0.5, 0.0]))
        assert v.support_radius == pytest.approx(0.5)
        assert v.c11_seminorm == pytest.approx(32.0)

    def test_plateau(self) -> None:
        u = plateau(2)
        assert u.value([0.5, 0.0]) == pytest.approx(1.0)
        assert u.value([0.95, 0.0]) == pytest.approx(0.5)
        assert u.value([1.2, 0.0]) == 0.0
        with pytest.raises(DomainError):
            plateau(2, width=0.6)


class TestTabulation:
    def test_interpolates_smooth_region(self) -> None:
        u = bump(2)
        grid = tabulate(u, 1.5, 0.02)
        assert isinstance(grid, GridField)
        pts = np.array([[0.3, 0.1], [-0.5, 0.4], [0.0, 0.0]])
        assert np.allclose(grid(pts), u(pts), atol=1e-5)
        assert grid.value([2.0, 0.0]) == 0.0

    def test_rejects_bad_grid(self) -> None:
        with pytest.raises(DomainError):
            tabulate(bump(2), 0.01, 0.02)

    def test_rejects_affine_part(self) -> None:
        with pytest.raises(DomainError):
            tabulate(affine(2, [1.0, 0.0]), 1.0, 0.1)


class TestMollification:
    def test_density_has_unit_mass(self) -> None:
        eps = 0.5
        axis = np.arange(-eps, eps + 1e-12, 0.005)
        mesh = np.stack(np.meshgrid(axis, axis, indexing="ij"), axis=-1)
        mass = float(np.sum(mollifier_density(mesh, eps)) * 0.005**2)
        assert mass == pytest.approx(1.0, rel=1e-3)
        assert mollifier_mass(2) > 0.0

    def test_reproduces_constants(self) -> None:
        smooth = mollify(constant(2, 3.0), 0.1)
        assert np.allclose(smooth(np.array([[0.0, 0.0], [0.7, -0.2]])), 3.0)

    def test_quadratic_gains_second_moment(self) -> None:
        eps = 0.1
        value = mollify(quadratic(2), eps).value([0.0, 0.0])
        assert 0.0 < value < eps**2

    def test_grid_mollification_stays_close(self) -> None:
        smooth = mollify(tabulate(bump(2), 1.5, 0.02), 0.05)
        assert isinstance(smooth, GridField)
        value = smooth.value([0.0, 0.0])
        assert 0.99 < value < 1.0
        assert smooth.support_radius == pytest.approx(1.05)

    def test_epsilon_must_be_positive(self) -> None:
        with pytest.raises(DomainError):
            mollify(bump(2), 0.0)


class TestInfConvolution:
    def test_params_validation(self) -> None:
        with pytest.raises(DomainError):
            InfConvParams(h=0.0)
        with pytest.raises(DomainError):
            InfConvParams(h=0.1, search_radius=0.01)
        with pytest.raises(DomainError):
            InfConvParams(h=0.1).radius_for(math.inf)
        with pytest.raises(DomainError):
            InfConvParams(h=0.1, search_radius=0.1).radius_for(1.0)

    def test_quadratic_closed_form(self) -> None:
        """min |y|^2 + |x - y|^2 / (2h) is 2|x|^2/3 at y = 2x/3 for h = 1/4."""
        u_h, argmin = inf_convolution(quadratic(2), InfConvParams(h=0.25, search_radius=0.5))
        x = np.array([0.3, 0.0])
        assert u_h.value(x) == pytest.approx(0.06, abs=1e-10)
        assert np.allclose(argmin(x), [0.2, 0.0], atol=1e-10)

    def test_boundary_argmin_raises(self) -> None:
        u_h, _ = inf_convolution(quadratic(2), InfConvParams(h=0.25, search_radius=0.1))
        with pytest.raises(ResolutionError):
            u_h.value([0.9, 0.0])

    def test_below_u_and_flat_far_away(self) -> None:
        u = neg_bump(2)
        u_h, _ = inf_convolution(u, InfConvParams(h=0.05))
        pts = np.array([[0.0, 0.0], [0.4, 0.3], [-0.8, 0.1]])
        assert np.all(u_h(pts) <= u(pts) + 1e-12)
        assert u_h.value([1.3, 0.0]) == pytest.approx(0.0, abs=1e-12)

    def test_metadata(self) -> None:
        u_h, _ = inf_convolution(neg_bump(2), InfConvParams(h=0.05))
        assert u_h.c11_seminorm == pytest.approx(20.0)
        assert u_h.support_radius == pytest.approx(1.0 + math.sqrt(0.1))
        rough, _ = inf_convolution(neg_bump(2), InfConvParams(h=0.2))
        assert rough.c11_seminorm is None

    @pytest.mark.slow
    @pytest.mark.timeout(60)
    def test_semiconcavity_holds(self) -> None:
        u_h, _ = inf_convolution(neg_bump(2), InfConvParams(h=0.05))
        report = semiconcavity_check(u_h, 0.05, samples=500, seed=1)
        assert report.passed

    def test_semiconcavity_detects_convexity(self) -> None:
        report = semiconcavity_check(scaled(quadratic(2), 10.0), 1.0, samples=200)
        assert not report.passed

    def test_operator_bound_decreases_with_h(self) -> None:
        params = KernelParams(n=2, sigma=1.5)
        assert infconv_operator_bound(0.05, 1.0, params) > infconv_operator_bound(0.1, 1.0, params) > 0.0
