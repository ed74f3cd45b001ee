"""Tests for the A_sigma map and the exact fractional Pucci traces."""

from __future__ import annotations

import numpy as np
import pytest

from par_nonlocal_pucci.errors import DomainError
from par_nonlocal_pucci.matrixcore import (
    EllipticityClass,
    a_sigma_map,
    as_sym,
    in_class,
    pucci_extremal_trace,
    pucci_minus_trace,
    pucci_oracle_batch,
    pucci_oracle_sample,
    pucci_plus_trace,
    random_orthogonal,
)
from par_nonlocal_pucci.special import KernelParams


@pytest.fixture
def params() -> KernelParams:
    return KernelParams(n=2, sigma=1.5, lam=1.0, Lam=4.0)


def _random_sym(n: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    m = rng.normal(size=(n, n))
    return 0.5 * (m + m.T)


class TestAsSym:
    def test_rejects_non_square(self) -> None:
        with pytest.raises(DomainError):
            as_sym(np.zeros((2, 3)))

    def test_rejects_asymmetric(self) -> None:
        with pytest.raises(DomainError):
            as_sym([[0.0, 1.0], [0.0, 0.0]])

    def test_rejects_dimension_mismatch(self) -> None:
        with pytest.raises(DomainError):
            as_sym(np.eye(3), n=2)


class TestASigmaMap:
    def test_identity_is_fixed(self, params: KernelParams) -> None:
        assert np.allclose(a_sigma_map(np.eye(2), params), np.eye(2))

    def test_trace_is_preserved(self, params: KernelParams) -> None:
        m = _random_sym(2, 1)
        assert np.trace(a_sigma_map(m, params)) == pytest.approx(np.trace(m))


class TestMembership:
    def test_identity_is_admissible(self, params: KernelParams) -> None:
        assert in_class(np.eye(2), params)
        assert EllipticityClass(params).contains(2.0 * np.eye(2))

    def test_too_small_is_rejected(self, params: KernelParams) -> None:
        assert not in_class(0.5 * np.eye(2), params)

    def test_eta_cutoff(self) -> None:
        params = KernelParams(n=2, sigma=1.5, lam=1.0, Lam=4.0, eta=0.5)
        # eigenvalues (0.4, 3.0) give A_sigma within bounds but violate A >= eta
        assert in_class(np.diag([0.4, 3.0]), params.with_eta(0.0))
        assert not in_class(np.diag([0.4, 3.0]), params)

    def test_vertices_are_admissible(self, params: KernelParams) -> None:
        for vertex in EllipticityClass(params).vertices():
            assert in_class(np.diag(vertex), params)


class TestExtremalTraces:
    def test_identity_hessian(self, params: KernelParams) -> None:
        assert pucci_minus_trace(np.eye(2), params) == pytest.approx(2.0)
        assert pucci_plus_trace(np.eye(2), params) == pytest.approx(8.0)

    def test_odd_symmetry(self, params: KernelParams) -> None:
        d = _random_sym(2, 3)
        assert pucci_minus_trace(-d, params) == pytest.approx(-pucci_plus_trace(d, params))

    def test_argopt_attains_value(self, params: KernelParams) -> None:
        d = _random_sym(2, 5)
        for sign in ("+", "-"):
            value, argopt = pucci_extremal_trace(d, params, sign)
            assert in_class(argopt, params)
            assert np.trace(argopt @ d) == pytest.approx(value)

    def test_rotation_invariance(self) -> None:
        params = KernelParams(n=3, sigma=1.2, lam=1.0, Lam=3.0)
        d = _random_sym(3, 7)
        q = random_orthogonal(3, np.random.default_rng(0))
        assert pucci_minus_trace(q @ d @ q.T, params) == pytest.approx(pucci_minus_trace(d, params))

    def test_bad_sign_raises(self, params: KernelParams) -> None:
        with pytest.raises(DomainError):
            pucci_extremal_trace(np.eye(2), params, "*")  # type: ignore[arg-type]

    @pytest.mark.parametrize("n", [2, 3])
    def test_oracle_never_beats_exact(self, n: int) -> None:
        params = KernelParams(n=n, sigma=1.4, lam=1.0, Lam=4.0)
        d = _random_sym(n, 11)
        assert pucci_oracle_sample(d, params, "-", 2000) >= pucci_minus_trace(d, params) - 1e-10
        assert pucci_oracle_sample(d, params, "+", 2000) <= pucci_plus_trace(d, params) + 1e-10

    def test_oracle_is_monotone_in_trials(self, params: KernelParams) -> None:
        d = _random_sym(2, 13)
        assert pucci_oracle_sample(d, params, "-", 2000, seed=4) <= pucci_oracle_sample(d, params, "-", 100, seed=4)

    def test_oracle_needs_a_trial(self, params: KernelParams) -> None:
        with pytest.raises(DomainError):
            pucci_oracle_sample(np.eye(2), params, "-", 0)


class TestOracleBatch:
    def test_batch_matches_single(self, params: KernelParams) -> None:
        ds = np.array([_random_sym(2, s) for s in range(4)])
        batch = pucci_oracle_batch(ds, params, "+", 1500, seed=2)
        single = [pucci_oracle_sample(d, params, "+", 1500, seed=2) for d in ds]
        assert batch == pytest.approx(single, abs=1e-12)

    @pytest.mark.slow
    @pytest.mark.timeout(60)
    @pytest.mark.parametrize(("n", "sigma"), [(2, 1.5), (3, 1.4)])
    def test_sampled_extremes_close_the_gap(self, n: int, sigma: float) -> None:
        params = KernelParams(n=n, sigma=sigma, lam=1.0, Lam=4.0)
        rng = np.random.default_rng(2024 + n)
        raw = rng.normal(size=(200, n, n))
        ds = 0.5 * (raw + np.swapaxes(raw, 1, 2))
        exact_minus = np.array([pucci_minus_trace(d, params) for d in ds])
        exact_plus = np.array([pucci_plus_trace(d, params) for d in ds])
        spread = exact_plus - exact_minus
        sampled_minus = pucci_oracle_batch(ds, params, "-", 100_000, seed=7)
        sampled_plus = pucci_oracle_batch(ds, params, "+", 100_000, seed=7)
        assert np.all(sampled_minus >= exact_minus - 1e-10)
        assert np.all(sampled_plus <= exact_plus + 1e-10)
        assert np.all(sampled_minus - exact_minus <= 0.05 * spread)
        assert np.all(exact_plus - sampled_plus <= 0.05 * spread)
