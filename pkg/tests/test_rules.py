"""Tests for the fixed shell and sphere rules."""

from __future__ import annotations

import math

import numpy as np
import pytest

from par_nonlocal_pucci.errors import DomainError
from par_nonlocal_pucci.rules import gauss_nodes, shell_edges, sphere_rule


class TestGaussNodes:
    def test_exact_for_cubics(self) -> None:
        t, w = gauss_nodes(np.array([0.0, 1.0, 2.0]), 4)
        assert np.sum(w * t**3) == pytest.approx(4.0)

    def test_log_scale_integrates_reciprocal(self) -> None:
        t, w = gauss_nodes(np.array([1.0, math.e, math.e**2]), 4, log_scale=True)
        assert np.sum(w / t) == pytest.approx(2.0)


class TestShellEdges:
    def test_geometric_and_split(self) -> None:
        edges = shell_edges(0.01, 1.0, 1.15, extra=(0.5,))
        assert edges[0] == pytest.approx(0.01)
        assert edges[-1] == pytest.approx(1.0)
        assert np.any(np.isclose(edges, 0.5))
        assert np.all(np.diff(edges) > 0.0)
        assert np.max(edges[1:] / edges[:-1]) <= 1.15 + 1e-12

    def test_min_shells(self) -> None:
        assert shell_edges(0.5, 1.0, 10.0, min_shells=6).size == 7


class TestSphereRule:
    @pytest.mark.parametrize("n,area", [(2, 2.0 * math.pi), (3, 4.0 * math.pi)])
    def test_weights_sum_to_area(self, n: int, area: float) -> None:
        dirs, w = sphere_rule(n, 256)
        assert np.sum(w) == pytest.approx(area)
        assert np.allclose(np.linalg.norm(dirs, axis=1), 1.0)
        _, half_w = sphere_rule(n, 256, half=True)
        assert np.sum(half_w) == pytest.approx(area / 2.0)

    def test_second_moment_in_three_dimensions(self) -> None:
        dirs, w = sphere_rule(3, 512)
        assert np.sum(w * dirs[:, 0] ** 2) == pytest.approx(4.0 * math.pi / 3.0)

    def test_unsupported_dimension(self) -> None:
        with pytest.raises(DomainError):
            sphere_rule(4, 100)
