"""Fixed quadrature rules on shells and spheres."""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
import numpy.typing as npt

from .errors import DomainError

FloatArray = npt.NDArray[np.float64]


@lru_cache(maxsize=32)
def _legendre(order: int) -> tuple[FloatArray, FloatArray]:
    return np.polynomial.legendre.leggauss(order)


def gauss_nodes(edges: FloatArray, order: int, log_scale: bool = False) -> tuple[FloatArray, FloatArray]:
    """Composite Gauss-Legendre rule on consecutive intervals.

    Args:
        edges: Ascending interval endpoints.
        order: Nodes per interval.
        log_scale: Place the nodes uniformly in log(t) (edges must be > 0).

    Returns:
        (nodes, weights) such that sum(w * f(t)) approximates the integral of f.
    """
    xi, wi = _legendre(order)
    lo = np.log(edges[:-1]) if log_scale else edges[:-1]
    hi = np.log(edges[1:]) if log_scale else edges[1:]
    half = 0.5 * (hi - lo)
    u = (lo + half)[:, None] + half[:, None] * xi[None, :]
    w = half[:, None] * wi[None, :]
    if log_scale:
        t = np.exp(u)
        return t.ravel(), (w * t).ravel()
    return u.ravel(), w.ravel()


def shell_edges(
    r_inner: float,
    r_outer: float,
    ratio: float,
    min_shells: int = 0,
    extra: tuple[float, ...] | FloatArray = (),
) -> FloatArray:
    """Geometric shell edges from r_inner to r_outer, split at ``extra`` radii."""
    count = max(int(min_shells), math.ceil(math.log(r_outer / r_inner) / math.log(ratio)), 1)
    edges = np.geomspace(r_inner, r_outer, count + 1)
    cuts = np.asarray([e for e in extra if r_inner * (1 + 1e-9) < e < r_outer * (1 - 1e-9)], dtype=float)
    if cuts.size:
        edges = np.unique(np.concatenate([edges, cuts]))
        keep = np.concatenate([[True], np.diff(np.log(edges)) > 1e-9])
        edges = edges[keep]
    return edges


def sphere_rule(n: int, points: int, half: bool = False) -> tuple[FloatArray, FloatArray]:
    """Product rule on the unit sphere of R^2 or R^3.

    The full rule is antipodally symmetric. With ``half`` only one hemisphere
    is returned (weights summing to half the sphere area), which integrates
    even integrands once both signs of y are evaluated by the caller.

    Returns:
        (directions, weights) with directions of shape (m, n).
    """
    if n == 2:
        count = max(4, points // 2 if half else points)
        count += count % 2
        span = math.pi if half else 2.0 * math.pi
        theta = span * (np.arange(count) + 0.5) / count
        return np.stack([np.cos(theta), np.sin(theta)], axis=1), np.full(count, span / count)
    if n == 3:
        m_z = max(2, round(math.sqrt(points / 2.0)))
        m_phi = 2 * m_z
        z, wz = _legendre(m_z)
        if half:
            z, wz = 0.5 * (z + 1.0), 0.5 * wz
        phi = 2.0 * math.pi * (np.arange(m_phi) + 0.5) / m_phi
        s = np.sqrt(1.0 - z**2)
        dirs = np.stack(
            [
                (s[:, None] * np.cos(phi)[None, :]).ravel(),
                (s[:, None] * np.sin(phi)[None, :]).ravel(),
                np.repeat(z, m_phi),
            ],
            axis=1,
        )
        weights = np.repeat(wz, m_phi) * (2.0 * math.pi / m_phi)
        return dirs, weights
    raise DomainError(f"sphere rules are provided for n in {{2, 3}}, got n={n}")
