"""Symmetric matrices, the A_sigma map and the fractional Pucci extremal traces.

The extremal traces inf/sup Tr(A D) over the ellipticity class are computed
exactly. The class is invariant under orthogonal conjugation and convex, so
pinching any admissible A to its diagonal in the eigenbasis of D (an average
of sign-flip conjugations) stays admissible and keeps Tr(A D). The optimum is
therefore attained at a diagonal A in that basis, which turns the problem into
a linear program over the eigenvalue vector a:

    a_i >= eta,   lambda (n + sigma) <= sigma a_i + sum_j a_j <= Lambda (n + sigma).

The feasible polytope depends only on the class, not on D, so its vertices
are enumerated once per KernelParams and every extremal trace is a max/min of
``vertices @ eigenvalues(D)``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache
from typing import Literal

import numpy as np
import numpy.typing as npt
from scipy.stats import ortho_group, special_ortho_group

from .debug import log_lp_solve
from .errors import DomainError, InfeasibleClassError
from .special import KernelParams

FloatArray = npt.NDArray[np.float64]
Sign = Literal["+", "-"]

EIG_TOL = 1e-10
SYMMETRY_TOL = 1e-12
ORACLE_CHUNK = 1024

__all__ = [
    "EIG_TOL",
    "EllipticityClass",
    "Sign",
    "a_sigma_map",
    "as_sym",
    "in_class",
    "pucci_extremal_trace",
    "pucci_minus_trace",
    "pucci_oracle_batch",
    "pucci_oracle_sample",
    "pucci_plus_trace",
    "random_orthogonal",
]


def as_sym(a: npt.ArrayLike, n: int | None = None) -> FloatArray:
    """Validate a dense symmetric matrix and return it as a float array.

    Raises:
        DomainError: If the input is not square, has the wrong dimension or
            is not symmetric (relative tolerance 1e-12).
    """
    m = np.asarray(a, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DomainError(f"expected a square matrix, got shape {m.shape}")
    if n is not None and m.shape[0] != n:
        raise DomainError(f"dimension mismatch: matrix is {m.shape[0]}x{m.shape[0]}, expected n={n}")
    scale = max(1.0, float(np.max(np.abs(m))))
    if np.max(np.abs(m - m.T)) > SYMMETRY_TOL * scale:
        raise DomainError("matrix is not symmetric")
    return m


def a_sigma_map(a: npt.ArrayLike, params: KernelParams) -> FloatArray:
    """Return (sigma A + Tr(A) Id) / (n + sigma)."""
    m = as_sym(a, params.n)
    n, sigma = params.n, params.sigma
    return (sigma * m + np.trace(m) * np.eye(n)) / (n + sigma)


def in_class(a: npt.ArrayLike, params: KernelParams) -> bool:
    """Membership in S_{lambda,Lambda} intersected with {A >= eta Id}."""
    m = as_sym(a, params.n)
    if np.linalg.eigvalsh(m).min() < params.eta - EIG_TOL:
        return False
    eig = np.linalg.eigvalsh(a_sigma_map(m, params))
    return bool(eig.min() >= params.lam - EIG_TOL and eig.max() <= params.Lam + EIG_TOL)


@lru_cache(maxsize=64)
def _polytope_vertices(params: KernelParams) -> FloatArray:
    n, sigma = params.n, params.sigma
    ones = np.ones((n, n))
    eye = np.eye(n)
    # rows G with G a >= h
    g = np.vstack([eye, sigma * eye + ones, -(sigma * eye + ones)])
    h = np.concatenate(
        [
            np.full(n, params.eta),
            np.full(n, params.lam * (n + sigma)),
            np.full(n, -params.Lam * (n + sigma)),
        ]
    )
    found: list[FloatArray] = []
    for rows in itertools.combinations(range(3 * n), n):
        sub = g[list(rows)]
        if abs(np.linalg.det(sub)) < 1e-12:
            continue
        a = np.linalg.solve(sub, h[list(rows)])
        if np.all(g @ a >= h - 1e-9 * (1.0 + np.abs(h))):
            if not any(np.allclose(a, b, atol=1e-11) for b in found):
                found.append(a)
    if not found:
        raise InfeasibleClassError(
            f"ellipticity class is empty for lambda={params.lam}, Lambda={params.Lam}, eta={params.eta}"
        )
    return np.array(found)


@dataclass(frozen=True)
class EllipticityClass:
    """The class S_{lambda,Lambda} (with lower cutoff eta) for one KernelParams."""

    params: KernelParams

    def contains(self, a: npt.ArrayLike) -> bool:
        return in_class(a, self.params)

    def vertices(self) -> FloatArray:
        """Vertices of the eigenvalue polytope, one row per vertex."""
        return _polytope_vertices(self.params).copy()

    def sample_diagonals(self, rng: np.random.Generator, size: int) -> FloatArray:
        """Admissible eigenvalue vectors: half exact vertices, half convex combinations."""
        verts = _polytope_vertices(self.params)
        k = verts.shape[0]
        picks = verts[rng.integers(0, k, size=size)]
        mix = rng.dirichlet(np.ones(k), size=size) @ verts
        use_vertex = rng.random(size) < 0.5
        return np.where(use_vertex[:, None], picks, mix)


def pucci_extremal_trace(d: npt.ArrayLike, params: KernelParams, sign: Sign) -> tuple[float, FloatArray]:
    """Exact inf (sign '-') or sup (sign '+') of Tr(A D) over the ellipticity class.

    Returns:
        (value, argopt) where argopt is an optimal A.

    Raises:
        DomainError: On a bad sign or matrix.
        InfeasibleClassError: If the class is empty.
    """
    if sign not in ("+", "-"):
        raise DomainError(f"sign must be '+' or '-', got {sign!r}")
    m = as_sym(d, params.n)
    eig, q = np.linalg.eigh(m)
    verts = _polytope_vertices(params)
    scores = verts @ eig
    idx = int(np.argmin(scores)) if sign == "-" else int(np.argmax(scores))
    value = float(scores[idx])
    argopt = (q * verts[idx]) @ q.T
    log_lp_solve(sign, eig, value, verts.shape[0])
    return value, argopt


def pucci_minus_trace(d: npt.ArrayLike, params: KernelParams) -> float:
    return pucci_extremal_trace(d, params, "-")[0]


def pucci_plus_trace(d: npt.ArrayLike, params: KernelParams) -> float:
    return pucci_extremal_trace(d, params, "+")[0]


def random_orthogonal(n: int, rng: np.random.Generator) -> FloatArray:
    """Haar-distributed orthogonal matrix."""
    return np.asarray(ortho_group.rvs(n, random_state=rng), dtype=float).reshape(n, n)


def pucci_oracle_batch(
    ds: npt.ArrayLike,
    params: KernelParams,
    sign: Sign,
    trials: int,
    seed: int = 0,
) -> FloatArray:
    """Best Tr(A D) over ``trials`` random admissible matrices A, for a stack of D.

    Candidates are Q diag(a) Q^T with a drawn from the eigenvalue polytope and
    Q a random rotation. Draws come in fixed chunks seeded by (seed, chunk),
    so a larger ``trials`` only appends candidates: each result is monotone in
    ``trials`` for a fixed seed. Every D in the stack sees the same candidates.

    Raises:
        DomainError: On a bad sign, trial count or matrix.
    """
    if trials < 1:
        raise DomainError(f"trials must be >= 1, got {trials}")
    if sign not in ("+", "-"):
        raise DomainError(f"sign must be '+' or '-', got {sign!r}")
    n = params.n
    stack = np.asarray(ds, dtype=float)
    if stack.ndim == 2:
        stack = stack[None]
    stack = np.array([as_sym(m, n) for m in stack])
    cls = EllipticityClass(params)
    best = np.full(stack.shape[0], np.inf if sign == "-" else -np.inf)
    remaining = trials
    chunk = 0
    while remaining > 0:
        rng = np.random.default_rng([seed, chunk])
        diag = cls.sample_diagonals(rng, ORACLE_CHUNK)
        rot = np.asarray(special_ortho_group.rvs(n, size=ORACLE_CHUNK, random_state=rng)).reshape(
            ORACLE_CHUNK, n, n
        )
        take = min(remaining, ORACLE_CHUNK)
        # Tr(Q diag(a) Q^T D) = <Q diag(a) Q^T, D>_F
        cand = np.einsum("kij,kj,klj->kil", rot[:take], diag[:take], rot[:take]).reshape(take, n * n)
        values = stack.reshape(stack.shape[0], n * n) @ cand.T
        best = np.minimum(best, values.min(axis=1)) if sign == "-" else np.maximum(best, values.max(axis=1))
        remaining -= take
        chunk += 1
    return best


def pucci_oracle_sample(
    d: npt.ArrayLike,
    params: KernelParams,
    sign: Sign,
    trials: int,
    seed: int = 0,
) -> float:
    """Best Tr(A D) over ``trials`` random admissible matrices A; see ``pucci_oracle_batch``."""
    return float(pucci_oracle_batch(as_sym(d, params.n), params, sign, trials, seed)[0])
