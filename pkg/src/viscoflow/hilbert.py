"""Euclidean space primitives: vectors, inner products, affine solution sets.

Everything here is plain float64 numpy.  Values are immutable after
construction and all functions are pure, so they are safe to use from
concurrent contexts.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Singular values below RANK_RTOL * s_max count as zero in rank decisions.
RANK_RTOL = 1e-10
ORTHO_TOL = 1e-10


class DimensionMismatch(ValueError):
    """Operands live in different ambient dimensions."""


def as_vector(x, dim=None):
    """Validate `x` as a finite 1-D float array (a point of R^d)."""
    v = np.array(x, dtype=float)
    if v.ndim != 1 or v.size == 0:
        raise ValueError(f"expected a nonempty 1-D coordinate array, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError("vector coordinates must be finite")
    if dim is not None and v.size != dim:
        raise DimensionMismatch(f"expected dimension {dim}, got {v.size}")
    return v


def inner(x, y):
    """Euclidean inner product <x, y>."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise DimensionMismatch(f"inner: shapes {x.shape} and {y.shape} differ")
    return float(np.dot(x, y))


def norm(x):
    """Euclidean norm sqrt(<x, x>)."""
    x = np.asarray(x, dtype=float)
    return float(np.sqrt(np.dot(x, x)))


def as_matrix(m, square=True):
    a = np.array(m, dtype=float)
    if a.ndim != 2:
        raise ValueError(f"expected a matrix, got shape {a.shape}")
    if square and a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix entries must be finite")
    return a


@dataclass(frozen=True)
class AffineSet:
    """An affine subspace ``anchor + span(basis rows)`` of R^d.

    `basis` is a (k, d) array with pairwise orthonormal rows; k = 0 encodes a
    single point.
    """

    anchor: np.ndarray
    basis: np.ndarray

    def __post_init__(self):
        anchor = as_vector(self.anchor)
        basis = np.array(self.basis, dtype=float).reshape(-1, anchor.size)
        if basis.shape[0] > 0:
            gram = basis @ basis.T
            if not np.allclose(gram, np.eye(basis.shape[0]), atol=ORTHO_TOL):
                raise ValueError("basis rows must be orthonormal")
        anchor.flags.writeable = False
        basis.flags.writeable = False
        object.__setattr__(self, "anchor", anchor)
        object.__setattr__(self, "basis", basis)

    @property
    def dim(self):
        return self.anchor.size

    @property
    def dim_subspace(self):
        return self.basis.shape[0]

    @classmethod
    def point(cls, p):
        p = as_vector(p)
        return cls(p, np.zeros((0, p.size)))

    @classmethod
    def whole_space(cls, d):
        return cls(np.zeros(d), np.eye(d))

    def project(self, x):
        x = np.asarray(x, dtype=float)
        v = x - self.anchor
        if self.basis.shape[0] == 0:
            return self.anchor.copy()
        return self.anchor + self.basis.T @ (self.basis @ v)

    def contains(self, x, tol=1e-9):
        return norm(np.asarray(x, dtype=float) - self.project(x)) <= tol

    def sample(self, rng, scale=1.0, count=None):
        """Random point(s) of the set: anchor + basis^T * N(0, scale^2)."""
        if count is None:
            return self.project(self.anchor + scale * rng.standard_normal(self.dim)) \
                if self.dim_subspace else self.anchor.copy()
        return np.stack([self.sample(rng, scale) for _ in range(count)])

    def equals(self, other, tol=1e-9):
        if self.dim != other.dim or self.dim_subspace != other.dim_subspace:
            return False
        if norm(other.anchor - self.project(other.anchor)) > tol:
            return False
        for row in other.basis:
            p = self.anchor + row
            if norm(p - self.project(p)) > tol:
                return False
        return True

    def intersect(self, other):
        """Intersection with another affine set, or None when disjoint."""
        if self.dim != other.dim:
            raise DimensionMismatch("affine sets live in different spaces")
        d = self.dim
        p1 = np.eye(d) - self.basis.T @ self.basis
        p2 = np.eye(d) - other.basis.T @ other.basis
        lhs = np.vstack([p1, p2])
        rhs = np.concatenate([p1 @ self.anchor, p2 @ other.anchor])
        sol = solve_linear(lhs, rhs)
        if sol is None:
            return None
        # a point is in both sets only if its residual against each is ~0
        if not (self.contains(sol.anchor, 1e-8) and other.contains(sol.anchor, 1e-8)):
            return None
        return sol


def orthonormal_complement(rows):
    """Orthonormal basis of the orthogonal complement of span(rows)."""
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    d = rows.shape[1]
    _, s, vt = np.linalg.svd(rows, full_matrices=True)
    rank = int(np.sum(s > RANK_RTOL * max(s[0] if s.size else 0.0, 1.0)))
    return vt[rank:].reshape(-1, d)


def solve_linear(a, b, rank_rtol=RANK_RTOL):
    """Full solution set of A x = b as an AffineSet, or None if inconsistent.

    The anchor is the minimum-norm particular solution; the basis spans the
    null space of A.
    """
    a = np.asarray(a, dtype=float)
    b = as_vector(b)
    if a.ndim != 2 or a.shape[0] != b.size:
        raise ValueError(f"incompatible system shapes {a.shape} / {b.shape}")
    u, s, vt = np.linalg.svd(a)
    smax = float(s[0]) if s.size else 0.0
    cut = rank_rtol * smax
    rank = int(np.sum(s > cut))
    if rank == 0:
        x = np.zeros(a.shape[1])
    else:
        x = vt[:rank].T @ ((u[:, :rank].T @ b) / s[:rank])
    if norm(a @ x - b) > 1e-8 * (1.0 + norm(b)):
        return None
    return AffineSet(x, vt[rank:])


def solve_affine_fixed_set(m, b):
    """Fixed-point set of the affine map x -> M x + b, i.e. solve (I - M) x = b.

    Returns an AffineSet (possibly a single point or the whole space) or None
    when the map has no fixed point.  M is expected nonexpansive (operator
    norm <= 1); that is the caller's contract and is not enforced here.
    """
    m = as_matrix(m, square=True)
    b = as_vector(b, dim=m.shape[0])
    return solve_linear(np.eye(m.shape[0]) - m, b)
