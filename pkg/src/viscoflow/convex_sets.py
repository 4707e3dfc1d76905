"""Projectable closed convex sets with exact metric projections.

Each set supplies `project` (the metric projection), `contains`, and `sample`
(a seeded point source inside the set, used by sampled maximization checks).
Sets are immutable and all methods are pure.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .hilbert import AffineSet, DimensionMismatch, as_vector, norm, orthonormal_complement
from .operators import Operator


class ConvexSet:
    kind = "abstract"

    @property
    def dim(self):
        raise NotImplementedError

    def project(self, x):
        raise NotImplementedError

    def sample(self, rng):
        raise NotImplementedError

    def contains(self, x, tol=1e-9):
        x = np.asarray(x, dtype=float)
        if x.size != self.dim:
            raise DimensionMismatch(f"point of dim {x.size} vs set of dim {self.dim}")
        return norm(x - self.project(x)) <= tol

    def _check_dim(self, x):
        x = np.asarray(x, dtype=float)
        if x.size != self.dim:
            raise DimensionMismatch(f"point of dim {x.size} vs set of dim {self.dim}")
        return x


@dataclass(frozen=True)
class Ball(ConvexSet):
    center: np.ndarray
    radius: float
    kind = "ball"

    def __post_init__(self):
        c = as_vector(self.center)
        c.flags.writeable = False
        object.__setattr__(self, "center", c)
        if not self.radius > 0:
            raise ValueError("ball radius must be positive")

    @property
    def dim(self):
        return self.center.size

    def project(self, x):
        if len(x) != self.center.size:
            raise DimensionMismatch("ball projection: dimension mismatch")
        v = x - self.center
        r = math.sqrt(float(np.dot(v, v)))
        if r <= self.radius:
            return x
        return self.center + v * (self.radius / r)

    def sample(self, rng):
        u = rng.standard_normal(self.dim)
        u /= max(norm(u), 1e-300)
        return self.center + u * (self.radius * rng.uniform() ** (1.0 / self.dim))


@dataclass(frozen=True)
class Box(ConvexSet):
    lo: np.ndarray
    hi: np.ndarray
    kind = "box"

    def __post_init__(self):
        lo = as_vector(self.lo)
        hi = as_vector(self.hi, dim=lo.size)
        if np.any(hi < lo):
            raise ValueError("box needs lo <= hi")
        lo.flags.writeable = False
        hi.flags.writeable = False
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def dim(self):
        return self.lo.size

    def project(self, x):
        if len(x) != self.lo.size:
            raise DimensionMismatch("box projection: dimension mismatch")
        return np.clip(x, self.lo, self.hi)

    def sample(self, rng):
        return rng.uniform(self.lo, self.hi)


@dataclass(frozen=True)
class Halfspace(ConvexSet):
    """{x : <normal, x> <= offset}"""

    normal: np.ndarray
    offset: float
    kind = "halfspace"

    def __post_init__(self):
        n = as_vector(self.normal)
        if norm(n) < 1e-12:
            raise ValueError("halfspace normal must be nonzero")
        n.flags.writeable = False
        object.__setattr__(self, "normal", n)
        object.__setattr__(self, "_nsq", float(np.dot(n, n)))

    @property
    def dim(self):
        return self.normal.size

    def project(self, x):
        if len(x) != self.normal.size:
            raise DimensionMismatch("halfspace projection: dimension mismatch")
        g = float(np.dot(self.normal, x)) - self.offset
        if g <= 0:
            return x
        return x - (g / self._nsq) * self.normal

    def sample(self, rng):
        anchor = (self.offset / self._nsq) * self.normal
        return self.project(anchor + 4.0 * rng.standard_normal(self.dim))


@dataclass(frozen=True)
class Hyperplane(ConvexSet):
    """{x : <normal, x> = offset}"""

    normal: np.ndarray
    offset: float
    kind = "hyperplane"

    def __post_init__(self):
        n = as_vector(self.normal)
        if norm(n) < 1e-12:
            raise ValueError("hyperplane normal must be nonzero")
        n.flags.writeable = False
        object.__setattr__(self, "normal", n)
        object.__setattr__(self, "_nsq", float(np.dot(n, n)))

    @property
    def dim(self):
        return self.normal.size

    def project(self, x):
        if len(x) != self.normal.size:
            raise DimensionMismatch("hyperplane projection: dimension mismatch")
        g = float(np.dot(self.normal, x)) - self.offset
        return x - (g / self._nsq) * self.normal

    def sample(self, rng):
        return self.project(4.0 * rng.standard_normal(self.dim))

    def as_affine(self):
        anchor = (self.offset / self._nsq) * self.normal
        return AffineSet(anchor, orthonormal_complement(self.normal[None, :]))


@dataclass(frozen=True)
class AffineSubspace(ConvexSet):
    aset: AffineSet
    kind = "affine"

    @property
    def dim(self):
        return self.aset.dim

    def project(self, x):
        if len(x) != self.aset.dim:
            raise DimensionMismatch("affine projection: dimension mismatch")
        return self.aset.project(x)

    def sample(self, rng):
        return self.aset.sample(rng, scale=2.0)

    def as_affine(self):
        return self.aset


def project_simplex(v):
    """Exact Euclidean projection onto the probability simplex, by the
    O(d log d) sort-and-threshold rule."""
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    idx = np.arange(1, v.size + 1)
    cond = u - css / idx > 0
    rho = int(idx[cond][-1])
    theta = css[cond][-1] / rho
    return np.maximum(v - theta, 0.0)


@dataclass(frozen=True)
class Simplex(ConvexSet):
    """The probability simplex {x >= 0, sum x = 1} in R^d."""

    d: int
    kind = "simplex"

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("simplex dimension must be >= 1")

    @property
    def dim(self):
        return self.d

    def project(self, x):
        if len(x) != self.d:
            raise DimensionMismatch("simplex projection: dimension mismatch")
        return project_simplex(np.asarray(x, dtype=float))

    def sample(self, rng):
        return rng.dirichlet(np.ones(self.d))


@dataclass(frozen=True)
class WholeSpace(ConvexSet):
    d: int
    kind = "whole_space"

    @property
    def dim(self):
        return self.d

    def project(self, x):
        return x

    def sample(self, rng):
        return 3.0 * rng.standard_normal(self.d)

    def as_affine(self):
        return AffineSet.whole_space(self.d)


def projection_operator(s):
    """The metric projection of `s` as a firmly nonexpansive Operator.

    For affine-flavored sets the fixed-point set is attached exactly.
    """
    fix = s.as_affine() if hasattr(s, "as_affine") else None
    return Operator(s.project, s.dim, lipschitz_bound=1.0,
                    is_firmly_nonexpansive=True, known_fix=fix,
                    label=f"proj_{s.kind}")
