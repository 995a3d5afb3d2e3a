"""Fibered model of an RN module: one vector in R^d per atom, l_q norm per fiber."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DimensionError, DomainError, UnsupportedCombinationError
from .measure import (
    AtomicProbabilitySpace,
    L0Real,
    MeasurableSet,
    Partition,
    _check_same,
    _frozen,
)

SUPPORT_TOL = 1e-12


@dataclass(frozen=True)
class FiberSpec:
    dimension: int
    exponent: float = 2.0

    def __post_init__(self):
        if int(self.dimension) != self.dimension or self.dimension < 1:
            raise DomainError(f"fiber dimension must be a positive integer, got {self.dimension}")
        if not 1 < self.exponent < np.inf:
            raise DomainError(f"fiber exponent must lie in (1, inf), got {self.exponent}")

    @property
    def dual_exponent(self) -> float:
        return self.exponent / (self.exponent - 1.0)


def fiber_norms(arr: np.ndarray, q: float) -> np.ndarray:
    """Row-wise l_q norms. Rows are reduced independently of each other."""
    a = np.abs(arr)
    top = a.max(axis=1)
    if q == np.inf:
        return top
    # scale by the row maximum so tiny or huge entries neither underflow nor overflow
    safe = np.where(top > 0, top, 1.0)
    return top * np.sum((a / safe[:, None]) ** q, axis=1) ** (1.0 / q)


@dataclass(frozen=True, eq=False)
class RNElement:
    space: AtomicProbabilitySpace
    fiber: FiberSpec
    fibers: np.ndarray

    def __post_init__(self):
        f = _frozen(self.fibers)
        if f.ndim == 1 and self.fiber.dimension == 1:
            f = _frozen(f.reshape(-1, 1))
        if f.shape != (self.space.atom_count, self.fiber.dimension):
            raise DimensionError(
                f"fibers have shape {f.shape}, expected "
                f"({self.space.atom_count}, {self.fiber.dimension})"
            )
        if not np.all(np.isfinite(f)):
            raise DomainError("fibers must be finite")
        object.__setattr__(self, "fibers", f)

    @classmethod
    def zero(cls, space, fiber) -> "RNElement":
        return cls(space, fiber, np.zeros((space.atom_count, fiber.dimension)))

    def _check(self, other: "RNElement"):
        _check_same(self.space, other.space)
        if self.fiber != other.fiber:
            raise DimensionError(f"fiber specs differ: {self.fiber} vs {other.fiber}")

    def _new(self, fibers) -> "RNElement":
        return RNElement(self.space, self.fiber, fibers)

    def __add__(self, other: "RNElement") -> "RNElement":
        self._check(other)
        return self._new(self.fibers + other.fibers)

    def __sub__(self, other: "RNElement") -> "RNElement":
        self._check(other)
        return self._new(self.fibers - other.fibers)

    def __neg__(self):
        return self._new(-self.fibers)

    def __mul__(self, c: float) -> "RNElement":
        if isinstance(c, L0Real):
            return module_scale(c, self)
        return self._new(self.fibers * float(c))

    __rmul__ = __mul__

    def equals(self, other: "RNElement", atol: float = 0.0) -> bool:
        self._check(other)
        if atol == 0.0:
            return bool(np.array_equal(self.fibers, other.fibers))
        return bool(np.all(np.abs(self.fibers - other.fibers) <= atol))

    def __repr__(self):
        return f"RNElement({self.fibers.tolist()})"


def l0_norm(x: RNElement) -> L0Real:
    return L0Real(x.space, fiber_norms(x.fibers, x.fiber.exponent))


def module_scale(xi: L0Real, x: RNElement) -> RNElement:
    _check_same(xi.space, x.space)
    return x._new(xi.values[:, None] * x.fibers)


def support(x: RNElement) -> MeasurableSet:
    return MeasurableSet(x.space, l0_norm(x).values > SUPPORT_TOL)


def joint_support(x: RNElement, y: RNElement) -> MeasurableSet:
    """A_{x,y}: atoms where both elements are nonzero."""
    return support(x) & support(y)


def separated_support(x: RNElement, y: RNElement) -> MeasurableSet:
    """B_{x,y}: atoms where x, y and x - y are all nonzero."""
    return support(x) & support(y) & support(x - y)


def restrict(A: MeasurableSet, x: RNElement) -> RNElement:
    """Indicator action: keep x on A, zero elsewhere."""
    _check_same(A.space, x.space)
    return x._new(np.where(A.membership[:, None], x.fibers, 0.0))


def glue(partition: Partition, elements: Sequence[RNElement]) -> RNElement:
    """Concatenate elements along a partition: the result equals elements[n] on piece n."""
    elements = list(elements)
    if len(elements) != len(partition.pieces):
        raise DomainError(f"{len(partition.pieces)} pieces but {len(elements)} elements")
    first = elements[0]
    _check_same(partition.space, first.space)
    out = np.empty_like(first.fibers)
    for piece, el in zip(partition.pieces, elements):
        first._check(el)
        out[piece.membership] = el.fibers[piece.membership]
    return first._new(out)


@dataclass(frozen=True, eq=False)
class ConvexBody:
    """Atom-wise product of closed balls or closed boxes.

    Ball: ``center`` (n, d) and ``radius`` (n,), measured in the fiber l_q norm.
    Box: ``lower`` and ``upper`` (n, d) per-coordinate bounds.
    """

    kind: str
    space: AtomicProbabilitySpace
    fiber: FiberSpec
    center: np.ndarray | None = None
    radius: np.ndarray | None = None
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None

    def __post_init__(self):
        n, d = self.space.atom_count, self.fiber.dimension
        if self.kind == "ball":
            c = _frozen(np.broadcast_to(np.asarray(self.center, dtype=float), (n, d)))
            r = _frozen(np.broadcast_to(np.asarray(self.radius, dtype=float), (n,)))
            if np.any(r < 0) or not np.all(np.isfinite(r)):
                raise DomainError("ball radii must be finite and >= 0")
            object.__setattr__(self, "center", c)
            object.__setattr__(self, "radius", r)
        elif self.kind == "box":
            lo = _frozen(np.broadcast_to(np.asarray(self.lower, dtype=float), (n, d)))
            hi = _frozen(np.broadcast_to(np.asarray(self.upper, dtype=float), (n, d)))
            if np.any(lo > hi):
                raise DomainError("box has lower > upper in some coordinate")
            if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
                raise DomainError("box bounds must be finite")
            object.__setattr__(self, "lower", lo)
            object.__setattr__(self, "upper", hi)
        else:
            raise DomainError(f"unknown body kind {self.kind!r}")

    @classmethod
    def ball(cls, space, fiber, center, radius) -> "ConvexBody":
        return cls("ball", space, fiber, center=center, radius=radius)

    @classmethod
    def box(cls, space, fiber, lower, upper) -> "ConvexBody":
        return cls("box", space, fiber, lower=lower, upper=upper)

    def midpoint(self) -> RNElement:
        """The per-atom center (ball center or box midpoint)."""
        if self.kind == "ball":
            return RNElement(self.space, self.fiber, self.center)
        return RNElement(self.space, self.fiber, 0.5 * (self.lower + self.upper))

    def bound(self) -> L0Real:
        """Sharp a.s. bound: the largest fiber norm of a member, per atom."""
        q = self.fiber.exponent
        if self.kind == "ball":
            return L0Real(self.space, fiber_norms(self.center, q) + self.radius)
        far = np.maximum(np.abs(self.lower), np.abs(self.upper))
        return L0Real(self.space, fiber_norms(far, q))

    def translate(self, u: RNElement) -> "ConvexBody":
        """The body shifted by ``-u``."""
        if self.kind == "ball":
            return ConvexBody.ball(self.space, self.fiber, self.center - u.fibers, self.radius)
        return ConvexBody.box(self.space, self.fiber, self.lower - u.fibers, self.upper - u.fibers)

    def restrict(self, A: MeasurableSet) -> "ConvexBody":
        """The body of indicator-restricted members: unchanged on A, {0} off A."""
        keep = A.membership
        if self.kind == "ball":
            c = np.where(keep[:, None], self.center, 0.0)
            r = np.where(keep, self.radius, 0.0)
            return ConvexBody.ball(self.space, self.fiber, c, r)
        lo = np.where(keep[:, None], self.lower, 0.0)
        hi = np.where(keep[:, None], self.upper, 0.0)
        return ConvexBody.box(self.space, self.fiber, lo, hi)

    def distance(self, x: RNElement) -> np.ndarray:
        """Per-atom fiber distance from x to the body."""
        q = self.fiber.exponent
        if self.kind == "ball":
            return np.maximum(fiber_norms(x.fibers - self.center, q) - self.radius, 0.0)
        clamped = np.clip(x.fibers, self.lower, self.upper)
        return fiber_norms(x.fibers - clamped, q)

    def sample(self, rng: np.random.Generator, boundary_prob: float = 0.25) -> RNElement:
        """Random member; each atom lands on the boundary with probability ``boundary_prob``."""
        n, d = self.space.atom_count, self.fiber.dimension
        on_edge = rng.random(n) < boundary_prob
        if self.kind == "ball":
            g = rng.standard_normal((n, d))
            nrm = fiber_norms(g, self.fiber.exponent)
            nrm[nrm == 0] = 1.0
            scale = np.where(on_edge, 1.0, rng.random(n) ** (1.0 / d)) * self.radius
            fibers = self.center + g / nrm[:, None] * scale[:, None]
        else:
            u = rng.random((n, d))
            u = np.where(on_edge[:, None], np.round(u), u)
            fibers = self.lower + u * (self.upper - self.lower)
        x = RNElement(self.space, self.fiber, fibers)
        # rounding can leave a boundary draw a hair outside
        return body_project(self, x) if self.kind == "box" or self.fiber.exponent == 2 else x


def body_contains(G: ConvexBody, x: RNElement, tol: float = 1e-9) -> bool:
    if tol < 0:
        raise DomainError("tol must be >= 0")
    _check_same(G.space, x.space)
    return bool(np.all(G.distance(x) <= tol))


def body_project(G: ConvexBody, x: RNElement) -> RNElement:
    """Atom-wise nearest point of the body (fiber l_q metric)."""
    _check_same(G.space, x.space)
    if G.kind == "box":
        return x._new(np.clip(x.fibers, G.lower, G.upper))
    if G.fiber.exponent != 2:
        raise UnsupportedCombinationError("ball projection is only available for q = 2 fibers")
    off = x.fibers - G.center
    nrm = fiber_norms(off, 2.0)
    outside = nrm > G.radius
    scale = np.ones_like(nrm)
    scale[outside] = G.radius[outside] / nrm[outside]
    return x._new(np.where(outside[:, None], G.center + off * scale[:, None], x.fibers))
