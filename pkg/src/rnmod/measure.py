"""Finite atomic probability spaces and the L0 scalar lattice over them.

Every "almost sure" statement reduces to an atom-wise statement because each
atom carries strictly positive mass.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import DimensionError, DomainError, PartitionError

DEFAULT_TOL = 1e-12


def _frozen(values, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class AtomicProbabilitySpace:
    """Finitely many atoms with positive weights summing to one.

    ``tol`` is the absolute slack used by order predicates on this space.
    """

    weights: np.ndarray
    tol: float = DEFAULT_TOL

    def __post_init__(self):
        w = _frozen(self.weights)
        if w.ndim != 1 or w.size == 0:
            raise DomainError("weights must be a nonempty 1-d sequence")
        if not np.all(np.isfinite(w)) or np.any(w <= 0):
            raise DomainError("every atom weight must be finite and > 0")
        if abs(w.sum() - 1.0) > 1e-12:
            raise DomainError(f"weights sum to {w.sum()!r}, not 1")
        object.__setattr__(self, "weights", w)

    @classmethod
    def uniform(cls, n: int) -> "AtomicProbabilitySpace":
        return cls(np.full(n, 1.0 / n))

    @property
    def atom_count(self) -> int:
        return self.weights.size

    def __eq__(self, other):
        if not isinstance(other, AtomicProbabilitySpace):
            return NotImplemented
        return self.atom_count == other.atom_count and np.array_equal(self.weights, other.weights)

    def __hash__(self):
        return hash(self.weights.tobytes())

    def full(self) -> "MeasurableSet":
        return MeasurableSet(self, np.ones(self.atom_count, dtype=bool))

    def empty(self) -> "MeasurableSet":
        return MeasurableSet(self, np.zeros(self.atom_count, dtype=bool))

    def atoms(self, indices: Iterable[int]) -> "MeasurableSet":
        mask = np.zeros(self.atom_count, dtype=bool)
        mask[list(indices)] = True
        return MeasurableSet(self, mask)

    def constant(self, value: float) -> "L0Real":
        return L0Real(self, np.full(self.atom_count, float(value)))

    def l0(self, values) -> "L0Real":
        return L0Real(self, values)


def _check_same(a: AtomicProbabilitySpace, b: AtomicProbabilitySpace):
    if a.atom_count != b.atom_count:
        raise DimensionError(f"atom counts differ: {a.atom_count} vs {b.atom_count}")


@dataclass(frozen=True, eq=False)
class MeasurableSet:
    space: AtomicProbabilitySpace
    membership: np.ndarray

    def __post_init__(self):
        m = _frozen(self.membership, dtype=bool)
        if m.shape != (self.space.atom_count,):
            raise DimensionError(
                f"membership has shape {m.shape}, expected ({self.space.atom_count},)"
            )
        object.__setattr__(self, "membership", m)

    @property
    def indices(self) -> tuple[int, ...]:
        return tuple(int(i) for i in np.flatnonzero(self.membership))

    @property
    def probability(self) -> float:
        return float(self.space.weights[self.membership].sum())

    def is_empty(self) -> bool:
        return not self.membership.any()

    def complement(self) -> "MeasurableSet":
        return MeasurableSet(self.space, ~self.membership)

    def __and__(self, other: "MeasurableSet") -> "MeasurableSet":
        _check_same(self.space, other.space)
        return MeasurableSet(self.space, self.membership & other.membership)

    def __or__(self, other: "MeasurableSet") -> "MeasurableSet":
        _check_same(self.space, other.space)
        return MeasurableSet(self.space, self.membership | other.membership)

    def __sub__(self, other: "MeasurableSet") -> "MeasurableSet":
        _check_same(self.space, other.space)
        return MeasurableSet(self.space, self.membership & ~other.membership)

    def __le__(self, other: "MeasurableSet") -> bool:
        _check_same(self.space, other.space)
        return bool(np.all(~self.membership | other.membership))

    def __eq__(self, other):
        if not isinstance(other, MeasurableSet):
            return NotImplemented
        return self.space == other.space and np.array_equal(self.membership, other.membership)

    def __hash__(self):
        return hash(self.membership.tobytes())

    def __repr__(self):
        return f"MeasurableSet({list(self.indices)})"


@dataclass(frozen=True, eq=False)
class L0Real:
    """A real random variable, one finite value per atom."""

    space: AtomicProbabilitySpace
    values: np.ndarray

    def __post_init__(self):
        v = _frozen(self.values)
        if v.shape != (self.space.atom_count,):
            raise DimensionError(f"values have shape {v.shape}, expected ({self.space.atom_count},)")
        if not np.all(np.isfinite(v)):
            raise DomainError("L0Real values must be finite")
        object.__setattr__(self, "values", v)

    def _coerce(self, other) -> np.ndarray:
        if isinstance(other, L0Real):
            _check_same(self.space, other.space)
            return other.values
        return np.asarray(other, dtype=float)

    def __add__(self, other):
        return L0Real(self.space, self.values + self._coerce(other))

    __radd__ = __add__

    def __sub__(self, other):
        return L0Real(self.space, self.values - self._coerce(other))

    def __rsub__(self, other):
        return L0Real(self.space, self._coerce(other) - self.values)

    def __mul__(self, other):
        return L0Real(self.space, self.values * self._coerce(other))

    __rmul__ = __mul__

    def __neg__(self):
        return L0Real(self.space, -self.values)

    def __abs__(self):
        return L0Real(self.space, np.abs(self.values))

    def max(self) -> float:
        return float(self.values.max())

    def min(self) -> float:
        return float(self.values.min())

    def expectation(self) -> float:
        total = 0.0
        for w, v in zip(self.space.weights, self.values):
            total += w * v
        return float(total)

    def allclose(self, other: "L0Real", atol: float = 1e-12) -> bool:
        return bool(np.all(np.abs(self.values - self._coerce(other)) <= atol))

    def __repr__(self):
        return f"L0Real({self.values.tolist()})"


@dataclass(frozen=True, eq=False)
class Partition:
    space: AtomicProbabilitySpace
    pieces: tuple[MeasurableSet, ...]

    def __len__(self):
        return len(self.pieces)

    def __iter__(self):
        return iter(self.pieces)

    def labels(self) -> np.ndarray:
        """Piece index of every atom."""
        out = np.empty(self.space.atom_count, dtype=int)
        for i, piece in enumerate(self.pieces):
            out[piece.membership] = i
        return out

    @classmethod
    def from_labels(cls, space: AtomicProbabilitySpace, labels: Sequence[int]) -> "Partition":
        labels = np.asarray(labels)
        pieces = [MeasurableSet(space, labels == lab) for lab in sorted(set(labels.tolist()))]
        return validate_partition(pieces)

    @classmethod
    def trivial(cls, space: AtomicProbabilitySpace) -> "Partition":
        return validate_partition([space.full()])


def almost_sure_leq(xi: L0Real, eta: L0Real) -> bool:
    _check_same(xi.space, eta.space)
    return bool(np.all(xi.values <= eta.values + xi.space.tol))


def lattice_sup(family: Sequence[L0Real]) -> L0Real:
    family = list(family)
    if not family:
        raise DomainError("supremum of an empty family")
    space = family[0].space
    for member in family[1:]:
        _check_same(space, member.space)
    return L0Real(space, np.max(np.stack([m.values for m in family]), axis=0))


def lattice_inf(family: Sequence[L0Real]) -> L0Real:
    family = list(family)
    if not family:
        raise DomainError("infimum of an empty family")
    space = family[0].space
    for member in family[1:]:
        _check_same(space, member.space)
    return L0Real(space, np.min(np.stack([m.values for m in family]), axis=0))


def indicator(A: MeasurableSet) -> L0Real:
    return L0Real(A.space, A.membership.astype(float))


def prob_of_exceed(xi: L0Real, eps: float) -> float:
    """P{|xi| >= eps}."""
    if not eps > 0:
        raise DomainError(f"eps must be > 0, got {eps}")
    mask = np.abs(xi.values) >= eps
    total = 0.0
    for w in xi.space.weights[mask]:
        total += w
    return float(total)


def converges_in_probability(seq: Sequence[L0Real], limit: L0Real, eps: float, lam: float, tail: int) -> bool:
    """Finite-horizon check that ``P{|seq_n - limit| >= eps} < lam`` for all n >= tail."""
    seq = list(seq)
    if not 0 < lam < 1:
        raise DomainError(f"lambda must lie in (0, 1), got {lam}")
    if not eps > 0:
        raise DomainError(f"eps must be > 0, got {eps}")
    if not 0 <= tail < len(seq):
        raise DomainError(f"tail {tail} out of range for a sequence of length {len(seq)}")
    return all(prob_of_exceed(seq[n] - limit, eps) < lam for n in range(tail, len(seq)))


def validate_partition(pieces: Sequence[MeasurableSet]) -> Partition:
    pieces = list(pieces)
    if not pieces:
        raise PartitionError("no pieces given")
    space = pieces[0].space
    owner = np.full(space.atom_count, -1)
    kept = []
    for piece in pieces:
        _check_same(space, piece.space)
        if piece.is_empty():
            continue
        clash = np.flatnonzero(piece.membership & (owner >= 0))
        if clash.size:
            atom = int(clash[0])
            raise PartitionError(f"pieces overlap at atom {atom}", atom=atom)
        owner[piece.membership] = len(kept)
        kept.append(piece)
    gaps = np.flatnonzero(owner < 0)
    if gaps.size:
        atom = int(gaps[0])
        raise PartitionError(f"atom {atom} is not covered by any piece", atom=atom)
    return Partition(space, tuple(kept))
