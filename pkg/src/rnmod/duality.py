"""L^p(E) norms, random conjugate functionals, the integral pairing and convergence checks."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DimensionError, DomainError, PreconditionError
from .measure import (
    AtomicProbabilitySpace,
    L0Real,
    MeasurableSet,
    Partition,
    _check_same,
    _frozen,
    converges_in_probability,
)
from .module import FiberSpec, RNElement, fiber_norms, l0_norm, separated_support


@dataclass(frozen=True, eq=False)
class RandomFunctional:
    """An L0-linear functional given by one dual fiber vector per atom.

    Calling it on an element returns the atom-wise pairing as an L0Real.
    """

    space: AtomicProbabilitySpace
    fiber: FiberSpec
    dual_fibers: np.ndarray

    def __post_init__(self):
        f = _frozen(self.dual_fibers)
        if f.ndim == 1 and self.fiber.dimension == 1:
            f = _frozen(f.reshape(-1, 1))
        if f.shape != (self.space.atom_count, self.fiber.dimension):
            raise DimensionError(f"dual fibers have shape {f.shape}")
        object.__setattr__(self, "dual_fibers", f)

    @property
    def dual_exponent(self) -> float:
        return self.fiber.dual_exponent

    def __call__(self, x: RNElement) -> L0Real:
        _check_same(self.space, x.space)
        if x.fiber.dimension != self.fiber.dimension:
            raise DimensionError("fiber dimensions differ")
        return L0Real(self.space, np.sum(self.dual_fibers * x.fibers, axis=1))

    def scale(self, xi: L0Real) -> "RandomFunctional":
        return RandomFunctional(self.space, self.fiber, xi.values[:, None] * self.dual_fibers)

    def __add__(self, other: "RandomFunctional") -> "RandomFunctional":
        return RandomFunctional(self.space, self.fiber, self.dual_fibers + other.dual_fibers)


@dataclass(frozen=True)
class HolderPair:
    p: float
    q: float

    def __post_init__(self):
        if not 1 <= self.p < np.inf:
            raise DomainError(f"p must lie in [1, inf), got {self.p}")
        expected = np.inf if self.p == 1 else self.p / (self.p - 1)
        if not np.isclose(self.q, expected, rtol=1e-12):
            raise DomainError(f"q={self.q} is not conjugate to p={self.p}")

    @classmethod
    def of(cls, p: float) -> "HolderPair":
        return cls(p, np.inf if p == 1 else p / (p - 1))


@dataclass(frozen=True, eq=False)
class ConvexityParams:
    epsilon: L0Real
    delta: L0Real

    def __post_init__(self):
        e, d = self.epsilon.values, self.delta.values
        if not (np.all(e > 0) and np.all(e <= 2)):
            raise DomainError("epsilon must lie in (0, 2] atom-wise")
        if not (np.all(d > 0) and np.all(d <= 1)):
            raise DomainError("delta must lie in (0, 1] atom-wise")


def lq_norm_of(xi: L0Real, p: float) -> float:
    """L^p norm of a scalar random variable, summed in ascending atom order."""
    if p < 1:
        raise DomainError(f"p must be >= 1, got {p}")
    a = np.abs(xi.values)
    if p == np.inf:
        return float(a.max())
    total = 0.0
    for w, v in zip(xi.space.weights, a):
        total += w * v ** p
    return total ** (1.0 / p)


def lp_norm(x: RNElement, p: float) -> float:
    return lq_norm_of(l0_norm(x), p)


def conjugate_norm(F: RandomFunctional) -> L0Real:
    """Atom-wise dual norm of the functional (the least random Lipschitz bound)."""
    return L0Real(F.space, fiber_norms(F.dual_fibers, F.dual_exponent))


def alignment(F: RandomFunctional) -> RNElement:
    """Unit-norm fibers u with F(u) = ||F||* atom-wise (zero where F vanishes)."""
    qs = F.dual_exponent
    g = F.dual_fibers
    raw = np.sign(g) * np.abs(g) ** (qs - 1.0)
    nrm = fiber_norms(raw, F.fiber.exponent)
    safe = np.where(nrm > 0, nrm, 1.0)
    return RNElement(F.space, F.fiber, raw / safe[:, None])


def canonical_T(F: RandomFunctional, x: RNElement) -> float:
    """Integral of the pairing F(x) against P."""
    return F(x).expectation()


def _best_allocation(space: AtomicProbabilitySpace, gain: np.ndarray, p: float) -> np.ndarray:
    """Nonnegative t with sum P t^p = 1 maximizing sum P t gain (gain >= 0)."""
    if not np.any(gain > 0):
        return np.zeros_like(gain)
    if p == 1:
        t = np.zeros_like(gain)
        k = int(np.argmax(gain))
        t[k] = 1.0 / space.weights[k]
        return t
    conj = p / (p - 1)
    t = gain ** (conj - 1.0)
    return t / (np.sum(space.weights * t ** p)) ** (1.0 / p)


def operator_norm_oracle(F: RandomFunctional, pair: HolderPair, grid: int = 16) -> float:
    """Brute-force sup of |T_F(x)| over the unit ball of L^p(E).

    Candidates are the dual alignment plus ``grid`` seeded random fiber
    directions per atom; masses per candidate are allocated optimally.
    Each candidate is scored as |T_F(x)| / ||x||_p, so only the pairing and
    the L^p norm enter the score.
    """
    if grid < 1:
        raise DomainError("grid must be >= 1")
    p = pair.p
    rng = np.random.default_rng(grid)
    n, d = F.space.atom_count, F.fiber.dimension
    dirs = [alignment(F).fibers]
    for _ in range(grid):
        g = rng.standard_normal((n, d))
        nrm = fiber_norms(g, F.fiber.exponent)
        dirs.append(g / np.where(nrm > 0, nrm, 1.0)[:, None])
    best = 0.0
    for u in dirs:
        gain = np.sum(F.dual_fibers * u, axis=1)
        u = u * np.sign(gain)[:, None]
        t = _best_allocation(F.space, np.abs(gain), p)
        x = RNElement(F.space, F.fiber, u * t[:, None])
        size = lp_norm(x, p)
        if size > 0:
            best = max(best, abs(canonical_T(F, x)) / size)
    return best


def coordinate_family(space: AtomicProbabilitySpace, fiber: FiberSpec,
                      partition: Partition | None = None) -> list[RandomFunctional]:
    """Dual coordinate basis scaled by each piece indicator; norming on atomic models."""
    if partition is None:
        partition = Partition.trivial(space)
    family = []
    for piece in partition.pieces:
        for j in range(fiber.dimension):
            g = np.zeros((space.atom_count, fiber.dimension))
            g[piece.membership, j] = 1.0
            family.append(RandomFunctional(space, fiber, g))
    return family


def random_weak_converges(seq: Sequence[RNElement], x: RNElement, family: Sequence[RandomFunctional],
                          eps: float, lam: float, tail: int) -> bool:
    family = list(family)
    if not family:
        raise DomainError("test family is empty")
    seq = list(seq)
    return all(
        converges_in_probability([F(s) for s in seq], F(x), eps, lam, tail) for F in family
    )


def eps_lambda_converges(seq: Sequence[RNElement], x: RNElement, eps: float, lam: float, tail: int) -> bool:
    return converges_in_probability([l0_norm(s - x) for s in seq], x.space.constant(0.0), eps, lam, tail)


def random_uc_witness_check(x: RNElement, y: RNElement, D: MeasurableSet, params: ConvexityParams) -> bool:
    """Atom-wise: on D, ||x - y|| >= eps forces ||x + y|| <= 2(1 - delta).

    Atoms of D outside B_{x,y} carry no requirement; an empty effective D
    makes the check vacuous.
    """
    tol = x.space.tol
    nx, ny = l0_norm(x).values, l0_norm(y).values
    if np.any(nx > 1 + tol) or np.any(ny > 1 + tol):
        raise PreconditionError("x and y must lie in the random closed unit ball")
    live = (D & separated_support(x, y)).membership
    diff = l0_norm(x - y).values
    summ = l0_norm(x + y).values
    hyp = live & (diff >= params.epsilon.values)
    return bool(np.all(summ[hyp] <= 2.0 * (1.0 - params.delta.values[hyp]) + tol))


def hilbert_modulus(eps: float) -> float:
    return 1.0 - np.sqrt(1.0 - eps * eps / 4.0)


def _pair_at_distance(x: np.ndarray, b: np.ndarray, eps: float, norm) -> np.ndarray | None:
    """Unit y on the normalized segment from x to b with ||x - y|| = eps, by bisection."""
    def point(t):
        v = (1 - t) * x + t * b
        n = norm(v)
        return v / n if n > 0 else None

    end = point(1.0)
    if end is None or norm(x - end) < eps:
        return None
    lo, hi = 0.0, 1.0
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        y = point(mid)
        if y is None or norm(x - y) < eps:
            lo = mid
        else:
            hi = mid
    y = point(hi)
    return y


def lp_uc_modulus_estimate(p: float, eps: float, samples: int = 200, seed: int = 0,
                           space: AtomicProbabilitySpace | None = None,
                           fiber: FiberSpec | None = None) -> float:
    """Estimate the modulus of convexity of L^p(E) at ``eps``.

    Random unit pairs at distance exactly ``eps`` are drawn, then the best
    pairs are perturbed in 2*samples local refinement steps. Every candidate
    is feasible, so the result approaches the modulus from above.
    Defaults: two equally weighted atoms, fibers R^2 with exponent ``p``.
    """
    if not 1 < p < np.inf:
        raise DomainError(f"p must lie in (1, inf), got {p}")
    if not 0 < eps <= 2:
        raise DomainError(f"eps must lie in (0, 2], got {eps}")
    if space is None:
        space = AtomicProbabilitySpace.uniform(2)
    if fiber is None:
        fiber = FiberSpec(2, p)
    n, d = space.atom_count, fiber.dimension

    def norm(v):
        return lq_norm_of(L0Real(space, fiber_norms(v, fiber.exponent)), p)

    def unit(v):
        return v / norm(v)

    def score(x, b):
        y = _pair_at_distance(x, b, eps, norm)
        if y is None:
            return None
        return max(0.0, 1.0 - norm(0.5 * (x + y)))

    rng = np.random.default_rng(seed)
    best_val, best = np.inf, None
    for _ in range(samples):
        x = unit(rng.standard_normal((n, d)))
        b = unit(rng.standard_normal((n, d)))
        if rng.random() < 0.5:
            b = unit(-x + 0.3 * b)
        val = score(x, b)
        if val is not None and val < best_val:
            best_val, best = val, (x, b)
    if best is None:
        # eps near 2: only near-antipodal pairs qualify
        x = unit(rng.standard_normal((n, d)))
        best, best_val = (x, -x), score(x, -x)
        if best_val is None:
            return 1.0
    step = 0.3
    for k in range(2 * samples):
        x, b = best
        cand = (unit(x + step * rng.standard_normal((n, d))), unit(b + step * rng.standard_normal((n, d))))
        val = score(*cand)
        if val is not None and val < best_val:
            best_val, best = val, cand
        elif k % 20 == 19:
            step *= 0.7
    return float(best_val)
