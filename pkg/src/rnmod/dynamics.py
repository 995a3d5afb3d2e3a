"""Random asymptotically nonexpansive self-maps of convex bodies and Mann iteration.

Every map here acts fiber by fiber: the output fiber at an atom depends only
on the input fiber at that atom. That is what makes them commute with gluing.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import DomainError, NonConvergenceError, PreconditionError, UnsupportedCombinationError
from .measure import L0Real, Partition, _check_same
from .module import ConvexBody, RNElement, body_contains, body_project, glue, l0_norm

ETA_LIMIT_TOL = 1e-6
DEFAULT_HORIZON = 64

EtaFn = Callable[[int], np.ndarray]


@dataclass(frozen=True, eq=False)
class AsymptoticMap:
    """A self-map of ``domain`` with a certificate ``eta(m)`` bounding the m-th iterate.

    ``eta_fn(m)`` returns the per-atom certificate for m >= 1. When
    ``require_limit`` is set, construction fails unless the certificate is
    within 1e-6 of 1 at ``horizon``.
    """

    domain: ConvexBody
    func: Callable[[RNElement], RNElement]
    eta_fn: EtaFn
    name: str = "map"
    sigma_stable: bool = True
    fixed_point: RNElement | None = None
    horizon: int = DEFAULT_HORIZON
    require_limit: bool = True

    def __post_init__(self):
        table = self.eta_table(self.horizon)
        if np.any(table < 0):
            raise DomainError(f"{self.name}: certificate has negative entries")
        if self.require_limit:
            gap = np.abs(table[-1] - 1.0)
            if gap.max() > ETA_LIMIT_TOL:
                atom = int(np.argmax(gap))
                raise NonConvergenceError(
                    f"{self.name}: eta_{self.horizon} is {table[-1][atom]!r} at atom {atom}", atom=atom
                )
        rng = np.random.default_rng(0)
        for _ in range(8):
            x = self.domain.sample(rng)
            if not body_contains(self.domain, self(x), 1e-9):
                raise DomainError(f"{self.name} does not map its domain into itself")

    @property
    def space(self):
        return self.domain.space

    def __call__(self, x: RNElement) -> RNElement:
        return self.func(x)

    def iterate(self, x: RNElement, m: int) -> RNElement:
        for _ in range(m):
            x = self.func(x)
        return x

    def eta(self, m: int) -> L0Real:
        if m < 1:
            raise DomainError("certificate index starts at 1")
        values = np.broadcast_to(np.asarray(self.eta_fn(m), dtype=float), (self.space.atom_count,))
        return L0Real(self.space, values)

    def eta_table(self, horizon: int) -> np.ndarray:
        """Rows m = 1..horizon of the certificate."""
        return np.stack([self.eta(m).values for m in range(1, horizon + 1)])

    def with_horizon(self, horizon: int) -> "AsymptoticMap":
        return AsymptoticMap(self.domain, self.func, self.eta_fn, self.name, self.sigma_stable,
                             self.fixed_point, horizon, self.require_limit)


@dataclass
class IterationTrace:
    iterates: list[RNElement]
    residuals: list[L0Real]
    schedule: list[float]

    def __len__(self):
        return len(self.iterates)


@dataclass
class Violation:
    x: RNElement
    y: RNElement
    m: int
    atom: int
    lhs: float
    rhs: float


@dataclass
class CertificateReport:
    horizon: int
    pairs: int
    violations: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def _unit_eta(m):
    return 1.0


def geometric_eta(scale, rate) -> EtaFn:
    """eta_m = 1 + scale * rate**m, per atom."""
    scale = np.asarray(scale, dtype=float)
    rate = np.asarray(rate, dtype=float)
    return lambda m: 1.0 + scale * rate ** m


def _in_body(body: ConvexBody, x: RNElement, what: str):
    if not body_contains(body, x, 1e-9):
        raise DomainError(f"{what} is not in the body")


def identity(body: ConvexBody, horizon: int = DEFAULT_HORIZON) -> AsymptoticMap:
    return AsymptoticMap(body, lambda x: x, _unit_eta, "identity", horizon=horizon)


def contraction(body: ConvexBody, alpha, anchor: RNElement | None = None,
                eta: EtaFn | None = None, horizon: int = DEFAULT_HORIZON) -> AsymptoticMap:
    """x -> anchor + alpha (x - anchor), alpha in [0, 1] per atom."""
    a = np.broadcast_to(np.asarray(alpha.values if isinstance(alpha, L0Real) else alpha, dtype=float),
                        (body.space.atom_count,)).copy()
    if np.any(a < 0) or np.any(a > 1):
        raise DomainError("contraction factor must lie in [0, 1]")
    c = body.midpoint() if anchor is None else anchor
    _in_body(body, c, "anchor")
    cf = c.fibers

    def f(x):
        return x._new(cf + a[:, None] * (x.fibers - cf))

    return AsymptoticMap(body, f, eta or _unit_eta, "contraction", fixed_point=c, horizon=horizon)


def _plane_rotation(angle: np.ndarray, d: int) -> np.ndarray:
    """Per-atom rotation matrices acting on the first two coordinates."""
    n = angle.size
    R = np.tile(np.eye(d), (n, 1, 1))
    c, s = np.cos(angle), np.sin(angle)
    R[:, 0, 0], R[:, 0, 1], R[:, 1, 0], R[:, 1, 1] = c, -s, s, c
    return R


def rotation(body: ConvexBody, angle, rho: float = 0.0, horizon: int = DEFAULT_HORIZON) -> AsymptoticMap:
    """x -> P_G(c + (1 + rho) R (x - c)) about the body midpoint c; needs q = 2, d >= 2.

    With rho > 0 the certificate (1 + rho)^m does not tend to 1, so the
    result is only usable for certificate checks.
    """
    if body.fiber.exponent != 2:
        raise UnsupportedCombinationError("rotation maps need q = 2 fibers")
    if body.fiber.dimension < 2:
        raise UnsupportedCombinationError("rotation maps need fiber dimension >= 2")
    if rho < 0:
        raise DomainError("rho must be >= 0")
    n = body.space.atom_count
    R = _plane_rotation(np.broadcast_to(np.asarray(angle, dtype=float), (n,)), body.fiber.dimension)
    c = body.midpoint()
    cf = c.fibers
    gain = 1.0 + rho

    def f(x):
        y = cf + gain * np.einsum("nij,nj->ni", R, x.fibers - cf)
        return body_project(body, x._new(y))

    return AsymptoticMap(body, f, lambda m: gain ** m, "rotation", fixed_point=c,
                         horizon=horizon, require_limit=rho == 0)


def transient(body: ConvexBody, coefficient, eta: EtaFn | None = None,
              horizon: int = DEFAULT_HORIZON) -> AsymptoticMap:
    """x -> c + a (x_d - c_d) (1, ..., 1) on a box with midpoint c.

    The linear part is a * ones * e_d^T; its m-th power has l_q operator norm
    a^m d^(1/q), so the first iterates may expand while later ones contract.
    """
    if body.kind != "box":
        raise UnsupportedCombinationError("transient maps are defined on box bodies")
    n, d = body.space.atom_count, body.fiber.dimension
    a = np.broadcast_to(np.asarray(coefficient, dtype=float), (n,)).copy()
    if np.any(a < 0) or np.any(a >= 1):
        raise DomainError("transient coefficient must lie in [0, 1)")
    half = 0.5 * (body.upper - body.lower)
    if np.any(a[:, None] * half[:, -1:] > half + 1e-15):
        raise DomainError("box is too thin for this coefficient: a * h_d must not exceed any h_i")
    c = body.midpoint()
    cf = c.fibers
    growth = d ** (1.0 / body.fiber.exponent)

    def f(x):
        return x._new(cf + (a * (x.fibers[:, -1] - cf[:, -1]))[:, None] * np.ones(d))

    if eta is None:
        eta = lambda m: np.maximum(1.0, a ** m * growth)
    return AsymptoticMap(body, f, eta, "transient", fixed_point=c, horizon=horizon)


def glued(partition: Partition, maps: Sequence[AsymptoticMap]) -> AsymptoticMap:
    """Apply maps[k] on piece k. All maps must share one domain."""
    maps = list(maps)
    if len(maps) != len(partition.pieces):
        raise DomainError("one map per piece is required")
    body = maps[0].domain
    for g in maps[1:]:
        if g.domain is not body:
            raise DomainError("glued maps must share the same domain object")
    labels = partition.labels()

    def f(x):
        return glue(partition, [g(x) for g in maps])

    def eta(m):
        rows = np.stack([g.eta(m).values for g in maps])
        return rows[labels, np.arange(labels.size)]

    fps = [g.fixed_point for g in maps]
    fp = glue(partition, fps) if all(p is not None for p in fps) else None
    horizon = max(g.horizon for g in maps)
    return AsymptoticMap(body, f, eta, "glued(" + ",".join(g.name for g in maps) + ")",
                         fixed_point=fp, horizon=horizon,
                         require_limit=all(g.require_limit for g in maps))


def conjugate(f: AsymptoticMap, u0: RNElement) -> AsymptoticMap:
    """The map u -> f(u + u0) - u0 on the translated body ``domain - u0``."""
    body = f.domain.translate(u0)
    fp = None if f.fixed_point is None else f.fixed_point - u0
    return AsymptoticMap(body, lambda u: f(u + u0) - u0, f.eta_fn, f.name, f.sigma_stable,
                         fp, f.horizon, f.require_limit)


def certify(f: AsymptoticMap, horizon: int = DEFAULT_HORIZON, samples: int = 32, seed: int = 0,
            slack: float = 1e-9) -> CertificateReport:
    """Check ||f^m x - f^m y|| <= eta_m ||x - y|| atom-wise on seeded sample pairs."""
    if horizon < 1 or samples < 1:
        raise DomainError("horizon and samples must be >= 1")
    rng = np.random.default_rng(seed)
    report = CertificateReport(horizon, samples)
    table = f.eta_table(horizon)
    for _ in range(samples):
        x, y = f.domain.sample(rng), f.domain.sample(rng)
        base = l0_norm(x - y).values
        fx, fy = x, y
        for m in range(1, horizon + 1):
            fx, fy = f(fx), f(fy)
            lhs = l0_norm(fx - fy).values
            rhs = table[m - 1] * base + slack
            bad = np.flatnonzero(lhs > rhs)
            for atom in bad:
                report.violations.append(Violation(x, y, m, int(atom), float(lhs[atom]), float(rhs[atom])))
    return report


def residual(f: AsymptoticMap, x: RNElement) -> L0Real:
    return l0_norm(x - f(x))


def mann_iterate(f: AsymptoticMap, x0: RNElement, schedule, steps: int) -> IterationTrace:
    """x_{n+1} = c_n f(x_n) + (1 - c_n) x_n, for ``steps`` steps."""
    if np.isscalar(schedule):
        cs = [float(schedule)] * steps
    else:
        cs = [float(c) for c in schedule]
        if len(cs) < steps:
            raise DomainError(f"schedule has {len(cs)} entries, need {steps}")
        cs = cs[:steps]
    if any(not 0.0 <= c <= 1.0 for c in cs):
        raise DomainError("schedule entries must lie in [0, 1]")
    _check_same(f.space, x0.space)
    if not body_contains(f.domain, x0, 1e-9):
        raise PreconditionError("starting point is outside the domain")
    x = x0
    fx = f(x)
    iterates, residuals = [x], [l0_norm(x - fx)]
    for c in cs:
        x = x._new(c * fx.fibers + (1.0 - c) * x.fibers)
        fx = f(x)
        iterates.append(x)
        residuals.append(l0_norm(x - fx))
    return IterationTrace(iterates, residuals, cs)
