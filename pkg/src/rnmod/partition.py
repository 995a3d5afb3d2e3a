"""Splitting a random asymptotically nonexpansive map into classical ones.

The atom set is cut in three stages:

1. rate groups on which the certificate converges to 1 uniformly,
2. integer bins of the running certificate maximum up to the group's
   settling index,
3. integer bins of the body bound.

On each resulting piece the restricted map is asymptotically nonexpansive
in the L^p norm with constants ``beta_m`` = largest certificate on the piece.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .duality import lp_norm
from .dynamics import AsymptoticMap
from .errors import DomainError, NonConvergenceError, SigmaStabilityError
from .measure import L0Real, MeasurableSet, Partition, validate_partition
from .module import ConvexBody, RNElement, body_contains, glue, restrict

EGOROFF_TOL = 1e-3
BETA_LIMIT_TOL = 1e-6


@dataclass(frozen=True, eq=False)
class PieceData:
    piece: MeasurableSet
    norm_bound: int
    beta: np.ndarray
    group: int = 0
    eta_bin: int = 0
    settle_index: int = 1

    def beta_converged(self, tol: float = BETA_LIMIT_TOL) -> bool:
        return abs(self.beta[-1] - 1.0) <= tol


def _eta_rows(eta) -> np.ndarray:
    if isinstance(eta, np.ndarray):
        return eta
    return np.stack([e.values if isinstance(e, L0Real) else np.asarray(e, dtype=float) for e in eta])


def _tail_envelope(rows: np.ndarray) -> np.ndarray:
    """env[m] = max over m' >= m (up to the horizon) of |eta_m' - 1|, per atom."""
    gap = np.abs(rows - 1.0)
    return np.maximum.accumulate(gap[::-1], axis=0)[::-1]


def egoroff_pieces(eta: Sequence[L0Real], horizon: int, space=None) -> Partition:
    """Group atoms so the certificate converges to 1 uniformly on every group.

    Atoms are binned by floor(max_m m |eta_m - 1|). The nested sets
    E_k = {bin <= b_k} are disjointified as E_k minus the union of E_i, i < k.
    """
    if horizon < 1:
        raise DomainError("horizon must be >= 1")
    seq = list(eta)
    if len(seq) < horizon:
        raise DomainError(f"need {horizon} certificate terms, got {len(seq)}")
    seq = seq[:horizon]
    space = space or seq[0].space
    rows = _eta_rows(seq)
    final_gap = np.abs(rows[-1] - 1.0)
    if final_gap.max() > EGOROFF_TOL:
        atom = int(np.argmax(final_gap))
        raise NonConvergenceError(
            f"certificate does not approach 1 at atom {atom}: eta_{horizon} = {rows[-1][atom]!r}", atom=atom
        )
    m = np.arange(1, horizon + 1)[:, None]
    rate_bin = np.floor(np.max(m * np.abs(rows - 1.0), axis=0)).astype(np.int64)
    levels = sorted(set(rate_bin.tolist()))
    nested = [MeasurableSet(space, rate_bin <= b) for b in levels]
    pieces, seen = [], space.empty()
    for E in nested:
        pieces.append(E - seen)
        seen = seen | E
    part = validate_partition(pieces)
    for piece in part.pieces:
        env = _tail_envelope(rows[:, piece.membership]).max(axis=1)
        if np.any(np.diff(env) > 0) or env[-1] > EGOROFF_TOL:
            raise NonConvergenceError(f"convergence is not uniform on piece {piece}")
    return part


def lemma31_partition(f: AsymptoticMap, G: ConvexBody | None = None, horizon: int = 64) -> list[PieceData]:
    """Refine the rate groups by certificate bins and body-bound bins.

    Bins are half-open: an atom with value v lands in bin j when j-1 <= v < j.
    """
    G = G if G is not None else f.domain
    space = f.space
    rows = f.eta_table(horizon)
    groups = egoroff_pieces(list(rows), horizon, space)
    xi = G.bound().values
    c_bin = np.floor(xi).astype(np.int64) + 1

    out = []
    for k, omega_k in enumerate(groups.pieces, start=1):
        mask = omega_k.membership
        env = _tail_envelope(rows[:, mask]).max(axis=1)
        settle = int(np.argmax(env <= 1.0)) + 1 if np.any(env <= 1.0) else horizon
        running = rows[:settle].max(axis=0)
        h_bin = np.floor(running).astype(np.int64) + 1
        for j in sorted(set(h_bin[mask].tolist())):
            for n in sorted(set(c_bin[mask & (h_bin == j)].tolist())):
                sel = mask & (h_bin == j) & (c_bin == n)
                if not sel.any():
                    continue
                beta = rows[:, sel].max(axis=1)
                out.append(PieceData(MeasurableSet(space, sel), int(n), beta, k, int(j), settle))
    validate_partition([pd.piece for pd in out])
    return out


def pieces_partition(pieces: Sequence[PieceData]) -> Partition:
    return validate_partition([pd.piece for pd in pieces])


class InducedMap:
    """The classical map u = I_A x  ->  I_A f(x) on the restricted body I_A G.

    A representative x is rebuilt by filling u off the piece with a member
    of G; two different fillers must give the same answer.
    """

    def __init__(self, f: AsymptoticMap, piece: MeasurableSet, check: bool = True):
        self.f = f
        self.piece = piece
        self.domain = f.domain.restrict(piece)
        self._split = validate_partition([piece, piece.complement()])
        self._fillers = [f.domain.midpoint()]
        if check:
            self._fillers.append(f.domain.sample(np.random.default_rng(12345)))

    def lift(self, u: RNElement, filler: RNElement | None = None) -> RNElement:
        filler = self._fillers[0] if filler is None else filler
        if len(self._split.pieces) == 1:
            return u
        return glue(self._split, [u, filler])

    def __call__(self, u: RNElement) -> RNElement:
        outs = [restrict(self.piece, self.f(self.lift(u, g))) for g in self._fillers]
        for other in outs[1:]:
            if not np.array_equal(other.fibers, outs[0].fibers):
                raise SigmaStabilityError(f"{self.f.name} is not local on piece {self.piece}")
        return outs[0]

    def iterate(self, u: RNElement, m: int) -> RNElement:
        for _ in range(m):
            u = self(u)
        return u


def induced_map(f: AsymptoticMap, piece: MeasurableSet) -> InducedMap:
    return InducedMap(f, piece)


@dataclass
class LipschitzReport:
    horizon: int
    pairs: int
    p: float
    violations: list[tuple[int, int, float, float]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def induced_lipschitz_check(f: AsymptoticMap, pd: PieceData, p: float = 2.0, horizon: int = 32,
                            samples: int = 8, seed: int = 0) -> LipschitzReport:
    """Check ||f_i^m u - f_i^m v||_p <= beta_m ||u - v||_p on sampled pairs.

    Violations are recorded as (pair index, m, lhs, rhs).
    """
    if not 1 < p < np.inf:
        raise DomainError(f"p must lie in (1, inf), got {p}")
    if horizon > pd.beta.size:
        raise DomainError(f"piece carries {pd.beta.size} constants, horizon {horizon} requested")
    fi = induced_map(f, pd.piece)
    rng = np.random.default_rng(seed)
    report = LipschitzReport(horizon, samples, p)
    for s in range(samples):
        u = restrict(pd.piece, f.domain.sample(rng))
        v = u if s == 0 else restrict(pd.piece, f.domain.sample(rng))
        base = lp_norm(u - v, p)
        fu, fv = u, v
        for m in range(1, horizon + 1):
            fu, fv = fi(fu), fi(fv)
            lhs = lp_norm(fu - fv, p)
            rhs = pd.beta[m - 1] * base + 1e-9
            if lhs > rhs:
                report.violations.append((s, m, lhs, rhs))
    return report


def restricted_body_checks(f: AsymptoticMap, pd: PieceData, samples: int = 16, seed: int = 0) -> bool:
    """Sampled members of I_A G respect norm_bound in every L^p and convex combinations stay inside."""
    body = f.domain.restrict(pd.piece)
    rng = np.random.default_rng(seed)
    prev = None
    for _ in range(samples):
        u = restrict(pd.piece, f.domain.sample(rng))
        if not body_contains(body, u, 1e-9):
            return False
        for p in (1.0, 2.0, 3.0, np.inf):
            if lp_norm(u, p) > pd.norm_bound + 1e-12:
                return False
        if prev is not None:
            t = rng.random()
            if not body_contains(body, t * u + (1 - t) * prev, 1e-9):
                return False
        prev = u
    return True


def recomposition_check(f: AsymptoticMap, pieces: Sequence[PieceData], x: RNElement,
                        atol: float = 1e-12) -> bool:
    """f(x) equals the concatenation of the induced maps applied to the restrictions of x."""
    part = pieces_partition(pieces)
    parts = [induced_map(f, pd.piece)(restrict(pd.piece, x)) for pd in pieces]
    return glue(part, parts).equals(f(x), atol=atol)
