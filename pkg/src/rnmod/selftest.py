"""Quick invariant corpus, run by ``rnmod selftest``.

Each check returns a ``CheckResult``; counts are scaled down from the test
suite so the whole corpus finishes in a few seconds.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .duality import (
    HolderPair,
    RandomFunctional,
    canonical_T,
    conjugate_norm,
    lp_norm,
    lq_norm_of,
    operator_norm_oracle,
)
from .experiment import run_suite, shipped_scenarios
from .measure import indicator
from .module import FiberSpec, glue, l0_norm, module_scale
from .partition import lemma31_partition, pieces_partition, recomposition_check
from .sampling import (
    MAP_KINDS,
    random_element,
    random_instance,
    random_l0,
    random_partition,
    random_set,
    random_space,
)


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str = ""

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.name}" + (f": {self.detail}" if self.detail else "")


def check_rn_axioms(count: int = 200, seed: int = 0) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for d in (1, 2, 3):
        for q in (1.5, 2.0, 3.0):
            fiber = FiberSpec(d, q)
            for _ in range(count):
                space = random_space(rng)
                xi = random_l0(rng, space)
                x, y = random_element(rng, space, fiber), random_element(rng, space, fiber)
                A = random_set(rng, space)
                nx = l0_norm(x).values
                worst = max(
                    worst,
                    np.max(np.abs(l0_norm(module_scale(xi, x)).values - np.abs(xi.values) * nx)),
                    np.max(l0_norm(x + y).values - nx - l0_norm(y).values),
                    np.max(np.abs(l0_norm(module_scale(indicator(A), x)).values - indicator(A).values * nx)),
                )
                zero_atoms = np.all(x.fibers == 0, axis=1)
                if not np.array_equal(nx == 0, zero_atoms):
                    return CheckResult("rn-axioms", False, "zero norm without zero fiber")
    return CheckResult("rn-axioms", worst <= 1e-9, f"worst slack {worst:.2e}")


def check_isometry(count: int = 40, seed: int = 1) -> CheckResult:
    rng = np.random.default_rng(seed)
    pair = HolderPair.of(2.0)
    worst, holder_ok = 0.0, True
    for _ in range(count):
        space = random_space(rng, 4)
        fiber = FiberSpec(int(rng.integers(1, 4)), float(rng.choice([1.5, 2.0, 3.0])))
        F = RandomFunctional(space, fiber, rng.standard_normal((space.atom_count, fiber.dimension)))
        target = lq_norm_of(conjugate_norm(F), pair.q)
        worst = max(worst, abs(operator_norm_oracle(F, pair, 16) - target))
        x = random_element(rng, space, fiber)
        holder_ok &= abs(canonical_T(F, x)) <= target * lp_norm(x, pair.p) + 1e-12
    return CheckResult("isometry", worst <= 1e-6 and holder_ok, f"worst gap {worst:.2e}")


def check_sigma_stability(count: int = 50, seed: int = 2) -> CheckResult:
    rng = np.random.default_rng(seed)
    for kind in MAP_KINDS:
        for _ in range(count):
            space, fiber, body, f = random_instance(rng, kind=kind)
            part = random_partition(rng, space)
            xs = [body.sample(rng) for _ in part.pieces]
            if not np.array_equal(f(glue(part, xs)).fibers, glue(part, [f(x) for x in xs]).fibers):
                return CheckResult("sigma-stability", False, f"{kind} does not commute with gluing")
    return CheckResult("sigma-stability", True, f"{len(MAP_KINDS)} constructors")


def check_recomposition(count: int = 20, seed: int = 3) -> CheckResult:
    rng = np.random.default_rng(seed)
    for _ in range(count):
        space, fiber, body, f = random_instance(rng)
        pieces = lemma31_partition(f, body, 32)
        pieces_partition(pieces)
        for _ in range(10):
            if not recomposition_check(f, pieces, body.sample(rng)):
                return CheckResult("recomposition", False, f.name)
    return CheckResult("recomposition", True)


def check_corpus(seed: int | None = None) -> CheckResult:
    summary = run_suite(shipped_scenarios(), seed=seed)
    counts = summary.counts()
    return CheckResult("scenario-corpus", summary.exit_code == 0, ", ".join(f"{k}={v}" for k, v in sorted(counts.items())))


def run_selftest(seed: int | None = None) -> list[CheckResult]:
    return [
        check_rn_axioms(),
        check_isometry(),
        check_sigma_stability(),
        check_recomposition(),
        check_corpus(seed),
    ]
