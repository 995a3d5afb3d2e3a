"""Seeded random instances: spaces, elements, partitions, bodies and maps."""
from __future__ import annotations

import numpy as np

from .dynamics import AsymptoticMap, contraction, geometric_eta, glued, identity, rotation, transient
from .measure import AtomicProbabilitySpace, L0Real, MeasurableSet, Partition
from .module import ConvexBody, FiberSpec, RNElement

MAP_KINDS = ("identity", "contraction", "rotation", "transient", "glued")


def random_space(rng: np.random.Generator, max_atoms: int = 8, min_atoms: int = 1) -> AtomicProbabilitySpace:
    n = int(rng.integers(min_atoms, max_atoms + 1))
    w = rng.random(n) + 0.05
    return AtomicProbabilitySpace(w / w.sum())


def random_l0(rng, space, scale: float = 3.0) -> L0Real:
    return L0Real(space, scale * rng.standard_normal(space.atom_count))


def random_set(rng, space) -> MeasurableSet:
    return MeasurableSet(space, rng.random(space.atom_count) < 0.5)


def random_element(rng, space, fiber, scale: float = 2.0, sparsity: float = 0.2) -> RNElement:
    f = scale * rng.standard_normal((space.atom_count, fiber.dimension))
    f[rng.random(space.atom_count) < sparsity] = 0.0
    return RNElement(space, fiber, f)


def random_partition(rng, space, max_pieces: int = 4) -> Partition:
    k = int(rng.integers(1, max_pieces + 1))
    labels = rng.integers(0, k, space.atom_count)
    return Partition.from_labels(space, labels)


def random_body(rng, space, fiber, kind: str | None = None) -> ConvexBody:
    n, d = space.atom_count, fiber.dimension
    kind = kind or ("ball" if rng.random() < 0.5 else "box")
    if kind == "ball":
        return ConvexBody.ball(space, fiber, rng.uniform(-2, 2, (n, d)), rng.uniform(0.2, 2.5, n))
    half = rng.uniform(0.2, 2.0, (n, d))
    half[:, -1] = half.min(axis=1)  # keeps transient maps admissible
    mid = rng.uniform(-2, 2, (n, d))
    return ConvexBody.box(space, fiber, mid - half, mid + half)


def allowed_kinds(body: ConvexBody) -> list[str]:
    kinds = ["identity", "contraction"]
    if body.fiber.exponent == 2 and body.fiber.dimension >= 2:
        kinds.append("rotation")
    if body.kind == "box":
        kinds.append("transient")
    return kinds


def random_map(rng, body: ConvexBody, kind: str | None = None, horizon: int = 64,
               depth: int = 0) -> AsymptoticMap:
    """A certified map of the requested kind (``glued`` mixes the others)."""
    n = body.space.atom_count
    kinds = allowed_kinds(body)
    if kind is None:
        kind = str(rng.choice(kinds + (["glued"] if depth == 0 else [])))
    if kind == "identity":
        return identity(body, horizon)
    if kind == "contraction":
        anchor = body.sample(rng)
        eta = None
        if rng.random() < 0.5:
            eta = geometric_eta(rng.uniform(0.5, 3.0, n), rng.uniform(0.1, 0.6, n))
        return contraction(body, rng.uniform(0.0, 1.0, n), anchor, eta, horizon)
    if kind == "rotation":
        return rotation(body, rng.uniform(-np.pi, np.pi, n), 0.0, horizon)
    if kind == "transient":
        a = rng.uniform(0.2, 0.6, n)
        eta = None
        if rng.random() < 0.5:
            growth = body.fiber.dimension ** (1.0 / body.fiber.exponent)
            eta = geometric_eta(growth + rng.uniform(0.0, 1.0, n), np.maximum(a, rng.uniform(0.1, 0.6, n)))
        return transient(body, a, eta, horizon)
    if kind == "glued":
        part = random_partition(rng, body.space)
        return glued(part, [random_map(rng, body, None, horizon, depth + 1) for _ in part.pieces])
    raise ValueError(f"unknown map kind {kind!r}")


def random_instance(rng, max_atoms: int = 6, kind: str | None = None):
    """(space, fiber, body, map) with the body type chosen to admit ``kind``."""
    space = random_space(rng, max_atoms)
    q = float(rng.choice([1.5, 2.0, 3.0]))
    d = int(rng.integers(1, 4))
    if kind == "rotation":
        q, d = 2.0, max(d, 2)
    fiber = FiberSpec(d, q)
    body_kind = "box" if kind == "transient" else None
    body = random_body(rng, space, fiber, body_kind)
    return space, fiber, body, random_map(rng, body, kind)
