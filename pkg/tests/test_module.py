import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from rnmod import (
    AtomicProbabilitySpace,
    ConvexBody,
    DimensionError,
    DomainError,
    FiberSpec,
    L0Real,
    RNElement,
    UnsupportedCombinationError,
    body_contains,
    body_project,
    glue,
    indicator,
    l0_norm,
    module_scale,
    support,
    validate_partition,
)
from rnmod.module import separated_support


@pytest.fixture
def x345(space3, euclid2):
    return RNElement(space3, euclid2, [[3, 4], [0, 0], [1, 0]])


def test_fiber_exponent_range():
    with pytest.raises(DomainError):
        FiberSpec(2, 1.0)
    with pytest.raises(DomainError):
        FiberSpec(2, np.inf)


class TestNorm:
    def test_zero(self, space3, euclid2):
        assert np.array_equal(l0_norm(RNElement.zero(space3, euclid2)).values, [0, 0, 0])

    def test_euclidean(self, x345):
        assert np.allclose(l0_norm(x345).values, [5, 0, 1])

    def test_scaled(self, space3, x345):
        xi = L0Real(space3, [2, 0, 1])
        assert np.allclose(l0_norm(module_scale(xi, x345)).values, [10, 0, 1])

    def test_l3_by_hand(self, space3):
        x = RNElement(space3, FiberSpec(2, 3.0), [[1, 2], [0, -3], [2, 2]])
        # (1 + 8)^(1/3), 3, (16)^(1/3)
        assert np.allclose(l0_norm(x).values, [9 ** (1 / 3), 3, 16 ** (1 / 3)])


class TestScale:
    def test_unit(self, space3, x345):
        assert module_scale(space3.constant(1.0), x345).equals(x345)

    def test_indicator(self, space3, x345):
        out = module_scale(indicator(space3.atoms([0, 2])), x345)
        assert np.array_equal(out.fibers, [[3, 4], [0, 0], [1, 0]])
        out = module_scale(indicator(space3.atoms([1, 2])), x345)
        assert np.array_equal(out.fibers, [[0, 0], [0, 0], [1, 0]])

    def test_by_hand(self, space3, euclid2):
        x = RNElement(space3, euclid2, [[3, 4], [5, 6], [1, 0]])
        out = module_scale(L0Real(space3, [2, 0, 1]), x)
        assert np.array_equal(out.fibers, [[6, 8], [0, 0], [1, 0]])

    def test_mismatch(self, x345):
        with pytest.raises(DimensionError):
            module_scale(AtomicProbabilitySpace.uniform(2).constant(1.0), x345)


class TestSupport:
    def test_null(self, space3, euclid2):
        assert support(RNElement.zero(space3, euclid2)).is_empty()

    def test_by_hand(self, x345):
        assert support(x345).indices == (0, 2)

    def test_b_of_self_is_empty(self, x345):
        assert separated_support(x345, x345).is_empty()


class TestGlue:
    def test_single_piece(self, space3, x345):
        assert glue(validate_partition([space3.full()]), [x345]).equals(x345)

    def test_constant_family(self, space3, x345):
        part = validate_partition([space3.atoms([0]), space3.atoms([1]), space3.atoms([2])])
        assert glue(part, [x345] * 3).equals(x345)

    def test_piecewise(self, space3, euclid2):
        x = RNElement(space3, euclid2, [[1, 1], [2, 2], [3, 3]])
        y = RNElement(space3, euclid2, [[7, 7], [8, 8], [9, 9]])
        part = validate_partition([space3.atoms([0]), space3.atoms([1, 2])])
        assert np.array_equal(glue(part, [x, y]).fibers, [[1, 1], [8, 8], [9, 9]])

    def test_count_mismatch(self, space3, x345):
        with pytest.raises(DomainError):
            glue(validate_partition([space3.full()]), [x345, x345])


class TestBodies:
    def test_ball_contains_center(self, space3, euclid2):
        G = ConvexBody.ball(space3, euclid2, [[1, 2], [3, 4], [5, 6]], [0.0, 1.0, 2.0])
        assert body_contains(G, G.midpoint(), 0.0)

    def test_unit_ball_rejects(self, space3, euclid2, x345):
        G = ConvexBody.ball(space3, euclid2, 0.0, 1.0)
        assert not body_contains(G, x345)

    def test_box_contains_origin(self, space3, euclid2):
        G = ConvexBody.box(space3, euclid2, 0.0, 1.0)
        assert body_contains(G, RNElement.zero(space3, euclid2), 0.0)

    def test_project_member_is_fixed(self, space3, euclid2, rng):
        G = ConvexBody.ball(space3, euclid2, [1, 1], 2.0)
        x = G.sample(rng, boundary_prob=0.0)
        assert body_project(G, x).equals(x)

    def test_project_radial(self, space3, euclid2, x345):
        G = ConvexBody.ball(space3, euclid2, 0.0, 1.0)
        assert np.allclose(body_project(G, x345).fibers[0], [0.6, 0.8])

    def test_box_clamp(self, space3):
        fiber = FiberSpec(1, 3.0)
        G = ConvexBody.box(space3, fiber, 0.0, 1.0)
        x = RNElement(space3, fiber, [[2.5], [0.5], [-1]])
        assert np.array_equal(body_project(G, x).fibers.ravel(), [1, 0.5, 0])

    def test_ball_projection_needs_q2(self, space3, x345):
        G = ConvexBody.ball(space3, FiberSpec(2, 3.0), 0.0, 1.0)
        x = RNElement(space3, FiberSpec(2, 3.0), x345.fibers)
        with pytest.raises(UnsupportedCombinationError):
            body_project(G, x)

    def test_bound_is_sharp_for_box(self, space3, euclid2):
        G = ConvexBody.box(space3, euclid2, [-3, 0], [1, 4])
        assert np.allclose(G.bound().values, 5.0)

    def test_samples_are_members(self, rng):
        for q in (1.5, 2.0, 3.0):
            fiber = FiberSpec(3, q)
            space = AtomicProbabilitySpace.uniform(5)
            for G in (ConvexBody.ball(space, fiber, [1, -1, 0], 2.0), ConvexBody.box(space, fiber, -1.0, [1, 2, 3])):
                for _ in range(20):
                    x = G.sample(rng)
                    assert body_contains(G, x)
                    assert np.all(l0_norm(x).values <= G.bound().values + 1e-12)


# ---------------------------------------------------------------- properties

N = 5
SP = AtomicProbabilitySpace(np.arange(1, N + 1) / (N * (N + 1) / 2))
finite = st.floats(-100, 100, allow_nan=False)


def fibers(d):
    return hnp.arrays(float, (N, d), elements=finite)


fiber_specs = st.builds(FiberSpec, st.integers(1, 3), st.sampled_from([1.5, 2.0, 3.0]))


@given(fiber_specs, st.data())
def test_rnm_axioms(fiber, data):
    x = RNElement(SP, fiber, data.draw(fibers(fiber.dimension)))
    y = RNElement(SP, fiber, data.draw(fibers(fiber.dimension)))
    xi = L0Real(SP, data.draw(hnp.arrays(float, N, elements=finite)))
    nx = l0_norm(x).values
    assert np.array_equal(nx == 0, np.all(x.fibers == 0, axis=1))
    assert np.allclose(l0_norm(module_scale(xi, x)).values, np.abs(xi.values) * nx, rtol=1e-12, atol=1e-9)
    assert np.all(l0_norm(x + y).values <= nx + l0_norm(y).values + 1e-9)


@given(fiber_specs, st.data())
def test_glue_is_local(fiber, data):
    labels = data.draw(hnp.arrays(int, N, elements=st.integers(0, 2)))
    from rnmod import Partition

    part = Partition.from_labels(SP, labels)
    xs = [RNElement(SP, fiber, data.draw(fibers(fiber.dimension))) for _ in part.pieces]
    g = glue(part, xs)
    for piece, x in zip(part.pieces, xs):
        I = indicator(piece)
        assert module_scale(I, g).equals(module_scale(I, x))


@settings(max_examples=60)
@given(st.sampled_from(["ball", "box"]), st.sampled_from([1.5, 2.0, 3.0]), st.integers(0, 2**32 - 1))
def test_bodies_are_l0_convex(kind, q, seed):
    rng = np.random.default_rng(seed)
    fiber = FiberSpec(2, q)
    if kind == "ball":
        G = ConvexBody.ball(SP, fiber, rng.normal(size=(N, 2)), rng.uniform(0, 2, N))
    else:
        lo = rng.normal(size=(N, 2))
        G = ConvexBody.box(SP, fiber, lo, lo + rng.uniform(0, 2, (N, 2)))
    x, y = G.sample(rng), G.sample(rng)
    xi = rng.random(N)
    z = module_scale(L0Real(SP, xi), x) + module_scale(L0Real(SP, 1 - xi), y)
    assert body_contains(G, z, 1e-9)
    A = SP.atoms(np.flatnonzero(rng.random(N) < 0.5))
    w = module_scale(indicator(A), x) + module_scale(indicator(A.complement()), y)
    assert body_contains(G, w, 1e-9)


@given(st.data())
def test_ball_projection_idempotent_nonexpansive(data):
    fiber = FiberSpec(3, 2.0)
    G = ConvexBody.ball(SP, fiber, data.draw(fibers(3)), data.draw(hnp.arrays(float, N, elements=st.floats(0, 50))))
    x = RNElement(SP, fiber, data.draw(fibers(3)))
    y = RNElement(SP, fiber, data.draw(fibers(3)))
    px, py = body_project(G, x), body_project(G, y)
    assert body_contains(G, px, 1e-9)
    assert body_project(G, px).equals(px, atol=1e-12)
    assert np.all(l0_norm(px - py).values <= l0_norm(x - y).values + 1e-9)
