import numpy as np
import pytest

from rnmod import (
    AsymptoticMap,
    AtomicProbabilitySpace,
    ConvexBody,
    DomainError,
    FiberSpec,
    NonConvergenceError,
    PreconditionError,
    RNElement,
    UnsupportedCombinationError,
    body_contains,
    body_project,
    certify,
    glue,
    mann_iterate,
    residual,
)
from rnmod.dynamics import contraction, conjugate, geometric_eta, glued, identity, rotation, transient
from rnmod.sampling import MAP_KINDS, random_instance, random_partition


@pytest.fixture
def ball(space3, euclid2):
    return ConvexBody.ball(space3, euclid2, 0.0, 5.0)


def halving(body):
    return contraction(body, 0.5, RNElement.zero(body.space, body.fiber))


class TestMapConstruction:
    def test_eta_must_settle(self, ball):
        with pytest.raises(NonConvergenceError):
            AsymptoticMap(ball, lambda x: x, lambda m: 1.5, "stuck")

    def test_eta_nonnegative(self, ball):
        with pytest.raises(DomainError):
            AsymptoticMap(ball, lambda x: x, lambda m: -1.0, "neg")

    def test_self_map_spot_check(self, ball):
        shift = lambda x: x._new(x.fibers + 100.0)
        with pytest.raises(DomainError):
            AsymptoticMap(ball, shift, lambda m: 1.0, "shift")

    def test_rotation_needs_q2(self, space3):
        body = ConvexBody.ball(space3, FiberSpec(2, 3.0), 0.0, 1.0)
        with pytest.raises(UnsupportedCombinationError):
            rotation(body, 1.0)

    def test_transient_needs_room(self, space3, euclid2):
        thin = ConvexBody.box(space3, euclid2, [-0.1, -1], [0.1, 1])
        with pytest.raises(DomainError):
            transient(thin, 0.5)

    def test_transient_eta_exceeds_one_first(self, space3):
        body = ConvexBody.box(space3, FiberSpec(3, 2.0), -1.0, 1.0)
        f = transient(body, 0.9)
        # ||A||_2 = 0.9 * sqrt(3)
        assert f.eta(1).values == pytest.approx([0.9 * np.sqrt(3)] * 3)
        assert f.eta(64).values == pytest.approx([1.0] * 3)


class TestCertify:
    def test_halving(self, ball):
        assert certify(halving(ball), 16, 16, 0).ok

    def test_doubling_flags_first_step(self, space3, euclid2):
        # clipped doubling on a box is a self-map that stretches the lower half
        box = ConvexBody.box(space3, euclid2, 0.0, 1.0)
        f = AsymptoticMap(box, lambda x: body_project(box, x * 2.0), lambda m: 1.0, "doubling", horizon=4)
        rep = certify(f, 1, 16, 0)
        assert not rep.ok and all(v.m == 1 for v in rep.violations)

    def test_expanding_rotation_certified_by_growth(self, space3, euclid2):
        body = ConvexBody.ball(space3, euclid2, [1.0, -1.0], 2.0)
        f = rotation(body, [0.3, 1.0, 2.0], rho=0.1)
        assert not f.require_limit
        assert certify(f, 12, 32, 3).ok
        assert f.eta(5).values == pytest.approx([1.1 ** 5] * 3)

    def test_transient_tight_certificate(self, space3):
        body = ConvexBody.box(space3, FiberSpec(3, 1.5), -1.0, 1.0)
        assert certify(transient(body, [0.5, 0.7, 0.9]), 20, 32, 1).ok

    def test_understated_certificate_is_caught(self, space3):
        body = ConvexBody.box(space3, FiberSpec(2, 2.0), -1.0, 1.0)
        f = transient(body, 0.95, eta=lambda m: 1.0)
        assert not certify(f, 4, 32, 0).ok


class TestMann:
    def test_identity(self, ball, rng):
        x0 = ball.sample(rng)
        tr = mann_iterate(identity(ball), x0, 0.5, 20)
        assert all(x.equals(x0) for x in tr.iterates)
        assert all(r.max() == 0 for r in tr.residuals)

    def test_halving_recurrence(self, ball, rng):
        x0 = ball.sample(rng)
        tr = mann_iterate(halving(ball), x0, 0.5, 30)
        for n, x in enumerate(tr.iterates):
            # x_{n+1} = 0.5 * x_n / 2 + 0.5 * x_n = 0.75 x_n
            assert np.allclose(x.fibers, 0.75 ** n * x0.fibers, rtol=1e-13, atol=1e-300)

    def test_zero_schedule(self, ball, rng):
        x0 = ball.sample(rng)
        tr = mann_iterate(halving(ball), x0, [0.0] * 10, 10)
        assert all(x.equals(x0) for x in tr.iterates)
        assert len(tr) == 11 and len(tr.residuals) == 11

    def test_start_outside(self, ball, space3, euclid2):
        far = RNElement(space3, euclid2, np.full((3, 2), 10.0))
        with pytest.raises(PreconditionError):
            mann_iterate(halving(ball), far, 0.5, 3)

    def test_schedule_range(self, ball):
        with pytest.raises(DomainError):
            mann_iterate(halving(ball), ball.midpoint(), 1.5, 3)

    @pytest.mark.parametrize("alpha, c", [(0.0, 1.0), (0.5, 0.5), (0.9, 0.3), (0.2, 0.8)])
    def test_geometric_rate(self, ball, rng, alpha, c):
        f = contraction(ball, alpha, RNElement.zero(ball.space, ball.fiber))
        tr = mann_iterate(f, ball.sample(rng, 1.0), c, 25)
        rate = 1 - c * (1 - alpha)
        for a, b in zip(tr.residuals[:-1], tr.residuals[1:]):
            mask = a.values > 1e-250
            assert np.allclose(b.values[mask] / a.values[mask], rate, rtol=0.05)

    def test_iterates_stay_in_domain(self, rng):
        for kind in MAP_KINDS:
            for _ in range(5):
                _, _, body, f = random_instance(rng, kind=kind)
                tr = mann_iterate(f, body.sample(rng), rng.uniform(0, 1, 50), 50)
                assert all(body_contains(body, x, 1e-9) for x in tr.iterates)


class TestResidual:
    def test_fixed_point(self, ball):
        f = halving(ball)
        assert residual(f, f.fixed_point).max() == 0

    def test_by_hand(self, space3, euclid2, ball):
        x = RNElement(space3, euclid2, [[2, 0], [0, 0], [0, 4]])
        assert np.allclose(residual(halving(ball), x).values, [1, 0, 2])

    def test_atom_relabeling(self, rng):
        space = AtomicProbabilitySpace.uniform(4)
        fiber = FiberSpec(2, 2.0)
        perm = np.array([2, 0, 3, 1])
        center = rng.normal(size=(4, 2))
        angles = rng.uniform(-3, 3, 4)
        f = rotation(ConvexBody.ball(space, fiber, center, 1.0), angles)
        g = rotation(ConvexBody.ball(space, fiber, center[perm], 1.0), angles[perm])
        x = f.domain.sample(rng)
        xp = RNElement(space, fiber, x.fibers[perm])
        assert np.array_equal(residual(g, xp).values, residual(f, x).values[perm])


@pytest.mark.parametrize("kind", MAP_KINDS)
def test_sigma_stability(kind):
    rng = np.random.default_rng(100 + list(MAP_KINDS).index(kind))
    for _ in range(40):
        space, fiber, body, f = random_instance(rng, kind=kind)
        part = random_partition(rng, space)
        xs = [body.sample(rng) for _ in part.pieces]
        assert f(glue(part, xs)).equals(glue(part, [f(x) for x in xs]))


def test_glued_certificate_selects_by_piece(space3, euclid2):
    body = ConvexBody.ball(space3, euclid2, 0.0, 1.0)
    from rnmod import validate_partition

    part = validate_partition([space3.atoms([0, 2]), space3.atoms([1])])
    a = contraction(body, 0.5, eta=geometric_eta(1.0, 0.5))
    b = contraction(body, 0.2, eta=geometric_eta(4.0, 0.5))
    g = glued(part, [a, b])
    assert np.allclose(g.eta(1).values, [1.5, 3.0, 1.5])
    assert certify(g, 10, 10, 0).ok


def test_conjugation_composes(space3, euclid2, rng):
    body = ConvexBody.ball(space3, euclid2, [[1, 2], [3, 4], [-1, 0]], 1.0)
    f = rotation(body, 0.7)
    u0, u1 = body.sample(rng), body.sample(rng)
    twice = conjugate(conjugate(f, u0), u1)
    once = conjugate(f, u0 + u1)
    x = twice.domain.sample(rng)
    assert twice(x).equals(once(x), atol=1e-12)
