import numpy as np
import pytest

from hexplain.errors import DimensionMismatch, InvalidEpsilon, TooLarge
from hexplain.nn import IDENTITY, RELU, Image, Layer, MlpModel, forward
from hexplain.verify import (
    Box,
    RobustnessQuery,
    StabilityVerdict,
    brute_force_stable,
    class_margin,
    decide_stable,
    ibp_bounds,
)

from test_nn import random_model


def image_from(values):
    values = np.asarray(values, dtype=np.float64)
    return Image(values.size, 1, 1, values)


def step_net(weight=5.0, threshold=0.5):
    """One input; class 1 below the threshold, class 0 above it."""
    w = np.array([[weight], [-weight]])
    b = np.array([-weight * threshold, weight * threshold])
    return MlpModel((Layer(w, b, IDENTITY),))


def constant_net(num_inputs=4, logits=(1.0, 0.0)):
    return MlpModel(
        (Layer(np.zeros((len(logits), num_inputs)), np.array(logits, dtype=float), IDENTITY),)
    )


class TestBox:
    def test_bounds_validated(self):
        with pytest.raises(DimensionMismatch):
            Box(np.array([0.5]), np.array([0.2]))
        with pytest.raises(DimensionMismatch):
            Box(np.array([-0.1]), np.array([0.2]))

    def test_query_box_clips_to_unit_interval(self):
        query = RobustnessQuery(
            constant_net(2), image_from([0.1, 0.9]), frozenset(), 0.3, 0
        )
        box = query.box()
        assert np.allclose(box.lower, [0.0, 0.6])
        assert np.allclose(box.upper, [0.4, 1.0])

    def test_eps_one_spans_domain(self):
        query = RobustnessQuery(
            constant_net(2), image_from([0.3, 0.7]), frozenset({1}), 1.0, 0
        )
        box = query.box()
        assert np.allclose(box.lower, [0.0, 0.7])
        assert np.allclose(box.upper, [1.0, 0.7])

    def test_eps_validated(self):
        with pytest.raises(InvalidEpsilon):
            RobustnessQuery(constant_net(1), image_from([0.5]), frozenset(), 0.0, 0)
        with pytest.raises(InvalidEpsilon):
            RobustnessQuery(constant_net(1), image_from([0.5]), frozenset(), 1.5, 0)


class TestIbpBounds:
    def test_point_box_equals_forward(self):
        rng = np.random.default_rng(7001)
        for _ in range(20):
            model = random_model(rng, [3, 5, 4, 2])
            x = rng.uniform(0, 1, 3)
            lower, upper = ibp_bounds(model, Box(x, x))
            logits = forward(model, x)
            assert np.allclose(lower, logits, atol=1e-9)
            assert np.allclose(upper, logits, atol=1e-9)

    def test_constant_network(self):
        model = constant_net(3, (2.0, -1.0))
        lower, upper = ibp_bounds(model, Box(np.zeros(3), np.ones(3)))
        assert np.allclose(lower, [2.0, -1.0])
        assert np.allclose(upper, [2.0, -1.0])

    def test_monte_carlo_soundness(self):
        rng = np.random.default_rng(7002)
        for _ in range(40):
            dims = [int(rng.integers(2, 6)) for _ in range(int(rng.integers(2, 5)))]
            model = random_model(rng, dims)
            lo = rng.uniform(0, 0.5, dims[0])
            hi = lo + rng.uniform(0, 0.5, dims[0])
            box = Box(lo, np.minimum(hi, 1.0))
            lower, upper = ibp_bounds(model, box)
            samples = rng.uniform(box.lower, box.upper, size=(50, dims[0]))
            for sample in samples:
                logits = forward(model, sample)
                assert (logits >= lower - 1e-9).all()
                assert (logits <= upper + 1e-9).all()


class TestDecideStable:
    def test_all_fixed_is_stable(self):
        rng = np.random.default_rng(7003)
        model = random_model(rng, [4, 6, 3])
        x = image_from(rng.uniform(0, 1, 4))
        c = int(np.argmax(forward(model, x)))
        verdict = decide_stable(
            RobustnessQuery(model, x, frozenset(range(4)), 1.0, c)
        )
        assert verdict.is_stable

    def test_constant_network_stable_at_eps_one(self):
        model = constant_net(5)
        x = image_from(np.full(5, 0.5))
        verdict = decide_stable(RobustnessQuery(model, x, frozenset({0, 3}), 1.0, 0))
        assert verdict.is_stable

    def test_step_net_counterexample(self):
        model = step_net()
        x = image_from([0.2])
        assert class_margin(model, x.pixels, 1) > 0
        verdict = decide_stable(RobustnessQuery(model, x, frozenset(), 0.4, 1))
        assert verdict.status == "counterexample"
        assert verdict.counterexample[0] >= 0.5
        # A 0.01-spaced grid over [0, 0.6] confirms the flip independently.
        brute = brute_force_stable(RobustnessQuery(model, x, frozenset(), 0.4, 1), levels=61)
        assert brute.status == "counterexample"

    def test_step_net_stable_when_ball_is_small(self):
        model = step_net()
        x = image_from([0.2])
        verdict = decide_stable(RobustnessQuery(model, x, frozenset(), 0.2, 1))
        assert verdict.is_stable

    def test_monotone_in_eps(self):
        rng = np.random.default_rng(7004)
        checked = 0
        while checked < 10:
            model = random_model(rng, [3, 4, 2])
            x = image_from(rng.uniform(0, 1, 3))
            c = int(np.argmax(forward(model, x)))
            big = decide_stable(RobustnessQuery(model, x, frozenset({0}), 0.5, c))
            if not big.is_stable:
                continue
            small = decide_stable(RobustnessQuery(model, x, frozenset({0}), 0.1, c))
            assert small.is_stable
            checked += 1

    def test_counterexample_is_valid(self):
        rng = np.random.default_rng(7005)
        found = 0
        while found < 15:
            model = random_model(rng, [4, 5, 3])
            x = image_from(rng.uniform(0, 1, 4))
            c = int(np.argmax(forward(model, x)))
            query = RobustnessQuery(model, x, frozenset({1}), 1.0, c)
            verdict = decide_stable(query)
            if verdict.status != "counterexample":
                continue
            point = verdict.counterexample
            box = query.box()
            assert (point >= box.lower).all() and (point <= box.upper).all()
            assert int(np.argmax(forward(model, point))) != c
            found += 1


class TestBruteForce:
    def test_guard(self):
        model = constant_net(30)
        x = image_from(np.full(30, 0.5))
        with pytest.raises(TooLarge):
            brute_force_stable(RobustnessQuery(model, x, frozenset(), 1.0, 0), levels=5)

    def test_all_fixed_stable(self):
        rng = np.random.default_rng(7006)
        model = random_model(rng, [3, 4, 2])
        x = image_from(rng.uniform(0, 1, 3))
        c = int(np.argmax(forward(model, x)))
        verdict = brute_force_stable(
            RobustnessQuery(model, x, frozenset(range(3)), 1.0, c), levels=3
        )
        assert verdict.is_stable

    def test_never_contradicts_stable_verdicts(self):
        rng = np.random.default_rng(7007)
        for _ in range(60):
            dims = [int(rng.integers(2, 6)), int(rng.integers(2, 7)), 2]
            model = random_model(rng, dims)
            x = image_from(rng.uniform(0, 1, dims[0]))
            c = int(np.argmax(forward(model, x)))
            fixed = frozenset(
                i for i in range(dims[0]) if rng.random() < 0.3
            )
            eps = float(rng.choice([0.2, 0.5, 1.0]))
            verdict = decide_stable(RobustnessQuery(model, x, fixed, eps, c))
            brute = brute_force_stable(
                RobustnessQuery(model, x, fixed, eps, c), levels=5
            )
            if verdict.is_stable:
                assert brute.is_stable
