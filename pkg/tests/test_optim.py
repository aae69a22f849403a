"""Optimizer update rules against hand-derived sequences."""

import json

import numpy as np
import pytest

from pestid.optim import EPSILON, Adam, HyperParams, RMSprop, SGD, load_optimizer, make_optimizer


def hand_sgd(w, g, lr):
    return w - lr * g


def hand_rmsprop_sequence(w, lr, rho, eps, grad_fn, steps):
    """Independent transcription of the update rule."""
    v = 0.0
    out = []
    for _ in range(steps):
        g = grad_fn(w)
        v = rho * v + (1 - rho) * g * g
        w = w - lr * g / (np.sqrt(v) + eps)
        out.append(w)
    return out


def hand_adam_sequence(w, lr, beta1, beta2, eps, grad_fn, steps):
    m = v = 0.0
    out = []
    for t in range(1, steps + 1):
        g = grad_fn(w)
        m = beta1 * m + (1 - beta1) * g
        v = beta2 * v + (1 - beta2) * g * g
        m_hat = m / (1 - beta1 ** t)
        v_hat = v / (1 - beta2 ** t)
        w = w - lr * m_hat / (np.sqrt(v_hat) + eps)
        out.append(w)
    return out


def quadratic_grad(w):
    return 2.0 * w  # f(w) = w^2


class TestClosedForm:
    def test_sgd_single_step(self):
        opt = SGD(0.1)
        got = opt.step(np.array([1.0]), np.array([2.0]))
        assert abs(got[0] - 0.8) < 1e-15

    def test_rmsprop_first_step_lands_near_0_6838(self):
        opt = RMSprop(0.1)
        got = opt.step(np.array([1.0]), np.array([2.0]))
        # v = 0.1 * 4 = 0.4; w = 1 - 0.1*2/(sqrt(0.4) + 1e-7)
        expected = 1.0 - 0.2 / (np.sqrt(0.4) + EPSILON)
        assert abs(got[0] - expected) < 1e-12
        assert abs(got[0] - 0.6838) < 5e-5

    def test_adam_first_step_magnitude_is_learning_rate(self):
        opt = Adam(0.1)
        got = opt.step(np.array([1.0]), np.array([2.0]))
        # m_hat/sqrt(v_hat) = g/|g| up to epsilon, so the step is ~lr
        expected = 1.0 - 0.1 * 2.0 / (2.0 + EPSILON)
        assert abs(got[0] - expected) < 1e-9
        assert abs(got[0] - 0.9) < 1e-7

    @pytest.mark.parametrize("name", ["sgd", "rmsprop", "adam"])
    def test_first_two_steps_match_hand_derivation(self, name):
        opt = make_optimizer(name, 0.1)
        w = np.array([1.0])
        got = []
        for _ in range(2):
            w = opt.step(w, quadratic_grad(w))
            got.append(w[0])
        if name == "sgd":
            want1 = hand_sgd(1.0, 2.0, 0.1)
            want2 = hand_sgd(want1, 2.0 * want1, 0.1)
            want = [want1, want2]
        elif name == "rmsprop":
            want = hand_rmsprop_sequence(1.0, 0.1, 0.9, EPSILON, quadratic_grad, 2)
        else:
            want = hand_adam_sequence(1.0, 0.1, 0.9, 0.999, EPSILON, quadratic_grad, 2)
        np.testing.assert_allclose(got, want, atol=1e-10)


class TestProperties:
    @pytest.mark.parametrize("name", ["sgd", "rmsprop", "adam"])
    def test_zero_gradient_leaves_params_unchanged(self, name):
        opt = make_optimizer(name, 0.05)
        params = np.array([1.5, -2.0, 0.25])
        got = opt.step(params, np.zeros(3))
        assert np.array_equal(got, params)
        # and again with accumulated (zero) moments
        got = opt.step(got, np.zeros(3))
        assert np.array_equal(got, params)

    @pytest.mark.parametrize("name", ["sgd", "rmsprop", "adam"])
    def test_quadratic_descent_is_monotone(self, name):
        opt = make_optimizer(name, 0.01)
        w = np.array([1.0])
        previous = abs(w[0])
        for _ in range(50):
            w = opt.step(w, quadratic_grad(w))
            assert abs(w[0]) < previous
            previous = abs(w[0])

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError):
            SGD(0.1).step(np.zeros(3), np.zeros(4))

    def test_non_finite_gradient_names_the_step(self):
        opt = Adam(0.1)
        opt.step(np.zeros(2), np.ones(2))
        with pytest.raises(ValueError, match="step 2"):
            opt.step(np.zeros(2), np.array([np.nan, 0.0]))


class TestSerialization:
    @pytest.mark.parametrize("name", ["sgd", "rmsprop", "adam"])
    def test_state_round_trips_bit_exactly(self, name):
        rng = np.random.default_rng(0)
        opt = make_optimizer(name, 0.01)
        params = rng.normal(size=8)
        for _ in range(5):
            params = opt.step(params, rng.normal(size=8))

        state = json.loads(json.dumps(opt.state_dict()))  # through JSON text
        clone = load_optimizer(state)
        grads = rng.normal(size=8)
        a = opt.step(params.copy(), grads)
        b = clone.step(params.copy(), grads)
        assert np.array_equal(a, b)
        assert clone.t == opt.t


class TestHyperParams:
    def test_search_values_accepted(self):
        for optimizer in ("adam", "rmsprop", "sgd"):
            for lr in (1e-1, 1e-2, 1e-3, 1e-4, 1e-5):
                for dropout in (0.2, 0.3, 0.4, 0.5):
                    HyperParams(optimizer, lr, dropout)

    def test_invalid_values_rejected(self):
        with pytest.raises(ValueError):
            HyperParams("adagrad", 0.1, 0.2)
        with pytest.raises(ValueError):
            HyperParams("adam", 0.0, 0.2)
        with pytest.raises(ValueError):
            HyperParams("adam", 0.1, 1.0)
