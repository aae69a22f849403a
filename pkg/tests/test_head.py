"""Head math: softmax stability, loss, exact gradients, dropout, prediction."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pestid import head as H
from pestid.head import HeadParams, backward, forward, init_params, loss, predict


def random_instance(rng, num_classes=3, dim=4, dropout=0.0):
    params = HeadParams(rng.normal(size=(num_classes, dim)),
                        rng.normal(size=num_classes), dropout)
    features = rng.normal(size=dim)
    return params, features


class TestForward:
    def test_zero_params_give_uniform_probabilities(self):
        params = HeadParams(np.zeros((8, 5)), np.zeros(8), 0.0)
        trace = forward(np.ones(5), params)
        np.testing.assert_allclose(trace.probabilities, np.full(8, 1 / 8), atol=1e-15)

    def test_dropout_zero_train_equals_infer(self):
        rng = np.random.default_rng(0)
        params, features = random_instance(rng, dropout=0.0)
        train = forward(features, params, mode="train", rng=np.random.default_rng(1))
        infer = forward(features, params, mode="infer")
        assert np.array_equal(train.probabilities, infer.probabilities)

    def test_matches_direct_exp_sum_oracle(self):
        rng = np.random.default_rng(2)
        params, features = random_instance(rng)
        trace = forward(features, params)
        logits = params.weights @ features + params.bias
        oracle = np.exp(logits) / np.exp(logits).sum()
        np.testing.assert_allclose(trace.probabilities, oracle, atol=1e-12)

    def test_dimension_mismatch_rejected(self):
        params = HeadParams(np.zeros((2, 3)), np.zeros(2), 0.0)
        with pytest.raises(ValueError):
            forward(np.zeros(4), params)

    @given(st.lists(st.floats(min_value=-1e4, max_value=1e4), min_size=2, max_size=10))
    @settings(max_examples=200, deadline=None)
    def test_softmax_sums_to_one_for_large_logits(self, logits):
        probs = H.softmax(np.array(logits))
        assert abs(probs.sum() - 1.0) < 1e-9
        assert (probs >= 0).all() and (probs <= 1).all()

    def test_inverted_dropout_preserves_expectation(self):
        # E[masked features] == features within 1% over 1e5 draws
        rng = np.random.default_rng(3)
        params = HeadParams(np.zeros((2, 6)), np.zeros(2), 0.4)
        features = rng.uniform(1.0, 2.0, size=6)
        draws = 100_000
        total = np.zeros(6)
        gen = np.random.default_rng(4)
        for _ in range(draws):
            mask = gen.random(6) >= params.dropout_rate
            total += H.masked_features(features, mask, params.dropout_rate)
        np.testing.assert_allclose(total / draws, features, rtol=0.01)


class TestLoss:
    def test_certain_prediction_is_zero(self):
        assert loss(np.array([0.0, 1.0, 0.0]), 1) == 0.0

    def test_uniform_eight_way_is_ln8(self):
        probs = np.full(8, 1 / 8)
        assert abs(loss(probs, 3) - np.log(8)) < 1e-12

    def test_hand_computed_value(self):
        assert abs(loss(np.array([0.7, 0.2, 0.1]), 1) - (-np.log(0.2))) < 1e-12

    def test_floor_prevents_infinite_loss(self):
        assert np.isfinite(loss(np.array([1.0, 0.0]), 1))

    def test_target_out_of_range(self):
        with pytest.raises(ValueError):
            loss(np.array([0.5, 0.5]), 2)


class TestBackward:
    def test_perfect_prediction_gives_zero_gradients(self):
        params = HeadParams(np.zeros((2, 2)), np.zeros(2), 0.0)
        trace = H.ForwardTrace(np.ones(2, dtype=bool), np.zeros(2),
                               np.array([1.0, 0.0]))
        dw, db = backward(trace, np.ones(2), 0, params)
        assert np.abs(dw).max() == 0.0
        assert np.abs(db).max() == 0.0

    def test_hand_differentiated_case(self):
        # C=2, D=1, x=1, p=0.5 each: db = (-0.5, 0.5), dW column matches
        params = HeadParams(np.zeros((2, 1)), np.zeros(2), 0.0)
        trace = forward(np.array([1.0]), params)
        dw, db = backward(trace, np.array([1.0]), 0, params)
        np.testing.assert_allclose(db, [-0.5, 0.5], atol=1e-15)
        np.testing.assert_allclose(dw, [[-0.5], [0.5]], atol=1e-15)

    @pytest.mark.parametrize("seed", range(10))
    def test_matches_central_finite_differences(self, seed):
        rng = np.random.default_rng(seed)
        num_classes, dim = int(rng.integers(2, 6)), int(rng.integers(1, 8))
        params, features = random_instance(rng, num_classes, dim)
        target = int(rng.integers(num_classes))
        trace = forward(features, params)
        dw, db = backward(trace, features, target, params)

        step = 1e-6
        for arr, grad in ((params.weights, dw), (params.bias, db)):
            it = np.nditer(arr, flags=["multi_index"])
            for _ in it:
                idx = it.multi_index
                original = arr[idx]
                arr[idx] = original + step
                up = loss(forward(features, params).probabilities, target)
                arr[idx] = original - step
                down = loss(forward(features, params).probabilities, target)
                arr[idx] = original
                numeric = (up - down) / (2 * step)
                # floor absorbs finite-difference roundoff on tiny components
                denom = max(abs(numeric), abs(grad[idx]), 1e-4)
                assert abs(numeric - grad[idx]) / denom < 1e-4


class TestPredict:
    def test_bias_selects_class(self):
        params = HeadParams(np.zeros((4, 3)), np.array([1.0, 0, 0, 0]), 0.0)
        index, probs = predict(np.zeros(3), params)
        assert index == 0
        assert abs(probs.sum() - 1.0) < 1e-9

    def test_tie_breaks_to_lowest_index(self):
        params = HeadParams(np.ones((3, 2)), np.zeros(3), 0.0)
        index, _ = predict(np.array([0.3, 0.7]), params)
        assert index == 0

    def test_agrees_with_oracle_argmax(self):
        rng = np.random.default_rng(9)
        for _ in range(20):
            params, features = random_instance(rng, 5, 6)
            index, _ = predict(features, params)
            logits = params.weights @ features + params.bias
            oracle = np.exp(logits) / np.exp(logits).sum()
            assert index == int(np.argmax(oracle))

    def test_independent_of_dropout_seed(self):
        rng = np.random.default_rng(10)
        params, features = random_instance(rng, dropout=0.5)
        a = predict(features, params)
        b = predict(features, params)
        assert a[0] == b[0]
        assert np.array_equal(a[1], b[1])


class TestParams:
    def test_param_count_identity(self):
        for dim, expected in ((1280, 10_248), (1920, 15_368), (2048, 16_392),
                              (4032, 32_264)):
            params = init_params(dim, 8, 0.2, np.random.default_rng(0))
            assert params.num_params == expected == H.head_param_count(dim, 8)

    def test_init_bounds_and_zero_bias(self):
        params = init_params(100, 8, 0.2, np.random.default_rng(1))
        limit = np.sqrt(6.0 / 108)
        assert np.abs(params.weights).max() <= limit
        assert np.abs(params.bias).max() == 0.0

    def test_save_load_round_trip(self, tmp_path):
        rng = np.random.default_rng(2)
        params = init_params(6, 3, 0.3, rng)
        params.metadata = {"backbone": "ToyNet", "labels": ["a", "b", "c"],
                           "training_seed": 7,
                           "hyperparams": {"optimizer": "sgd", "learning_rate": 0.1,
                                           "dropout_rate": 0.3}}
        path = tmp_path / "head.json"
        H.save_head(params, path)
        got = H.load_head(path)
        assert np.array_equal(got.weights, params.weights)
        assert np.array_equal(got.bias, params.bias)
        assert got.dropout_rate == 0.3
        assert got.metadata["backbone"] == "ToyNet"
        assert got.metadata["labels"] == ["a", "b", "c"]

    def test_invalid_dropout_rejected(self):
        with pytest.raises(ValueError):
            HeadParams(np.zeros((2, 2)), np.zeros(2), 1.0)
