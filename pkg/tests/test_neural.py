import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from mcaa.errors import DimensionError, DomainError, NumericError, StateError
from mcaa.neural import (MlpModel, backward, fgsm, forward, init_model, input_gradient, load_model,
                         model_from_dict, model_to_dict, nll_loss, save_model, sign, softmax)

from oracles import finite_difference, mlp_loss, rel_close


def zero_model(d=3, widths=(4, 5)):
    dims = [d, *widths, 2]
    return MlpModel(tuple(np.zeros((a, b)) for a, b in zip(dims[:-1], dims[1:])),
                    tuple(np.zeros(b) for b in dims[1:]))


def random_model(rng, d, widths, dropout=0.0, scale=1.0):
    dims = [d, *widths, 2]
    return MlpModel(tuple(rng.normal(scale=scale, size=(a, b)) for a, b in zip(dims[:-1], dims[1:])),
                    tuple(rng.normal(scale=0.5, size=b) for b in dims[1:]), dropout)


class TestForward:
    def test_zero_model_is_uniform(self):
        probs, _ = forward(zero_model(), np.random.default_rng(0).normal(size=(5, 3)))
        assert np.array_equal(probs, np.full((5, 2), 0.5))

    def test_softmax_of_ln2(self):
        probs = softmax(np.array([[np.log(2.0), 0.0]]))
        np.testing.assert_allclose(probs, [[0.6666666666666666, 1 / 3]], rtol=1e-15)

    def test_rows_sum_to_one(self):
        rng = np.random.default_rng(1)
        m = random_model(rng, 4, (6, 3), scale=5.0)
        probs, trace = forward(m, rng.normal(size=(50, 4)) * 10)
        assert np.abs(probs.sum(axis=1) - 1).max() < 1e-9
        assert ((probs >= 0) & (probs <= 1)).all()
        assert trace.probs is probs

    def test_dropout_deterministic_under_seed(self):
        m = init_model(3, (8, 8), dropout_rate=0.3, seed=2)
        X = np.random.default_rng(0).normal(size=(6, 3))
        a, _ = forward(m, X, apply_dropout=True, rng_seed=11)
        b, _ = forward(m, X, apply_dropout=True, rng_seed=11)
        c, _ = forward(m, X, apply_dropout=True, rng_seed=12)
        assert np.array_equal(a, b)
        assert not np.array_equal(a, c)

    def test_pure_without_dropout(self):
        m = init_model(3, (8, 8), dropout_rate=0.3, seed=2)
        X = np.random.default_rng(0).normal(size=(6, 3))
        assert np.array_equal(forward(m, X)[0], forward(m, X, rng_seed=99)[0])

    def test_inverted_dropout_preserves_expectation(self):
        m = init_model(2, (50, 50), dropout_rate=0.3, seed=0)
        X = np.ones((20000, 2))
        _, trace = forward(m, X, apply_dropout=True, rng_seed=0)
        _, plain = forward(m, X)
        np.testing.assert_allclose(trace.post[0].mean(axis=0), plain.post[0][0], rtol=0.05, atol=1e-3)

    def test_all_keep_masks_match_plain(self):
        m = init_model(3, (4, 4), dropout_rate=0.5, seed=0)
        X = np.random.default_rng(3).normal(size=(5, 3))
        ones = [np.ones((5, 4)), np.ones((5, 4))]
        assert np.array_equal(forward(m, X, apply_dropout=True, masks=ones)[0], forward(m, X)[0])

    def test_errors(self):
        m = init_model(3, (4, 4))
        with pytest.raises(DimensionError):
            forward(m, np.zeros((2, 4)))
        with pytest.raises(NumericError):
            forward(m, np.array([[0.0, np.nan, 1.0]]))
        with pytest.raises(DomainError):
            forward(m, np.zeros((2, 3)), apply_dropout=True)


class TestModel:
    def test_shape_invariants(self):
        with pytest.raises(DimensionError):
            MlpModel((np.zeros((2, 3)), np.zeros((4, 3)), np.zeros((3, 2))),
                     (np.zeros(3), np.zeros(3), np.zeros(2)))
        with pytest.raises(DimensionError):
            MlpModel((np.zeros((2, 3)), np.zeros((3, 3)), np.zeros((3, 3))),
                     (np.zeros(3), np.zeros(3), np.zeros(3)))
        with pytest.raises(DomainError):
            init_model(2, (3, 3), dropout_rate=1.0)
        with pytest.raises(DomainError):
            init_model(2, (0, 3))

    def test_immutable(self):
        m = init_model(2, (3, 3))
        with pytest.raises(ValueError):
            m.weights[0][0, 0] = 1.0

    def test_glorot_bounds(self):
        m = init_model(10, (30, 20), seed=5)
        for w in m.weights:
            assert np.abs(w).max() <= np.sqrt(6 / sum(w.shape))

    def test_json_round_trip_bit_exact(self, tmp_path):
        rng = np.random.default_rng(4)
        m = random_model(rng, 5, (7, 3), dropout=0.3).with_standardizer(rng.normal(size=5),
                                                                         rng.uniform(0.1, 2, 5))
        save_model(m, tmp_path / "m.json")
        back = load_model(tmp_path / "m.json")
        assert back.same_params(m) and back.dropout_rate == m.dropout_rate
        assert np.array_equal(back.mean, m.mean) and np.array_equal(back.std, m.std)
        doc = json.loads((tmp_path / "m.json").read_text())
        assert doc["version"] == 1 and doc["widths"] == [7, 3] and doc["input_dim"] == 5

    def test_unknown_version_rejected(self):
        doc = model_to_dict(init_model(2, (3, 3)))
        doc["version"] = 99
        with pytest.raises(DomainError):
            model_from_dict(doc)


class TestLoss:
    def test_perfect(self):
        assert nll_loss([[1.0, 0.0]], [0]) == 0.0

    def test_uniform(self):
        assert nll_loss([[0.5, 0.5], [0.5, 0.5]], [0, 1]) == pytest.approx(np.log(2), rel=1e-15)

    def test_weighted(self):
        assert nll_loss([[0.5, 0.5]], [1], (0.3, 0.7)) == pytest.approx(0.48520302639196167, rel=1e-14)

    def test_clamped(self):
        assert nll_loss([[1.0, 0.0]], [1]) == pytest.approx(-np.log(1e-12))

    def test_empty(self):
        with pytest.raises(DomainError):
            nll_loss(np.zeros((0, 2)), [])


def _fd_check(model, X, y, weights=(1.0, 1.0), masks=None):
    apply = masks is not None
    _, trace = forward(model, X, apply_dropout=apply, masks=masks)
    grads = backward(model, trace, y, weights)
    params = [np.array(p) for p in model.params()]
    mk = tuple(masks) if masks is not None else (None, None)
    for i, analytic in enumerate(grads.params()):
        def f(p, i=i):
            ps = list(params)
            ps[i] = p
            return mlp_loss(X, ps, y, weights, mk)
        assert rel_close(analytic, finite_difference(f, params[i])), f"param {i}"
    assert rel_close(grads.dX, finite_difference(lambda x: mlp_loss(x, params, y, weights, mk), X))


class TestBackward:
    @pytest.mark.parametrize("seed", range(5))
    def test_finite_differences(self, seed):
        rng = np.random.default_rng(seed)
        m = random_model(rng, 4, (5, 3))
        _fd_check(m, rng.normal(size=(3, 4)), rng.integers(0, 2, 3), (0.3, 0.7))

    def test_finite_differences_with_dropout_masks(self):
        rng = np.random.default_rng(7)
        m = random_model(rng, 3, (6, 4), dropout=0.5)
        masks = [(rng.random((4, 6)) < 0.5) * 2.0, (rng.random((4, 4)) < 0.5) * 2.0]
        _fd_check(m, rng.normal(size=(4, 3)), rng.integers(0, 2, 4), masks=masks)

    def test_zero_loss_zero_gradient(self):
        # saturated softmax gives exactly one-hot probabilities
        W3 = np.array([[800.0, -800.0]])
        m = MlpModel((np.ones((1, 1)), np.ones((1, 1)), W3), (np.zeros(1), np.zeros(1), np.zeros(2)))
        probs, trace = forward(m, [[1.0]])
        assert np.array_equal(probs, [[1.0, 0.0]])
        g = backward(m, trace, [0])
        assert all(not np.any(a) for a in g.params()) and not np.any(g.dX)

    def test_single_linear_layer_input_gradient(self):
        # identity hidden layers on positive inputs reduce the net to one linear layer
        rng = np.random.default_rng(3)
        W = rng.normal(size=(3, 2))
        eye = np.eye(3)
        m = MlpModel((eye, eye, W), (np.zeros(3), np.zeros(3), np.zeros(2)))
        x = rng.uniform(0.5, 1.5, size=(1, 3))
        p = softmax(x @ W)
        for y, w in ((0, 0.3), (1, 0.7)):
            expected = w * (W @ (p[0] - np.eye(2)[y]))
            np.testing.assert_allclose(input_gradient(m, x, y, (0.3, 0.7))[0], expected, rtol=1e-12)
            fd = finite_difference(lambda v: mlp_loss(v, m.params(), [y], (0.3, 0.7)), x)
            assert rel_close(expected, fd[0])

    def test_stale_trace(self):
        a, b = init_model(2, (3, 3), seed=0), init_model(2, (3, 3), seed=1)
        _, trace = forward(a, np.ones((1, 2)))
        with pytest.raises(StateError):
            backward(b, trace, [0])
        backward(init_model(2, (3, 3), seed=0), trace, [0])

    def test_input_gradient_is_backward_dx(self):
        rng = np.random.default_rng(8)
        m = random_model(rng, 4, (5, 5))
        X = rng.normal(size=(6, 4))
        _, trace = forward(m, X)
        assert np.array_equal(input_gradient(m, X, 0), backward(m, trace, np.zeros(6, int)).dX)

    def test_symmetric_model_zero_input_gradient(self):
        assert not np.any(input_gradient(zero_model(), np.ones((3, 3)), 0))


class TestSign:
    def test_values(self):
        assert np.array_equal(sign([[-0.3, 0.0, 2.1]]), [[-1, 0, 1]])
        assert np.array_equal(sign(np.zeros((2, 3))), np.zeros((2, 3)))

    @settings(max_examples=50, deadline=None)
    @given(arrays(np.float64, (4, 3), elements=st.floats(-1e6, 1e6)))
    def test_idempotent(self, v):
        assert np.array_equal(sign(sign(v)), sign(v))

    def test_fgsm_moves_along_sign(self):
        rng = np.random.default_rng(0)
        m = random_model(rng, 3, (4, 4))
        x = rng.normal(size=(2, 3))
        adv = fgsm(m, x, 0.1, labels=0)
        np.testing.assert_allclose(adv - x, 0.1 * sign(input_gradient(m, x, 0)))
        assert nll_loss(forward(m, adv)[0], [0, 0]) > nll_loss(forward(m, x)[0], [0, 0])


def test_weight_input_perturbation_equivalence():
    """Perturbing inputs by dx equals perturbing weights by w * dx / x at the pre-activation."""
    rng = np.random.default_rng(0)
    for _ in range(100):
        m, p = rng.integers(1, 9, size=2)
        x = rng.uniform(0.1, 2, m) * rng.choice([-1, 1], m)
        W = rng.normal(size=(m, p))
        W[W == 0] = 0.5
        dx = rng.normal(scale=1e-2, size=m)
        c_input = (x + dx) @ W
        c_weight = x @ (W + W * (dx / x)[:, None])
        np.testing.assert_allclose(c_input, c_weight, rtol=0, atol=1e-12)
