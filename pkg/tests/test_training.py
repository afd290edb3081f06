import numpy as np
import pytest

from mcaa.data import Dataset, gen_synthetic_2d, split_random, standardize_apply, standardize_fit
from mcaa.errors import DimensionError, DomainError
from mcaa.neural import init_model
from mcaa.training import AdamState, TrainConfig, adam_step, labels_from_probs, predict, train


@pytest.fixture(scope="module")
def synthetic_splits():
    ds = gen_synthetic_2d(2000, 0.25, seed=1)
    tr, va, te = split_random(ds, seed=1)
    stats = standardize_fit(tr)
    return tuple(standardize_apply(stats, d) for d in (tr, va, te))


class TestAdam:
    def test_zero_gradient_is_a_no_op(self):
        params = [np.arange(6.0).reshape(2, 3), np.ones(3)]
        state = AdamState.zeros_like(params)
        for _ in range(5):
            new, state = adam_step(params, [np.zeros((2, 3)), np.zeros(3)], state, 0.1)
            assert all(np.array_equal(a, b) for a, b in zip(new, params))
        assert state.t == 5

    def test_first_step_magnitude(self):
        params = [np.zeros(3)]
        g = np.array([0.5, -0.5, 0.5])
        new, state = adam_step(params, [g], AdamState.zeros_like(params), 0.01)
        np.testing.assert_allclose(new[0], -np.sign(g) * 0.009999999800000003, rtol=1e-12)
        assert state.t == 1

    def test_deterministic_and_pure(self):
        params = [np.ones((2, 2))]
        state = AdamState.zeros_like(params)
        g = [np.array([[0.1, -2.0], [3.0, 0.0]])]
        a = adam_step(params, g, state, 0.01)
        b = adam_step(params, g, state, 0.01)
        assert np.array_equal(a[0][0], b[0][0]) and state.t == 0
        assert np.array_equal(params[0], np.ones((2, 2)))

    def test_shape_mismatch(self):
        with pytest.raises(DimensionError):
            adam_step([np.zeros(3)], [np.zeros(2)], AdamState.zeros_like([np.zeros(3)]), 0.1)


class TestConfig:
    @pytest.mark.parametrize("kw", [{"epochs": 0}, {"learning_rate": 0.0},
                                    {"class_weights": (0.0, 1.0)}, {"dropout_rate": 1.0},
                                    {"batch_size": -1}])
    def test_rejects(self, kw):
        with pytest.raises(DomainError):
            TrainConfig(**kw)


class TestTrain:
    def test_loss_decreases(self, synthetic_splits):
        tr, va, _ = synthetic_splits
        _, hist = train(init_model(2, (20, 20), seed=0), tr, va, TrainConfig(epochs=10, seed=0))
        assert hist.train[-1] < hist.train[0]
        assert len(hist.train) == len(hist.val) == 10

    def test_deterministic(self, synthetic_splits):
        tr, va, _ = synthetic_splits
        cfg = TrainConfig(epochs=3, batch_size=64, dropout_rate=0.3, seed=5)
        m1, h1 = train(init_model(2, (8, 8), seed=0), tr, va, cfg)
        m2, h2 = train(init_model(2, (8, 8), seed=0), tr, va, cfg)
        assert h1.train == h2.train and h1.val == h2.val
        assert m1.same_params(m2) and m1.dropout_rate == 0.3

    def test_accuracy(self, synthetic_splits):
        tr, va, te = synthetic_splits
        m, _ = train(init_model(2, (20, 20), seed=0), tr, va, TrainConfig(epochs=30, seed=0))
        labels, _ = predict(m, te.features)
        assert (labels == te.labels).mean() > 0.95

    def test_single_class_rejected(self):
        ds = Dataset(np.zeros((4, 2)), [1, 1, 1, 1])
        with pytest.raises(DomainError):
            train(init_model(2, (3, 3)), ds, None, TrainConfig(epochs=1))

    def test_per_timestep_batches(self):
        rng = np.random.default_rng(0)
        X = rng.normal(size=(60, 3))
        ds = Dataset(X, (X[:, 0] > 0).astype(int), np.repeat([1, 2, 3], 20))
        _, hist = train(init_model(3, (4, 4)), ds, None, TrainConfig(epochs=2, batch_size=0))
        assert hist.val == [None, None]
        with pytest.raises(DomainError):
            train(init_model(3, (4, 4)), Dataset(X, ds.labels), None, TrainConfig(batch_size=0))

    def test_history_csv(self, tmp_path, synthetic_splits):
        tr, va, _ = synthetic_splits
        _, hist = train(init_model(2, (4, 4)), tr, va, TrainConfig(epochs=2))
        hist.to_csv(tmp_path / "h.csv")
        lines = (tmp_path / "h.csv").read_text().splitlines()
        assert lines[0] == "epoch,train_loss,val_loss" and len(lines) == 3


class TestPredict:
    def test_tie_goes_to_zero(self):
        assert list(labels_from_probs(np.array([[0.9, 0.1], [0.5, 0.5], [0.2, 0.8]]))) == [0, 0, 1]

    def test_shape(self):
        labels, probs = predict(init_model(3, (4, 4)), np.zeros((7, 3)))
        assert labels.shape == (7,) and probs.shape == (7, 2)
