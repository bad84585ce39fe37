import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from mlp2poly.network import column_norms
from mlp2poly.polynomial import Polynomial
from mlp2poly.trainer import (
    DatasetSpec,
    TrainConfig,
    TrainingDivergedError,
    constraint_project,
    gen_blob_data,
    gen_poly_data,
    init_weights,
    loss_and_gradients,
    norm_of,
    parse_architecture,
    scale_to_unit,
    train,
    train_test_split,
    training_loss,
)

REGRESSION = Polynomial.from_terms(5, {0: 2, 1: -2, (2, 3): 5, 4: 3})


class TestProjection:
    def test_inside_ball(self):
        w = np.array([0.3, 0.4])
        out = constraint_project(w, "l2", 1e-7)
        np.testing.assert_allclose(out, w * 0.5 / (0.5 + 1e-7), rtol=1e-15)
        np.testing.assert_allclose(out, w, rtol=1e-6)

    def test_l2_outside(self):
        out = constraint_project(np.array([3.0, 4.0]), "l2")
        np.testing.assert_allclose(out, [0.6, 0.8], rtol=1e-7)

    def test_l1_outside(self):
        out = constraint_project(np.array([1.0, 1.0]), "l1")
        np.testing.assert_allclose(out, [0.5, 0.5], rtol=1e-7)

    def test_columnwise(self):
        W = np.array([[3.0, 0.1], [4.0, 0.2]])
        out = constraint_project(W, "l2")
        np.testing.assert_allclose(norm_of(out, "l2", axis=0), [1.0, np.hypot(0.1, 0.2)], rtol=1e-6)

    @given(arrays(np.float64, st.integers(1, 8), elements=st.floats(-1e3, 1e3)), st.sampled_from(["l1", "l2"]))
    def test_direction_and_bound(self, w, norm):
        out = constraint_project(w, norm)
        assert norm_of(out, norm) <= 1 + 1e-9
        n = np.linalg.norm(w)
        if n > 1e-6:
            cos = out @ w / (np.linalg.norm(out) * n)
            assert cos == pytest.approx(1.0, abs=1e-12)


class TestData:
    def test_constant_response(self):
        data = gen_poly_data(Polynomial.from_terms(2, {0: 4}), 10, 0.0, seed=1)
        np.testing.assert_array_equal(data.Y, 4.0)

    def test_single_row(self):
        data = gen_poly_data(REGRESSION, 1, 0.05, seed=0)
        assert data.X.shape == (1, 5) and data.Y.shape == (1, 1)

    def test_deterministic(self):
        a = gen_poly_data(REGRESSION, 20, 0.05, seed=7)
        b = gen_poly_data(REGRESSION, 20, 0.05, seed=7)
        np.testing.assert_array_equal(a.X, b.X)
        np.testing.assert_array_equal(a.Y, b.Y)

    def test_unused_variable_has_no_effect(self):
        data = gen_poly_data(REGRESSION, 2000, 0.05, seed=3)
        X = data.X
        design = np.column_stack([np.ones(len(X)), X, X[:, 1] * X[:, 2]])
        coef, *_ = np.linalg.lstsq(design, data.Y[:, 0], rcond=None)
        np.testing.assert_allclose(coef, [2, -2, 0, 0, 3, 0, 5], atol=0.01)

    def test_zero_rows(self):
        with pytest.raises(ValueError):
            gen_poly_data(REGRESSION, 0)

    def test_scale_endpoints(self):
        data = DatasetSpec(np.array([[0.0], [5.0], [10.0]]), np.array([1.0, 2.0, 4.0]))
        scaled = scale_to_unit(data)
        np.testing.assert_allclose(scaled.X[:, 0], [-1, 0, 1])
        np.testing.assert_allclose(scaled.Y[:, 0], [-1, -1 / 3, 1])
        np.testing.assert_allclose(scaled.scaling["x_center"], [5.0])

    def test_scale_constant_column(self):
        data = DatasetSpec(np.array([[1.0, 0.0], [1.0, 1.0]]), np.array([0.0, 1.0]))
        with pytest.raises(ValueError, match="constant"):
            scale_to_unit(data)

    def test_scale_range(self):
        scaled = scale_to_unit(gen_poly_data(REGRESSION, 50, 0.05, seed=0))
        assert scaled.X.min() == -1 and scaled.X.max() == 1
        assert np.all(np.abs(scaled.X) <= 1) and np.all(np.abs(scaled.Y) <= 1)

    def test_classification_labels_untouched(self):
        data = scale_to_unit(gen_blob_data(30, 4, 3, seed=0))
        assert set(data.Y.ravel()) == {0, 1, 2}

    def test_split_sizes(self):
        tr, te = train_test_split(gen_poly_data(REGRESSION, 500, seed=0), 0.75, seed=0)
        assert (tr.n, te.n) == (375, 125)


def test_parse_architecture():
    assert parse_architecture("50:tanh, 1:linear") == [(50, "tanh"), (1, "linear")]
    for bad in ["50", "x:tanh", "0:tanh", "5:relu"]:
        with pytest.raises(ValueError):
            parse_architecture(bad)


def _numeric_grad(weights, acts, X, Y, loss, h=1e-5):
    out = []
    for W in weights:
        G = np.zeros_like(W)
        for idx in np.ndindex(W.shape):
            old = W[idx]
            W[idx] = old + h
            up = loss_and_gradients(weights, acts, X, Y, loss)[0]
            W[idx] = old - h
            down = loss_and_gradients(weights, acts, X, Y, loss)[0]
            W[idx] = old
            G[idx] = (up - down) / (2 * h)
        out.append(G)
    return out


@pytest.mark.parametrize("act", ["tanh", "sigmoid", "softplus"])
@pytest.mark.parametrize("loss", ["mse", "softmax_cross_entropy"])
def test_gradients_match_finite_differences(act, loss):
    rng = np.random.default_rng(0)
    weights = [rng.normal(size=(4, 3)), rng.normal(size=(4, 2))]
    acts = [act, "linear"]
    X = rng.normal(size=(5, 3))
    Y = rng.integers(0, 2, size=(5, 1)) if loss != "mse" else rng.normal(size=(5, 2))
    _, grads = loss_and_gradients(weights, acts, X, Y, loss)
    for g, n in zip(grads, _numeric_grad(weights, acts, X, Y, loss)):
        np.testing.assert_allclose(g, n, rtol=1e-5, atol=1e-9)


class TestTrain:
    ARCH = [(8, "tanh"), (6, "tanh"), (1, "linear")]

    def _data(self):
        return scale_to_unit(gen_poly_data(REGRESSION, 120, 0.05, seed=0))

    def test_zero_epochs_returns_initialisation(self):
        data = self._data()
        net, history = train(data, self.ARCH, TrainConfig(epochs=0, constraint="none", seed=3))
        assert history.train_loss == []
        # Initialisation draws after the split permutation, so rebuild the same stream.
        rng = np.random.default_rng(3)
        rng.permutation(data.n)
        expected = init_weights(5, self.ARCH, rng)
        for layer, W in zip(net.layers, expected):
            np.testing.assert_array_equal(layer.weights, W)

    def test_zero_learning_rate_only_projects(self):
        data = self._data()
        free, _ = train(data, self.ARCH, TrainConfig(epochs=0, constraint="none", seed=3))
        net, _ = train(data, self.ARCH, TrainConfig(epochs=3, learning_rate=0.0, constraint="l1_norm", seed=3))
        # One projection at init, then one after each of 4 batches in 3 epochs.
        for a, b in zip(free.layers[:-1], net.layers[:-1]):
            expected = a.weights
            for _ in range(1 + 4 * 3):
                expected = constraint_project(expected, "l1")
            np.testing.assert_allclose(b.weights, expected, rtol=1e-12)
        np.testing.assert_array_equal(free.layers[-1].weights, net.layers[-1].weights)

    @pytest.mark.parametrize("norm", ["l1_norm", "l2_norm"])
    def test_hidden_norms_bounded(self, norm):
        net, _ = train(self._data(), self.ARCH, TrainConfig(epochs=20, batch_size=16, constraint=norm, seed=1, learning_rate=0.05))
        short = norm[:2]
        for layer in net.layers[:-1]:
            assert column_norms(layer, short).max() <= 1 + 1e-9

    def test_deterministic(self):
        cfg = TrainConfig(epochs=5, batch_size=16, seed=9, validation_split=0.2)
        a, ha = train(self._data(), self.ARCH, cfg)
        b, hb = train(self._data(), self.ARCH, cfg)
        assert a == b
        assert ha.train_loss == hb.train_loss and ha.val_loss == hb.val_loss

    def test_loss_decreases(self):
        data = self._data()
        cfg = TrainConfig(epochs=60, batch_size=20, seed=2)
        init, _ = train(data, self.ARCH, TrainConfig(epochs=0, seed=2))
        net, hist = train(data, self.ARCH, cfg)
        assert hist.train_loss[-1] < training_loss(init, data)

    def test_sgd(self):
        net, hist = train(self._data(), self.ARCH, TrainConfig(epochs=30, optimizer="sgd", learning_rate=0.1, seed=0))
        assert hist.train_loss[-1] < hist.train_loss[0]

    def test_history_csv(self):
        _, hist = train(self._data(), self.ARCH, TrainConfig(epochs=2, seed=0, validation_split=0.25))
        lines = hist.to_csv().splitlines()
        assert lines[0] == "epoch,train_loss,val_loss"
        assert len(lines) == 3 and lines[1].startswith("1,")

    def test_batch_larger_than_data(self):
        with pytest.raises(ValueError, match="batch_size"):
            train(self._data(), self.ARCH, TrainConfig(epochs=1, batch_size=1000))

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_diverging_run_reports_position(self):
        data = self._data()
        with pytest.raises(TrainingDivergedError) as info:
            train(data, self.ARCH, TrainConfig(epochs=50, optimizer="sgd", learning_rate=1e6, constraint="none", seed=0))
        assert info.value.epoch >= 1

    def test_classification_needs_integer_labels(self):
        data = DatasetSpec(np.random.default_rng(0).normal(size=(20, 2)), np.linspace(0, 1, 20))
        with pytest.raises(ValueError, match="integer"):
            train(data, [(4, "tanh"), (2, "linear")], TrainConfig(loss="softmax_cross_entropy", batch_size=4))

    def test_classification_trains(self):
        data = scale_to_unit(gen_blob_data(90, 2, 3, seed=0))
        net, hist = train(data, [(10, "tanh"), (3, "linear")],
                          TrainConfig(epochs=40, batch_size=16, loss="softmax_cross_entropy", seed=0))
        assert hist.train_loss[-1] < hist.train_loss[0]
        assert net.n_outputs == 3
