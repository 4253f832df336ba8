import numpy as np
import pytest
from scipy import special

from utils.elm_core import (
    ActivationKind,
    Dataset,
    ElmModel,
    HiddenLayer,
    WeightSpec,
    batch_train,
    batch_train_weighted,
    hidden_map,
    hidden_matrix,
    identity_layer,
    init_hidden_layer,
    label_counts,
    predict_class,
    predict_regression,
    sign_labels,
)
from utils.errors import IllConditionedError, InvalidArgumentError, ShapeError


def zero_layer(n: int, n_h: int, activation=ActivationKind.SIGMOID) -> HiddenLayer:
    return HiddenLayer(np.zeros((n, n_h)), np.zeros(n_h), activation)


def fixed_score_model(score: float) -> ElmModel:
    # sigmoid(0) = 0.5, so W = 2 * score reproduces the score exactly
    return ElmModel(zero_layer(1, 1), np.array([[2.0 * score]]))


class TestHiddenLayer:
    def test_shape_and_range(self):
        layer = init_hidden_layer(2, 3, ActivationKind.SIGMOID, seed=7)
        assert layer.weights.shape == (2, 3)
        assert layer.bias.shape == (3,)
        assert np.all(np.abs(layer.weights) <= 1.0)
        assert np.all(np.abs(layer.bias) <= 1.0)

    def test_same_seed_gives_identical_layers(self):
        a = init_hidden_layer(2, 3, ActivationKind.SIGMOID, seed=7)
        b = init_hidden_layer(2, 3, ActivationKind.SIGMOID, seed=7)
        assert a.weights.tobytes() == b.weights.tobytes()
        assert a.bias.tobytes() == b.bias.tobytes()
        assert a.same_as(b)

    def test_different_seed_differs(self):
        a = init_hidden_layer(2, 3, seed=7)
        b = init_hidden_layer(2, 3, seed=8)
        assert not a.same_as(b)

    @pytest.mark.parametrize("n, n_h", [(0, 3), (2, 0), (-1, 2)])
    def test_zero_dimensions_rejected(self, n, n_h):
        with pytest.raises(InvalidArgumentError):
            init_hidden_layer(n, n_h, ActivationKind.SIGMOID, seed=7)

    def test_layer_is_frozen(self):
        layer = init_hidden_layer(2, 3, seed=1)
        with pytest.raises(ValueError):
            layer.weights[0, 0] = 5.0

    def test_identity_layer_appends_constant_unit(self):
        layer = identity_layer(3)
        phi = hidden_map(layer, [0.1, -0.2, 0.3])
        np.testing.assert_array_equal(phi, [0.1, -0.2, 0.3, 1.0])
        assert identity_layer(3, intercept=False).hidden_dim == 3


class TestHiddenMap:
    def test_zero_layer_sigmoid(self):
        phi = hidden_map(zero_layer(3, 4), [0.3, -2.0, 7.0])
        np.testing.assert_array_equal(phi, np.full(4, 0.5))

    def test_zero_layer_sine(self):
        phi = hidden_map(zero_layer(3, 4, ActivationKind.SINE), [0.3, -2.0, 7.0])
        np.testing.assert_array_equal(phi, np.zeros(4))

    def test_scalar_sigmoid(self):
        layer = HiddenLayer(np.array([[2.0]]), np.array([-1.0]), ActivationKind.SIGMOID)
        phi = hidden_map(layer, [1.0])
        assert phi[0] == pytest.approx(1.0 / (1.0 + np.exp(-1.0)), abs=1e-15)
        assert phi[0] == pytest.approx(0.73106, abs=1e-5)

    def test_dimension_mismatch(self):
        with pytest.raises(ShapeError):
            hidden_map(init_hidden_layer(2, 3), [1.0, 2.0, 3.0])

    def test_non_finite_input(self):
        with pytest.raises(InvalidArgumentError):
            hidden_map(init_hidden_layer(2, 3), [1.0, np.nan])

    @pytest.mark.parametrize(
        "activation, low, high",
        [
            (ActivationKind.SIGMOID, 0.0, 1.0),
            (ActivationKind.SINE, -1.0, 1.0),
            (ActivationKind.RADIAL_BASIS, 0.0, 1.0),
        ],
    )
    def test_activation_range(self, activation, low, high):
        rng = np.random.default_rng(0)
        layer = init_hidden_layer(4, 16, activation, seed=3)
        phi = hidden_matrix(layer, rng.normal(0.0, 50.0, size=(100_000, 4)))
        assert np.all(np.isfinite(phi))
        assert phi.min() >= low and phi.max() <= high

    def test_sigmoid_does_not_overflow(self):
        z = np.array([-1e4, -50.0, 0.0, 50.0, 1e4])
        with np.errstate(over="raise"):
            out = ActivationKind.SIGMOID(z)
        np.testing.assert_allclose(out, special.expit(z), rtol=1e-12, atol=0.0)
        assert out[0] == 0.0 and out[-1] == 1.0
        assert out[2] == 0.5


class TestBatchTrain:
    def test_identity_design(self):
        data = Dataset(np.eye(2), np.array([[2.0], [4.0]]))
        model = batch_train(data, identity_layer(2, intercept=False), ridge=0.0)
        np.testing.assert_allclose(model.output_weights, [[2.0], [4.0]], atol=1e-15)

    def test_identity_design_with_ridge(self):
        data = Dataset(np.eye(2), np.array([[2.0], [4.0]]))
        model = batch_train(data, identity_layer(2, intercept=False), ridge=1.0)
        np.testing.assert_allclose(model.output_weights, [[1.0], [2.0]], atol=1e-15)

    def test_scalar_least_squares_is_mean(self):
        data = Dataset(np.array([[1.0], [1.0]]), np.array([[1.0], [3.0]]))
        model = batch_train(data, identity_layer(1, intercept=False), ridge=0.0)
        assert model.output_weights[0, 0] == pytest.approx(2.0, abs=1e-14)

    def test_singular_at_zero_ridge(self):
        # two identical hidden units make H^T H singular
        layer = HiddenLayer(np.ones((1, 2)), np.zeros(2), ActivationKind.SIGMOID)
        data = Dataset(np.linspace(-1, 1, 10)[:, None], np.zeros((10, 1)))
        with pytest.raises(IllConditionedError, match="condition"):
            batch_train(data, layer, ridge=0.0)

    def test_negative_ridge_rejected(self):
        data = Dataset(np.eye(2), np.ones((2, 1)))
        with pytest.raises(InvalidArgumentError):
            batch_train(data, identity_layer(2, intercept=False), ridge=-1.0)

    @pytest.mark.parametrize("seed", range(5))
    def test_minimizes_regularised_objective(self, seed):
        rng = np.random.default_rng(seed)
        n_samples, n, n_h, ridge = 40, 3, 8, 0.1
        layer = init_hidden_layer(n, n_h, seed=seed)
        data = Dataset(rng.uniform(-1, 1, (n_samples, n)), rng.normal(size=(n_samples, 2)))
        w = batch_train(data, layer, ridge).output_weights
        h = hidden_matrix(layer, data.inputs)

        def objective(weights):
            r = h @ weights - data.targets
            return np.sum(r * r) + ridge * np.sum(weights * weights)

        best = objective(w)
        for _ in range(100):
            direction = rng.normal(size=w.shape)
            direction /= np.linalg.norm(direction)
            assert objective(w + 1e-3 * direction) > best

    def test_deterministic(self):
        rng = np.random.default_rng(1)
        data = Dataset(rng.uniform(-1, 1, (30, 2)), rng.normal(size=(30, 1)))
        a = batch_train(data, init_hidden_layer(2, 5, seed=4), 1e-3)
        b = batch_train(data, init_hidden_layer(2, 5, seed=4), 1e-3)
        assert a.output_weights.tobytes() == b.output_weights.tobytes()


class TestBatchTrainWeighted:
    def test_unit_weights_reduce_to_batch(self):
        rng = np.random.default_rng(2)
        labels = np.where(rng.random(30) < 0.2, -1, 1)
        data = Dataset(rng.uniform(-1, 1, (30, 2)), rng.normal(size=(30, 1)), labels)
        layer = init_hidden_layer(2, 6, seed=0)
        plain = batch_train(data, layer, 1e-2)
        weighted = batch_train_weighted(data, layer, 1e-2, WeightSpec(1.0, 1.0))
        np.testing.assert_array_equal(weighted.output_weights, plain.output_weights)

    def test_diagonal_design_weights_cancel(self):
        data = Dataset(np.eye(2), np.array([[1.0], [-1.0]]), np.array([1, -1]))
        model = batch_train_weighted(
            data, identity_layer(2, intercept=False), 0.0, WeightSpec(3.0, 1.0)
        )
        np.testing.assert_allclose(model.output_weights, [[1.0], [-1.0]], atol=1e-15)

    def test_uniform_weight_cancels(self):
        # every row a minority row: Gamma = w I
        rng = np.random.default_rng(3)
        data = Dataset(rng.uniform(-1, 1, (25, 2)), rng.normal(size=(25, 1)), -np.ones(25))
        layer = init_hidden_layer(2, 5, seed=2)
        plain = batch_train(data, layer, 0.0)
        weighted = batch_train_weighted(data, layer, 0.0, WeightSpec(7.0, 0.5))
        rel = np.linalg.norm(weighted.output_weights - plain.output_weights) / np.linalg.norm(
            plain.output_weights
        )
        assert rel < 1e-10

    def test_missing_labels(self):
        data = Dataset(np.eye(2), np.ones((2, 1)))
        with pytest.raises(InvalidArgumentError, match="labelled"):
            batch_train_weighted(data, identity_layer(2), 0.1, WeightSpec(2.0))

    def test_weight_spec_from_labels(self):
        spec = WeightSpec.from_labels(np.array([1, 1, 1, 1, -1]), scale_factor=0.5)
        assert spec.imbalance_ratio == 4.0
        assert spec.minority_weight == 2.0
        np.testing.assert_array_equal(spec.sample_weights([1, -1]), [1.0, 2.0])

    def test_zero_ratio_rejected_with_minority_rows(self):
        with pytest.raises(InvalidArgumentError):
            WeightSpec(0.0).sample_weights([1, -1])


class TestPredict:
    def test_zero_weights(self):
        model = ElmModel(init_hidden_layer(3, 4, seed=1), np.zeros((4, 2)))
        np.testing.assert_array_equal(predict_regression(model, [0.1, 0.5, -0.9]), [0.0, 0.0])

    def test_hand_evaluation(self):
        model = ElmModel(zero_layer(2, 1), np.array([[2.0]]))
        np.testing.assert_array_equal(predict_regression(model, [0.4, -0.4]), [1.0])

    def test_linear_in_weights(self):
        layer = init_hidden_layer(3, 5, seed=9)
        w = np.random.default_rng(0).normal(size=(5, 2))
        x = [0.2, -0.1, 0.7]
        np.testing.assert_allclose(
            predict_regression(ElmModel(layer, 2 * w), x),
            2 * predict_regression(ElmModel(layer, w), x),
            rtol=1e-15,
        )

    def test_matrix_input(self):
        model = ElmModel(init_hidden_layer(2, 3, seed=0), np.ones((3, 1)))
        assert predict_regression(model, np.zeros((7, 2))).shape == (7, 1)

    def test_shape_mismatch(self):
        model = ElmModel(init_hidden_layer(2, 3, seed=0), np.ones((3, 1)))
        with pytest.raises(ShapeError):
            predict_regression(model, [1.0, 2.0, 3.0])

    @pytest.mark.parametrize("score, label", [(0.3, 1), (-0.3, -1), (0.0, 1)])
    def test_class_sign(self, score, label):
        assert predict_class(fixed_score_model(score), [0.0]) == label

    def test_matrix_classes_match_score_signs(self):
        model = ElmModel(init_hidden_layer(2, 4, seed=5), np.array([[1.0], [-2.0], [0.5], [0.3]]))
        inputs = np.random.default_rng(5).uniform(-1.0, 1.0, size=(50, 2))
        scores = predict_regression(model, inputs)
        np.testing.assert_array_equal(predict_class(model, inputs), sign_labels(scores))
        np.testing.assert_array_equal(sign_labels([0.0, -1e-12, 2.0]), [1, -1, 1])

    def test_label_counts(self):
        assert label_counts(np.array([1, -1, 1, 1])) == (3, 1)
        assert label_counts(np.array([], dtype=int)) == (0, 0)

    def test_class_needs_single_output(self):
        model = ElmModel(init_hidden_layer(2, 3, seed=0), np.ones((3, 2)))
        with pytest.raises(InvalidArgumentError):
            predict_class(model, [0.0, 0.0])

    def test_model_rejects_bad_weights(self):
        layer = init_hidden_layer(2, 3, seed=0)
        with pytest.raises(ShapeError):
            ElmModel(layer, np.ones((4, 1)))
        with pytest.raises(InvalidArgumentError):
            ElmModel(layer, np.full((3, 1), np.inf))


class TestDataset:
    def test_rejects_empty(self):
        with pytest.raises(InvalidArgumentError):
            Dataset(np.zeros((0, 2)), np.zeros((0, 1)))

    def test_rejects_row_mismatch(self):
        with pytest.raises(ShapeError):
            Dataset(np.zeros((3, 2)), np.zeros((2, 1)))

    def test_rejects_bad_labels(self):
        with pytest.raises(InvalidArgumentError):
            Dataset(np.zeros((2, 2)), np.zeros((2, 1)), np.array([1, 0]))
