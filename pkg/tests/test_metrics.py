import numpy as np
import pandas as pd
import pytest

from utils.errors import InvalidArgumentError, OutputPathError, ShapeError
from utils.metrics import (
    ConfusionCounts,
    Normalizer,
    fit_normalizer,
    format_report,
    imbalance_metrics,
    normalized_rmse,
    write_predictions,
    write_report,
)

UNIT = Normalizer(np.array([-1.0, -1.0]), np.array([1.0, 1.0]))


class TestNormalizer:
    def test_midpoint_and_endpoints(self):
        normalizer = fit_normalizer([[0.0], [2.0], [1.5]])
        assert normalizer.minimum[0] == 0.0 and normalizer.maximum[0] == 2.0
        scaled = normalizer.apply([[0.0], [1.0], [2.0]])
        np.testing.assert_array_equal(scaled, [[-1.0], [0.0], [1.0]])

    def test_constant_channel_is_named(self):
        with pytest.raises(InvalidArgumentError, match="channel 1"):
            fit_normalizer([[0.0, 3.0], [1.0, 3.0]])

    def test_out_of_range_values_are_not_clipped(self):
        normalizer = fit_normalizer([[0.0], [2.0]])
        np.testing.assert_array_equal(normalizer.apply([[4.0], [-2.0]]), [[3.0], [-3.0]])

    def test_invert_undoes_apply(self):
        rng = np.random.default_rng(5)
        data = rng.normal(size=(50, 3)) * [1.0, 10.0, 0.01]
        normalizer = fit_normalizer(data)
        np.testing.assert_allclose(normalizer.invert(normalizer.apply(data)), data, rtol=1e-12)

    def test_channel_count_checked(self):
        with pytest.raises(ShapeError):
            fit_normalizer([[0.0], [1.0]]).apply([[0.0, 1.0]])


class TestNormalizedRmse:
    def test_perfect_prediction(self):
        y = np.array([[0.1, 0.2], [0.3, -0.4]])
        assert normalized_rmse(y, y, UNIT) == 0.0

    def test_single_term(self):
        normalizer = Normalizer(np.array([-1.0]), np.array([1.0]))
        assert normalized_rmse([[0.5]], [[-0.5]], normalizer) == pytest.approx(1.0)

    def test_channels_summed_inside_the_mean(self):
        y_true = np.zeros((2, 2))
        y_pred = np.array([[1.0, 0.0], [0.0, 1.0]])
        assert normalized_rmse(y_true, y_pred, UNIT) == pytest.approx(1.0)

    def test_row_order_does_not_matter(self):
        rng = np.random.default_rng(3)
        y_true, y_pred = rng.normal(size=(20, 2)), rng.normal(size=(20, 2))
        order = rng.permutation(20)
        assert normalized_rmse(y_true[order], y_pred[order], UNIT) == pytest.approx(
            normalized_rmse(y_true, y_pred, UNIT), rel=1e-14
        )

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            normalized_rmse(np.zeros((3, 2)), np.zeros((2, 2)), UNIT)


class TestImbalanceMetrics:
    def test_perfect_classifier(self):
        counts = ConfusionCounts.from_predictions([1, 1, -1], [1, 1, -1])
        assert imbalance_metrics(counts) == {"TPR": 1.0, "TNR": 1.0, "GM": 1.0, "TA": 1.0}

    def test_all_positive_predictor(self):
        labels = np.array([1] * 9 + [-1])
        metrics = imbalance_metrics(ConfusionCounts.from_predictions(labels, np.ones(10)))
        assert metrics == {"TPR": 1.0, "TNR": 0.0, "GM": 0.0, "TA": 0.5}

    def test_hand_values(self):
        metrics = imbalance_metrics(ConfusionCounts(tp=3, fn=1, tn=8, fp=2))
        assert metrics["TPR"] == pytest.approx(0.75)
        assert metrics["TNR"] == pytest.approx(0.8)
        assert metrics["GM"] == pytest.approx(np.sqrt(0.6))
        assert metrics["GM"] == pytest.approx(0.77460, abs=1e-5)
        assert metrics["TA"] == pytest.approx(0.775)

    @pytest.mark.parametrize("counts", [ConfusionCounts(tp=3, fn=1), ConfusionCounts(tn=2, fp=2)])
    def test_empty_class_is_undefined(self, counts):
        with pytest.raises(InvalidArgumentError):
            imbalance_metrics(counts)

    def test_geometric_mean_never_exceeds_arithmetic_mean(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            tp, fn, tn, fp = rng.integers(0, 50, size=4)
            counts = ConfusionCounts(tp=int(tp), tn=int(tn) + 1, fp=int(fp), fn=int(fn) + 1)
            metrics = imbalance_metrics(counts)
            assert metrics["GM"] <= metrics["TA"] + 1e-15

    def test_streaming_equals_one_shot(self):
        rng = np.random.default_rng(1)
        y_true = np.where(rng.random(300) < 0.2, -1, 1)
        y_pred = np.where(rng.random(300) < 0.3, -1, 1)
        streamed = ConfusionCounts()
        for t, p in zip(y_true, y_pred):
            streamed.update(t, p)
        merged = ConfusionCounts.from_predictions(y_true[:100], y_pred[:100]).merge(
            ConfusionCounts.from_predictions(y_true[100:], y_pred[100:])
        )
        one_shot = ConfusionCounts.from_predictions(y_true, y_pred)
        assert streamed == one_shot == merged
        assert imbalance_metrics(streamed) == imbalance_metrics(one_shot)

    def test_bad_labels(self):
        with pytest.raises(InvalidArgumentError):
            ConfusionCounts.from_predictions([0, 1], [1, 1])


class TestReports:
    def test_six_significant_digits(self):
        text = format_report({"task": "identify", "osap_rmse": 0.0123456789, "samples": 12})
        assert text == "task=identify\nosap_rmse=0.0123457\nsamples=12\n"

    def test_write_report(self, tmp_path):
        path = tmp_path / "report.txt"
        write_report(str(path), {"GM": np.float64(0.5)})
        assert path.read_text() == "GM=0.5\n"

    def test_unwritable_report(self, tmp_path):
        with pytest.raises(OutputPathError) as info:
            write_report(str(tmp_path / "missing" / "report.txt"), {"GM": 0.5})
        assert info.value.exit_code == 2

    def test_predictions_keep_full_precision(self, tmp_path):
        path = tmp_path / "predictions.csv"
        frame = pd.DataFrame({"cycle": [0, 1], "y1": [0.1, 1.0 / 3.0]})
        write_predictions(str(path), frame)
        back = pd.read_csv(path, float_precision="round_trip")
        assert back["y1"].iloc[1] == 1.0 / 3.0
        with pytest.raises(OutputPathError):
            write_predictions(str(tmp_path / "missing" / "p.csv"), frame)
