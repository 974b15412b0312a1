import numpy as np
import pytest

from eagle.errors import CalibrationError, EmptyInputError, UndefinedMetricError
from eagle.training import Predictions, auc, calibrate_threshold, macro_f1, metrics
from eagle.training.metrics import macro_f1_at, threshold_candidates


def _predictions(score, y_class, y_reg, delay=None):
    n = len(score)
    return Predictions(t=np.zeros(n, dtype=int), node=np.arange(n), score=np.asarray(score, dtype=float),
                       delay=None if delay is None else np.asarray(delay, dtype=float),
                       y_class=np.asarray(y_class), y_reg=np.asarray(y_reg, dtype=float))


def test_auc_extremes_and_ties():
    labels = [0, 0, 1, 1]
    assert auc([0.1, 0.2, 0.8, 0.9], labels) == 1.0
    assert auc([0.9, 0.8, 0.2, 0.1], labels) == 0.0
    assert auc([0.5, 0.5, 0.5, 0.5], labels) == 0.5
    assert auc([0.1, 0.6, 0.4, 0.9], labels) == pytest.approx(0.75)


def test_auc_single_class():
    with pytest.raises(UndefinedMetricError):
        auc([0.1, 0.9], [1, 1])


def test_macro_f1():
    assert macro_f1([1, 0, 1, 0], [1, 0, 0, 0]) == pytest.approx((2 / 3 + 4 / 5) / 2)
    assert macro_f1([1, 0], [1, 0]) == 1.0
    # a class absent from both labels and predictions scores zero
    assert macro_f1([0, 0], [0, 0]) == pytest.approx(0.5)


def test_threshold_candidates():
    np.testing.assert_allclose(threshold_candidates([0.2, 0.6, 0.6]), [0.0, 0.4, 1.0])


def test_calibration_prefers_the_smallest_best_threshold():
    # 0.225 and 0.6 both reach macro-F1 of 11/15
    assert calibrate_threshold([0.1, 0.4, 0.35, 0.8], [0, 0, 1, 1]) == pytest.approx(0.225)


def test_calibration_needs_both_classes():
    with pytest.raises(CalibrationError):
        calibrate_threshold([0.2, 0.3], [0, 0])
    with pytest.raises(CalibrationError):
        calibrate_threshold([], [])


def test_metrics_report():
    result = metrics(_predictions([0.1, 0.7, 0.6, 0.2], [0, 1, 1, 0], [0.0, 2.0, 1.0, 0.0],
                                  delay=[0.5, 1.5, 1.0, 0.0]), threshold=0.6)
    assert result['f1_macro'] == 1.0
    assert result['auc_roc'] == 1.0
    assert result['mae_days'] == pytest.approx(0.25)
    assert result['zero_baseline_mae'] == pytest.approx(0.75)
    assert result['rows'] == 4


def test_metrics_without_delay_use_the_zero_predictor():
    result = metrics(_predictions([0.1, 0.7], [0, 1], [0.0, 3.0]), threshold=0.5)
    assert result['mae_days'] == result['zero_baseline_mae'] == pytest.approx(1.5)


def test_metrics_with_single_class_labels():
    predictions = _predictions([0.1, 0.7], [0, 0], [0.0, 0.0])
    assert metrics(predictions, 0.5)['auc_roc'] is None
    with pytest.raises(UndefinedMetricError):
        metrics(predictions, 0.5, strict=True)


def test_metrics_on_nothing():
    with pytest.raises(EmptyInputError):
        metrics(_predictions([], [], []), 0.5)


def test_auc_matches_counting_concordant_pairs():
    labels = np.array([1, 0, 0, 0])
    scores = np.array([0.9, 0.8, 0.2, 0.1])
    pairs = [(p, n) for p in scores[labels == 1] for n in scores[labels == 0]]
    won = sum(1.0 if p > n else 0.5 if p == n else 0.0 for p, n in pairs)
    assert auc(scores, labels) == pytest.approx(won / len(pairs))


@pytest.mark.parametrize('seed', range(5))
def test_auc_is_unchanged_by_increasing_maps(seed):
    rng = np.random.default_rng(seed)
    scores = rng.random(40)
    labels = np.arange(40) % 3 == 0
    reference = auc(scores, labels)
    assert auc(np.exp(3 * scores), labels) == pytest.approx(reference)
    assert auc(scores ** 5 + rng.random() * 10, labels) == pytest.approx(reference)
    assert auc(1 / (1 + np.exp(-20 * (scores - 0.5))), labels) == pytest.approx(reference)


@pytest.mark.parametrize('seed', range(5))
def test_calibration_matches_a_dense_sweep(seed):
    rng = np.random.default_rng(seed)
    scores = rng.integers(0, 100, size=60) / 100
    labels = rng.random(60) < 0.3
    labels[:2] = [True, False]
    best = calibrate_threshold(scores, labels)
    grid = np.linspace(0.0, 1.0, 10001)
    assert macro_f1(labels, scores >= best) == pytest.approx(macro_f1_at(scores, labels, grid).max(), abs=1e-9)
    assert macro_f1(labels, scores >= best) == pytest.approx(macro_f1_at(scores, labels, threshold_candidates(scores)).max())


def test_identical_scores_pick_all_negative_when_it_wins():
    assert calibrate_threshold([0.5, 0.5, 0.5, 0.5], [0, 0, 0, 1]) == 1.0


def test_saturated_scores_can_still_predict_all_negative():
    scores = np.ones(4, dtype=np.float32)
    labels = [0, 0, 0, 1]
    threshold = calibrate_threshold(scores, labels)
    assert threshold > 1.0
    assert not np.any(scores >= threshold)
    assert macro_f1(labels, scores >= threshold) == pytest.approx(3 / 7)
