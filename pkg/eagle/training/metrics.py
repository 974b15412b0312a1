"""
Evaluation metrics at the node-window level

A prediction is positive when its score is at or above the threshold.
"""

import numpy as np
import pandas as pd

from eagle.errors import CalibrationError, EmptyInputError, UndefinedMetricError
from eagle.log import get_logger

logger = get_logger('eagle.metrics')


def _class_f1(tp, fp, fn):
    denom = 2 * tp + fp + fn
    return np.where(denom > 0, 2 * tp / np.where(denom > 0, denom, 1), 0.0)


def macro_f1(labels, predicted):
    """Unweighted mean of the positive-class and negative-class F1"""
    labels = np.asarray(labels).astype(bool)
    predicted = np.asarray(predicted).astype(bool)
    tp = np.sum(labels & predicted)
    fp = np.sum(~labels & predicted)
    fn = np.sum(labels & ~predicted)
    tn = np.sum(~labels & ~predicted)
    return float((_class_f1(tp, fp, fn) + _class_f1(tn, fn, fp)) / 2)


def auc(scores, labels):
    """Area under the ROC curve from the Mann-Whitney rank statistic, ties at midranks"""
    labels = np.asarray(labels).astype(bool)
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError(f"AUC is undefined with a single class ({n_pos} positive, {n_neg} negative)")
    ranks = pd.Series(np.asarray(scores, dtype=np.float64)).rank(method='average').to_numpy()
    return float((ranks[labels].sum() - n_pos * (n_pos + 1) / 2) / (n_pos * n_neg))


def threshold_candidates(scores):
    """0, 1 and every midpoint between adjacent distinct scores, ascending

    When a score saturates at 1.0 the top candidate moves just above it, so
    predicting all-negative stays reachable under the at-or-above rule.
    """
    unique = np.unique(np.asarray(scores, dtype=np.float64))
    midpoints = (unique[:-1] + unique[1:]) / 2
    top = 1.0
    if unique.size and unique[-1] >= top:
        top = float(np.nextafter(unique[-1], np.inf))
    return np.unique(np.concatenate([[0.0, top], midpoints]))


def macro_f1_at(scores, labels, thresholds):
    """Macro-F1 for each threshold, vectorized over thresholds"""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels).astype(bool)
    thresholds = np.asarray(thresholds, dtype=np.float64)
    pos_sorted = np.sort(scores[labels])
    neg_sorted = np.sort(scores[~labels])
    tp = pos_sorted.size - np.searchsorted(pos_sorted, thresholds, side='left')
    fp = neg_sorted.size - np.searchsorted(neg_sorted, thresholds, side='left')
    fn = pos_sorted.size - tp
    tn = neg_sorted.size - fp
    return (_class_f1(tp, fp, fn) + _class_f1(tn, fn, fp)) / 2


def calibrate_threshold(scores, labels):
    """The candidate threshold with the highest macro-F1, smallest on ties

    :raises CalibrationError: labels hold a single class
    :rtype: float
    """
    labels = np.asarray(labels).astype(bool)
    if labels.size == 0 or labels.all() or not labels.any():
        raise CalibrationError("Threshold calibration needs both classes in the validation labels")
    candidates = threshold_candidates(scores)
    f1 = macro_f1_at(scores, labels, candidates)
    best = int(np.argmax(f1))
    if len(candidates) == 2:
        logger.warning("All validation scores are identical; threshold chosen from {0, 1}")
    logger.info(f"Calibrated threshold {candidates[best]:.6f} (validation macro-F1 {f1[best]:.4f})")
    return float(candidates[best])


def mae(predicted, actual):
    return float(np.mean(np.abs(np.asarray(predicted, dtype=np.float64) - np.asarray(actual, dtype=np.float64))))


def metrics(predictions, threshold, strict=False):
    """Macro-F1, AUC-ROC and MAE of a prediction set, plus the zero-prediction MAE

    Without a delay column the regression error is that of predicting zero.

    :param predictions: rows of (score, delay, y_class, y_reg)
    :type predictions: Predictions
    :param strict: raise when AUC is undefined instead of reporting None
    :rtype: dict
    """
    if len(predictions) == 0:
        raise EmptyInputError("Cannot compute metrics on an empty prediction set")
    predicted = predictions.score >= threshold
    result = {
        'f1_macro': macro_f1(predictions.y_class, predicted),
        'auc_roc': None,
        'mae_days': None,
        'zero_baseline_mae': mae(np.zeros_like(predictions.y_reg), predictions.y_reg),
        'threshold': float(threshold),
        'rows': len(predictions),
    }
    delay = predictions.delay if predictions.delay is not None else np.zeros_like(predictions.y_reg)
    result['mae_days'] = mae(delay, predictions.y_reg)
    try:
        result['auc_roc'] = auc(predictions.score, predictions.y_class)
    except UndefinedMetricError:
        if strict:
            raise
        logger.warning("AUC undefined on single-class labels; reported as null")
    return result
