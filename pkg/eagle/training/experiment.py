"""
Multi-seed experiments and ablations

Each seed trains, calibrates its threshold on validation and is scored on test.
Seeds are independent jobs; with more than one worker they run in a process
pool and are aggregated in seed order.
"""

import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from eagle.autodiff import get_precision, set_precision
from eagle.data.snapshots import SplitTag
from eagle.errors import IOFailure, FormatError
from eagle.log import get_logger
from eagle.model import ablation_from_string
from eagle.training.metrics import calibrate_threshold, metrics
from eagle.training.predict import predict
from eagle.training.trainer import train

logger = get_logger('eagle.experiment')

METRIC_KEYS = ['f1_macro', 'auc_roc', 'mae_days']
HISTORY_COLUMNS = ['epoch', 'train_loss', 'val_auc', 'lr']


def write_history_csv(history, path):
    try:
        pd.DataFrame(history, columns=HISTORY_COLUMNS).to_csv(path, index=False)
    except OSError as e:
        raise IOFailure(f"Cannot write history {path}: {e}")


def read_history_csv(path):
    try:
        return pd.read_csv(path).to_dict('records')
    except OSError as e:
        raise IOFailure(f"Cannot read history {path}: {e}")


@dataclass
class SeedResult:
    seed: int
    f1_macro: float
    auc_roc: float
    mae_days: float
    zero_baseline_mae: float
    threshold: float
    best_epoch: int
    best_val_auc: float
    checkpoint_path: str = None
    checkpoint_digest: str = None
    history: list = field(default_factory=list)

    def to_json(self):
        return {
            'seed': self.seed,
            'f1_macro': self.f1_macro,
            'auc_roc': self.auc_roc,
            'mae_days': self.mae_days,
            'zero_baseline_mae': self.zero_baseline_mae,
            'threshold': self.threshold,
            'best_epoch': self.best_epoch,
            'best_val_auc': self.best_val_auc,
            'checkpoint': self.checkpoint_path,
            'checkpoint_digest': self.checkpoint_digest,
        }

    @classmethod
    def from_json(cls, json_object):
        return cls(json_object['seed'], json_object['f1_macro'], json_object['auc_roc'], json_object['mae_days'],
                   json_object['zero_baseline_mae'], json_object['threshold'], json_object['best_epoch'],
                   json_object['best_val_auc'], json_object.get('checkpoint'), json_object.get('checkpoint_digest'))


def aggregate(values):
    """Mean and sample standard deviation; std is None for a single value"""
    values = np.asarray([v for v in values if v is not None], dtype=np.float64)
    if values.size == 0:
        return {'mean': None, 'std': None}
    return {'mean': float(values.mean()), 'std': float(values.std(ddof=1)) if values.size > 1 else None}


class MetricsReport:

    def __init__(self, variant, seed_results, model_config=None, train_config=None):
        self.variant = variant
        self.seed_results = list(seed_results)
        self.model_config = model_config
        self.train_config = train_config

    @property
    def aggregate(self):
        return {key: aggregate([getattr(r, key) for r in self.seed_results]) for key in METRIC_KEYS}

    @property
    def zero_baseline_mae(self):
        return self.seed_results[0].zero_baseline_mae if self.seed_results else None

    def to_json(self):
        return {
            'variant': self.variant,
            'per_seed': [r.to_json() for r in self.seed_results],
            'aggregate': self.aggregate,
            'zero_baseline_mae': self.zero_baseline_mae,
            'model_config': self.model_config.to_json() if self.model_config is not None else None,
            'train_config': self.train_config.to_json() if self.train_config is not None else None,
        }

    @classmethod
    def from_json(cls, json_object):
        return cls(json_object['variant'], [SeedResult.from_json(r) for r in json_object['per_seed']])

    def save(self, path):
        try:
            with open(path, 'w', encoding='utf-8') as fh:
                json.dump(self.to_json(), fh, indent=2, sort_keys=True)
        except OSError as e:
            raise IOFailure(f"Cannot write report {path}: {e}")

    @classmethod
    def load(cls, path):
        try:
            with open(path, encoding='utf-8') as fh:
                return cls.from_json(json.load(fh))
        except OSError as e:
            raise IOFailure(f"Cannot read report {path}: {e}")
        except (ValueError, KeyError) as e:
            raise FormatError(f"Corrupted report {path}: {e}")

    def summary(self):
        parts = []
        for key, stats in self.aggregate.items():
            if stats['mean'] is None:
                continue
            std = f" ± {stats['std']:.4f}" if stats['std'] is not None else ''
            parts.append(f"{key} {stats['mean']:.4f}{std}")
        return f"{self.variant}: " + ', '.join(parts)


def run_seed(bundle, graph, model_config, train_config, seed, out_dir=None, precision_bits=None):
    """Train, calibrate on validation and evaluate on test for one seed"""
    if precision_bits is not None:
        set_precision(precision_bits)
    checkpoint, history = train(bundle, graph, model_config, train_config, seed)
    val = predict(checkpoint, bundle, graph, SplitTag.VAL)
    threshold = calibrate_threshold(val.score, val.y_class)
    test_metrics = metrics(predict(checkpoint, bundle, graph, SplitTag.TEST), threshold)

    result = SeedResult(seed, test_metrics['f1_macro'], test_metrics['auc_roc'], test_metrics['mae_days'],
                        test_metrics['zero_baseline_mae'], threshold, checkpoint.best_epoch,
                        checkpoint.best_val_auc, history=history)
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        prefix = os.path.join(out_dir, f"{model_config.ablation.value}_seed{seed}")
        result.checkpoint_path = os.path.basename(prefix + '.ckpt')
        result.checkpoint_digest = checkpoint.save(prefix + '.ckpt')
        write_history_csv(history, prefix + '_history.csv')
    logger.info(f"Seed {seed} ({model_config.ablation.value}): F1 {result.f1_macro:.4f}, "
                f"AUC {result.auc_roc if result.auc_roc is None else round(result.auc_roc, 4)}, "
                f"MAE {result.mae_days:.4f} days, threshold {threshold:.4f}")
    return result


def run_experiment(bundle, graph, model_config, train_config, workers=1, out_dir=None, variant=None):
    """Run every seed of train_config and aggregate mean and sample std

    :param workers: processes for independent seeds; 1 runs them inline
    :param out_dir: where checkpoints, history CSVs and the report go, if given
    :rtype: MetricsReport
    """
    variant = variant or model_config.ablation.value
    seeds = list(train_config.seeds)
    if len(seeds) < 2:
        logger.warning("Fewer than 2 seeds: the spread across seeds is not reported")
    if workers > 1 and len(seeds) > 1:
        bits = get_precision()
        with ProcessPoolExecutor(max_workers=min(workers, len(seeds))) as pool:
            futures = [pool.submit(run_seed, bundle, graph, model_config, train_config, seed, out_dir, bits)
                       for seed in seeds]
            results = [future.result() for future in futures]
    else:
        results = [run_seed(bundle, graph, model_config, train_config, seed, out_dir) for seed in seeds]

    report = MetricsReport(variant, results, model_config, train_config)
    logger.info(report.summary())
    if out_dir is not None:
        report.save(os.path.join(out_dir, f"report_{variant}.json"))
    return report


def run_ablation(bundle, graph, base_config, variant, train_config, workers=1, out_dir=None):
    """run_experiment with the model switched to an ablation variant"""
    ablation = ablation_from_string(variant)
    return run_experiment(bundle, graph, base_config.with_ablation(ablation), train_config, workers=workers,
                          out_dir=out_dir, variant=ablation.value)


def collect_reports(runs_dir):
    """Merge every report_<variant>.json under runs_dir into one document"""
    try:
        names = sorted(n for n in os.listdir(runs_dir) if n.startswith('report_') and n.endswith('.json'))
    except OSError as e:
        raise IOFailure(f"Cannot list runs directory {runs_dir}: {e}")
    if not names:
        raise FormatError(f"No report_*.json files in {runs_dir}")
    variants = {}
    for name in names:
        report = MetricsReport.load(os.path.join(runs_dir, name))
        variants[report.variant] = {
            'per_seed': [r.to_json() for r in report.seed_results],
            'aggregate': report.aggregate,
            'zero_baseline_mae': report.zero_baseline_mae,
        }
    return {'variants': variants}
