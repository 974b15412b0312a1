from eagle.training.config import TrainConfig
from eagle.training.optimizer import AdamW, cosine_lr, clip_grad_norm, global_grad_norm
from eagle.training.checkpoint import Checkpoint
from eagle.training.metrics import auc, macro_f1, calibrate_threshold, metrics
from eagle.training.predict import Predictions, predict, predict_snapshots
from eagle.training.trainer import train
from eagle.training.experiment import MetricsReport, SeedResult, run_experiment, run_ablation, collect_reports
