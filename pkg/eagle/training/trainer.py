"""
Training loop

One optimizer step per training snapshot, snapshots reshuffled every epoch
from the run seed. After each epoch the validation AUC decides whether the
current parameters become the best checkpoint; training stops once the AUC has
not improved for the configured patience.
"""

import math
import time

import numpy as np

from eagle.autodiff import backward, get_precision
from eagle.errors import CompatibilityError, DataError, NumericError, UndefinedMetricError
from eagle.log import get_logger
from eagle.model import forward, init_params, loss
from eagle.model.network import GraphInputs
from eagle.training.checkpoint import Checkpoint
from eagle.training.metrics import auc
from eagle.training.optimizer import AdamW, cosine_lr, clip_grad_norm
from eagle.training.predict import predict_snapshots

logger = get_logger('eagle.trainer')


def train_positive_rate(bundle):
    counts = bundle.counts()['train']
    total = counts['positives'] + counts['negatives']
    return counts['positives'] / total


def _check_inputs(bundle, graph, model_config):
    if not bundle.standardized:
        raise DataError("Training needs a standardized bundle")
    if graph.num_nodes != bundle.num_nodes:
        raise CompatibilityError(f"Graph has {graph.num_nodes} nodes, bundle has {bundle.num_nodes}")
    if model_config.window != bundle.window:
        raise CompatibilityError(f"Model window {model_config.window} differs from bundle window {bundle.window}")
    if not bundle.train or not bundle.val:
        raise DataError("Training needs non-empty train and validation splits")
    val_labels = np.concatenate([s.y_class for s in bundle.val])
    if val_labels.all() or not val_labels.any():
        raise UndefinedMetricError("Validation labels hold a single class; checkpoint selection by AUC is undefined")


def train(bundle, graph, model_config, train_config, seed):
    """Train one model

    :param bundle: standardized, labeled snapshots
    :type bundle: SplitBundle
    :param graph: the supply graph the bundle was built on
    :type graph: SupplyGraph
    :type model_config: ModelConfig
    :type train_config: TrainConfig
    :param seed: drives initialization, shuffling and dropout
    :type seed: int
    :return: best checkpoint and per-epoch history rows
    :rtype: tuple
    """
    _check_inputs(bundle, graph, model_config)
    inputs = GraphInputs.from_graph(graph)
    params = init_params(model_config, seed, train_positive_rate(bundle))
    optimizer = AdamW(params.parameters(), lr=train_config.lr, betas=train_config.betas, eps=train_config.eps,
                      weight_decay=train_config.weight_decay)
    shuffle_seed, dropout_seed = np.random.SeedSequence(seed).spawn(2)
    shuffle_rng = np.random.default_rng(shuffle_seed)
    dropout_rng = np.random.default_rng(dropout_seed)

    train_snapshots = bundle.train
    total_steps = train_config.epochs * len(train_snapshots)
    logger.info(f"Seed {seed}: training {model_config.ablation.value} model with {params.num_parameters:,} "
                f"parameters on {len(train_snapshots)} snapshots for up to {train_config.epochs} epochs")

    history = []
    best_auc, best_epoch, best_state = -math.inf, 0, params.state()
    stale_epochs = 0
    step = 0
    lr = train_config.lr
    for epoch in range(1, train_config.epochs + 1):
        start_time = time.time()
        epoch_loss = 0.0
        for i in shuffle_rng.permutation(len(train_snapshots)):
            snapshot = train_snapshots[i]
            params.zero_grad()
            result = forward(snapshot, inputs, params, model_config, rng=dropout_rng)
            try:
                total, components = loss(result.probability, result.delay, snapshot.y_class, snapshot.y_reg,
                                         model_config)
            except NumericError as e:
                raise NumericError(f"Non-finite loss at epoch {epoch}, snapshot t={snapshot.t}",
                                   diagnostics={'epoch': epoch, 't': snapshot.t, 'cause': str(e)})
            if not math.isfinite(components['total']):
                raise NumericError(f"Non-finite loss at epoch {epoch}, snapshot t={snapshot.t}: {components}",
                                   diagnostics={'epoch': epoch, 't': snapshot.t, **components})
            backward(total, inputs=params.parameters())
            clip_grad_norm(params.parameters(), train_config.clip_norm)
            lr = cosine_lr(step, total_steps, train_config.lr, train_config.lr_min)
            optimizer.step(lr)
            step += 1
            epoch_loss += components['total']

        predictions = predict_snapshots(bundle.val, inputs, params, model_config)
        val_auc = auc(predictions.score, predictions.y_class)
        train_loss = epoch_loss / len(train_snapshots)
        history.append({'epoch': epoch, 'train_loss': train_loss, 'val_auc': val_auc, 'lr': lr})
        logger.info(f"Seed {seed} epoch {epoch}: train loss {train_loss:.4f}, val AUC {val_auc:.4f} "
                    f"({time.time() - start_time:.1f}s)")
        logger.debug(f"Seed {seed} epoch {epoch}: lr {lr:.3e}")

        if val_auc > best_auc:
            best_auc, best_epoch, best_state = val_auc, epoch, params.state()
            stale_epochs = 0
        else:
            stale_epochs += 1
            if stale_epochs >= train_config.early_stop_patience:
                logger.info(f"Seed {seed}: stopping early after epoch {epoch}, best epoch {best_epoch}")
                break

    params.load_state(best_state)
    checkpoint = Checkpoint(params, model_config, train_config, seed, best_epoch, best_auc, bundle.num_nodes,
                            bundle.feature_mean, bundle.feature_std, get_precision())
    logger.info(f"Seed {seed}: best val AUC {best_auc:.4f} at epoch {best_epoch}")
    return checkpoint, history
