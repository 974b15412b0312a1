from dataclasses import dataclass

import numpy as np
import pandas as pd

from eagle.autodiff import no_grad, precision
from eagle.data.snapshots import SplitTag
from eagle.errors import CompatibilityError, EmptyInputError
from eagle.model import forward, GraphInputs
from eagle.model.network import as_graph_inputs


@dataclass
class Predictions:
    """One row per (snapshot, node); delay is None for a model without a regression head"""
    t: np.ndarray
    node: np.ndarray
    score: np.ndarray
    delay: np.ndarray
    y_class: np.ndarray
    y_reg: np.ndarray

    def __len__(self):
        return len(self.score)

    def to_frame(self):
        columns = {'t': self.t, 'node': self.node, 'score': self.score}
        if self.delay is not None:
            columns['delay'] = self.delay
        columns['y_class'] = self.y_class
        columns['y_reg'] = self.y_reg
        return pd.DataFrame(columns)

    def save(self, path):
        self.to_frame().to_csv(path, index=False)


def predict_snapshots(snapshots, graph, params, config):
    """Evaluate without dropout or recording and stack the rows"""
    if not snapshots:
        raise EmptyInputError("No snapshots to predict")
    inputs = as_graph_inputs(graph)
    scores, delays = [], []
    with no_grad():
        for snapshot in snapshots:
            result = forward(snapshot, inputs, params, config)
            scores.append(result.probability.values.astype(np.float64))
            if result.has_regression:
                delays.append(result.delay.values.astype(np.float64))
    n = inputs.num_nodes
    return Predictions(
        t=np.repeat([s.t for s in snapshots], n),
        node=np.tile(np.arange(n), len(snapshots)),
        score=np.concatenate(scores),
        delay=np.concatenate(delays) if delays else None,
        y_class=np.concatenate([s.y_class for s in snapshots]).astype(np.int64),
        y_reg=np.concatenate([s.y_reg for s in snapshots]).astype(np.float64),
    )


def check_compatible(checkpoint, bundle, graph=None):
    if checkpoint.num_nodes != bundle.num_nodes:
        raise CompatibilityError(f"Checkpoint was trained on {checkpoint.num_nodes} nodes, "
                                 f"bundle has {bundle.num_nodes}")
    if graph is not None and graph.num_nodes != bundle.num_nodes:
        raise CompatibilityError(f"Graph has {graph.num_nodes} nodes, bundle has {bundle.num_nodes}")
    if not bundle.standardized or not (np.array_equal(checkpoint.feature_mean, bundle.feature_mean)
                                       and np.array_equal(checkpoint.feature_std, bundle.feature_std)):
        raise CompatibilityError("Checkpoint and bundle were standardized with different statistics")
    if checkpoint.model_config.window != bundle.window:
        raise CompatibilityError(f"Checkpoint window {checkpoint.model_config.window} differs from "
                                 f"bundle window {bundle.window}")


def predict(checkpoint, bundle, graph, split=SplitTag.TEST):
    """Deterministic predictions of a checkpoint on one split of a bundle

    :type checkpoint: Checkpoint
    :type bundle: SplitBundle
    :param graph: SupplyGraph the checkpoint was trained on
    :param split: SplitTag or its name
    :rtype: Predictions
    """
    split = SplitTag(split)
    check_compatible(checkpoint, bundle, graph if not isinstance(graph, GraphInputs) else None)
    with precision(checkpoint.precision_bits):
        return predict_snapshots(bundle.splits[split], graph, checkpoint.params, checkpoint.model_config)
