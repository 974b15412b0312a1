"""
The full network: temporal encoder, stacked edge-aware attention, and the
classification and regression heads, plus the multi-task loss.
"""

from dataclasses import dataclass

import numpy as np

from eagle.autodiff import Tensor, ops
from eagle.errors import CompatibilityError, NumericError, ShapeError
from eagle.model.egat import egat_layer
from eagle.model.encoder import encode_temporal, encode_static

PROB_CLAMP = 1e-7
EDGE_STD_FLOOR = 1e-8


@dataclass
class GraphInputs:
    """Edge arrays and z-scored edge features, prepared once per graph"""
    num_nodes: int
    src: np.ndarray
    dst: np.ndarray
    edge_features: np.ndarray

    @classmethod
    def from_graph(cls, graph):
        features = np.asarray(graph.edge_features, dtype=np.float64)
        if len(features):
            mean = features.mean(axis=0)
            std = np.maximum(features.std(axis=0), EDGE_STD_FLOOR)
            features = (features - mean) / std
        return cls(graph.num_nodes, graph.edges.src, graph.edges.dst, features)


def as_graph_inputs(graph):
    return graph if isinstance(graph, GraphInputs) else GraphInputs.from_graph(graph)


@dataclass
class ForwardResult:
    probability: Tensor
    delay: Tensor
    attention: list

    @property
    def has_regression(self):
        return self.delay is not None


def _mlp(z, params, prefix):
    hidden = ops.relu(z @ params[f'{prefix}.w1'] + params[f'{prefix}.b1'])
    out = hidden @ params[f'{prefix}.w2'] + params[f'{prefix}.b2']
    return ops.reshape(out, (z.shape[0],))


def forward(snapshot, graph, params, config, rng=None):
    """Run the network on one snapshot

    :param snapshot: a Snapshot, or its (N, T, d_node) feature array
    :param graph: SupplyGraph or prepared GraphInputs
    :param params: model parameters
    :type params: ModelParams
    :param config: model configuration (ablation included)
    :type config: ModelConfig
    :param rng: dropout generator, None at evaluation time
    :return: probabilities, delays (None without a regression head) and per-layer attention
    :rtype: ForwardResult
    """
    features = getattr(snapshot, 'node_features', snapshot)
    features = np.asarray(features)
    inputs = as_graph_inputs(graph)
    if features.shape[0] != inputs.num_nodes:
        raise CompatibilityError(f"Snapshot has {features.shape[0]} nodes, graph has {inputs.num_nodes}")
    if features.shape[1:] != (config.window, config.d_node):
        raise ShapeError(f"Node features of shape {features.shape[1:]} do not match the configured "
                         f"({config.window}, {config.d_node})")

    ablation = config.ablation
    if ablation.uses_temporal_encoder:
        h = encode_temporal(features, params, config, rng)
    else:
        h = encode_static(features, params)

    attention = []
    for layer in range(config.gat_layers):
        h, alpha = egat_layer(h, inputs.src, inputs.dst, inputs.edge_features, params, f'gat.{layer}',
                              config.gat_heads, use_edges=ablation.uses_edge_features,
                              slope=config.leaky_slope, activation=config.gat_activation)
        attention.append(alpha)

    probability = ops.sigmoid(_mlp(h, params, 'cls'))
    delay = ops.softplus(_mlp(h, params, 'reg')) if ablation.has_regression_head else None
    return ForwardResult(probability, delay, attention)


def loss(probability, delay, y_class, y_reg, config):
    """lam * weighted BCE + (1 - lam) * Huber, or weighted BCE alone without a regression head

    :return: (scalar loss tensor, {'bce': float, 'huber': float or None, 'total': float})
    :rtype: tuple
    """
    y_class = np.asarray(y_class, dtype=np.float64)
    y_reg = np.asarray(y_reg, dtype=np.float64)
    if probability.shape != y_class.shape:
        raise ShapeError(f"Predictions of shape {probability.shape} do not match labels {y_class.shape}")
    checked = [probability.values, y_class, y_reg] + ([delay.values] if delay is not None else [])
    if not all(np.all(np.isfinite(values)) for values in checked):
        raise NumericError("Non-finite value in loss inputs")

    p = ops.clip(probability, PROB_CLAMP, 1.0 - PROB_CLAMP)
    positive = Tensor(y_class * config.pos_weight)
    negative = Tensor(1.0 - y_class)
    bce = -ops.mean(positive * ops.log(p) + negative * ops.log(1.0 - p))
    components = {'bce': bce.item(), 'huber': None}

    if delay is None:
        total = bce
    else:
        huber = ops.mean(ops.huber(delay - Tensor(y_reg), config.huber_delta))
        components['huber'] = huber.item()
        total = config.lam * bce + (1.0 - config.lam) * huber
    components['total'] = total.item()
    return total, components
