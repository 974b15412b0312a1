"""
Structural risk tracing

Sums the attention every node receives from its neighbours over all layers,
heads and snapshots of a split. Self-loop attention is left out. The raw sums
are min-max normalized into [0, 1].
"""

import json
from enum import Enum

import numpy as np

from eagle.autodiff import no_grad, precision
from eagle.data.graph import SupplyGraph
from eagle.data.snapshots import SplitTag
from eagle.errors import EmptyInputError, FormatError, IOFailure
from eagle.log import get_logger
from eagle.model import forward, GraphInputs
from eagle.training.predict import check_compatible

logger = get_logger('eagle.explain')


class Attribution(Enum):
    RECEIVER = 'receiver'
    SENDER = 'sender'


class ExportFormat(Enum):
    JSON = 'json'
    DOT = 'dot'
    GRAPHML = 'graphml'


def normalize_risk(raw):
    """Min-max scale to [0, 1]; all-equal scores map to all zeros"""
    raw = np.asarray(raw, dtype=np.float64)
    if raw.size == 0:
        return raw.copy()
    low, high = raw.min(), raw.max()
    if high == low:
        return np.zeros_like(raw)
    return (raw - low) / (high - low)


class RiskGraph:

    def __init__(self, graph, raw, snapshot_count, split=SplitTag.TEST, attribution=Attribution.RECEIVER):
        self.graph = graph
        self.raw = np.asarray(raw, dtype=np.float64)
        self.normalized = normalize_risk(self.raw)
        self.snapshot_count = snapshot_count
        self.split = SplitTag(split)
        self.attribution = Attribution(attribution)

    @property
    def num_nodes(self):
        return len(self.raw)

    def ranking(self, top=None):
        """Node ids by decreasing normalized risk, lowest id first on ties"""
        order = np.lexsort((np.arange(self.num_nodes), -self.normalized))
        return order[:top].tolist() if top is not None else order.tolist()

    def to_json(self):
        return {
            'split': self.split.value,
            'attribution': self.attribution.value,
            'snapshots': self.snapshot_count,
            'nodes': [{
                'id': i,
                'region': region,
                'role': role.value,
                'raw_risk': float(self.raw[i]),
                'risk': float(self.normalized[i])
            } for i, (region, role) in enumerate(self.graph.index.nodes)],
            'edges': self.graph.edges.to_json(),
            'graph': self.graph.to_json(),
        }

    @classmethod
    def from_json(cls, json_object):
        try:
            graph = SupplyGraph.from_json(json_object['graph'])
            raw = [node['raw_risk'] for node in sorted(json_object['nodes'], key=lambda n: n['id'])]
            return cls(graph, raw, json_object['snapshots'], json_object['split'], json_object['attribution'])
        except (KeyError, ValueError, TypeError) as e:
            raise FormatError(f"Corrupted risk graph: {e}")


def accumulate_attention(attention_layers, src, dst, num_nodes, attribution=Attribution.RECEIVER):
    """Per-node sum of non-self-loop attention over layers and heads for one forward pass

    :param attention_layers: per layer, an (E + N, heads) array with the N self-loops last
    """
    endpoint = np.asarray(dst if Attribution(attribution) == Attribution.RECEIVER else src, dtype=np.int64)
    num_edges = len(endpoint)
    risk = np.zeros(num_nodes, dtype=np.float64)
    for alpha in attention_layers:
        per_edge = np.asarray(alpha[:num_edges], dtype=np.float64).sum(axis=1)
        np.add.at(risk, endpoint, per_edge)
    return risk


def aggregate_risk(checkpoint, bundle, graph, split=SplitTag.TEST, attribution=Attribution.RECEIVER):
    """Attention-derived risk of every node over one split

    :type checkpoint: Checkpoint
    :type bundle: SplitBundle
    :type graph: SupplyGraph
    :rtype: RiskGraph
    """
    split = SplitTag(split)
    snapshots = bundle.splits[split]
    if not snapshots:
        raise EmptyInputError(f"The {split.value} split has no snapshots to explain")
    check_compatible(checkpoint, bundle, graph)
    inputs = GraphInputs.from_graph(graph)
    raw = np.zeros(graph.num_nodes, dtype=np.float64)
    with precision(checkpoint.precision_bits), no_grad():
        for snapshot in snapshots:
            result = forward(snapshot, inputs, checkpoint.params, checkpoint.model_config)
            raw += accumulate_attention(result.attention, inputs.src, inputs.dst, graph.num_nodes, attribution)
    risk = RiskGraph(graph, raw, len(snapshots), split, attribution)
    top = ', '.join(graph.index.label(i) for i in risk.ranking(3))
    logger.info(f"Aggregated attention over {len(snapshots)} {split.value} snapshots; top nodes: {top}")
    return risk


def export_risk(risk, fmt, path):
    """Write a risk graph as JSON, DOT or GraphML, with risk as a node attribute"""
    fmt = ExportFormat(fmt)
    if risk.num_nodes == 0:
        raise FormatError("Cannot export an empty risk graph")
    attributes = {'risk': risk.normalized, 'raw_risk': risk.raw}
    if fmt == ExportFormat.JSON:
        text = json.dumps(risk.to_json(), indent=2, sort_keys=True)
    elif fmt == ExportFormat.DOT:
        text = risk.graph.to_dot(node_attributes=attributes)
    else:
        text = risk.graph.to_graphml(node_attributes=attributes)
    try:
        with open(path, 'w', encoding='utf-8') as fh:
            fh.write(text)
    except OSError as e:
        raise IOFailure(f"Cannot write risk graph {path}: {e}")
    logger.info(f"Wrote {fmt.value} risk graph to {path}")
    return path


def load_risk(path):
    try:
        with open(path, encoding='utf-8') as fh:
            return RiskGraph.from_json(json.load(fh))
    except OSError as e:
        raise IOFailure(f"Cannot read risk graph {path}: {e}")
    except ValueError as e:
        raise FormatError(f"Risk graph {path} is not valid JSON: {e}")
