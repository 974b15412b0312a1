"""
Supply-chain graph: node index, directed lanes and static edge features

Each region appears once per role it plays (origin, destination). A lane joins
an origin-role node to a destination-role node that share at least one order,
and is stored as two directed edges carrying identical features.
"""

import json
from collections import Counter
from enum import Enum
from xml.etree import ElementTree

import numpy as np
import pandas as pd

from eagle.data.order import SHIPPING_MODES
from eagle.errors import GraphError, FormatError, IOFailure
from eagle.log import get_logger

logger = get_logger('eagle.graph')

EDGE_FEATURE_NAMES = ['transit_mean', 'transit_std', 'flow_volume'] + \
    [f"mode_{mode.name.lower()}" for mode in SHIPPING_MODES]
D_EDGE = len(EDGE_FEATURE_NAMES)


class NodeRole(Enum):
    ORIGIN = 'origin'
    DESTINATION = 'destination'


class NodeIndex:

    def __init__(self, nodes):
        self.nodes = [(region, NodeRole(role)) for region, role in nodes]
        self._ids = {node: i for i, node in enumerate(self.nodes)}
        if len(self._ids) != len(self.nodes):
            raise GraphError("Node index contains duplicate (region, role) pairs")

    def __len__(self):
        return len(self.nodes)

    def node_id(self, region, role):
        try:
            return self._ids[(region, NodeRole(role))]
        except KeyError:
            raise GraphError(f"Unknown node ({region!r}, {NodeRole(role).value})")

    def node(self, node_id):
        return self.nodes[node_id]

    def label(self, node_id):
        region, role = self.nodes[node_id]
        return f"{region} ({role.value})"

    def ids_for(self, regions, role):
        """Vectorized node_id over a sequence of region names"""
        role = NodeRole(role)
        try:
            return np.array([self._ids[(region, role)] for region in regions], dtype=np.int64)
        except KeyError as e:
            raise GraphError(f"Region {e.args[0][0]!r} has no {role.value} node")

    def to_json(self):
        return [{'id': i, 'region': region, 'role': role.value} for i, (region, role) in enumerate(self.nodes)]

    @classmethod
    def from_json(cls, json_nodes):
        ordered = sorted(json_nodes, key=lambda n: n['id'])
        return cls([(n['region'], n['role']) for n in ordered])


class EdgeList:

    def __init__(self, src, dst):
        self.src = np.asarray(src, dtype=np.int64)
        self.dst = np.asarray(dst, dtype=np.int64)
        if self.src.shape != self.dst.shape:
            raise GraphError("Edge source and destination arrays differ in length")

    def __len__(self):
        return len(self.src)

    @property
    def lane_count(self):
        return len(self) // 2

    def pairs(self):
        return list(zip(self.src.tolist(), self.dst.tolist()))

    def to_json(self):
        return [[int(s), int(d)] for s, d in zip(self.src, self.dst)]

    @classmethod
    def from_json(cls, json_edges):
        if not json_edges:
            return cls([], [])
        src, dst = zip(*json_edges)
        return cls(src, dst)


class SupplyGraph:
    """Node index, directed edges and the E x 7 edge-feature matrix"""

    VERSION = 1

    def __init__(self, index, edges, edge_features):
        self.index = index
        self.edges = edges
        self.edge_features = np.asarray(edge_features, dtype=np.float64).reshape(len(edges), D_EDGE)

    @property
    def num_nodes(self):
        return len(self.index)

    @property
    def num_edges(self):
        return len(self.edges)

    def degree_stats(self):
        """Undirected lane degree per node, summarized"""
        degree = np.bincount(self.edges.dst, minlength=self.num_nodes)
        histogram = Counter(degree.tolist())
        return {
            'nodes': self.num_nodes,
            'edges': self.num_edges,
            'lanes': self.edges.lane_count,
            'degree_min': int(degree.min()) if self.num_nodes else 0,
            'degree_mean': float(degree.mean()) if self.num_nodes else 0.0,
            'degree_max': int(degree.max()) if self.num_nodes else 0,
            'isolated_nodes': int((degree == 0).sum()),
            'degree_histogram': {str(k): histogram[k] for k in sorted(histogram)}
        }

    def to_json(self):
        return {
            'version': self.VERSION,
            'nodes': self.index.to_json(),
            'edges': self.edges.to_json(),
            'edge_feature_names': EDGE_FEATURE_NAMES,
            'edge_features': self.edge_features.tolist()
        }

    @classmethod
    def from_json(cls, json_object):
        if json_object.get('version') != cls.VERSION:
            raise FormatError(f"Unsupported graph version {json_object.get('version')}")
        try:
            index = NodeIndex.from_json(json_object['nodes'])
            edges = EdgeList.from_json(json_object['edges'])
            return cls(index, edges, np.array(json_object['edge_features'], dtype=np.float64))
        except (KeyError, ValueError, TypeError) as e:
            raise FormatError(f"Corrupted graph file: {e}")

    def digest_payload(self):
        return json.dumps(self.to_json(), sort_keys=True).encode('utf-8')

    def save(self, path):
        try:
            with open(path, 'w', encoding='utf-8') as fh:
                json.dump(self.to_json(), fh, sort_keys=True)
        except OSError as e:
            raise IOFailure(f"Cannot write graph {path}: {e}")

    @classmethod
    def load(cls, path):
        try:
            with open(path, encoding='utf-8') as fh:
                json_object = json.load(fh)
        except OSError as e:
            raise IOFailure(f"Cannot read graph {path}: {e}")
        except ValueError as e:
            raise FormatError(f"Graph file {path} is not valid JSON: {e}")
        return cls.from_json(json_object)

    def to_dot(self, node_attributes=None):
        """Undirected DOT rendering, one edge statement per lane"""
        node_attributes = node_attributes or {}
        lines = ['graph supply_chain {']
        for i in range(self.num_nodes):
            attrs = {'label': self.index.label(i)}
            attrs.update({k: v[i] for k, v in node_attributes.items()})
            rendered = ', '.join(f'{k}="{_dot_value(v)}"' for k, v in attrs.items())
            lines.append(f'  n{i} [{rendered}];')
        for s, d in self.edges.pairs():
            if s < d:
                lines.append(f'  n{s} -- n{d};')
        lines.append('}')
        return '\n'.join(lines) + '\n'

    def to_graphml(self, node_attributes=None):
        node_attributes = node_attributes or {}
        ns = 'http://graphml.graphdrawing.org/xmlns'
        root = ElementTree.Element('graphml', xmlns=ns)
        keys = {'region': 'string', 'role': 'string'}
        keys.update({name: 'double' for name in node_attributes})
        for name, kind in keys.items():
            ElementTree.SubElement(root, 'key', id=name, attrib={'for': 'node', 'attr.name': name, 'attr.type': kind})
        for name in EDGE_FEATURE_NAMES:
            ElementTree.SubElement(root, 'key', id=name, attrib={'for': 'edge', 'attr.name': name, 'attr.type': 'double'})
        graph = ElementTree.SubElement(root, 'graph', id='supply_chain', edgedefault='directed')
        for i, (region, role) in enumerate(self.index.nodes):
            node = ElementTree.SubElement(graph, 'node', id=f'n{i}')
            ElementTree.SubElement(node, 'data', key='region').text = region
            ElementTree.SubElement(node, 'data', key='role').text = role.value
            for name, values in node_attributes.items():
                ElementTree.SubElement(node, 'data', key=name).text = repr(float(values[i]))
        for k, (s, d) in enumerate(self.edges.pairs()):
            edge = ElementTree.SubElement(graph, 'edge', id=f'e{k}', source=f'n{s}', target=f'n{d}')
            for j, name in enumerate(EDGE_FEATURE_NAMES):
                ElementTree.SubElement(edge, 'data', key=name).text = repr(float(self.edge_features[k, j]))
        return ElementTree.tostring(root, encoding='unicode', xml_declaration=True) + '\n'


def _dot_value(value):
    if isinstance(value, float):
        return f"{value:.6f}"
    return str(value).replace('"', '\\"')


def build_node_index(table, schema=None):
    """Assign node ids in lexicographic (role, region) order

    :param table: cleaned orders
    :type table: OrderTable
    :param schema: used only to report which columns define the roles
    :type schema: SchemaConfig
    :rtype: NodeIndex
    """
    if len(table) == 0:
        raise GraphError("Cannot build a graph from an empty order table")
    frame = table.frame
    pairs = {(region, NodeRole.ORIGIN) for region in frame['origin_region'].unique()}
    pairs |= {(region, NodeRole.DESTINATION) for region in frame['dest_region'].unique()}
    if len(pairs) < 2:
        raise GraphError(f"Degenerate graph: only {len(pairs)} distinct node(s)")
    nodes = sorted(pairs, key=lambda pair: (pair[1].value, pair[0]))
    if schema is not None:
        logger.info(f"Node roles: origin from {schema.origin_region_column!r}, "
                    f"destination from {schema.dest_region_column!r}")
    logger.info(f"Built node index with N={len(nodes)}")
    return NodeIndex(nodes)


def _lane_frame(table, index):
    frame = table.frame
    return pd.DataFrame({
        'origin': index.ids_for(frame['origin_region'], NodeRole.ORIGIN),
        'dest': index.ids_for(frame['dest_region'], NodeRole.DESTINATION),
        'scheduled_days': frame['scheduled_days'].to_numpy(dtype=np.float64),
        'shipping_mode': frame['shipping_mode'].to_numpy(),
    })


def build_edges(table, index):
    """One lane per (origin node, destination node) pair with orders, both directions

    :rtype: EdgeList
    """
    lanes = _lane_frame(table, index)[['origin', 'dest']].drop_duplicates()
    src = np.concatenate([lanes['origin'].to_numpy(), lanes['dest'].to_numpy()])
    dst = np.concatenate([lanes['dest'].to_numpy(), lanes['origin'].to_numpy()])
    order = np.lexsort((dst, src))
    edges = EdgeList(src[order], dst[order])
    logger.info(f"Built {len(edges)} directed edges over {edges.lane_count} lanes")
    return edges


def compute_edge_features(table, edges, index):
    """Static per-lane statistics over all orders on the lane

    Columns: transit mean, transit std (population), flow volume, then the
    fraction of orders per shipping mode.

    :rtype: numpy.ndarray of shape (E, 7)
    """
    frame = _lane_frame(table, index)
    grouped = frame.groupby(['origin', 'dest'], sort=True)
    stats = pd.DataFrame({
        'transit_mean': grouped['scheduled_days'].mean(),
        'transit_std': grouped['scheduled_days'].std(ddof=0),
        'flow_volume': grouped.size().astype(np.float64),
    })
    mode_counts = pd.crosstab([frame['origin'], frame['dest']], frame['shipping_mode'])
    for mode in SHIPPING_MODES:
        counts = mode_counts[mode.value] if mode.value in mode_counts.columns else 0
        stats[f"mode_{mode.name.lower()}"] = counts / stats['flow_volume']
    stats = stats.fillna(0.0)

    lookup = {key: row for key, row in zip(stats.index, stats[EDGE_FEATURE_NAMES].to_numpy())}
    roles = [role for _, role in index.nodes]
    features = np.zeros((len(edges), D_EDGE), dtype=np.float64)
    for k, (s, d) in enumerate(edges.pairs()):
        key = (s, d) if roles[s] == NodeRole.ORIGIN else (d, s)
        row = lookup.get(key)
        if row is not None:
            features[k] = row
    return features


def build_graph(table, schema=None):
    """Node index, edges and edge features in one pass"""
    index = build_node_index(table, schema)
    edges = build_edges(table, index)
    features = compute_edge_features(table, edges, index)
    return SupplyGraph(index, edges, features)
