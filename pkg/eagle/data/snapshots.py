"""
Leakage-safe temporal snapshots

A snapshot at day t carries per-node daily features over [t, t+T) and labels
from the disjoint window [t+T, t+T+horizon). Every order contributes to both
its origin-role and its destination-role node.
"""

import math
from dataclasses import dataclass, replace, asdict
from enum import Enum

import numpy as np

from eagle.archive import write_archive, read_archive
from eagle.data.graph import NodeRole, SupplyGraph
from eagle.errors import InsufficientDataError, SplitError, ConfigError, DataError, FormatError
from eagle.log import get_logger

logger = get_logger('eagle.snapshots')

NODE_FEATURE_NAMES = ['order_vol', 'mean_scheduled_transit', 'std_scheduled_transit', 'mean_discount_rate',
                      'prev_delay_days']
D_NODE = len(NODE_FEATURE_NAMES)
STD_FLOOR = 1e-8
BUNDLE_VERSION = 1


class SplitTag(Enum):
    TRAIN = 'train'
    VAL = 'val'
    TEST = 'test'


SPLITS = list(SplitTag)


@dataclass
class SnapshotConfig:
    window: int = 14
    stride: int = 1
    horizon: int = 14
    fractions: tuple = (0.70, 0.15, 0.15)
    # explicit (train, val) snapshot counts; the fractions apply when empty
    split_sizes: tuple = ()

    def __post_init__(self):
        for name in ('window', 'stride', 'horizon'):
            if getattr(self, name) < 1:
                raise ConfigError(f"snapshots.{name} must be at least 1, got {getattr(self, name)}")
        self.fractions = tuple(float(f) for f in self.fractions)
        if len(self.fractions) != 3 or any(f <= 0 for f in self.fractions):
            raise ConfigError(f"snapshots.fractions must be three positive values, got {self.fractions}")
        if abs(sum(self.fractions) - 1.0) > 1e-9:
            raise ConfigError(f"snapshots.fractions must sum to 1, got {sum(self.fractions)}")
        self.split_sizes = tuple(int(s) for s in self.split_sizes or ())
        if self.split_sizes and (len(self.split_sizes) != 2 or min(self.split_sizes) < 1):
            raise ConfigError(f"snapshots.split_sizes must be two positive counts, got {self.split_sizes}")

    def to_json(self):
        json_object = asdict(self)
        json_object['fractions'] = list(self.fractions)
        json_object['split_sizes'] = list(self.split_sizes)
        return json_object

    @classmethod
    def from_json(cls, json_object):
        try:
            return cls(**json_object)
        except TypeError as e:
            raise ConfigError(f"invalid snapshot config: {e}")


@dataclass(eq=False)
class Snapshot:
    t: int
    node_features: np.ndarray
    y_class: np.ndarray = None
    y_reg: np.ndarray = None
    split: SplitTag = None
    window: int = 14
    horizon: int = 14

    @property
    def num_nodes(self):
        return self.node_features.shape[0]

    @property
    def feature_days(self):
        return range(self.t, self.t + self.window)

    @property
    def label_days(self):
        return range(self.t + self.window, self.t + self.window + self.horizon)

    @property
    def labeled(self):
        return self.y_class is not None

    @property
    def positives(self):
        return int(self.y_class.sum())

    @property
    def negatives(self):
        return int(self.y_class.size - self.y_class.sum())


class NodeDayGrid:
    """Per-node, per-day aggregates of an order table

    features has shape (N, D, 5); delay_sum and order_count (N, D) back the
    label windows through prefix sums.
    """

    def __init__(self, table, index):
        self.index = index
        self.num_nodes = len(index)
        self.num_days = table.num_days
        frame = table.frame
        n, days = self.num_nodes, self.num_days

        nodes = np.concatenate([index.ids_for(frame['origin_region'], NodeRole.ORIGIN),
                                index.ids_for(frame['dest_region'], NodeRole.DESTINATION)])
        day = np.tile(frame['order_day'].to_numpy(dtype=np.int64), 2)
        scheduled = np.tile(frame['scheduled_days'].to_numpy(dtype=np.float64), 2)
        discount = np.tile(frame['discount_rate'].to_numpy(dtype=np.float64), 2)
        delay = np.tile(frame['delay_days'].to_numpy(dtype=np.float64), 2)

        count = np.zeros((n, days))
        sched_sum = np.zeros((n, days))
        discount_sum = np.zeros((n, days))
        delay_sum = np.zeros((n, days))
        np.add.at(count, (nodes, day), 1.0)
        np.add.at(sched_sum, (nodes, day), scheduled)
        np.add.at(discount_sum, (nodes, day), discount)
        np.add.at(delay_sum, (nodes, day), delay)

        populated = count > 0
        safe = np.where(populated, count, 1.0)
        sched_mean = np.where(populated, sched_sum / safe, 0.0)
        # two-pass variance keeps constant days at exactly zero
        sq_dev = np.zeros((n, days))
        np.add.at(sq_dev, (nodes, day), (scheduled - sched_mean[nodes, day]) ** 2)
        sched_std = np.where(populated, np.sqrt(sq_dev / safe), 0.0)

        self.features = np.stack([
            count,
            sched_mean,
            sched_std,
            np.where(populated, discount_sum / safe, 0.0),
            np.where(populated, delay_sum / safe, 0.0),
        ], axis=-1)
        self.order_count = count
        self.delay_sum = delay_sum
        self._count_prefix = np.concatenate([np.zeros((n, 1)), np.cumsum(count, axis=1)], axis=1)
        self._delay_prefix = np.concatenate([np.zeros((n, 1)), np.cumsum(delay_sum, axis=1)], axis=1)

    def window_features(self, start, length):
        return self.features[:, start:start + length, :].copy()

    def window_mean_delay(self, start, length):
        """Mean delay per node over orders placed in [start, start+length), 0 where none"""
        end = start + length
        if start < 0 or end > self.num_days:
            raise InsufficientDataError(f"Window [{start}, {end}) lies outside the data span of {self.num_days} days")
        orders = self._count_prefix[:, end] - self._count_prefix[:, start]
        delays = self._delay_prefix[:, end] - self._delay_prefix[:, start]
        return np.where(orders > 0, delays / np.where(orders > 0, orders, 1.0), 0.0)


def _as_grid(source, index):
    if isinstance(source, NodeDayGrid):
        return source
    if index is None:
        raise DataError("A node index is required to aggregate an order table")
    return NodeDayGrid(source, index)


def build_snapshots(table, index, window=14, stride=1, horizon=14, grid=None):
    """One unlabeled snapshot per start day whose feature and label windows fit in the data

    :param table: cleaned orders
    :type table: OrderTable
    :param index: node index built from the same table
    :type index: NodeIndex
    :return: snapshots sorted by t
    :rtype: list of Snapshot
    """
    if window < 1 or stride < 1 or horizon < 1:
        raise ConfigError(f"window, stride and horizon must be positive, got {window}, {stride}, {horizon}")
    minimum = window + horizon
    if table.day_span < minimum:
        raise InsufficientDataError(f"Order data spans {table.day_span} days; at least {minimum} "
                                    f"(window {window} + horizon {horizon}) are required")
    grid = grid or NodeDayGrid(table, index)
    first_day = int(table.frame['order_day'].min())
    last_start = grid.num_days - minimum
    snapshots = [Snapshot(t, grid.window_features(t, window), window=window, horizon=horizon)
                 for t in range(first_day, last_start + 1, stride)]
    logger.info(f"Built {len(snapshots)} snapshots (window={window}, stride={stride}, horizon={horizon})")
    return snapshots


def split_counts(n, fractions=(0.70, 0.15, 0.15), sizes=None):
    """Train and val sizes rounded down, remainder to test, rebalanced so none is empty

    Explicit (train, val) sizes replace the fractions; the remainder still goes to test.
    """
    if n < 3:
        raise SplitError(f"Need at least 3 snapshots to form train/val/test splits, got {n}")
    if sizes:
        train, val = sizes
        if train + val >= n:
            raise SplitError(f"Split sizes {train} + {val} leave no test snapshots out of {n}")
        return [train, val, n - train - val]
    counts = [math.floor(n * fractions[0] + 1e-9), math.floor(n * fractions[1] + 1e-9)]
    counts.append(n - sum(counts))
    for i in range(3):
        if counts[i] == 0:
            donor = max(range(3), key=lambda j: counts[j])
            counts[donor] -= 1
            counts[i] += 1
    return counts


def chronological_split(snapshots, fractions=(0.70, 0.15, 0.15), sizes=None):
    """Assign a contiguous prefix, middle and suffix of the snapshots to train, val and test

    :rtype: SplitBundle
    """
    ts = [s.t for s in snapshots]
    if ts != sorted(ts):
        raise SplitError("Snapshots must be sorted by t before splitting")
    counts = split_counts(len(snapshots), fractions, sizes)
    bounds = np.cumsum([0] + counts)
    parts = {}
    for tag, lo, hi in zip(SPLITS, bounds[:-1], bounds[1:]):
        parts[tag] = [replace(s, split=tag) for s in snapshots[lo:hi]]
    first = snapshots[0]
    bundle = SplitBundle(parts[SplitTag.TRAIN], parts[SplitTag.VAL], parts[SplitTag.TEST],
                         num_nodes=first.num_nodes, window=first.window, horizon=first.horizon)
    logger.info(f"Split {len(snapshots)} snapshots into {counts[0]} / {counts[1]} / {counts[2]}")
    return bundle


def compute_baselines(train_snapshots, table, index=None):
    """Per-node delay baseline: the mean over train label windows of the window's mean delay

    Windows without orders at a node count as zero delay, the same way the
    regression label treats them.

    :param table: an OrderTable (with index) or a prebuilt NodeDayGrid
    :rtype: numpy.ndarray of shape (N,)
    """
    grid = _as_grid(table, index)
    if not train_snapshots:
        return np.zeros(grid.num_nodes)
    window_means = np.stack([grid.window_mean_delay(s.t + s.window, s.horizon) for s in train_snapshots])
    mu = window_means.mean(axis=0)
    logger.info(f"Baselines: {int((mu == 0).sum())} of {len(mu)} nodes are cold-start")
    return mu


def assign_labels(snapshot, table, mu, index=None):
    """Label a snapshot from its future window relative to the node baselines

    y_reg is the mean delay of orders touching each node in the label window;
    y_class is 1 when y_reg exceeds the baseline, or exceeds zero for
    cold-start nodes.

    :rtype: Snapshot
    """
    grid = _as_grid(table, index)
    mu = np.asarray(mu, dtype=np.float64)
    y_reg = grid.window_mean_delay(snapshot.t + snapshot.window, snapshot.horizon)
    y_class = np.where(mu > 0, y_reg > mu, y_reg > 0).astype(np.int8)
    return replace(snapshot, y_class=y_class, y_reg=y_reg)


class SplitBundle:

    def __init__(self, train, val, test, num_nodes, window=14, horizon=14, mu=None,
                 feature_mean=None, feature_std=None):
        self.splits = {SplitTag.TRAIN: list(train), SplitTag.VAL: list(val), SplitTag.TEST: list(test)}
        self.num_nodes = num_nodes
        self.window = window
        self.horizon = horizon
        self.mu = None if mu is None else np.asarray(mu, dtype=np.float64)
        self.feature_mean = None if feature_mean is None else np.asarray(feature_mean, dtype=np.float64)
        self.feature_std = None if feature_std is None else np.asarray(feature_std, dtype=np.float64)

    @property
    def train(self):
        return self.splits[SplitTag.TRAIN]

    @property
    def val(self):
        return self.splits[SplitTag.VAL]

    @property
    def test(self):
        return self.splits[SplitTag.TEST]

    @property
    def labeled(self):
        return all(s.labeled for snapshots in self.splits.values() for s in snapshots)

    @property
    def standardized(self):
        return self.feature_mean is not None

    def all_snapshots(self):
        return self.train + self.val + self.test

    def counts(self):
        result = {}
        for tag, snapshots in self.splits.items():
            entry = {'snapshots': len(snapshots)}
            if snapshots and all(s.labeled for s in snapshots):
                entry['positives'] = sum(s.positives for s in snapshots)
                entry['negatives'] = sum(s.negatives for s in snapshots)
            result[tag.value] = entry
        return result

    def boundaries(self):
        return {tag.value: [snapshots[0].t, snapshots[-1].t] if snapshots else None
                for tag, snapshots in self.splits.items()}

    def equals(self, other):
        if (self.num_nodes, self.window, self.horizon) != (other.num_nodes, other.window, other.horizon):
            return False
        for name in ('mu', 'feature_mean', 'feature_std'):
            a, b = getattr(self, name), getattr(other, name)
            if (a is None) != (b is None) or (a is not None and not np.array_equal(a, b)):
                return False
        for tag in SPLITS:
            mine, theirs = self.splits[tag], other.splits[tag]
            if len(mine) != len(theirs):
                return False
            for a, b in zip(mine, theirs):
                if a.t != b.t or a.split != b.split or not np.array_equal(a.node_features, b.node_features):
                    return False
                if not (np.array_equal(a.y_class, b.y_class) and np.array_equal(a.y_reg, b.y_reg)):
                    return False
        return True


def label_bundle(bundle, table, index=None):
    """Compute baselines from the train split and label every snapshot"""
    grid = _as_grid(table, index)
    mu = compute_baselines(bundle.train, grid)
    labeled = {tag: [assign_labels(s, grid, mu) for s in snapshots] for tag, snapshots in bundle.splits.items()}
    result = SplitBundle(labeled[SplitTag.TRAIN], labeled[SplitTag.VAL], labeled[SplitTag.TEST],
                         bundle.num_nodes, bundle.window, bundle.horizon, mu=mu)
    for split, entry in result.counts().items():
        if 'positives' in entry:
            total = entry['positives'] + entry['negatives']
            logger.info(f"{split}: {entry['snapshots']} snapshots, {entry['positives']:,} positive / "
                        f"{entry['negatives']:,} negative ({entry['positives'] / total:.2%})")
    return result


def standardize(bundle):
    """Z-score every feature with train-split statistics and apply the same transform to val and test

    :type bundle: SplitBundle
    :rtype: SplitBundle
    """
    if bundle.standardized:
        raise DataError("Bundle is already standardized")
    if not bundle.labeled:
        raise DataError("Labels must be assigned before standardizing")
    cells = np.concatenate([s.node_features.reshape(-1, D_NODE) for s in bundle.train], axis=0)
    mean = cells.mean(axis=0)
    std = np.maximum(cells.std(axis=0), STD_FLOOR)
    floored = [NODE_FEATURE_NAMES[i] for i in np.flatnonzero(cells.std(axis=0) < STD_FLOOR)]
    if floored:
        logger.warning(f"Constant train features (std floored): {floored}")
    transformed = {tag: [replace(s, node_features=(s.node_features - mean) / std) for s in snapshots]
                   for tag, snapshots in bundle.splits.items()}
    return SplitBundle(transformed[SplitTag.TRAIN], transformed[SplitTag.VAL], transformed[SplitTag.TEST],
                       bundle.num_nodes, bundle.window, bundle.horizon, mu=bundle.mu,
                       feature_mean=mean, feature_std=std)


def prepare_bundle(table, index, config=None):
    """build_snapshots, chronological_split, label_bundle and standardize in sequence"""
    config = config or SnapshotConfig()
    grid = NodeDayGrid(table, index)
    snapshots = build_snapshots(table, index, config.window, config.stride, config.horizon, grid=grid)
    bundle = chronological_split(snapshots, config.fractions, config.split_sizes)
    return standardize(label_bundle(bundle, grid))


def label_stats(bundle):
    """Split counts and positive rates plus the node-level label structure of the train split"""
    stats = {}
    for split, entry in bundle.counts().items():
        entry = dict(entry)
        if 'positives' in entry:
            total = entry['positives'] + entry['negatives']
            entry['positive_rate'] = entry['positives'] / total if total else 0.0
        stats[split] = entry
    stats['num_nodes'] = bundle.num_nodes
    if bundle.mu is not None:
        stats['cold_start_nodes'] = int((bundle.mu == 0).sum())
    if bundle.train and bundle.labeled:
        ever_positive = np.stack([s.y_class for s in bundle.train]).max(axis=0)
        stats['switching_nodes'] = int(ever_positive.sum())
        stats['persistently_negative_nodes'] = int(bundle.num_nodes - ever_positive.sum())
    return stats


def save_bundle(bundle, path, graph=None):
    """Write a labeled bundle as an npz container with a JSON header

    The graph the bundle was built on, when given, is embedded in the header.
    """
    if not bundle.labeled:
        raise DataError("Only labeled bundles can be saved")
    snapshots = bundle.all_snapshots()
    header = {
        'version': BUNDLE_VERSION,
        'N': bundle.num_nodes,
        'T': bundle.window,
        'horizon': bundle.horizon,
        'd_node': D_NODE,
        'boundaries': bundle.boundaries(),
        'counts': bundle.counts(),
        'standardized': bundle.standardized,
    }
    if graph is not None:
        header['graph'] = graph.to_json()
    empty = np.zeros(D_NODE)
    write_archive(path, header, {
        't': np.array([s.t for s in snapshots], dtype=np.int64),
        'split': np.array([SPLITS.index(s.split) for s in snapshots], dtype=np.int8),
        'node_features': np.stack([s.node_features for s in snapshots]),
        'y_class': np.stack([s.y_class for s in snapshots]).astype(np.int8),
        'y_reg': np.stack([s.y_reg for s in snapshots]),
        'mu': bundle.mu if bundle.mu is not None else np.zeros(bundle.num_nodes),
        'feature_mean': bundle.feature_mean if bundle.standardized else empty,
        'feature_std': bundle.feature_std if bundle.standardized else empty,
    })
    logger.info(f"Saved bundle with {len(snapshots)} snapshots to {path}")


def load_bundle(path):
    """Read a bundle written by save_bundle, recounting labels against the header

    :rtype: SplitBundle
    """
    header, arrays = read_archive(path, ['t', 'split', 'node_features', 'y_class', 'y_reg', 'mu',
                                         'feature_mean', 'feature_std'])
    if header.get('version') != BUNDLE_VERSION:
        raise FormatError(f"Bundle version {header.get('version')} is not supported (expected {BUNDLE_VERSION})")
    try:
        window, horizon = header['T'], header['horizon']
        parts = {tag: [] for tag in SPLITS}
        for i in range(len(arrays['t'])):
            tag = SPLITS[int(arrays['split'][i])]
            parts[tag].append(Snapshot(int(arrays['t'][i]), arrays['node_features'][i], arrays['y_class'][i],
                                       arrays['y_reg'][i], tag, window, horizon))
        standardized = header.get('standardized', False)
        bundle = SplitBundle(parts[SplitTag.TRAIN], parts[SplitTag.VAL], parts[SplitTag.TEST], header['N'],
                             window, horizon, mu=arrays['mu'],
                             feature_mean=arrays['feature_mean'] if standardized else None,
                             feature_std=arrays['feature_std'] if standardized else None)
    except (KeyError, IndexError) as e:
        raise FormatError(f"Bundle {path} is inconsistent: {e}")
    if bundle.counts() != header['counts']:
        raise FormatError(f"Bundle {path} counts {bundle.counts()} disagree with header {header['counts']}")
    return bundle


def load_bundle_graph(path):
    """The graph embedded in a bundle file, or None when it was saved without one

    :rtype: SupplyGraph
    """
    header, _ = read_archive(path, [])
    if 'graph' not in header:
        return None
    graph = SupplyGraph.from_json(header['graph'])
    if graph.num_nodes != header.get('N'):
        raise FormatError(f"Bundle {path} embeds a graph of {graph.num_nodes} nodes for {header.get('N')} node rows")
    return graph
