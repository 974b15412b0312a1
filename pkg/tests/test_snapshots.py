import dataclasses

import numpy as np
import pytest

from eagle.archive import file_digest
from eagle.data import (SnapshotConfig, SplitTag, SyntheticConfig, assign_labels, build_graph, build_snapshots,
                        chronological_split, compute_baselines, generate_synthetic, load_bundle, prepare_bundle,
                        save_bundle)
from eagle.data.snapshots import NodeDayGrid, label_stats, split_counts
from eagle.errors import ConfigError, FormatError, InsufficientDataError, SplitError


def test_split_counts_round_down_train_and_val():
    assert split_counts(1006) == [704, 150, 152]
    assert split_counts(47) == [32, 7, 8]


def test_explicit_split_sizes_give_the_rest_to_test():
    assert split_counts(1006, sizes=(698, 117)) == [698, 117, 191]
    assert split_counts(10) == [7, 1, 2]
    with pytest.raises(SplitError):
        split_counts(10, sizes=(7, 3))
    with pytest.raises(ConfigError):
        SnapshotConfig(split_sizes=(698,))


def test_split_counts_never_leave_a_split_empty():
    assert split_counts(3) == [1, 1, 1]
    with pytest.raises(SplitError):
        split_counts(2)


def test_node_day_grid_counts_each_order_at_both_endpoints(toy_table):
    index = build_graph(toy_table).index
    grid = NodeDayGrid(toy_table, index)
    assert grid.features.shape == (4, 3, 5)
    # day 0: two A->X orders with scheduled 2 and 4 days
    np.testing.assert_allclose(grid.features[0, 0], [2, 3.0, 1.0, 0.1, 1.0])
    np.testing.assert_allclose(grid.features[2, 0], [2, 3.0, 1.0, 0.1, 1.0])
    # no orders: all-zero cell
    np.testing.assert_array_equal(grid.features[3, 0], np.zeros(5))
    np.testing.assert_allclose(grid.window_mean_delay(0, 3), [4 / 3, 0.0, 2 / 3, 2.0])


def test_snapshot_windows(synthetic_table, synthetic_graph):
    snapshots = build_snapshots(synthetic_table, synthetic_graph.index, window=7, stride=1, horizon=7)
    assert len(snapshots) == 47
    assert [s.t for s in snapshots] == list(range(47))
    for s in snapshots:
        assert s.node_features.shape == (6, 7, 5)
        assert max(s.feature_days) < min(s.label_days)


def test_stride_thins_the_snapshots(synthetic_table, synthetic_graph):
    snapshots = build_snapshots(synthetic_table, synthetic_graph.index, window=7, stride=5, horizon=7)
    assert [s.t for s in snapshots] == list(range(0, 47, 5))


def test_too_short_data(synthetic_table, synthetic_graph):
    with pytest.raises(InsufficientDataError):
        build_snapshots(synthetic_table, synthetic_graph.index, window=30, horizon=31)


def test_invalid_snapshot_config():
    with pytest.raises(ConfigError):
        SnapshotConfig(fractions=(0.5, 0.5, 0.5))
    with pytest.raises(ConfigError):
        SnapshotConfig(window=0)


def test_chronological_split_is_contiguous(synthetic_table, synthetic_graph):
    snapshots = build_snapshots(synthetic_table, synthetic_graph.index, window=7, horizon=7)
    bundle = chronological_split(snapshots)
    assert [len(bundle.train), len(bundle.val), len(bundle.test)] == [32, 7, 8]
    assert bundle.train[-1].t < bundle.val[0].t and bundle.val[-1].t < bundle.test[0].t
    assert {s.split for s in bundle.test} == {SplitTag.TEST}
    with pytest.raises(SplitError):
        chronological_split(list(reversed(snapshots)))


def test_labels_compare_against_train_baselines(toy_table):
    index = build_graph(toy_table).index
    snapshot = build_snapshots(toy_table, index, window=1, horizon=1)[0]
    labeled = assign_labels(snapshot, toy_table, np.array([0.5, 0.0, 3.0, 0.0]), index)
    # label window is day 1: one A->Y order without delay
    np.testing.assert_array_equal(labeled.y_reg, [0.0, 0.0, 0.0, 0.0])
    np.testing.assert_array_equal(labeled.y_class, [0, 0, 0, 0])

    grid = NodeDayGrid(toy_table, index)
    mu = compute_baselines([snapshot], grid)
    np.testing.assert_array_equal(mu, [0.0, 0.0, 0.0, 0.0])


def test_cold_start_nodes_are_positive_on_any_delay(toy_table):
    index = build_graph(toy_table).index
    snapshot = build_snapshots(toy_table, index, window=1, horizon=1)[0]
    shifted = dataclasses.replace(snapshot, t=1)
    labeled = assign_labels(shifted, toy_table, np.array([0.0, 0.0, 5.0, 0.0]), index)
    # label window is day 2: the delayed B->X order
    np.testing.assert_array_equal(labeled.y_reg, [2.0, 0.0, 0.0, 2.0])
    np.testing.assert_array_equal(labeled.y_class, [1, 0, 0, 1])


def test_label_counts_cover_every_node_window(small_bundle):
    counts = small_bundle.counts()
    for split in ('train', 'val', 'test'):
        entry = counts[split]
        assert entry['positives'] + entry['negatives'] == entry['snapshots'] * small_bundle.num_nodes
    assert counts['train']['positives'] > 0


def test_standardization_uses_train_statistics(small_bundle):
    cells = np.concatenate([s.node_features.reshape(-1, 5) for s in small_bundle.train])
    np.testing.assert_allclose(cells.mean(axis=0), 0.0, atol=1e-9)
    assert np.all(small_bundle.feature_std > 0)


def test_future_outcomes_do_not_touch_train_quantities(synthetic_table, synthetic_graph, snapshot_config,
                                                       small_bundle):
    last = small_bundle.train[-1]
    cutoff = last.t + last.window + last.horizon
    frame = synthetic_table.frame.copy()
    later = frame['order_day'] >= cutoff
    frame.loc[later, 'real_days'] = frame.loc[later, 'real_days'] + 9
    mutated = prepare_bundle(synthetic_table.with_frame(frame), synthetic_graph.index, snapshot_config)

    np.testing.assert_array_equal(mutated.mu, small_bundle.mu)
    np.testing.assert_array_equal(mutated.feature_mean, small_bundle.feature_mean)
    np.testing.assert_array_equal(mutated.feature_std, small_bundle.feature_std)
    for a, b in zip(mutated.train, small_bundle.train):
        np.testing.assert_array_equal(a.node_features, b.node_features)
        np.testing.assert_array_equal(a.y_class, b.y_class)
    assert not all(np.array_equal(a.y_reg, b.y_reg) for a, b in zip(mutated.test, small_bundle.test))


def test_bundle_file_round_trip(tmp_path, small_bundle):
    first, second = str(tmp_path / 'a.npz'), str(tmp_path / 'b.npz')
    save_bundle(small_bundle, first)
    save_bundle(small_bundle, second)
    assert file_digest(first) == file_digest(second)
    assert load_bundle(first).equals(small_bundle)


def test_truncated_bundle_is_rejected(tmp_path, small_bundle):
    path = tmp_path / 'bundle.npz'
    save_bundle(small_bundle, str(path))
    path.write_bytes(path.read_bytes()[:200])
    with pytest.raises(FormatError):
        load_bundle(str(path))


def test_label_stats(small_bundle):
    stats = label_stats(small_bundle)
    assert stats['num_nodes'] == 6
    assert stats['train']['snapshots'] == 32
    assert 0 < stats['train']['positive_rate'] < 1
    assert stats['switching_nodes'] + stats['persistently_negative_nodes'] == 6


def test_standardized_train_features_have_unit_spread(small_bundle):
    cells = np.concatenate([s.node_features.reshape(-1, 5) for s in small_bundle.train])
    varying = small_bundle.feature_std > 1e-6
    assert varying.any()
    np.testing.assert_allclose(cells.std(axis=0)[varying], 1.0, rtol=1e-6)


def test_a_six_week_span_gives_fifteen_snapshots():
    table = generate_synthetic(SyntheticConfig(n_regions=2, n_hubs=2, n_days=42, orders_per_day=30.0), seed=1)
    assert table.day_span == 42
    snapshots = build_snapshots(table, build_graph(table).index, window=14, stride=1, horizon=14)
    assert [s.t for s in snapshots] == list(range(15))


def test_explicit_split_sizes_reach_the_bundle(synthetic_table, synthetic_graph):
    config = SnapshotConfig(window=7, horizon=7, split_sizes=(30, 10))
    counts = prepare_bundle(synthetic_table, synthetic_graph.index, config).counts()
    assert [counts[split]['snapshots'] for split in ('train', 'val', 'test')] == [30, 10, 7]


def test_generator_is_deterministic(synthetic_config, synthetic_table):
    again = generate_synthetic(synthetic_config, seed=7)
    assert again.frame.equals(synthetic_table.frame)
    assert not generate_synthetic(synthetic_config, seed=8).frame.equals(synthetic_table.frame)


def test_high_risk_hub_is_late_most_often(synthetic_table):
    frame = synthetic_table.frame
    late_rate = (frame['delay_days'] > 0).groupby(frame['origin_region']).mean()
    assert late_rate.idxmax() == 'HUB-00'


def test_no_delays_means_no_positive_labels(snapshot_config):
    config = SyntheticConfig(n_regions=2, n_hubs=2, n_days=40, base_delay_rate=0.0, orders_per_day=20.0)
    table = generate_synthetic(config, seed=3)
    assert (table.frame['delay_days'] == 0).all()
    bundle = prepare_bundle(table, build_graph(table).index, snapshot_config)
    assert all(entry['positives'] == 0 for entry in bundle.counts().values())
