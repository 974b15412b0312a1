import numpy as np
import pytest

from eagle.data import NodeRole, OrderTable, SupplyGraph, build_graph, build_node_index
from eagle.data.graph import EDGE_FEATURE_NAMES
from eagle.errors import FormatError, GraphError


def test_node_index_is_sorted_by_role_then_region(toy_table):
    index = build_node_index(toy_table)
    assert index.nodes == [('X', NodeRole.DESTINATION), ('Y', NodeRole.DESTINATION),
                           ('A', NodeRole.ORIGIN), ('B', NodeRole.ORIGIN)]
    assert index.node_id('B', 'origin') == 3
    assert index.label(0) == 'X (destination)'


def test_unknown_region_is_a_graph_error(toy_table):
    index = build_node_index(toy_table)
    with pytest.raises(GraphError):
        index.node_id('Z', NodeRole.ORIGIN)


def test_edges_are_symmetric_and_sorted(toy_table):
    graph = build_graph(toy_table)
    assert graph.edges.pairs() == [(0, 2), (0, 3), (1, 2), (2, 0), (2, 1), (3, 0)]
    assert graph.edges.lane_count == 3
    assert set(graph.edges.pairs()) == {(d, s) for s, d in graph.edges.pairs()}


def test_edge_features_describe_the_lane(toy_table):
    graph = build_graph(toy_table)
    features = dict(zip(graph.edges.pairs(), graph.edge_features))
    a_to_x = features[(2, 0)]
    named = dict(zip(EDGE_FEATURE_NAMES, a_to_x))
    assert named['transit_mean'] == pytest.approx(3.0)
    assert named['transit_std'] == pytest.approx(1.0)
    assert named['flow_volume'] == 2.0
    assert named['mode_standard_class'] == pytest.approx(0.5)
    assert named['mode_first_class'] == pytest.approx(0.5)
    assert named['mode_same_day'] == 0.0
    # both directions of a lane carry the same row
    np.testing.assert_array_equal(features[(0, 2)], a_to_x)
    # single-order lanes have zero spread
    assert dict(zip(EDGE_FEATURE_NAMES, features[(3, 0)]))['transit_std'] == 0.0


def test_edge_features_ignore_realized_transit(toy_table):
    frame = toy_table.frame.copy()
    frame['real_days'] = frame['real_days'] + 10
    shifted = toy_table.with_frame(frame)
    np.testing.assert_array_equal(build_graph(shifted).edge_features, build_graph(toy_table).edge_features)


def test_empty_and_degenerate_tables_are_rejected(order_factory):
    with pytest.raises(GraphError):
        build_graph(OrderTable.from_records([]))
    # a region shipping to itself still yields one origin and one destination node
    single = OrderTable.from_records([order_factory('1', 0, 'A', 'A')])
    assert build_graph(single).num_nodes == 2


def test_degree_stats(toy_table):
    stats = build_graph(toy_table).degree_stats()
    assert (stats['nodes'], stats['edges'], stats['lanes']) == (4, 6, 3)
    assert stats['degree_min'] == 1 and stats['degree_max'] == 2
    assert stats['isolated_nodes'] == 0
    assert stats['degree_histogram'] == {'1': 2, '2': 2}


def test_graph_file_round_trip(tmp_path, toy_table):
    graph = build_graph(toy_table)
    path = str(tmp_path / 'graph.json')
    graph.save(path)
    loaded = SupplyGraph.load(path)
    assert loaded.index.nodes == graph.index.nodes
    assert loaded.edges.pairs() == graph.edges.pairs()
    np.testing.assert_array_equal(loaded.edge_features, graph.edge_features)


def test_corrupted_graph_file(tmp_path):
    path = tmp_path / 'graph.json'
    path.write_text('{"version": 1, "nodes": ')
    with pytest.raises(FormatError):
        SupplyGraph.load(str(path))


def test_dot_has_one_statement_per_lane(toy_table):
    dot = build_graph(toy_table).to_dot(node_attributes={'risk': np.array([0.0, 0.5, 1.0, 0.25])})
    assert dot.startswith('graph supply_chain {')
    assert dot.count(' -- ') == 3
    assert 'n0 -- n2;' in dot
    assert 'label="Y (destination)"' in dot
    assert 'risk="0.500000"' in dot


def test_graphml_lists_nodes_and_edges(toy_table):
    graphml = build_graph(toy_table).to_graphml()
    assert graphml.count('<node ') == 4
    assert graphml.count('<edge ') == 6
    assert 'attr.name="transit_mean"' in graphml
