import json

import numpy as np
import pytest

from eagle.autodiff import no_grad, precision
from eagle.data import SplitTag, build_graph
from eagle.data.snapshots import SplitBundle
from eagle.errors import EmptyInputError, FormatError
from eagle.explain import Attribution, RiskGraph, aggregate_risk, export_risk, load_risk, normalize_risk
from eagle.explain.risk import accumulate_attention
from eagle.model import GraphInputs, forward


def test_normalize_risk():
    np.testing.assert_allclose(normalize_risk([2.0, 4.0, 3.0]), [0.0, 1.0, 0.5])
    np.testing.assert_array_equal(normalize_risk([1.5, 1.5]), [0.0, 0.0])
    assert normalize_risk([]).size == 0


def test_accumulate_attention_skips_self_loops():
    src = np.array([0, 1, 2])
    dst = np.array([1, 2, 1])
    # three edges then three self-loops, two heads
    alpha = np.array([[0.2, 0.4], [1.0, 1.0], [0.3, 0.1], [9.0, 9.0], [9.0, 9.0], [9.0, 9.0]])
    received = accumulate_attention([alpha, alpha], src, dst, 3)
    np.testing.assert_allclose(received, [0.0, 2.0, 4.0])
    sent = accumulate_attention([alpha], src, dst, 3, Attribution.SENDER)
    np.testing.assert_allclose(sent, [0.6, 2.0, 0.4])


def test_aggregate_risk(trained, small_bundle, synthetic_graph):
    checkpoint, _ = trained
    risk = aggregate_risk(checkpoint, small_bundle, synthetic_graph, SplitTag.TEST)
    assert risk.num_nodes == synthetic_graph.num_nodes
    assert risk.snapshot_count == 8
    assert np.all(risk.raw >= 0)
    assert risk.normalized.min() == 0.0 and risk.normalized.max() == 1.0
    assert sorted(risk.ranking()) == list(range(risk.num_nodes))
    assert risk.normalized[risk.ranking(1)[0]] == 1.0

    again = aggregate_risk(checkpoint, small_bundle, synthetic_graph, 'test')
    np.testing.assert_array_equal(again.raw, risk.raw)


def test_empty_split_has_nothing_to_explain(trained, small_bundle, synthetic_graph):
    checkpoint, _ = trained
    bundle = SplitBundle(small_bundle.train, small_bundle.val, [], small_bundle.num_nodes, small_bundle.window,
                         small_bundle.horizon, small_bundle.mu, small_bundle.feature_mean, small_bundle.feature_std)
    with pytest.raises(EmptyInputError):
        aggregate_risk(checkpoint, bundle, synthetic_graph, SplitTag.TEST)


def test_ranking_breaks_ties_by_node_id(toy_table):
    risk = RiskGraph(build_graph(toy_table), [1.0, 3.0, 3.0, 0.0], snapshot_count=1)
    assert risk.ranking() == [1, 2, 0, 3]
    assert risk.ranking(2) == [1, 2]


def test_export_formats(tmp_path, toy_table):
    risk = RiskGraph(build_graph(toy_table), [1.0, 3.0, 2.0, 0.0], snapshot_count=4, attribution='sender')

    path = export_risk(risk, 'json', str(tmp_path / 'risk.json'))
    document = json.loads(open(path, encoding='utf-8').read())
    assert document['attribution'] == 'sender' and document['snapshots'] == 4
    assert [node['risk'] for node in document['nodes']] == pytest.approx([1 / 3, 1.0, 2 / 3, 0.0])

    loaded = load_risk(path)
    assert loaded.ranking() == risk.ranking()
    assert loaded.attribution == Attribution.SENDER

    dot = open(export_risk(risk, 'dot', str(tmp_path / 'risk.dot')), encoding='utf-8').read()
    assert 'risk="1.000000"' in dot
    graphml = open(export_risk(risk, 'graphml', str(tmp_path / 'risk.graphml')), encoding='utf-8').read()
    assert 'attr.name="risk"' in graphml


def test_corrupted_risk_file(tmp_path):
    path = tmp_path / 'risk.json'
    path.write_text('{"nodes": []}')
    with pytest.raises(FormatError):
        load_risk(str(path))


@pytest.mark.parametrize('attribution', ['receiver', 'sender'])
def test_risk_conserves_attention_mass(trained, small_bundle, synthetic_graph, attribution):
    checkpoint, _ = trained
    risk = aggregate_risk(checkpoint, small_bundle, synthetic_graph, SplitTag.TEST, attribution)
    inputs = GraphInputs.from_graph(synthetic_graph)
    num_edges = len(inputs.src)
    total = 0.0
    with precision(checkpoint.precision_bits), no_grad():
        for snapshot in small_bundle.test:
            result = forward(snapshot, inputs, checkpoint.params, checkpoint.model_config)
            total += sum(float(np.asarray(alpha[:num_edges], dtype=np.float64).sum()) for alpha in result.attention)
    assert risk.raw.sum() == pytest.approx(total, rel=1e-9)
