import math

import numpy as np
import pytest

from eagle.autodiff import Tensor, grad_check, ops, precision
from eagle.errors import CompatibilityError, ConfigError, GraphError, ShapeError
from eagle.model import Ablation, ModelConfig, ablation_from_string, forward, init_params, loss, prior_bias
from eagle.model.egat import egat_layer, with_self_loops
from eagle.model.encoder import patchify
from eagle.model.network import GraphInputs

Y_CLASS = np.array([1, 0, 0, 1])
Y_REG = np.array([1.5, 0.0, 0.0, 0.3])


def _features(seed=0):
    return np.random.default_rng(seed).normal(size=(4, 7, 5))


def test_config_validation():
    with pytest.raises(ConfigError):
        ModelConfig(window=14, patch_len=5)
    with pytest.raises(ConfigError):
        ModelConfig(d_model=10, gat_heads=4)
    with pytest.raises(ConfigError):
        ModelConfig(lam=1.5)


def test_ablation_names():
    assert ablation_from_string('a2') == Ablation.A2_NO_EDGE
    assert ablation_from_string('STATIC_GAT') == Ablation.STATIC_GAT
    with pytest.raises(ConfigError):
        ablation_from_string('A9')


def test_prior_bias():
    assert prior_bias(0.5) == 0.0
    assert prior_bias(0.0615) == pytest.approx(math.log(0.0615 / 0.9385))
    with pytest.raises(ConfigError):
        prior_bias(0.0)


def test_init_is_seeded(tiny_model_config):
    first = init_params(tiny_model_config, seed=4, positive_rate=0.1)
    assert first.digest() == init_params(tiny_model_config, seed=4, positive_rate=0.1).digest()
    assert first.digest() != init_params(tiny_model_config, seed=5, positive_rate=0.1).digest()
    assert float(first['cls.b2'].values[0]) == pytest.approx(prior_bias(0.1), rel=1e-6)


def test_ablations_change_the_parameter_set(tiny_model_config):
    names = {a: set(init_params(tiny_model_config.with_ablation(a), 0, 0.1).names()) for a in Ablation}
    assert 'patch.w' in names[Ablation.FULL] and 'static.w' not in names[Ablation.FULL]
    assert 'static.w' in names[Ablation.A1_NO_TEMPORAL] and 'patch.w' not in names[Ablation.A1_NO_TEMPORAL]
    assert 'gat.0.w_edge' not in names[Ablation.A2_NO_EDGE]
    assert not any(n.startswith('reg.') for n in names[Ablation.A3_SINGLE_TASK])
    assert 'static.w' in names[Ablation.STATIC_GAT] and 'gat.0.w_edge' not in names[Ablation.STATIC_GAT]


def test_patchify():
    features = np.arange(2 * 14 * 3, dtype=float).reshape(2, 14, 3)
    patches = patchify(features, 7)
    assert patches.shape == (6, 2, 7)
    np.testing.assert_array_equal(patches[1, 0], features[0, :7, 1])
    with pytest.raises(ShapeError):
        patchify(features, 5)


def test_forward_shapes_and_attention(tiny_model_config, toy_inputs):
    params = init_params(tiny_model_config, 0, 0.3)
    result = forward(_features(), toy_inputs, params, tiny_model_config)
    assert result.probability.shape == (4,)
    assert result.delay.shape == (4,)
    assert np.all((result.probability.values > 0) & (result.probability.values < 1))
    assert np.all(result.delay.values >= 0)

    assert len(result.attention) == tiny_model_config.gat_layers
    alpha = result.attention[0]
    assert alpha.shape == (6 + 4, tiny_model_config.gat_heads)
    _, dst, _ = with_self_loops(toy_inputs.src, toy_inputs.dst, None, 4)
    sums = np.zeros((4, tiny_model_config.gat_heads))
    np.add.at(sums, dst, alpha)
    np.testing.assert_allclose(sums, 1.0, rtol=1e-5)


def test_forward_is_deterministic_without_dropout(tiny_model_config, toy_inputs):
    params = init_params(tiny_model_config, 0, 0.3)
    a = forward(_features(), toy_inputs, params, tiny_model_config).probability.values
    b = forward(_features(), toy_inputs, params, tiny_model_config).probability.values
    np.testing.assert_array_equal(a, b)


def _perturbed(inputs):
    return GraphInputs(inputs.num_nodes, inputs.src, inputs.dst, inputs.edge_features + 1.7)


def test_edge_features_are_inert_without_edge_attention(tiny_model_config, toy_inputs):
    config = tiny_model_config.with_ablation('A2')
    params = init_params(config, 0, 0.3)
    base = forward(_features(), toy_inputs, params, config)
    moved = forward(_features(), _perturbed(toy_inputs), params, config)
    np.testing.assert_array_equal(base.probability.values, moved.probability.values)
    np.testing.assert_array_equal(base.delay.values, moved.delay.values)

    params = init_params(tiny_model_config, 0, 0.3)
    base = forward(_features(), toy_inputs, params, tiny_model_config)
    moved = forward(_features(), _perturbed(toy_inputs), params, tiny_model_config)
    assert not np.array_equal(base.probability.values, moved.probability.values)


def test_single_task_variant_has_no_delay(tiny_model_config, toy_inputs):
    config = tiny_model_config.with_ablation('A3')
    result = forward(_features(), toy_inputs, init_params(config, 0, 0.3), config)
    assert not result.has_regression
    total, components = loss(result.probability, result.delay, Y_CLASS, Y_REG, config)
    assert components['huber'] is None
    assert components['total'] == pytest.approx(components['bce'])


def test_loss_mixes_both_tasks(tiny_model_config, toy_inputs):
    result = forward(_features(), toy_inputs, init_params(tiny_model_config, 0, 0.3), tiny_model_config)
    _, components = loss(result.probability, result.delay, Y_CLASS, Y_REG, tiny_model_config)
    expected = 0.7 * components['bce'] + 0.3 * components['huber']
    assert components['total'] == pytest.approx(expected, rel=1e-5)


def test_mismatched_inputs(tiny_model_config, toy_inputs):
    params = init_params(tiny_model_config, 0, 0.3)
    with pytest.raises(CompatibilityError):
        forward(np.zeros((5, 7, 5)), toy_inputs, params, tiny_model_config)
    with pytest.raises(ShapeError):
        forward(np.zeros((4, 14, 5)), toy_inputs, params, tiny_model_config)
    with pytest.raises(GraphError):
        with_self_loops([0, 9], [1, 0], None, 4)


@pytest.mark.parametrize('variant', ['full', 'A1', 'A3'])
def test_full_loss_gradient(toy_inputs, variant):
    # two patches per channel so the encoder attention is not a one-token softmax
    config = ModelConfig(window=14, patch_len=7, d_model=8, encoder_layers=1, encoder_heads=2, gat_layers=2,
                         gat_heads=2, head_hidden=8, ablation=variant)
    with precision(64):
        params = init_params(config, 1, 0.3)
        features = np.random.default_rng(2).normal(size=(4, 14, 5))

        def f():
            result = forward(features, toy_inputs, params, config)
            return loss(result.probability, result.delay, Y_CLASS, Y_REG, config)[0]

        error = grad_check(f, params.parameters())
    assert error < 1e-4


TWO_PATCH = dict(window=14, patch_len=7, d_model=8, encoder_layers=1, encoder_heads=2, gat_layers=2, gat_heads=2,
                 head_hidden=8)


def _relabel(inputs, order):
    """New node i is old node order[i]; edges keep their order"""
    new_id = np.empty_like(order)
    new_id[order] = np.arange(len(order))
    return GraphInputs(inputs.num_nodes, new_id[inputs.src], new_id[inputs.dst], inputs.edge_features)


@pytest.mark.parametrize('variant', ['full', 'A1', 'A2'])
def test_forward_is_equivariant_to_node_relabeling(toy_inputs, variant):
    config = ModelConfig(ablation=variant, **TWO_PATCH)
    order = np.array([2, 0, 3, 1])
    with precision(64):
        params = init_params(config, 0, 0.3)
        features = np.random.default_rng(5).normal(size=(4, 14, 5))
        base = forward(features, toy_inputs, params, config)
        moved = forward(features[order], _relabel(toy_inputs, order), params, config)
    np.testing.assert_allclose(moved.probability.values, base.probability.values[order], rtol=1e-10)
    np.testing.assert_allclose(moved.delay.values, base.delay.values[order], rtol=1e-10)


def test_day_order_only_matters_with_the_temporal_encoder(toy_inputs):
    features = np.random.default_rng(6).normal(size=(4, 14, 5))
    shuffled = features.copy()
    shuffled[0] = features[0, np.random.default_rng(7).permutation(14)]
    with precision(64):
        config = ModelConfig(ablation='A1', **TWO_PATCH)
        params = init_params(config, 0, 0.3)
        np.testing.assert_allclose(forward(shuffled, toy_inputs, params, config).probability.values,
                                   forward(features, toy_inputs, params, config).probability.values, rtol=1e-10)

        config = ModelConfig(**TWO_PATCH)
        params = init_params(config, 0, 0.3)
        base = forward(features, toy_inputs, params, config).probability.values
        moved = forward(shuffled, toy_inputs, params, config).probability.values
    assert abs(moved[0] - base[0]) > 1e-8


def _gat_params(rng, d, heads, d_edge):
    width = d // heads
    return {
        'g.w': Tensor(rng.normal(size=(d, d))),
        'g.a_recv': Tensor(rng.normal(size=(heads, width))),
        'g.a_send': Tensor(rng.normal(size=(heads, width))),
        'g.w_edge': Tensor(rng.normal(size=(d_edge, d))),
        'g.a_edge': Tensor(rng.normal(size=(heads, width))),
    }


def test_isolated_node_attends_only_to_itself():
    rng = np.random.default_rng(8)
    with precision(64):
        params = _gat_params(rng, 4, 2, 3)
        h = rng.normal(size=(3, 4))
        z, alpha = egat_layer(Tensor(h), [0, 1], [1, 0], rng.normal(size=(2, 3)), params, 'g', heads=2)
        np.testing.assert_allclose(alpha[2 + 2], [1.0, 1.0])
        np.testing.assert_allclose(z.values[2], ops.elu(Tensor(h[2] @ params['g.w'].values)).values, rtol=1e-12)


def test_attention_matches_a_direct_evaluation_on_a_path():
    rng = np.random.default_rng(9)
    d, heads, d_edge = 4, 2, 3
    width = d // heads
    src = np.array([0, 1, 1, 2])
    dst = np.array([1, 0, 2, 1])
    edge_features = rng.normal(size=(4, d_edge))
    h = rng.normal(size=(3, d))
    with precision(64):
        params = _gat_params(rng, d, heads, d_edge)
        _, alpha = egat_layer(Tensor(h), src, dst, edge_features, params, 'g', heads=heads)

    w = params['g.w'].values
    w_edge = params['g.w_edge'].values
    senders = list(zip(src, dst, edge_features)) + [(u, u, np.zeros(d_edge)) for u in range(3)]
    expected = np.zeros((len(senders), heads))
    for k in range(heads):
        block = slice(k * width, (k + 1) * width)
        a = np.concatenate([params['g.a_recv'].values[k], params['g.a_send'].values[k], params['g.a_edge'].values[k]])
        raw = []
        for v, u, e in senders:
            s = a @ np.concatenate([(h[u] @ w)[block], (h[v] @ w)[block], (e @ w_edge)[block]])
            raw.append(s if s > 0 else 0.2 * s)
        raw = np.exp(np.array(raw))
        for i, (_, u, _) in enumerate(senders):
            expected[i, k] = raw[i] / sum(raw[j] for j, (_, r, _) in enumerate(senders) if r == u)
    np.testing.assert_allclose(alpha, expected, rtol=1e-10)


def _prob(values):
    return Tensor(np.asarray(values, dtype=float))


def test_loss_closed_forms():
    with precision(64):
        bce_only = ModelConfig(lam=1.0, pos_weight=5.0)
        total, _ = loss(_prob([0.5]), _prob([0.0]), [1], [0.0], bce_only)
        assert total.item() == pytest.approx(5 * math.log(2))

        assert ops.huber(Tensor([0.5]), 1.0).item() == pytest.approx(0.125)
        assert ops.huber(Tensor([2.0]), 1.0).item() == pytest.approx(1.5)

        # bce = -log(1 - p) = 1 for a negative, huber of a unit residual = 0.5
        mixed = ModelConfig(lam=0.7)
        total, components = loss(_prob([1 - math.exp(-1)]), _prob([1.0]), [0], [0.0], mixed)
    assert components['bce'] == pytest.approx(1.0)
    assert components['huber'] == pytest.approx(0.5)
    assert total.item() == pytest.approx(0.85)
