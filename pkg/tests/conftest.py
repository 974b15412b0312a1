import dataclasses

import numpy as np
import pytest

from eagle.data import (OrderRecord, OrderTable, SnapshotConfig, SyntheticConfig, build_graph, generate_synthetic,
                        prepare_bundle)
from eagle.model import ModelConfig
from eagle.model.network import GraphInputs
from eagle.settings import preset_settings
from eagle.training import TrainConfig, train

WINDOW = 7


@pytest.fixture(scope='session')
def synthetic_config():
    return SyntheticConfig(n_regions=3, n_hubs=3, n_days=60, base_delay_rate=0.2, orders_per_day=30.0,
                           hub_risk_map={'HUB-00': 2.5})


@pytest.fixture(scope='session')
def synthetic_table(synthetic_config):
    return generate_synthetic(synthetic_config, seed=7)


@pytest.fixture(scope='session')
def synthetic_graph(synthetic_table):
    return build_graph(synthetic_table)


@pytest.fixture(scope='session')
def snapshot_config():
    return SnapshotConfig(window=WINDOW, stride=1, horizon=WINDOW)


@pytest.fixture(scope='session')
def small_bundle(synthetic_table, synthetic_graph, snapshot_config):
    """47 standardized, labeled snapshots over 6 nodes, split 32 / 7 / 8"""
    return prepare_bundle(synthetic_table, synthetic_graph.index, snapshot_config)


@pytest.fixture(scope='session')
def tiny_model_config():
    return ModelConfig(window=WINDOW, patch_len=WINDOW, d_model=8, encoder_layers=1, encoder_heads=2,
                       gat_layers=1, gat_heads=2, head_hidden=8)


@pytest.fixture(scope='session')
def quick_train_config():
    return TrainConfig(lr=1e-2, lr_min=1e-3, epochs=2, early_stop_patience=2, seeds=(0, 1))


@pytest.fixture(scope='session')
def trained(small_bundle, synthetic_graph, tiny_model_config, quick_train_config):
    """(checkpoint, history) of one short training run"""
    return train(small_bundle, synthetic_graph, tiny_model_config, quick_train_config, seed=0)


@pytest.fixture
def order_factory():
    def make(order_id, day, origin, dest, scheduled=2, real=2, discount=0.1, mode='Standard Class'):
        return OrderRecord.create(order_id, day, origin, dest, scheduled, real, discount, mode)
    return make


@pytest.fixture
def toy_table(order_factory):
    """Hubs A and B shipping to regions X and Y over three lanes: A-X, A-Y, B-X

    Node ids: 0 = X (destination), 1 = Y (destination), 2 = A (origin), 3 = B (origin).
    """
    records = [
        order_factory('1', 0, 'A', 'X', scheduled=2, real=2, mode='Standard Class'),
        order_factory('2', 0, 'A', 'X', scheduled=4, real=6, mode='First Class'),
        order_factory('3', 1, 'A', 'Y', scheduled=1, real=1, mode='Second Class'),
        order_factory('4', 2, 'B', 'X', scheduled=3, real=5, mode='Same Day'),
    ]
    return OrderTable.from_records(records)


@pytest.fixture
def toy_inputs():
    """A 4-node graph with two lanes in both directions and random edge features"""
    rng = np.random.default_rng(3)
    src = np.array([0, 0, 1, 2, 2, 3])
    dst = np.array([2, 3, 2, 0, 1, 0])
    return GraphInputs(num_nodes=4, src=src, dst=dst, edge_features=rng.normal(size=(6, 7)))


@pytest.fixture
def tiny_settings(tmp_path, synthetic_config, snapshot_config, tiny_model_config):
    settings = preset_settings('synthetic')
    settings.synthetic = synthetic_config
    settings.snapshots = snapshot_config
    settings.model = tiny_model_config
    settings.train = TrainConfig(lr=1e-2, lr_min=1e-3, epochs=1, early_stop_patience=1, seeds=(0, 1))
    settings.pipeline = dataclasses.replace(settings.pipeline, out_dir=str(tmp_path / 'runs'),
                                            cache_dir=str(tmp_path / 'cache'), variants=('full', 'A3'))
    return settings
