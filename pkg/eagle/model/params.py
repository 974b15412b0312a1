"""
Learnable parameters of the network

Parameters live in a flat, ordered name -> Tensor mapping. Names are dotted
paths ('encoder.0.wq', 'gat.1.a_recv', 'cls.b2') so checkpoints can store them
as plain named arrays.
"""

import hashlib
import math

import numpy as np

from eagle.autodiff import Tensor
from eagle.errors import ConfigError, FormatError


class ModelParams:

    def __init__(self, tensors=None):
        self.tensors = dict(tensors or {})

    def __getitem__(self, name):
        return self.tensors[name]

    def __contains__(self, name):
        return name in self.tensors

    def __len__(self):
        return len(self.tensors)

    def names(self):
        return list(self.tensors)

    def parameters(self):
        return list(self.tensors.values())

    @property
    def num_parameters(self):
        return sum(t.size for t in self.tensors.values())

    def zero_grad(self):
        for tensor in self.tensors.values():
            tensor.zero_grad()

    def state(self):
        """Copies of every parameter's values, in name order"""
        return {name: tensor.values.copy() for name, tensor in self.tensors.items()}

    def load_state(self, state):
        if set(state) != set(self.tensors):
            missing = sorted(set(self.tensors) - set(state))
            extra = sorted(set(state) - set(self.tensors))
            raise FormatError(f"Parameter names disagree (missing {missing}, unexpected {extra})")
        for name, tensor in self.tensors.items():
            values = np.asarray(state[name])
            if values.shape != tensor.shape:
                raise FormatError(f"Parameter {name} has shape {values.shape}, expected {tensor.shape}")
            tensor.values = values.astype(tensor.values.dtype, copy=True)

    @classmethod
    def from_state(cls, state):
        return cls({name: Tensor(values, requires_grad=True) for name, values in state.items()})

    def digest(self):
        digest = hashlib.sha256()
        for name, tensor in self.tensors.items():
            digest.update(name.encode('utf-8'))
            digest.update(np.ascontiguousarray(tensor.values).tobytes())
        return digest.hexdigest()


def prior_bias(positive_rate):
    """Log-odds of the train positive rate"""
    if not 0 < positive_rate < 1:
        raise ConfigError(f"Train positive rate must lie in (0, 1) to set the prior bias, got {positive_rate}")
    return math.log(positive_rate / (1 - positive_rate))


class _Initializer:

    def __init__(self, seed):
        self.rng = np.random.default_rng(seed)
        self.tensors = {}

    def glorot(self, name, shape, fan_in=None, fan_out=None):
        if fan_in is None:
            fan_in = shape[-2] if len(shape) > 1 else shape[0]
        if fan_out is None:
            fan_out = shape[-1]
        limit = math.sqrt(6.0 / (fan_in + fan_out))
        self.tensors[name] = Tensor(self.rng.uniform(-limit, limit, size=shape), requires_grad=True)

    def constant(self, name, shape, value=0.0):
        self.tensors[name] = Tensor(np.full(shape, value), requires_grad=True)


def init_params(config, seed, positive_rate):
    """Draw every weight from a seeded generator

    :param config: architecture and ablation
    :type config: ModelConfig
    :param seed: generator seed
    :type seed: int
    :param positive_rate: train-split positive rate, sets the classification output bias
    :type positive_rate: float
    :rtype: ModelParams
    """
    bias = prior_bias(positive_rate)
    d, p = config.d_model, config.patch_len
    init = _Initializer(seed)

    if config.ablation.uses_temporal_encoder:
        init.glorot('patch.w', (p, d))
        init.constant('patch.b', (d,))
        init.glorot('patch.pos', (config.num_patches, d))
        for layer in range(config.encoder_layers):
            prefix = f'encoder.{layer}'
            init.constant(f'{prefix}.ln1_g', (d,), 1.0)
            init.constant(f'{prefix}.ln1_b', (d,))
            for proj in ('wq', 'wk', 'wv', 'wo'):
                init.glorot(f'{prefix}.{proj}', (d, d))
                init.constant(f'{prefix}.{proj}_b', (d,))
            init.constant(f'{prefix}.ln2_g', (d,), 1.0)
            init.constant(f'{prefix}.ln2_b', (d,))
            init.glorot(f'{prefix}.ffn_w1', (d, config.ffn_width))
            init.constant(f'{prefix}.ffn_b1', (config.ffn_width,))
            init.glorot(f'{prefix}.ffn_w2', (config.ffn_width, d))
            init.constant(f'{prefix}.ffn_b2', (d,))
        init.constant('encoder.lnf_g', (d,), 1.0)
        init.constant('encoder.lnf_b', (d,))
    else:
        init.glorot('static.w', (config.d_node, d))
        init.constant('static.b', (d,))

    head_width = d // config.gat_heads
    for layer in range(config.gat_layers):
        prefix = f'gat.{layer}'
        init.glorot(f'{prefix}.w', (d, d))
        init.glorot(f'{prefix}.a_recv', (config.gat_heads, head_width), fan_in=3 * head_width, fan_out=1)
        init.glorot(f'{prefix}.a_send', (config.gat_heads, head_width), fan_in=3 * head_width, fan_out=1)
        if config.ablation.uses_edge_features:
            init.glorot(f'{prefix}.w_edge', (config.d_edge, d))
            init.glorot(f'{prefix}.a_edge', (config.gat_heads, head_width), fan_in=3 * head_width, fan_out=1)

    init.glorot('cls.w1', (d, config.head_hidden))
    init.constant('cls.b1', (config.head_hidden,))
    init.glorot('cls.w2', (config.head_hidden, 1))
    init.constant('cls.b2', (1,), bias)
    if config.ablation.has_regression_head:
        init.glorot('reg.w1', (d, config.head_hidden))
        init.constant('reg.b1', (config.head_hidden,))
        init.glorot('reg.w2', (config.head_hidden, 1))
        init.constant('reg.b2', (1,))
    return ModelParams(init.tensors)
