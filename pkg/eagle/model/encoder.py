"""
Patch-based temporal encoder

Each node's feature channels are encoded independently: a channel's window is
cut into non-overlapping patches, each patch becomes one token, and a small
pre-norm transformer with weights shared across channels and nodes mixes the
tokens of that channel. Node embeddings are the mean over all channel tokens.
"""

import math

import numpy as np

from eagle.autodiff import Tensor, ops
from eagle.errors import ShapeError


def patchify(features, patch_len):
    """Reshape (N, T, C) features into (N * C, T / patch_len, patch_len) channel patches"""
    features = np.asarray(features)
    if features.ndim != 3:
        raise ShapeError(f"Node features must be (N, T, C), got shape {features.shape}")
    n, t, c = features.shape
    if t % patch_len != 0:
        raise ShapeError(f"Window length {t} is not divisible by patch length {patch_len}")
    return features.transpose(0, 2, 1).reshape(n * c, t // patch_len, patch_len)


def _split_heads(x, heads):
    batch, tokens, width = x.shape
    return ops.transpose(ops.reshape(x, (batch, tokens, heads, width // heads)), (0, 2, 1, 3))


def _merge_heads(x):
    batch, heads, tokens, width = x.shape
    return ops.reshape(ops.transpose(x, (0, 2, 1, 3)), (batch, tokens, heads * width))


def _encoder_layer(tokens, params, prefix, config, rng):
    h = ops.layer_norm(tokens, params[f'{prefix}.ln1_g'], params[f'{prefix}.ln1_b'])
    q = _split_heads(h @ params[f'{prefix}.wq'] + params[f'{prefix}.wq_b'], config.encoder_heads)
    k = _split_heads(h @ params[f'{prefix}.wk'] + params[f'{prefix}.wk_b'], config.encoder_heads)
    v = _split_heads(h @ params[f'{prefix}.wv'] + params[f'{prefix}.wv_b'], config.encoder_heads)
    scale = 1.0 / math.sqrt(q.shape[-1])
    attention = ops.softmax((q @ ops.transpose(k, (0, 1, 3, 2))) * scale)
    attention = ops.dropout(attention, config.dropout_rate, rng)
    context = _merge_heads(attention @ v)
    tokens = tokens + ops.dropout(context @ params[f'{prefix}.wo'] + params[f'{prefix}.wo_b'],
                                  config.dropout_rate, rng)

    h = ops.layer_norm(tokens, params[f'{prefix}.ln2_g'], params[f'{prefix}.ln2_b'])
    hidden = ops.gelu(h @ params[f'{prefix}.ffn_w1'] + params[f'{prefix}.ffn_b1'])
    out = hidden @ params[f'{prefix}.ffn_w2'] + params[f'{prefix}.ffn_b2']
    return tokens + ops.dropout(out, config.dropout_rate, rng)


def encode_temporal(features, params, config, rng=None):
    """Temporal embedding of every node

    :param features: standardized node features of shape (N, T, d_node)
    :type features: numpy.ndarray
    :param params: model parameters holding the patch and encoder weights
    :type params: ModelParams
    :param config: model configuration
    :type config: ModelConfig
    :param rng: dropout generator; None evaluates without dropout
    :return: tensor of shape (N, d_model)
    :rtype: Tensor
    """
    n = np.shape(features)[0]
    patches = Tensor(patchify(features, config.patch_len))
    tokens = patches @ params['patch.w'] + params['patch.b'] + params['patch.pos']
    for layer in range(config.encoder_layers):
        tokens = _encoder_layer(tokens, params, f'encoder.{layer}', config, rng)
    tokens = ops.layer_norm(tokens, params['encoder.lnf_g'], params['encoder.lnf_b'])
    per_node = ops.reshape(tokens, (n, -1, config.d_model))
    return ops.mean(per_node, axis=1)


def encode_static(features, params):
    """Linear map of the time-averaged features, used when the temporal encoder is ablated"""
    averaged = Tensor(np.asarray(features).mean(axis=1))
    return averaged @ params['static.w'] + params['static.b']
