"""
Edge-aware graph attention

For an edge v -> u, head k scores

    s(u <- v) = LeakyReLU(a_k . [W_k h_u || W_k h_v || W_e,k E_uv])

and the softmax runs over all edges arriving at u, including a self-loop with a
zero edge-feature vector. The dot product with the concatenation is evaluated
as three separate dot products, one per block of a_k.
"""

import numpy as np

from eagle.autodiff import Tensor, ops
from eagle.errors import GraphError, ShapeError

_ACTIVATIONS = {
    'elu': ops.elu,
    'relu': ops.relu,
    'identity': lambda x: x,
}


def with_self_loops(src, dst, edge_features, num_nodes):
    """Append one self-loop per node, carrying an all-zero edge-feature row

    :return: (src, dst, edge_features) with the N self-loops after the E graph edges
    """
    src = np.asarray(src, dtype=np.int64)
    dst = np.asarray(dst, dtype=np.int64)
    if src.shape != dst.shape:
        raise GraphError(f"Edge arrays differ in length: {src.shape[0]} sources, {dst.shape[0]} destinations")
    if src.size and (min(src.min(), dst.min()) < 0 or max(src.max(), dst.max()) >= num_nodes):
        raise GraphError(f"Edge index out of range for a graph of {num_nodes} nodes")
    loops = np.arange(num_nodes, dtype=np.int64)
    features = None
    if edge_features is not None:
        edge_features = np.asarray(edge_features)
        if edge_features.shape[0] != src.shape[0]:
            raise ShapeError(f"{edge_features.shape[0]} edge-feature rows for {src.shape[0]} edges")
        features = np.concatenate([edge_features, np.zeros((num_nodes, edge_features.shape[1]))], axis=0)
    return np.concatenate([src, loops]), np.concatenate([dst, loops]), features


def _head_scores(x, a):
    """Per-head dot product of (M, heads, width) rows with an (heads, width) vector"""
    return ops.sum(x * a, axis=-1)


def egat_layer(h, src, dst, edge_features, params, prefix, heads, use_edges=True, slope=0.2, activation='elu'):
    """One multi-head edge-aware attention layer

    :param h: node representations of shape (N, d)
    :type h: Tensor
    :param src: sending node of each directed edge, self-loops not included
    :param dst: receiving node of each directed edge
    :param edge_features: (E, d_edge) static edge features aligned with the edges
    :param params: model parameters holding '<prefix>.w', '.a_recv', '.a_send' and, with
        edges, '.w_edge' and '.a_edge'
    :param heads: number of attention heads; d must be divisible by it
    :param use_edges: False drops the edge term from the score
    :return: (updated representations (N, d), attention of shape (E + N, heads), self-loops last)
    :rtype: tuple
    """
    n, d = h.shape
    if d % heads != 0:
        raise ShapeError(f"Width {d} is not divisible by {heads} heads")
    width = d // heads
    src_all, dst_all, features_all = with_self_loops(src, dst, edge_features if use_edges else None, n)
    m = src_all.shape[0]

    wh = ops.reshape(h @ params[f'{prefix}.w'], (n, heads, width))
    score_recv = _head_scores(wh, params[f'{prefix}.a_recv'])
    score_send = _head_scores(wh, params[f'{prefix}.a_send'])
    scores = ops.gather(score_recv, dst_all) + ops.gather(score_send, src_all)
    if use_edges:
        we = ops.reshape(Tensor(features_all) @ params[f'{prefix}.w_edge'], (m, heads, width))
        scores = scores + _head_scores(we, params[f'{prefix}.a_edge'])
    scores = ops.leaky_relu(scores, slope)

    alpha = ops.segment_softmax(scores, dst_all, n)
    messages = ops.gather(wh, src_all) * ops.reshape(alpha, (m, heads, 1))
    z = ops.reshape(ops.segment_sum(messages, dst_all, n), (n, d))
    return _ACTIVATIONS[activation](z), alpha.numpy()
