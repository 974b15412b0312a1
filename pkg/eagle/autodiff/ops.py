"""Differentiable operations on Tensor

Binary elementwise ops broadcast with numpy rules; backward sums the gradient
over every broadcast axis so it matches the input shape again.
"""

import numpy as np

from eagle.autodiff.tensor import Tensor, record, get_dtype
from eagle.errors import ShapeError, DomainError


def as_tensor(value):
    if isinstance(value, Tensor):
        return value
    return Tensor(np.asarray(value, dtype=get_dtype()))


def _unbroadcast(grad, shape):
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _broadcast_shape(name, a, b):
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(f"{name}: cannot broadcast shapes {a.shape} and {b.shape}")


# ==================== Core ops ====================

def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape('add', a, b)

    def backward(grad):
        return _unbroadcast(grad, a.shape), _unbroadcast(grad, b.shape)

    return record(a.values + b.values, (a, b), backward)


def sub(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape('sub', a, b)

    def backward(grad):
        return _unbroadcast(grad, a.shape), _unbroadcast(-grad, b.shape)

    return record(a.values - b.values, (a, b), backward)


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape('mul', a, b)
    a_values, b_values = a.values, b.values

    def backward(grad):
        return _unbroadcast(grad * b_values, a.shape), _unbroadcast(grad * a_values, b.shape)

    return record(a_values * b_values, (a, b), backward)


def div(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape('div', a, b)
    a_values, b_values = a.values, b.values

    def backward(grad):
        return (_unbroadcast(grad / b_values, a.shape),
                _unbroadcast(-grad * a_values / (b_values * b_values), b.shape))

    return record(a_values / b_values, (a, b), backward)


def neg(a):
    a = as_tensor(a)
    return record(-a.values, (a,), lambda grad: (-grad,))


def matmul(a, b):
    """Matrix product; leading (batch) axes broadcast"""
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul: incompatible shapes {a.shape} and {b.shape}")
    try:
        np.broadcast_shapes(a.shape[:-2], b.shape[:-2])
    except ValueError:
        raise ShapeError(f"matmul: incompatible batch axes in {a.shape} and {b.shape}")
    a_values, b_values = a.values, b.values

    def backward(grad):
        grad_a = grad @ np.swapaxes(b_values, -1, -2)
        grad_b = np.swapaxes(a_values, -1, -2) @ grad
        return _unbroadcast(grad_a, a.shape), _unbroadcast(grad_b, b.shape)

    return record(a_values @ b_values, (a, b), backward)


def concat(tensors, axis=0):
    tensors = [as_tensor(t) for t in tensors]
    if not tensors:
        raise ShapeError("concat: no tensors given")
    ndim = tensors[0].ndim
    axis = axis % ndim
    for t in tensors[1:]:
        if t.ndim != ndim or any(t.shape[i] != tensors[0].shape[i] for i in range(ndim) if i != axis):
            raise ShapeError(f"concat: shapes {tensors[0].shape} and {t.shape} differ off axis {axis}")
    sizes = [t.shape[axis] for t in tensors]
    boundaries = np.cumsum(sizes)[:-1]

    def backward(grad):
        return tuple(np.split(grad, boundaries, axis=axis))

    return record(np.concatenate([t.values for t in tensors], axis=axis), tuple(tensors), backward)


def getitem(a, key):
    """Basic or integer-array indexing; repeated indices accumulate in backward"""
    a = as_tensor(a)
    try:
        out = a.values[key]
    except IndexError as e:
        raise ShapeError(f"slice: {e} for shape {a.shape}")

    def backward(grad):
        full = np.zeros_like(a.values)
        np.add.at(full, key, grad)
        return (full,)

    return record(np.array(out, copy=True), (a,), backward)


def reshape(a, shape):
    a = as_tensor(a)
    try:
        out = a.values.reshape(shape)
    except ValueError:
        raise ShapeError(f"reshape: cannot reshape {a.shape} into {shape}")
    return record(out, (a,), lambda grad: (grad.reshape(a.shape),))


def transpose(a, axes=None):
    """Permute axes; defaults to reversing them (the 2-D transpose)"""
    a = as_tensor(a)
    if axes is None:
        axes = tuple(reversed(range(a.ndim)))
    if sorted(axes) != list(range(a.ndim)):
        raise ShapeError(f"transpose: axes {axes} do not match shape {a.shape}")
    inverse = tuple(np.argsort(axes))
    return record(np.ascontiguousarray(a.values.transpose(axes)), (a,),
                  lambda grad: (grad.transpose(inverse),))


def _expand_reduced(grad, shape, axis, keepdims):
    if axis is not None and not keepdims:
        axes = (axis,) if isinstance(axis, int) else tuple(axis)
        axes = tuple(ax % len(shape) for ax in axes)
        for ax in sorted(axes):
            grad = np.expand_dims(grad, ax)
    return np.broadcast_to(grad, shape)


def sum(a, axis=None, keepdims=False):
    a = as_tensor(a)
    return record(np.asarray(a.values.sum(axis=axis, keepdims=keepdims)), (a,),
                  lambda grad: (_expand_reduced(grad, a.shape, axis, keepdims),))


def mean(a, axis=None, keepdims=False):
    a = as_tensor(a)
    out = np.asarray(a.values.mean(axis=axis, keepdims=keepdims))
    count = a.values.size // max(out.size, 1) if a.values.size else 1

    def backward(grad):
        return (_expand_reduced(grad, a.shape, axis, keepdims) / count,)

    return record(out, (a,), backward)


# ==================== Nonlinear ops ====================

def leaky_relu(x, slope=0.2):
    x = as_tensor(x)
    positive = x.values > 0
    out = np.where(positive, x.values, slope * x.values)
    return record(out, (x,), lambda grad: (np.where(positive, grad, slope * grad),))


def relu(x):
    return leaky_relu(x, slope=0.0)


def elu(x, alpha=1.0):
    x = as_tensor(x)
    positive = x.values > 0
    negative_part = alpha * np.expm1(np.minimum(x.values, 0))
    out = np.where(positive, x.values, negative_part)

    def backward(grad):
        return (np.where(positive, grad, grad * (negative_part + alpha)),)

    return record(out, (x,), backward)


def _sigmoid(values):
    z = np.exp(-np.abs(values))
    return np.where(values >= 0, 1.0 / (1.0 + z), z / (1.0 + z))


def sigmoid(x):
    x = as_tensor(x)
    out = _sigmoid(x.values)
    return record(out, (x,), lambda grad: (grad * out * (1.0 - out),))


def softplus(x):
    x = as_tensor(x)
    out = np.maximum(x.values, 0) + np.log1p(np.exp(-np.abs(x.values)))
    slope = _sigmoid(x.values)
    return record(out, (x,), lambda grad: (grad * slope,))


_GELU_C = float(np.sqrt(2.0 / np.pi))


def gelu(x):
    """GELU, tanh approximation"""
    x = as_tensor(x)
    v = x.values
    inner = _GELU_C * (v + 0.044715 * v ** 3)
    t = np.tanh(inner)
    out = 0.5 * v * (1.0 + t)

    def backward(grad):
        d_inner = _GELU_C * (1.0 + 3 * 0.044715 * v ** 2)
        return (grad * (0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * d_inner),)

    return record(out, (x,), backward)


def exp(x):
    x = as_tensor(x)
    out = np.exp(x.values)
    return record(out, (x,), lambda grad: (grad * out,))


def log(x):
    x = as_tensor(x)
    if np.any(x.values <= 0):
        raise DomainError(f"log of non-positive value (min {x.values.min()})")
    v = x.values
    return record(np.log(v), (x,), lambda grad: (grad / v,))


def layer_norm(x, gain, bias, eps=1e-5):
    """Normalize over the last axis, then scale by gain and shift by bias"""
    x, gain, bias = as_tensor(x), as_tensor(gain), as_tensor(bias)
    if gain.shape[-1:] != x.shape[-1:] or bias.shape[-1:] != x.shape[-1:]:
        raise ShapeError(f"layer_norm: gain {gain.shape} / bias {bias.shape} do not match {x.shape}")
    centered = x.values - x.values.mean(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt((centered * centered).mean(axis=-1, keepdims=True) + eps)
    normed = centered * inv_std
    gain_values = gain.values

    def backward(grad):
        d_normed = grad * gain_values
        d_x = inv_std * (d_normed
                         - d_normed.mean(axis=-1, keepdims=True)
                         - normed * (d_normed * normed).mean(axis=-1, keepdims=True))
        return d_x, _unbroadcast(grad * normed, gain.shape), _unbroadcast(grad, bias.shape)

    return record(normed * gain_values + bias.values, (x, gain, bias), backward)


def clip(x, low, high):
    x = as_tensor(x)
    inside = (x.values >= low) & (x.values <= high)
    return record(np.clip(x.values, low, high), (x,), lambda grad: (np.where(inside, grad, 0.0),))


def huber(residual, delta=1.0):
    """0.5 r^2 inside [-delta, delta], delta (|r| - delta/2) outside"""
    residual = as_tensor(residual)
    r = residual.values
    abs_r = np.abs(r)
    out = np.where(abs_r <= delta, 0.5 * r * r, delta * (abs_r - 0.5 * delta))
    return record(out, (residual,), lambda grad: (grad * np.clip(r, -delta, delta),))


def dropout(x, rate, rng=None):
    """Inverted dropout; identity when rng is None (evaluation) or rate is 0"""
    x = as_tensor(x)
    if rng is None or rate <= 0:
        return x
    mask = ((rng.random(x.shape) >= rate) / (1.0 - rate)).astype(x.values.dtype)
    return record(x.values * mask, (x,), lambda grad: (grad * mask,))


# ==================== Segment ops ====================

def gather(x, index):
    """Rows of x selected by an integer index array"""
    x = as_tensor(x)
    index = np.asarray(index, dtype=np.int64)
    if index.size and (index.min() < 0 or index.max() >= x.shape[0]):
        raise ShapeError(f"gather: index out of range for {x.shape[0]} rows")

    def backward(grad):
        full = np.zeros_like(x.values)
        np.add.at(full, index, grad)
        return (full,)

    return record(x.values[index], (x,), backward)


def segment_sum(x, segments, num_segments):
    """Sum rows of x that share a segment id"""
    x = as_tensor(x)
    segments = np.asarray(segments, dtype=np.int64)
    if segments.shape[0] != x.shape[0]:
        raise ShapeError(f"segment_sum: {segments.shape[0]} ids for {x.shape[0]} rows")
    out = np.zeros((num_segments,) + x.shape[1:], dtype=x.values.dtype)
    np.add.at(out, segments, x.values)
    return record(out, (x,), lambda grad: (grad[segments],))


def segment_softmax(scores, segments, num_segments=None):
    """Softmax of scores within each segment, along the leading axis

    Trailing axes (e.g. attention heads) are normalized independently.
    """
    scores = as_tensor(scores)
    segments = np.asarray(segments, dtype=np.int64)
    if scores.shape[0] == 0:
        return record(np.zeros_like(scores.values), (scores,), lambda grad: (grad,))
    if segments.shape[0] != scores.shape[0]:
        raise ShapeError(f"segment_softmax: {segments.shape[0]} ids for {scores.shape[0]} scores")
    if num_segments is None:
        num_segments = int(segments.max()) + 1
    if segments.min() < 0 or segments.max() >= num_segments:
        raise ShapeError(f"segment_softmax: segment id out of range [0, {num_segments})")

    tail = scores.shape[1:]
    seg_max = np.full((num_segments,) + tail, -np.inf, dtype=scores.values.dtype)
    np.maximum.at(seg_max, segments, scores.values)
    shifted = np.exp(scores.values - seg_max[segments])
    denom = np.zeros((num_segments,) + tail, dtype=scores.values.dtype)
    np.add.at(denom, segments, shifted)
    out = shifted / denom[segments]

    def backward(grad):
        weighted = np.zeros((num_segments,) + tail, dtype=grad.dtype)
        np.add.at(weighted, segments, grad * out)
        return (out * (grad - weighted[segments]),)

    return record(out, (scores,), backward)


def softmax(x):
    """Softmax over the last axis"""
    x = as_tensor(x)
    width = x.shape[-1]
    rows = x.size // width
    segments = np.repeat(np.arange(rows), width)
    flat = segment_softmax(reshape(x, (rows * width,)), segments, rows)
    return reshape(flat, x.shape)


# ==================== Operator overloads ====================

Tensor.__add__ = add
Tensor.__radd__ = lambda self, other: add(other, self)
Tensor.__sub__ = sub
Tensor.__rsub__ = lambda self, other: sub(other, self)
Tensor.__mul__ = mul
Tensor.__rmul__ = lambda self, other: mul(other, self)
Tensor.__truediv__ = div
Tensor.__rtruediv__ = lambda self, other: div(other, self)
Tensor.__neg__ = neg
Tensor.__matmul__ = matmul
Tensor.__getitem__ = getitem
Tensor.reshape = lambda self, *shape: reshape(self, shape[0] if len(shape) == 1 else shape)
Tensor.sum = lambda self, axis=None, keepdims=False: sum(self, axis, keepdims)
Tensor.mean = lambda self, axis=None, keepdims=False: mean(self, axis, keepdims)
Tensor.T = property(lambda self: transpose(self))
