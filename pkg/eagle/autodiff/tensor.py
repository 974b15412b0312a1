"""Dense tensors with reverse-mode differentiation

Every tensor produced by an operation keeps references to its inputs and a
backward rule. ``backward`` walks that graph once in reverse topological order,
accumulating gradients into the leaves, and then releases it.
"""

import contextlib

import numpy as np

from eagle.errors import ShapeError, ConfigError

_PRECISIONS = {32: np.float32, 64: np.float64}


class _EngineState:

    def __init__(self):
        self.precision = 32
        self.grad_enabled = True

    @property
    def dtype(self):
        return _PRECISIONS[self.precision]


_state = _EngineState()


def set_precision(bits):
    """Select the engine-wide floating point precision

    :param bits: 32 for training, 64 for gradient verification
    :type bits: int
    :return: None
    """
    if bits not in _PRECISIONS:
        raise ConfigError(f"precision must be one of {sorted(_PRECISIONS)}, got {bits}")
    _state.precision = bits


def get_precision():
    return _state.precision


def get_dtype():
    return _state.dtype


@contextlib.contextmanager
def precision(bits):
    """Temporarily switch the engine precision"""
    previous = _state.precision
    set_precision(bits)
    try:
        yield
    finally:
        _state.precision = previous


@contextlib.contextmanager
def no_grad():
    """Evaluate without recording operations"""
    previous = _state.grad_enabled
    _state.grad_enabled = False
    try:
        yield
    finally:
        _state.grad_enabled = previous


def is_grad_enabled():
    return _state.grad_enabled


class Tensor:
    """An n-dimensional array of reals with an optional gradient"""

    def __init__(self, values, requires_grad=False, copy=True):
        dtype = get_dtype()
        if copy:
            self.values = np.array(values, dtype=dtype)
        else:
            self.values = np.asarray(values, dtype=dtype)
        self.requires_grad = requires_grad
        self.grad = None
        self._parents = ()
        self._backward = None

    @property
    def shape(self):
        return self.values.shape

    @property
    def ndim(self):
        return self.values.ndim

    @property
    def size(self):
        return self.values.size

    @property
    def is_leaf(self):
        return self._backward is None

    def numpy(self):
        return self.values.copy()

    def item(self):
        return float(self.values.reshape(-1)[0]) if self.values.size == 1 else float(self.values)

    def zero_grad(self):
        self.grad = None

    def detach(self):
        return Tensor(self.values, requires_grad=False)

    def backward(self, inputs=None):
        backward(self, inputs=inputs)

    def __repr__(self):
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}{flag})"


def record(values, parents, backward_fn):
    """Wrap an operation result, recording it for backward when needed

    :param values: forward result
    :type values: numpy.ndarray
    :param parents: input tensors, in the order backward_fn returns gradients
    :type parents: tuple
    :param backward_fn: maps the output gradient to a tuple of input gradients (None to skip)
    :type backward_fn: function(numpy.ndarray) -> tuple
    :return: the output tensor
    :rtype: Tensor
    """
    out = Tensor(values, copy=False)
    if _state.grad_enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward_fn
    return out


def _topological_order(root):
    order = []
    visited = set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if parent.requires_grad and id(parent) not in visited:
                stack.append((parent, False))
    return order


def backward(loss, inputs=None):
    """Populate gradients on every leaf the scalar loss depends on

    :param loss: scalar tensor
    :type loss: Tensor
    :param inputs: leaves that should end up with a gradient even when the loss
        does not depend on them (they receive zeros)
    :type inputs: list
    :return: None
    """
    if loss.values.size != 1:
        raise ShapeError(f"backward needs a scalar loss, got shape {loss.shape}")

    if loss.requires_grad:
        grads = {id(loss): np.ones_like(loss.values)}
        for node in reversed(_topological_order(loss)):
            grad = grads.pop(id(node), None)
            if grad is None:
                continue
            if node.is_leaf:
                grad = np.array(grad, dtype=node.values.dtype)
                node.grad = grad if node.grad is None else node.grad + grad
                continue
            parent_grads = node._backward(grad)
            for parent, parent_grad in zip(node._parents, parent_grads):
                if parent_grad is None or not parent.requires_grad:
                    continue
                key = id(parent)
                if key in grads:
                    grads[key] = grads[key] + parent_grad
                else:
                    grads[key] = parent_grad
            # the tape is consumed
            node._parents = ()
            node._backward = None

    for leaf in inputs or ():
        if leaf.grad is None:
            leaf.grad = np.zeros_like(leaf.values)
