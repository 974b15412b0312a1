import numpy as np

from eagle.autodiff.tensor import backward, get_precision
from eagle.errors import NumericError


def grad_check(f, params, eps=1e-5):
    """Compare analytic gradients against central differences

    :param f: closure recomputing a scalar loss from the current parameter values
    :type f: function() -> Tensor
    :param params: leaf tensors to check, each with requires_grad set
    :type params: list
    :param eps: finite-difference step
    :type eps: float
    :return: max relative error over every coordinate, with denominator
        max(|analytic|, |numeric|, 1e-8)
    :rtype: float
    """
    if get_precision() != 64:
        raise NumericError("grad_check requires 64-bit precision")

    for p in params:
        p.zero_grad()
    loss = f()
    if not np.all(np.isfinite(loss.values)):
        raise NumericError("grad_check: non-finite loss at the unperturbed point")
    backward(loss, inputs=params)

    worst = 0.0
    for p in params:
        analytic = p.grad.reshape(-1)
        original = p.values.copy()
        flat = p.values.reshape(-1)
        for i in range(flat.size):
            flat[i] = original.reshape(-1)[i] + eps
            plus = f().item()
            flat[i] = original.reshape(-1)[i] - eps
            minus = f().item()
            flat[i] = original.reshape(-1)[i]
            if not (np.isfinite(plus) and np.isfinite(minus)):
                raise NumericError(f"grad_check: non-finite loss while perturbing coordinate {i}")
            numeric = (plus - minus) / (2 * eps)
            denom = max(abs(analytic[i]), abs(numeric), 1e-8)
            worst = max(worst, abs(analytic[i] - numeric) / denom)
        p.values = original
    return worst
