import math

import numpy as np

from eagle.errors import ConfigError


class AdamW:
    """Adam with decoupled weight decay over a list of leaf tensors

    :param params: tensors to optimize; their .grad is read on every step
    :param lr: default learning rate, overridden per step by the schedule
    :param betas: running-average coefficients of the gradient and its square
    :param eps: added to the denominator
    :param weight_decay: decoupled decay applied as p *= 1 - lr * weight_decay
    """

    def __init__(self, params, lr=3e-4, betas=(0.9, 0.999), eps=1e-8, weight_decay=1e-4):
        if lr <= 0:
            raise ConfigError(f"lr must be positive, got {lr}")
        if not all(0 <= b < 1 for b in betas):
            raise ConfigError(f"betas must lie in [0, 1), got {betas}")
        self.params = list(params)
        self.lr = lr
        self.betas = tuple(betas)
        self.eps = eps
        self.weight_decay = weight_decay
        self.state = [{'step': 0, 'exp_avg': np.zeros_like(p.values), 'exp_avg_sq': np.zeros_like(p.values)}
                      for p in self.params]

    def zero_grad(self):
        for p in self.params:
            p.zero_grad()

    def step(self, lr=None):
        lr = self.lr if lr is None else lr
        beta1, beta2 = self.betas
        for p, state in zip(self.params, self.state):
            if p.grad is None:
                continue
            grad = p.grad
            state['step'] += 1
            exp_avg, exp_avg_sq = state['exp_avg'], state['exp_avg_sq']
            exp_avg *= beta1
            exp_avg += (1 - beta1) * grad
            exp_avg_sq *= beta2
            exp_avg_sq += (1 - beta2) * grad * grad

            bias_correction1 = 1 - beta1 ** state['step']
            bias_correction2 = 1 - beta2 ** state['step']

            values = p.values
            if self.weight_decay != 0:
                values = values * (1 - lr * self.weight_decay)
            denom = np.sqrt(exp_avg_sq) / math.sqrt(bias_correction2) + self.eps
            # parameters are replaced, never updated in place
            p.values = (values - (lr / bias_correction1) * exp_avg / denom).astype(p.values.dtype)


def cosine_lr(step, total_steps, lr, lr_min):
    """Cosine annealing from lr at step 0 to lr_min at step total_steps - 1"""
    if total_steps <= 1:
        return lr
    progress = min(step, total_steps - 1) / (total_steps - 1)
    return lr_min + 0.5 * (lr - lr_min) * (1 + math.cos(math.pi * progress))


def global_grad_norm(params):
    total = 0.0
    for p in params:
        if p.grad is not None:
            total += float(np.sum(np.square(p.grad, dtype=np.float64)))
    return math.sqrt(total)


def clip_grad_norm(params, max_norm):
    """Rescale every gradient so the global L2 norm is at most max_norm

    :return: the norm before clipping
    :rtype: float
    """
    norm = global_grad_norm(params)
    if norm > max_norm:
        scale = max_norm / norm
        for p in params:
            if p.grad is not None:
                p.grad = (p.grad * scale).astype(p.grad.dtype)
    return norm
