"""Optimizers: SGD with step-decay schedule (embedding model) and Adam (MLP).

Parameters live in flat name -> ndarray dicts; gradients use the same keys.
Missing gradient keys mean gradient zero and are skipped.
"""

import math
from dataclasses import dataclass

import numpy as np


@dataclass
class SgdSchedule:
    """Constant learning rate until `warmup_updates` are done, then multiply
    by `decay_factor` once per `decay_interval` further updates."""

    initial_lr: float = 1.0
    decay_factor: float = 0.9
    warmup_updates: int = 100_000
    decay_interval: int = 50_000

    def __post_init__(self):
        if self.initial_lr <= 0:
            raise ValueError("initial_lr must be positive")
        if not 0 < self.decay_factor <= 1:
            raise ValueError("decay_factor must be in (0, 1]")
        if self.decay_interval < 1:
            raise ValueError("decay_interval must be >= 1")

    def lr(self, update_index):
        """Learning rate for the update with 0-based index `update_index`.

        The decayed rate applies from index warmup_updates on, so with the
        defaults index 99_999 still uses 1.0 and index 100_000 uses 0.9.
        """
        if update_index < self.warmup_updates:
            return self.initial_lr
        steps = (update_index - self.warmup_updates) // self.decay_interval + 1
        return self.initial_lr * self.decay_factor**steps


def global_norm(grads):
    """L2 norm over all gradient tensors together."""
    total = 0.0
    for g in grads.values():
        total += float((g * g).sum())
    return math.sqrt(total)


def clip_global_norm(grads, max_norm):
    """Scale all grads in place so the global norm is at most max_norm.

    Returns the pre-clip norm. max_norm <= 0 disables clipping.
    """
    norm = global_norm(grads)
    if max_norm > 0 and norm > max_norm:
        scale = max_norm / norm
        for g in grads.values():
            g *= scale
    return norm


def sgd_step(tensors, grads, schedule, update_index):
    """p <- p - lr(update_index) * g, in place. Returns the tensors dict."""
    lr = schedule.lr(update_index)
    for name, g in grads.items():
        p = tensors[name]
        if p.shape != g.shape:
            raise ValueError(f"grad shape {g.shape} != param shape {p.shape} for '{name}'")
        p -= lr * g
    return tensors


class Adam:
    """Adaptive moment estimation over a flat tensor dict. In-place updates."""

    def __init__(self, tensors, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in tensors.items()}
        self.v = {k: np.zeros_like(v) for k, v in tensors.items()}

    def step(self, tensors, grads):
        self.t += 1
        bc1 = 1.0 - self.beta1**self.t
        bc2 = 1.0 - self.beta2**self.t
        for name, g in grads.items():
            m = self.m[name]
            v = self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            tensors[name] -= self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)
