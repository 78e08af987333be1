"""Central finite-difference gradient checking for flat tensor dicts."""

import numpy as np

from .errors import NumericError


def grad_check(loss_fn, tensors, epsilon=1e-5, zero_floor=1e-7):
    """Max relative error between analytic gradients and central differences.

    loss_fn(tensors) -> (loss, grads) must be deterministic; tensors are
    perturbed in place by +/- epsilon, one scalar at a time, and restored.
    Entries where both analytic and numeric gradients are below zero_floor
    count as exact (avoids 0/0 blowups on untouched parameters).
    """
    loss, grads = loss_fn(tensors)
    if not np.isfinite(loss):
        raise NumericError(f"non-finite loss {loss!r} at the evaluation point")
    worst = 0.0
    for name in sorted(tensors):
        p = tensors[name]
        g = grads.get(name)
        gflat = np.zeros(p.size) if g is None else np.asarray(g).reshape(-1)
        flat = p.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + epsilon
            lp, _ = loss_fn(tensors)
            flat[i] = orig - epsilon
            lm, _ = loss_fn(tensors)
            flat[i] = orig
            if not (np.isfinite(lp) and np.isfinite(lm)):
                raise NumericError(f"non-finite loss while perturbing '{name}'[{i}]")
            numeric = (lp - lm) / (2.0 * epsilon)
            denom = max(abs(gflat[i]), abs(numeric))
            if denom > zero_floor:
                worst = max(worst, abs(gflat[i] - numeric) / denom)
    return worst
