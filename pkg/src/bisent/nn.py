"""Differentiable kernels for the embedding model and the MLP scorer.

Plain numpy with hand-written backward passes. Forward functions return a
cache consumed by the matching backward function. Shape letters: B = batch,
T = time, E = input size, H = hidden size, V = vocab size.
"""

from dataclasses import dataclass

import numpy as np

INIT_SCALE = 0.08  # uniform(-0.08, 0.08) for weight matrices, zeros for biases


def sigmoid(x):
    """Numerically stable logistic function, elementwise."""
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def uniform_init(rng, shape, dtype=np.float64):
    return rng.uniform(-INIT_SCALE, INIT_SCALE, size=shape).astype(dtype)


# -----------------------------------------------------------------------------
# GRU cell
# -----------------------------------------------------------------------------


@dataclass
class GruCellParams:
    """Fused GRU cell weights. Column layout on the 3H axis: [update | reset | candidate].

    w_x: (E, 3H) input weights, w_h: (H, 3H) recurrent weights, b: (3H,) bias
    (added on the input side).
    """

    w_x: np.ndarray
    w_h: np.ndarray
    b: np.ndarray

    @property
    def input_dim(self):
        return self.w_x.shape[0]

    @property
    def hidden_dim(self):
        return self.w_h.shape[0]

    @classmethod
    def init(cls, rng, input_dim, hidden_dim, dtype=np.float64):
        return cls(
            w_x=uniform_init(rng, (input_dim, 3 * hidden_dim), dtype),
            w_h=uniform_init(rng, (hidden_dim, 3 * hidden_dim), dtype),
            b=np.zeros(3 * hidden_dim, dtype=dtype),
        )


def gru_forward(cell, x, h_prev):
    """One GRU step. x (B, E), h_prev (B, H) -> (h (B, H), cache).

    z = sig(a_z + g_z); r = sig(a_r + g_r); c = tanh(a_c + r * g_c)
    h = z * h_prev + (1 - z) * c,  with a = x @ w_x + b, g = h_prev @ w_h.
    """
    hd = cell.hidden_dim
    if x.shape[-1] != cell.input_dim or h_prev.shape[-1] != hd:
        raise ValueError(
            f"gru shape mismatch: x {x.shape}, h_prev {h_prev.shape}, "
            f"cell expects input {cell.input_dim}, hidden {hd}"
        )
    a = x @ cell.w_x + cell.b
    g = h_prev @ cell.w_h
    z = sigmoid(a[..., :hd] + g[..., :hd])
    r = sigmoid(a[..., hd : 2 * hd] + g[..., hd : 2 * hd])
    gc = g[..., 2 * hd :]
    c = np.tanh(a[..., 2 * hd :] + r * gc)
    h = z * h_prev + (1.0 - z) * c
    return h, (x, h_prev, z, r, c, gc)


def gru_backward(cell, cache, dh):
    """Backward of gru_forward. dh (B, H) -> (dx, dh_prev, {w_x, w_h, b} grads)."""
    x, h_prev, z, r, c, gc = cache
    dz = dh * (h_prev - c)
    dc = dh * (1.0 - z)
    dh_prev = dh * z
    dpre_c = dc * (1.0 - c * c)
    dr = dpre_c * gc
    dgc = dpre_c * r
    dpre_z = dz * z * (1.0 - z)
    dpre_r = dr * r * (1.0 - r)
    da = np.concatenate([dpre_z, dpre_r, dpre_c], axis=-1)
    dg = np.concatenate([dpre_z, dpre_r, dgc], axis=-1)
    grads = {"w_x": x.T @ da, "w_h": h_prev.T @ dg, "b": da.sum(axis=0)}
    dx = da @ cell.w_x.T
    dh_prev = dh_prev + dg @ cell.w_h.T
    return dx, dh_prev, grads


def gru_step(cell, x, h_prev):
    """Public single-step API; accepts vectors (E,)/(H,) or batched rows."""
    x = np.asarray(x, dtype=cell.w_x.dtype)
    h_prev = np.asarray(h_prev, dtype=cell.w_x.dtype)
    single = x.ndim == 1
    if single:
        x, h_prev = x[None, :], h_prev[None, :]
    h, _ = gru_forward(cell, x, h_prev)
    return h[0] if single else h


# -----------------------------------------------------------------------------
# Pooling, softmax, linear
# -----------------------------------------------------------------------------


def maxpool_time(states):
    """Elementwise max over a nonempty sequence of equal-length vectors."""
    arr = np.asarray(states, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] == 0:
        raise ValueError("maxpool_time needs a nonempty sequence of vectors")
    return arr.max(axis=0)


def softmax_xent(logits, target):
    """Cross-entropy of softmax(logits) against a single target class.

    Returns (loss, grad) with loss = -log softmax(logits)[target] and
    grad = softmax(logits) - onehot(target). Stable via max subtraction.
    """
    logits = np.asarray(logits, dtype=np.float64)
    if logits.ndim != 1:
        raise ValueError("softmax_xent expects a 1-D logits vector")
    if not 0 <= target < logits.shape[0]:
        raise IndexError(f"target {target} out of range for vocab {logits.shape[0]}")
    shifted = logits - logits.max()
    lse = np.log(np.exp(shifted).sum())
    loss = lse - shifted[target]
    grad = np.exp(shifted - lse)
    grad[target] -= 1.0
    return loss, grad


def softmax_xent_rows(logits, targets):
    """Row-wise softmax cross-entropy. logits (B, V), targets (B,) int.

    Returns (losses (B,), dlogits (B, V)) where dlogits = probs - onehot.
    """
    shifted = logits - logits.max(axis=1, keepdims=True)
    expv = np.exp(shifted)
    sums = expv.sum(axis=1, keepdims=True)
    lse = np.log(sums)
    rows = np.arange(logits.shape[0])
    losses = (lse[:, 0] - shifted[rows, targets])
    dlogits = expv / sums
    dlogits[rows, targets] -= 1.0
    return losses, dlogits


def linear_forward(x, w, b):
    """x (B, I) @ w (I, O) + b (O,) -> (B, O)."""
    return x @ w + b


def linear_backward(x, w, dy):
    """Backward of linear_forward. Returns (dx, dw, db)."""
    return dy @ w.T, x.T @ dy, dy.sum(axis=0)
