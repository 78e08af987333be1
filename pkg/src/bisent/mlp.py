"""Trainable MLP similarity: a binary classifier over concatenated
source/target sentence embeddings.

Two ReLU hidden layers and a single sigmoid output node; trained with
binary cross-entropy over positive (parallel) and negative (mismatched)
embedding pairs using Adam.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DataError, NumericError
from .nn import sigmoid
from .optim import Adam


@dataclass
class MlpParams:
    """tensors: w0/b0, w1/b1, w2/b2 for layers [2D -> h1 -> h2 -> 1]."""

    tensors: dict
    layer_sizes: tuple

    @classmethod
    def init(cls, input_dim, hidden=(512, 512), seed=0, dtype=np.float64):
        rng = np.random.default_rng(seed)
        sizes = (input_dim, *hidden, 1)
        tensors = {}
        for i, (fan_in, fan_out) in enumerate(zip(sizes, sizes[1:])):
            scale = np.sqrt(2.0 / fan_in)  # He init for the ReLU stack
            tensors[f"w{i}"] = (rng.normal(size=(fan_in, fan_out)) * scale).astype(dtype)
            tensors[f"b{i}"] = np.zeros(fan_out, dtype=dtype)
        return cls(tensors=tensors, layer_sizes=sizes)


def _forward_logits(params, x):
    """x (B, 2D) -> (logits (B,), cache of layer activations)."""
    t = params.tensors
    h1_pre = x @ t["w0"] + t["b0"]
    h1 = np.maximum(h1_pre, 0.0)
    h2_pre = h1 @ t["w1"] + t["b1"]
    h2 = np.maximum(h2_pre, 0.0)
    logits = (h2 @ t["w2"] + t["b2"])[:, 0]
    return logits, (x, h1, h2)


def mlp_forward_batch(params, a_rows, b_rows):
    """Classifier scores in (0, 1) for row-aligned embedding pairs. (B,)."""
    x = np.concatenate([a_rows, b_rows], axis=1)
    if x.shape[1] != params.layer_sizes[0]:
        raise ValueError(
            f"pair dimension {x.shape[1]} != MLP input size {params.layer_sizes[0]}"
        )
    logits, _ = _forward_logits(params, x)
    return sigmoid(logits)


def mlp_forward(params, a, b):
    """Score for a single (a, b) embedding pair."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    return float(mlp_forward_batch(params, a[None, :], b[None, :])[0])


def mlp_loss_and_grads(params, x, y):
    """Mean binary cross-entropy and gradients over a labelled batch.

    y holds 1.0 for parallel pairs and 0.0 for mismatched ones. Stable via
    softplus: -log q = softplus(-z), -log(1 - q) = softplus(z).
    """
    t = params.tensors
    logits, (x0, h1, h2) = _forward_logits(params, x)
    losses = np.logaddexp(0.0, np.where(y > 0.5, -logits, logits))
    loss = float(losses.mean())
    n = x.shape[0]
    dlogits = (sigmoid(logits) - y) / n
    grads = {}
    dh2 = dlogits[:, None] @ t["w2"].T
    grads["w2"] = h2.T @ dlogits[:, None]
    grads["b2"] = np.array([dlogits.sum()])
    dh2_pre = dh2 * (h2 > 0.0)
    grads["w1"] = h1.T @ dh2_pre
    grads["b1"] = dh2_pre.sum(axis=0)
    dh1 = dh2_pre @ t["w1"].T
    dh1_pre = dh1 * (h1 > 0.0)
    grads["w0"] = x0.T @ dh1_pre
    grads["b0"] = dh1_pre.sum(axis=0)
    return loss, grads


@dataclass
class MlpTrainConfig:
    updates: int = 1000  # mini-batch steps, not epochs
    batch_size: int = 200
    lr: float = 1e-3
    hidden: tuple = (512, 512)
    seed: int = 0


def mlp_train(pos_src, pos_tgt, neg_src, neg_tgt, cfg=None):
    """Train the MLP scorer on positive and negative embedding pairs.

    Each *_src/*_tgt argument is a row-aligned (n, D) array. Deterministic
    under cfg.seed; raises DataError when either class is empty and
    NumericError if the loss goes non-finite.
    """
    cfg = cfg or MlpTrainConfig()
    pos_src = np.asarray(pos_src, dtype=np.float64)
    pos_tgt = np.asarray(pos_tgt, dtype=np.float64)
    neg_src = np.asarray(neg_src, dtype=np.float64)
    neg_tgt = np.asarray(neg_tgt, dtype=np.float64)
    if len(pos_src) == 0:
        raise DataError("MLP training needs at least one positive pair")
    if len(neg_src) == 0:
        raise DataError("MLP training needs at least one negative pair")
    if len(pos_src) != len(pos_tgt) or len(neg_src) != len(neg_tgt):
        raise DataError("pair sides must have equal row counts")

    x = np.concatenate([
        np.concatenate([pos_src, pos_tgt], axis=1),
        np.concatenate([neg_src, neg_tgt], axis=1),
    ])
    y = np.concatenate([np.ones(len(pos_src)), np.zeros(len(neg_src))])

    params = MlpParams.init(x.shape[1], hidden=cfg.hidden, seed=cfg.seed)
    opt = Adam(params.tensors, lr=cfg.lr)
    rng = np.random.default_rng(cfg.seed)
    order = rng.permutation(len(x))
    pos = 0
    for update in range(cfg.updates):
        if pos >= len(order):
            order = rng.permutation(len(x))
            pos = 0
        idx = order[pos : pos + cfg.batch_size]
        pos += cfg.batch_size
        loss, grads = mlp_loss_and_grads(params, x[idx], y[idx])
        if not np.isfinite(loss):
            raise NumericError(f"non-finite MLP loss at update {update}")
        opt.step(params.tensors, grads)
    return params
