import math

import numpy as np
import pytest

from bisent.nn import (
    GruCellParams,
    gru_backward,
    gru_forward,
    gru_step,
    linear_backward,
    linear_forward,
    maxpool_time,
    softmax_xent,
    softmax_xent_rows,
)


def _zero_cell(input_dim, hidden_dim):
    return GruCellParams(
        w_x=np.zeros((input_dim, 3 * hidden_dim)),
        w_h=np.zeros((hidden_dim, 3 * hidden_dim)),
        b=np.zeros(3 * hidden_dim),
    )


def test_gru_zero_params_zero_state_fixed_point():
    cell = _zero_cell(3, 4)
    x = np.array([1.0, -2.0, 0.5])
    h = gru_step(cell, x, np.zeros(4))
    np.testing.assert_array_equal(h, np.zeros(4))


def test_gru_output_bounded_from_zero_state():
    rng = np.random.default_rng(0)
    cell = GruCellParams.init(rng, 5, 6)
    for scale in (1.0, 10.0):
        x = rng.normal(size=5) * scale
        h = gru_step(cell, x, np.zeros(6))
        assert np.all(np.abs(h) < 1.0)
    # At extreme magnitudes tanh/sigmoid saturate to +-1.0 in f64; the bound
    # closes but the step must stay finite.
    h = gru_step(cell, rng.normal(size=5) * 1e6, np.zeros(6))
    assert np.all(np.isfinite(h))
    assert np.all(np.abs(h) <= 1.0)


def test_gru_shape_mismatch_raises():
    cell = _zero_cell(3, 4)
    with pytest.raises(ValueError):
        gru_step(cell, np.zeros(2), np.zeros(4))
    with pytest.raises(ValueError):
        gru_step(cell, np.zeros(3), np.zeros(5))


def test_gru_gradients_match_finite_differences():
    # Finite-difference oracle over a scalar loss sum(h)^2/2 of one GRU step.
    rng = np.random.default_rng(7)
    input_dim, hidden_dim = 4, 3
    cell = GruCellParams.init(rng, input_dim, hidden_dim)
    x0 = rng.normal(size=(2, input_dim))
    h0 = rng.normal(size=(2, hidden_dim)) * 0.5

    def loss_and_grads(x, h_prev, c):
        h, cache = gru_forward(c, x, h_prev)
        loss = 0.5 * float((h * h).sum())
        dx, dh_prev, grads = gru_backward(c, cache, h.copy())
        return loss, dx, dh_prev, grads

    loss, dx, dh_prev, grads = loss_and_grads(x0, h0, cell)
    eps = 1e-6

    def numeric(get, setv):
        orig = get()
        setv(orig + eps)
        lp = loss_and_grads(x0, h0, cell)[0]
        setv(orig - eps)
        lm = loss_and_grads(x0, h0, cell)[0]
        setv(orig)
        return (lp - lm) / (2 * eps)

    worst = 0.0
    for arr, analytic in [(x0, dx), (h0, dh_prev), (cell.w_x, grads["w_x"]),
                          (cell.w_h, grads["w_h"]), (cell.b, grads["b"])]:
        flat, gflat = arr.reshape(-1), analytic.reshape(-1)
        for i in range(flat.size):
            num = numeric(lambda: flat[i], lambda v: flat.__setitem__(i, v))
            denom = max(abs(num), abs(gflat[i]), 1e-8)
            worst = max(worst, abs(num - gflat[i]) / denom)
    assert worst < 1e-4


def test_maxpool_examples():
    np.testing.assert_array_equal(maxpool_time([[1, 4], [3, 2]]), [3, 4])
    v = np.array([0.5, -1.0, 2.0])
    np.testing.assert_array_equal(maxpool_time([v]), v)


def test_maxpool_permutation_invariant():
    rng = np.random.default_rng(3)
    states = rng.normal(size=(6, 4))
    base = maxpool_time(states)
    for seed in range(5):
        perm = np.random.default_rng(seed).permutation(6)
        np.testing.assert_array_equal(maxpool_time(states[perm]), base)


def test_maxpool_empty_raises():
    with pytest.raises(ValueError):
        maxpool_time(np.zeros((0, 3)))


def test_softmax_xent_uniform_logits():
    for vocab in (2, 5, 31):
        loss, _ = softmax_xent(np.zeros(vocab), 0)
        assert loss == pytest.approx(math.log(vocab), rel=1e-12)


def test_softmax_xent_two_class_example():
    # Direct arithmetic: softmax([0,0]) = [0.5, 0.5].
    loss, grad = softmax_xent(np.array([0.0, 0.0]), 0)
    assert loss == pytest.approx(math.log(2.0), rel=1e-12)
    np.testing.assert_allclose(grad, [-0.5, 0.5], atol=1e-12)


def test_softmax_xent_grad_sums_to_zero_and_loss_nonnegative():
    rng = np.random.default_rng(11)
    for _ in range(20):
        logits = rng.normal(size=9) * rng.uniform(0.1, 50)
        target = int(rng.integers(9))
        loss, grad = softmax_xent(logits, target)
        assert loss >= 0.0
        assert abs(grad.sum()) < 1e-12


def test_softmax_xent_target_out_of_range():
    with pytest.raises(IndexError):
        softmax_xent(np.zeros(3), 3)


def test_softmax_xent_rows_matches_single():
    rng = np.random.default_rng(5)
    logits = rng.normal(size=(4, 7)) * 3
    targets = rng.integers(0, 7, size=4)
    losses, dlogits = softmax_xent_rows(logits, targets)
    for i in range(4):
        loss_i, grad_i = softmax_xent(logits[i], int(targets[i]))
        assert losses[i] == pytest.approx(loss_i, rel=1e-12)
        np.testing.assert_allclose(dlogits[i], grad_i, atol=1e-12)


def test_linear_backward_matches_finite_differences():
    rng = np.random.default_rng(9)
    x = rng.normal(size=(3, 4))
    w = rng.normal(size=(4, 5))
    b = rng.normal(size=5)

    def loss():
        y = linear_forward(x, w, b)
        return 0.5 * float((y * y).sum())

    y = linear_forward(x, w, b)
    dx, dw, db = linear_backward(x, w, y.copy())
    eps = 1e-6
    for arr, analytic in [(x, dx), (w, dw), (b, db)]:
        flat, gflat = arr.reshape(-1), analytic.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            lp = loss()
            flat[i] = orig - eps
            lm = loss()
            flat[i] = orig
            assert (lp - lm) / (2 * eps) == pytest.approx(gflat[i], rel=1e-6, abs=1e-8)
