"""Optimizer behavior against a hand-rolled single-step reference."""

import numpy as np
import pytest

from wsvad.autograd import ShapeError, Tensor
from wsvad.optim import Adam


def hand_adam_step(p, g, lr, b1, b2, eps, wd, m, v, t):
    """Independent single-step reference, float64 throughout."""
    g = g + wd * p
    m = b1 * m + (1 - b1) * g
    v = b2 * v + (1 - b2) * g * g
    mhat = m / (1 - b1**t)
    vhat = v / (1 - b2**t)
    return p - lr * mhat / (np.sqrt(vhat) + eps), m, v


def test_zero_grad_zero_decay_is_fixed_point():
    p = Tensor([1.0, -2.0], requires_grad=True)
    opt = Adam({"p": p}, lr=0.1, weight_decay=0.0)
    p.grad = np.zeros(2, dtype=np.float32)
    before = p.data.copy()
    opt.step()
    assert np.array_equal(p.data, before)


def test_single_step_matches_hand_reference():
    p = Tensor([1.0], requires_grad=True)
    opt = Adam({"p": p}, lr=0.001)
    p.grad = np.array([1.0], dtype=np.float32)
    opt.step()
    expected, _, _ = hand_adam_step(
        np.array([1.0]), np.array([1.0]), 0.001, 0.9, 0.999, 1e-8, 0.0,
        np.zeros(1), np.zeros(1), 1,
    )
    # first step moves by ~lr/(1+eps); storage is float32
    assert abs(float(p.data[0]) - float(expected[0])) < 5e-7
    assert abs(float(expected[0]) - (1.0 - 0.001)) < 1e-8


def test_two_steps_match_hand_reference_with_decay():
    rng = np.random.default_rng(0)
    init = rng.normal(size=5).astype(np.float32)
    p = Tensor(init, requires_grad=True)
    opt = Adam({"p": p}, lr=0.01, weight_decay=0.005)
    ref_p = init.astype(np.float64)
    m = np.zeros(5)
    v = np.zeros(5)
    for t in (1, 2):
        g = rng.normal(size=5).astype(np.float32)
        p.grad = g
        opt.step()
        ref_p, m, v = hand_adam_step(ref_p, g.astype(np.float64), 0.01, 0.9, 0.999, 1e-8, 0.005, m, v, t)
    np.testing.assert_allclose(p.data, ref_p, rtol=1e-5, atol=1e-7)


def test_constant_positive_gradient_decreases_monotonically():
    p = Tensor([1.0], requires_grad=True)
    opt = Adam({"p": p}, lr=0.001)
    values = [float(p.data[0])]
    for _ in range(2):
        p.grad = np.array([1.0], dtype=np.float32)
        opt.step()
        values.append(float(p.data[0]))
    assert values[0] > values[1] > values[2]


def test_step_counter_increments():
    p = Tensor([1.0], requires_grad=True)
    opt = Adam({"p": p})
    for expected in (1, 2, 3):
        p.grad = np.array([0.5], dtype=np.float32)
        opt.step()
        assert opt.step_count == expected


def test_shape_drift_rejected():
    p = Tensor([1.0, 2.0], requires_grad=True)
    opt = Adam({"p": p})
    p.grad = np.zeros(3, dtype=np.float32)
    with pytest.raises(ShapeError):
        opt.step()


def test_params_without_grad_are_skipped():
    p = Tensor([1.0], requires_grad=True)
    q = Tensor([2.0], requires_grad=True)
    opt = Adam({"p": p, "q": q}, lr=0.1, weight_decay=0.01)
    p.grad = np.array([1.0], dtype=np.float32)
    opt.step()
    assert float(q.data[0]) == 2.0
