import numpy as np
import pytest

from logoforge.autodiff import Tensor, adam_step, init_adam, lr_linear_decay


def test_first_step_is_signed_lr():
    p = {"w": Tensor(np.zeros(4))}
    g = {"w": Tensor(np.array([3.0, -2.0, 0.5, -9.0]))}
    state = init_adam(p, beta1=0.5, beta2=0.999)
    adam_step(p, g, state, lr=0.01)
    np.testing.assert_allclose(p["w"].data, -0.01 * np.sign(g["w"].data), rtol=1e-5)


def test_zero_gradients_leave_params_unchanged():
    p = {"w": Tensor(np.array([1.0, 2.0]))}
    state = init_adam(p)
    before = p["w"].data.copy()
    adam_step(p, {"w": Tensor(np.zeros(2))}, state, lr=0.1)
    np.testing.assert_array_equal(p["w"].data, before)


def test_three_steps_match_scalar_trace():
    # gradient of f(x) = x^2 at the current iterate, like the reference
    lr, b1, b2, eps = 0.05, 0.5, 0.999, 1e-8
    p = {"x": Tensor(np.array([2.0], dtype=np.float64), dtype=np.float64)}
    state = init_adam(p, beta1=b1, beta2=b2, eps=eps)

    xs = []
    for _ in range(3):
        g = {"x": Tensor(2.0 * p["x"].data, dtype=np.float64)}
        adam_step(p, g, state, lr=lr)
        xs.append(float(p["x"].data[0]))

    x, m, v = 2.0, 0.0, 0.0
    ref = []
    for t in range(1, 4):
        g = 2.0 * x
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        x = x - lr * (m / (1 - b1**t)) / (np.sqrt(v / (1 - b2**t)) + eps)
        ref.append(x)

    np.testing.assert_allclose(xs, ref, atol=1e-7)


def test_lr_zero_is_identity():
    p = {"w": Tensor(np.array([1.0, -1.0]))}
    state = init_adam(p)
    before = p["w"].data.copy()
    adam_step(p, {"w": Tensor(np.array([5.0, -3.0]))}, state, lr=0.0)
    np.testing.assert_array_equal(p["w"].data, before)


def test_shape_mismatch_rejected():
    p = {"w": Tensor(np.zeros(4))}
    state = init_adam(p)
    with pytest.raises(ValueError, match="shape"):
        adam_step(p, {"w": Tensor(np.zeros(3))}, state, lr=0.1)


def test_non_finite_gradient_rejected():
    p = {"w": Tensor(np.zeros(2))}
    state = init_adam(p)
    bad = Tensor(np.zeros(2))
    bad.data[0] = np.nan
    with pytest.raises(FloatingPointError):
        adam_step(p, {"w": bad}, state, lr=0.1)


class TestLrDecay:
    def test_initial_value(self):
        assert lr_linear_decay(0.0004, 0, 1000) == pytest.approx(0.0004)

    def test_endpoint_zero(self):
        assert lr_linear_decay(0.1, 500, 500) == 0.0

    def test_midpoint(self):
        assert lr_linear_decay(0.2, 250, 500) == pytest.approx(0.1)

    def test_iteration_past_total_rejected(self):
        with pytest.raises(ValueError):
            lr_linear_decay(0.1, 501, 500)

    def test_total_must_be_positive(self):
        with pytest.raises(ValueError):
            lr_linear_decay(0.1, 0, 0)
