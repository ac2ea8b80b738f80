import math

import numpy as np
import pytest

from gafadapt.nn import (
    AdamState,
    Mlp,
    adam_step,
    backward,
    entropy,
    forward,
    init_mlp,
    polyak_update,
    softmax,
)
from gafadapt.rng import substream
from helpers import finite_diff_gradients


def _zero_net(dims):
    return Mlp(
        weights=[np.zeros((o, i)) for i, o in zip(dims[:-1], dims[1:])],
        biases=[np.zeros(o) for o in dims[1:]],
    )


class TestForward:
    def test_zero_network(self):
        net = _zero_net([3, 4, 2])
        out, _ = forward(net, np.array([1.0, -2.0, 0.5]))
        np.testing.assert_array_equal(out, np.zeros(2))

    def test_single_affine_layer(self):
        w = np.array([[1.0, 2.0], [3.0, 4.0]])
        b = np.array([0.5, -0.5])
        net = Mlp(weights=[w], biases=[b])
        x = np.array([1.0, 1.0])
        out, _ = forward(net, x)
        np.testing.assert_allclose(out, w @ x + b)

    def test_relu_kills_negative_preactivation(self):
        # hidden unit w=1, b=-1 on input 0.5 -> pre-activation -0.5 -> 0
        net = Mlp(
            weights=[np.array([[1.0]]), np.array([[7.0]])],
            biases=[np.array([-1.0]), np.array([0.25])],
        )
        out, _ = forward(net, np.array([0.5]))
        np.testing.assert_allclose(out, [0.25])

    def test_deterministic(self):
        net = init_mlp([4, 8, 3], substream(0, 1))
        x = np.arange(4.0)
        a, _ = forward(net, x)
        b, _ = forward(net, x)
        np.testing.assert_array_equal(a, b)


class TestBackward:
    def test_zero_grad_out(self):
        net = init_mlp([3, 5, 2], substream(0, 2))
        out, cache = forward(net, np.array([0.3, -0.2, 1.0]))
        gw, gb, gx = backward(net, cache, np.zeros(2))
        assert all(np.all(g == 0) for g in gw + gb)
        np.testing.assert_array_equal(gx, np.zeros(3))

    def test_affine_weight_gradient_is_input(self):
        net = Mlp(weights=[np.array([[2.0, -1.0]])], biases=[np.zeros(1)])
        x = np.array([0.7, 1.3])
        _, cache = forward(net, x)
        gw, gb, _ = backward(net, cache, np.ones(1))
        np.testing.assert_allclose(gw[0], x[None, :])
        np.testing.assert_allclose(gb[0], [1.0])

    def test_matches_finite_differences(self):
        # acceptance-grade gradient check on 20 random configurations
        rng = np.random.default_rng(2024)
        checked = 0
        attempts = 0
        while checked < 20 and attempts < 200:
            attempts += 1
            dims = [int(rng.integers(2, 5)), int(rng.integers(3, 9)),
                    int(rng.integers(3, 9)), int(rng.integers(1, 4))]
            net = init_mlp(dims, substream(7, attempts))
            x = rng.standard_normal(dims[0])
            _, cache = forward(net, x)
            # keep away from ReLU kinks so central differences are valid
            if min(float(np.min(np.abs(z))) for _, z in cache[:-1]) < 1e-3:
                continue
            grad_out = rng.standard_normal(dims[-1])
            gw, gb, _ = backward(net, cache, grad_out)
            analytic = gw + gb
            numeric = finite_diff_gradients(net, x, grad_out)
            for a, n in zip(analytic, numeric):
                denom = np.maximum(np.abs(n), 1e-8)
                assert np.max(np.abs(a - n) / denom) < 1e-5
            checked += 1
        assert checked == 20


class TestSoftmax:
    def test_uniform(self):
        np.testing.assert_allclose(softmax(np.zeros(3)), np.full(3, 1 / 3), atol=1e-15)

    def test_log_two(self):
        got = softmax(np.array([math.log(2.0), 0.0]))
        np.testing.assert_allclose(got, [2 / 3, 1 / 3], atol=1e-12)

    def test_no_overflow(self):
        got = softmax(np.array([1000.0, 0.0]))
        assert np.all(np.isfinite(got))
        assert got[0] == pytest.approx(1.0, abs=1e-12)

    def test_sums_to_one_and_shift_invariant(self):
        rng = np.random.default_rng(5)
        for _ in range(50):
            z = rng.standard_normal(6) * 10
            p = softmax(z)
            assert abs(p.sum() - 1.0) < 1e-12
            np.testing.assert_allclose(p, softmax(z + 123.456), atol=1e-12)


class TestEntropy:
    def test_uniform_four(self):
        assert entropy(np.full(4, 0.25)) == pytest.approx(math.log(4.0), abs=1e-12)

    def test_one_hot(self):
        assert entropy(np.array([0.0, 1.0, 0.0])) == 0.0

    def test_fair_coin(self):
        assert entropy(np.array([0.5, 0.5])) == pytest.approx(math.log(2.0), abs=1e-12)


class TestAdam:
    def test_zero_gradient_is_noop(self):
        params = [np.array([1.0, -2.0]), np.array([[3.0]])]
        before = [p.copy() for p in params]
        state = AdamState.for_params(params, lr=0.1)
        adam_step(params, [np.zeros_like(p) for p in params], state)
        assert state.t == 1
        for p, b in zip(params, before):
            np.testing.assert_array_equal(p, b)

    def test_first_step_closed_form(self):
        # m_hat = g, v_hat = g^2 -> delta ~= -lr for g = 1
        params = [np.array([0.0])]
        state = AdamState.for_params(params, lr=1e-3)
        adam_step(params, [np.array([1.0])], state)
        assert params[0][0] == pytest.approx(-1e-3, rel=1e-6)

    def test_repeated_steps_monotone(self):
        params = [np.array([0.0])]
        state = AdamState.for_params(params, lr=1e-2)
        prev = 0.0
        for _ in range(5):
            adam_step(params, [np.array([2.5])], state)
            assert params[0][0] < prev
            prev = params[0][0]


class TestPolyak:
    def test_tau_one_copies(self):
        target = [np.zeros(3)]
        online = [np.array([1.0, 2.0, 3.0])]
        polyak_update(target, online, 1.0)
        np.testing.assert_array_equal(target[0], online[0])

    def test_small_tau_step(self):
        target = [np.array([0.0])]
        polyak_update(target, [np.array([1.0])], 0.01)
        assert target[0][0] == pytest.approx(0.01, abs=1e-15)

    def test_geometric_convergence(self):
        target = [np.array([0.0])]
        online = [np.array([1.0])]
        for _ in range(600):
            polyak_update(target, online, 0.05)
        assert abs(target[0][0] - 1.0) < 1e-12
