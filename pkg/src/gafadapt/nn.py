"""Minimal dense MLP with manual backprop and Adam.

Used for both the softmax actor (vector of logits) and the scalar critic;
the output layer is always linear, ReLU on hidden layers.  Single-sample
forward/backward only, which is all the per-step TD(0) updates need.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class Mlp:
    """Feedforward net: weights[l] is (out, in), biases[l] is (out,)."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]

    @property
    def layer_dims(self) -> list[int]:
        return [self.weights[0].shape[1]] + [w.shape[0] for w in self.weights]

    def parameters(self) -> list[np.ndarray]:
        return list(self.weights) + list(self.biases)

    def copy(self) -> "Mlp":
        return Mlp(
            weights=[w.copy() for w in self.weights],
            biases=[b.copy() for b in self.biases],
        )


def init_mlp(layer_dims: list[int], rng: np.random.Generator) -> Mlp:
    """He-uniform weights (suits the ReLU hidden layers), zero biases."""
    weights, biases = [], []
    for fan_in, fan_out in zip(layer_dims[:-1], layer_dims[1:]):
        limit = np.sqrt(6.0 / fan_in)
        weights.append(rng.uniform(-limit, limit, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return Mlp(weights=weights, biases=biases)


def forward(net: Mlp, x: np.ndarray):
    """Returns (output, cache); cache holds per-layer (input, pre-activation)."""
    a = np.asarray(x, dtype=float)
    cache = []
    last = len(net.weights) - 1
    for l, (w, b) in enumerate(zip(net.weights, net.biases)):
        z = w @ a + b
        cache.append((a, z))
        a = z if l == last else np.maximum(z, 0.0)
    return a, cache


def backward(net: Mlp, cache, grad_out: np.ndarray):
    """Gradients of (output . grad_out) w.r.t. weights, biases and the input."""
    grads_w = [None] * len(net.weights)
    grads_b = [None] * len(net.weights)
    g = np.asarray(grad_out, dtype=float)
    last = len(net.weights) - 1
    for l in range(last, -1, -1):
        a_in, z = cache[l]
        delta = g if l == last else g * (z > 0.0)
        grads_w[l] = np.outer(delta, a_in)
        grads_b[l] = delta
        g = net.weights[l].T @ delta
    return grads_w, grads_b, g


def softmax(logits: np.ndarray) -> np.ndarray:
    z = np.asarray(logits, dtype=float)
    e = np.exp(z - np.max(z))
    return e / e.sum()


def entropy(p: np.ndarray) -> float:
    """Shannon entropy -sum p ln p with the 0 ln 0 := 0 convention."""
    p = np.asarray(p, dtype=float)
    nz = p[p > 0.0]
    return float(-np.sum(nz * np.log(nz)))


@dataclass
class AdamState:
    """Adam accumulators for a fixed list of parameter arrays."""

    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)

    @classmethod
    def for_params(cls, params: list[np.ndarray], lr: float, **kw) -> "AdamState":
        return cls(
            lr=lr,
            m=[np.zeros_like(p) for p in params],
            v=[np.zeros_like(p) for p in params],
            **kw,
        )


def adam_step(params: list[np.ndarray], grads: list[np.ndarray], state: AdamState):
    """One bias-corrected Adam update, applied to params in place."""
    state.t += 1
    correction1 = 1.0 - state.beta1**state.t
    correction2 = 1.0 - state.beta2**state.t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * np.square(g)
        p -= state.lr * (m / correction1) / (np.sqrt(v / correction2) + state.eps)
    return params, state


def polyak_update(target: list[np.ndarray], online: list[np.ndarray], tau: float):
    """Soft update target <- tau * online + (1 - tau) * target, in place."""
    for t, o in zip(target, online):
        t *= 1.0 - tau
        t += tau * o
    return target
