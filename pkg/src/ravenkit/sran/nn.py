"""Minimal numpy MLPs with hand-written backpropagation, plus Adam."""
from __future__ import annotations

import numpy as np


def mlp_init(rng: np.random.Generator, sizes, prefix: str) -> dict:
    """He-initialised weights for a ReLU MLP with layer widths `sizes`."""
    params = {}
    for i, (n_in, n_out) in enumerate(zip(sizes[:-1], sizes[1:])):
        params[f"{prefix}.{i}.W"] = rng.normal(0.0, np.sqrt(2.0 / n_in), size=(n_in, n_out))
        params[f"{prefix}.{i}.b"] = np.zeros(n_out)
    return params


def n_layers(params: dict, prefix: str) -> int:
    n = 0
    while f"{prefix}.{n}.W" in params:
        n += 1
    return n


def mlp_forward(params, prefix, x=None, first_pre=None, dropout=None):
    """Run an MLP over the last axis of `x`.

    ReLU on hidden layers, linear output. `first_pre` replaces the first
    affine map's output (callers that factor that product themselves).
    `dropout` is a pre-scaled mask multiplied into the last hidden activation.
    Returns (output, cache).
    """
    depth = n_layers(params, prefix)
    cache = []
    h = x
    for i in range(depth):
        if i == 0 and first_pre is not None:
            pre = first_pre
            inp = None
        else:
            pre = h @ params[f"{prefix}.{i}.W"] + params[f"{prefix}.{i}.b"]
            inp = h
        if i == depth - 1:
            cache.append((inp, pre, None))
            return pre, cache
        act = np.maximum(pre, 0.0)
        mask = dropout if (dropout is not None and i == depth - 2) else None
        if mask is not None:
            act = act * mask
        cache.append((inp, pre, mask))
        h = act
    raise ValueError(f"no layers under prefix {prefix!r}")


def _flat(a):
    return a.reshape(-1, a.shape[-1])


def mlp_backward(params, prefix, cache, dout, grads: dict):
    """Accumulate parameter gradients into `grads`; return d(input) or d(first_pre)."""
    depth = len(cache)
    d = dout
    for i in reversed(range(depth)):
        inp, pre, mask = cache[i]
        if i < depth - 1:
            if mask is not None:
                d = d * mask
            d = d * (pre > 0)
        if inp is None:
            return d
        W = params[f"{prefix}.{i}.W"]
        grads[f"{prefix}.{i}.W"] += _flat(inp).T @ _flat(d)
        grads[f"{prefix}.{i}.b"] += _flat(d).sum(axis=0)
        d = d @ W.T
    return d


def zeros_like(params: dict) -> dict:
    return {k: np.zeros_like(v) for k, v in params.items()}


class Adam:
    """Adam with bias correction; updates the parameter arrays in place."""

    def __init__(self, params: dict, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m = zeros_like(params)
        self.v = zeros_like(params)
        self.t = 0

    def step(self, grads: dict) -> None:
        self.t += 1
        c1 = 1.0 - self.beta1**self.t
        c2 = 1.0 - self.beta2**self.t
        for k, p in self.params.items():
            g = grads[k]
            m = self.m[k]
            v = self.v[k]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def log_softmax(scores: np.ndarray) -> np.ndarray:
    shifted = scores - scores.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
