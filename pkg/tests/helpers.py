"""Shared test utilities for the network tests."""
from __future__ import annotations

import numpy as np

from ravenkit.sran.network import dominant_and_candidates, init_params, loss_and_gradient, puzzle_features, tuplet_loss

D = 8


def random_params(seed=0, d=D, **kw):
    """Small network with jittered biases so no ReLU sits exactly on its kink."""
    p = init_params(d=d, seed=seed, **kw)
    rng = np.random.default_rng(seed + 1000)
    for k, v in p.weights.items():
        if k.endswith(".b"):
            v += rng.normal(0, 0.1, v.shape)
    return p


def fd_report(p, puzzles, dropout=None, seed=0, h=1e-6) -> dict:
    """Analytic vs central-difference directional derivatives, one random unit direction per tensor.

    A derivative is resolvable when it exceeds 1e4 times the round-off floor
    eps*|loss|/h; `worst_rel` covers those, `worst_unresolved` is the largest
    absolute gap, in units of the floor, among the rest.
    """
    P = np.stack([puzzle_features(q) for q in puzzles])
    base, grads = loss_and_gradient(p, P, [q.target for q in puzzles], dropout)

    def loss():
        tot = 0.0
        for i, q in enumerate(puzzles):
            mode = "eval" if dropout is None else "train"
            dm = None if dropout is None else dropout[i]
            tot += tuplet_loss(*dominant_and_candidates(q, p, mode, dropout=dm), q.target)
        return tot / len(puzzles)

    floor = np.finfo(float).eps * max(abs(base), 1.0) / h
    rng = np.random.default_rng(seed)
    out = {"worst_rel": 0.0, "worst_unresolved": 0.0, "resolved": 0, "unresolved": 0}
    for name, W in p.weights.items():
        v = rng.normal(size=W.shape)
        v /= np.linalg.norm(v)
        analytic = float((grads[name] * v).sum())
        old = W.copy()
        W += h * v
        up = loss()
        W[...] = old - h * v
        down = loss()
        W[...] = old
        numeric = (up - down) / (2 * h)
        scale = max(abs(analytic), abs(numeric))
        if scale >= 1e4 * floor:
            out["resolved"] += 1
            out["worst_rel"] = max(out["worst_rel"], abs(analytic - numeric) / scale)
        else:
            out["unresolved"] += 1
            out["worst_unresolved"] = max(out["worst_unresolved"], abs(analytic - numeric) / floor)
    return out


def fd_relative_error(p, puzzles, dropout=None, seed=0, h=1e-6):
    """Worst relative error over resolvable directional derivatives; unresolvable ones must sit within 10 floors."""
    rep = fd_report(p, puzzles, dropout, seed, h)
    assert rep["worst_unresolved"] <= 10.0, rep
    return rep["worst_rel"]
