"""Stratified rule-aware network over symbolic panel features.

Two forward paths share one parameter set:

* the per-call functions (`stratified_embed`, `gated_fuse`, `rule_embedding`,
  `dominant_and_candidates`) follow the model definition one row pair at a
  time and serve as the reference;
* `forward_batch` / `backward_batch` evaluate whole minibatches with exact
  backpropagation and are what training uses.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..model import FEATURE_DIM, encode_panels
from .nn import log_softmax, mlp_backward, mlp_forward, mlp_init, zeros_like

DROPOUT = 0.5
N_CAND = 8

# panel indices: 0..7 context row-major, 8..15 candidates
ROW_LINES = np.array([(0, 1, 2), (3, 4, 5)] + [(6, 7, 8 + k) for k in range(N_CAND)])
COL_LINES = np.array([(0, 3, 6), (1, 4, 7)] + [(2, 5, 8 + k) for k in range(N_CAND)])
# ordered line pairs: (1,2),(2,1) then per candidate (1,3k),(3k,1),(2,3k),(3k,2)
_PAIRS = [(0, 1), (1, 0)]
for _k in range(N_CAND):
    _PAIRS += [(0, 2 + _k), (2 + _k, 0), (1, 2 + _k), (2 + _k, 1)]
PAIR_I = np.array([p[0] for p in _PAIRS])
PAIR_J = np.array([p[1] for p in _PAIRS])
N_LINES = 2 + N_CAND
N_PAIRS = len(_PAIRS)


def _scatter_matrix(idx, n):
    m = np.zeros((n, len(idx)))
    m[idx, np.arange(len(idx))] = 1.0
    return m


_S_I = _scatter_matrix(PAIR_I, N_LINES)
_S_J = _scatter_matrix(PAIR_J, N_LINES)


@dataclass(frozen=True)
class HierarchyMask:
    cell: bool = True
    individual: bool = True
    ecological: bool = True

    def __post_init__(self):
        if not (self.cell or self.individual or self.ecological):
            raise ValueError("at least one hierarchy must stay active")

    @classmethod
    def parse(cls, text: str) -> "HierarchyMask":
        names = {t.strip() for t in text.split(",") if t.strip()}
        unknown = names - {"cell", "ind", "eco"}
        if unknown:
            raise ValueError(f"unknown hierarchies {sorted(unknown)}")
        return cls("cell" in names, "ind" in names, "eco" in names)

    def __str__(self):
        return ",".join(n for n, on in zip(("cell", "ind", "eco"), (self.cell, self.individual, self.ecological)) if on)


@dataclass
class SranParams:
    weights: dict
    d: int = 64
    mask: HierarchyMask = field(default_factory=HierarchyMask)
    orderless_cells: bool = False
    use_columns: bool = False
    embed_depth: int = 2

    @property
    def out_dim(self) -> int:
        return self.d * (2 if self.use_columns else 1)


def init_params(
    d: int = 64,
    mask: HierarchyMask | None = None,
    orderless_cells: bool = False,
    use_columns: bool = False,
    seed: int = 0,
    embed_depth: int = 2,
) -> SranParams:
    rng = np.random.default_rng(seed)
    F = FEATURE_DIM
    hidden = [d] * (embed_depth - 1)
    w = {}
    w.update(mlp_init(rng, [F] + hidden + [d], "cell"))
    w.update(mlp_init(rng, [3 * F] + hidden + [d], "ind"))
    w.update(mlp_init(rng, [6 * F] + hidden + [d], "eco"))
    w.update(mlp_init(rng, [3 * d, d, d], "phi1"))
    w.update(mlp_init(rng, [4 * d, d, d], "phi2"))
    w.update(mlp_init(rng, [2 * d, d, d, d, d], "phi3"))
    return SranParams(w, d, mask or HierarchyMask(), orderless_cells, use_columns, embed_depth)


def puzzle_features(puzzle) -> np.ndarray:
    """(16, F): eight context panels then eight candidates."""
    return encode_panels(tuple(puzzle.context) + tuple(puzzle.candidates), puzzle.cfg)


def draw_dropout(rng: np.random.Generator, d: int, shape=()) -> np.ndarray:
    keep = rng.random(shape + (d,)) >= DROPOUT
    return keep / (1.0 - DROPOUT)


# -- reference path ----------------------------------------------------------

TRAIN = "train"
EVAL = "eval"


def _dropout_for(p, mode, rng, dropout):
    if mode not in (TRAIN, EVAL):
        raise ValueError(f"mode must be {TRAIN!r} or {EVAL!r}")
    if mode == EVAL:
        return None
    if dropout is not None:
        return dropout
    if rng is None:
        raise ValueError("train mode needs an rng or an explicit dropout mask")
    return draw_dropout(rng, p.d)


def _check_row(M):
    M = np.asarray(M, dtype=float)
    if M.shape != (3, FEATURE_DIM):
        raise ValueError(f"a row must be (3, {FEATURE_DIM}) features, got {M.shape}")
    return M


def stratified_embed(Mi, Mj, p: SranParams, mode: str = EVAL, rng=None):
    """Cell, individual and ecological embeddings of the ordered row pair (Mi, Mj); rows are (3, F).

    Every hierarchy is computed; masking applies downstream in `gated_fuse`.
    """
    Mi, Mj = _check_row(Mi), _check_row(Mj)
    W = p.weights
    x_i = mlp_forward(W, "cell", Mi)[0]
    x_j = mlp_forward(W, "cell", Mj)[0]
    y_i = mlp_forward(W, "ind", Mi.ravel())[0]
    y_j = mlp_forward(W, "ind", Mj.ravel())[0]
    z_ij = mlp_forward(W, "eco", np.concatenate([Mi.ravel(), Mj.ravel()]))[0]
    return x_i, x_j, y_i, y_j, z_ij


def _cell_input(x, p):
    if p.orderless_cells:
        s = x.sum(axis=0)
        return np.concatenate([s, s, s])
    return np.ravel(x)


def gated_fuse(x_i, x_j, y_i, y_j, z_ij, p: SranParams, mode: str = EVAL, rng=None, dropout=None) -> np.ndarray:
    """Fuse the three hierarchies through the gates; masked hierarchies enter as zeros."""
    W = p.weights
    d = p.d
    shapes = [np.shape(x_i), np.shape(x_j), np.shape(y_i), np.shape(y_j), np.shape(z_ij)]
    if shapes != [(3, d), (3, d), (d,), (d,), (d,)]:
        raise ValueError(f"embedding shapes {shapes} do not match width {d}")
    dropout = _dropout_for(p, mode, rng, dropout)
    if not p.mask.cell:
        x_i, x_j = np.zeros_like(x_i), np.zeros_like(x_j)
    if not p.mask.individual:
        y_i, y_j = np.zeros_like(y_i), np.zeros_like(y_j)
    if not p.mask.ecological:
        z_ij = np.zeros_like(z_ij)
    r1_i = mlp_forward(W, "phi1", _cell_input(x_i, p))[0]
    r1_j = mlp_forward(W, "phi1", _cell_input(x_j, p))[0]
    r2 = mlp_forward(W, "phi2", np.concatenate([r1_i, y_i, r1_j, y_j]))[0]
    return mlp_forward(W, "phi3", np.concatenate([r2, z_ij]), dropout=dropout)[0]


def rule_embedding(Mi, Mj, p: SranParams, mode: str = EVAL, rng=None, dropout=None) -> np.ndarray:
    """Order-averaged rule embedding of two lines; symmetric in its arguments.

    In train mode one dropout mask serves both orderings.
    """
    dropout = _dropout_for(p, mode, rng, dropout)
    a = gated_fuse(*stratified_embed(Mi, Mj, p), p, mode, dropout=dropout)
    b = gated_fuse(*stratified_embed(Mj, Mi, p), p, mode, dropout=dropout)
    return 0.5 * (a + b)


def similarity(r, r2) -> float:
    r = np.asarray(r)
    r2 = np.asarray(r2)
    if r.shape != r2.shape:
        raise ValueError(f"dimension mismatch {r.shape} vs {r2.shape}")
    return float(r @ r2)


def _as_features(puzzle_or_features) -> np.ndarray:
    if hasattr(puzzle_or_features, "context"):
        return puzzle_features(puzzle_or_features)
    P = np.asarray(puzzle_or_features, dtype=float)
    if P.shape != (16, FEATURE_DIM):
        raise ValueError(f"expected (16, {FEATURE_DIM}) panel features, got {P.shape}")
    return P


def dominant_and_candidates(puzzle, p: SranParams, mode: str = EVAL, rng=None, dropout=None):
    """Dominant rule g and per-candidate rules r̄ (8, out_dim) for one puzzle.

    `puzzle` is a PuzzleRecord or its (16, F) features. One dropout mask is
    shared by every gate evaluation of the puzzle. With use_columns the row
    and column representations are concatenated.
    """
    panels = _as_features(puzzle)
    dropout = _dropout_for(p, mode, rng, dropout)
    branches = [ROW_LINES] + ([COL_LINES] if p.use_columns else [])
    gs, rbars = [], []
    for lines in branches:
        L = [panels[list(t)] for t in lines]
        gs.append(rule_embedding(L[0], L[1], p, mode, dropout=dropout))
        rb = []
        for k in range(N_CAND):
            third = L[2 + k]
            r13 = rule_embedding(L[0], third, p, mode, dropout=dropout)
            r23 = rule_embedding(L[1], third, p, mode, dropout=dropout)
            rb.append(0.5 * (r13 + r23))
        rbars.append(np.stack(rb))
    return np.concatenate(gs), np.concatenate(rbars, axis=1)


def tuplet_loss(g, rbar, target: int) -> float:
    """log(1 + sum_{k != target} exp(D(g, r̄_k) - D(g, r̄_target)))."""
    s = np.asarray(rbar) @ np.asarray(g)
    gaps = np.delete(s - s[target], target)
    m = gaps.max()
    if m <= 0.0:
        return float(np.log1p(np.exp(gaps).sum()))
    return float(m + np.log(np.exp(-m) + np.exp(gaps - m).sum()))


def tuplet_loss_grad(g, rbar, target: int) -> tuple:
    """Gradients of `tuplet_loss` w.r.t. g and each r̄_k."""
    g = np.asarray(g)
    rbar = np.asarray(rbar)
    p = np.exp(log_softmax(rbar @ g))
    p[target] -= 1.0
    return p @ rbar, p[:, None] * g[None, :]


def infer_from_scores(scores) -> int:
    """argmax with ties to the lowest index."""
    return int(np.argmax(scores))


def infer(puzzle, p: SranParams) -> int:
    g, rbar = dominant_and_candidates(puzzle, p)
    return infer_from_scores(rbar @ g)


# -- batched path ------------------------------------------------------------

def _first_layer(W, prefix, x, rows):
    """Pre-activation of a first layer restricted to the active input rows."""
    return x @ W[f"{prefix}.0.W"][rows] + W[f"{prefix}.0.b"]


def _active_rows(active, F, n):
    return np.concatenate([active + i * F for i in range(n)])


def _branch_forward(p, X, P, lines, dmask, active):
    W = p.weights
    d = p.d
    B = P.shape[0]
    F = FEATURE_DIM
    Lf = P[:, lines].reshape(B, N_LINES, -1)
    rows3 = _active_rows(active, F, 3)
    c = {"Lf": Lf, "rows3": rows3}
    if p.mask.individual:
        y, c["ind"] = mlp_forward(W, "ind", first_pre=_first_layer(W, "ind", Lf, rows3))
    else:
        y = np.zeros((B, N_LINES, d))
    if p.mask.cell:
        xl = X[:, lines]
        if p.orderless_cells:
            s = xl.sum(axis=2)
            inp1 = np.concatenate([s, s, s], axis=-1)
        else:
            inp1 = xl.reshape(B, N_LINES, 3 * d)
    else:
        inp1 = np.zeros((B, N_LINES, 3 * d))
    r1, c["phi1"] = mlp_forward(W, "phi1", inp1)
    if p.mask.ecological:
        Wa = W["eco.0.W"][rows3]
        Wb = W["eco.0.W"][rows3 + 3 * F]
        pre = (Lf @ Wa)[:, PAIR_I] + (Lf @ Wb)[:, PAIR_J] + W["eco.0.b"]
        z, c["eco"] = mlp_forward(W, "eco", first_pre=pre)
    else:
        z = np.zeros((B, N_PAIRS, d))
    inp2 = np.concatenate([r1[:, PAIR_I], y[:, PAIR_I], r1[:, PAIR_J], y[:, PAIR_J]], axis=-1)
    r2, c["phi2"] = mlp_forward(W, "phi2", inp2)
    r3, c["phi3"] = mlp_forward(W, "phi3", np.concatenate([r2, z], axis=-1), dropout=dmask)
    re = 0.5 * (r3[:, 0::2] + r3[:, 1::2])
    g = re[:, 0]
    rbar = 0.5 * (re[:, 1::2] + re[:, 2::2])
    return g, rbar, c


def _branch_backward(p, c, dg, drbar, grads, dX, lines):
    W = p.weights
    d = p.d
    F = FEATURE_DIM
    B = dg.shape[0]
    dre = np.zeros((B, N_PAIRS // 2, d))
    dre[:, 0] = dg
    dre[:, 1::2] += 0.5 * drbar
    dre[:, 2::2] += 0.5 * drbar
    dr3 = np.repeat(0.5 * dre, 2, axis=1)
    d3 = mlp_backward(W, "phi3", c["phi3"], dr3, grads)
    dr2, dz = d3[..., :d], d3[..., d:]
    d2 = mlp_backward(W, "phi2", c["phi2"], dr2, grads)
    dr1 = _S_I @ d2[..., :d] + _S_J @ d2[..., 2 * d : 3 * d]
    Lf = c["Lf"]
    rows3 = c["rows3"]
    Lflat = Lf.reshape(-1, Lf.shape[-1])
    if p.mask.individual:
        dy = _S_I @ d2[..., d : 2 * d] + _S_J @ d2[..., 3 * d :]
        dpre = mlp_backward(W, "ind", c["ind"], dy, grads)
        h = dpre.shape[-1]
        grads["ind.0.W"][rows3] += Lflat.T @ dpre.reshape(-1, h)
        grads["ind.0.b"] += dpre.reshape(-1, h).sum(axis=0)
    if p.mask.ecological:
        dpre = mlp_backward(W, "eco", c["eco"], dz, grads)
        dA = _S_I @ dpre
        dB = _S_J @ dpre
        h = dpre.shape[-1]
        grads["eco.0.W"][rows3] += Lflat.T @ dA.reshape(-1, h)
        grads["eco.0.W"][rows3 + 3 * F] += Lflat.T @ dB.reshape(-1, h)
        grads["eco.0.b"] += dpre.reshape(-1, h).sum(axis=0)
    dinp1 = mlp_backward(W, "phi1", c["phi1"], dr1, grads)
    if p.mask.cell:
        dxl = dinp1.reshape(B, N_LINES, 3, d)
        if p.orderless_cells:
            dxl = np.broadcast_to(dxl.sum(axis=2, keepdims=True), dxl.shape)
        np.add.at(dX, (slice(None), lines.ravel()), dxl.reshape(B, 3 * N_LINES, d))


def forward_batch(p: SranParams, P: np.ndarray, dropout=None):
    """Scores (B, 8) for a batch of (16, F) feature stacks.

    `dropout` is a (B, d) pre-scaled mask shared by every gate evaluation of a
    puzzle, or None for evaluation.
    """
    P = np.asarray(P, dtype=float)
    active = np.flatnonzero(P.any(axis=(0, 1)))
    Pa = P[..., active]
    W = p.weights
    dmask = None if dropout is None else dropout[:, None, :]
    cache = {"active": active, "Pa": Pa}
    if p.mask.cell:
        X, cache["cell"] = mlp_forward(W, "cell", first_pre=_first_layer(W, "cell", Pa, active))
    else:
        X = None
    cache["branches"] = []
    gs, rbars = [], []
    for lines in [ROW_LINES] + ([COL_LINES] if p.use_columns else []):
        g, rbar, c = _branch_forward(p, X, Pa, lines, dmask, active)
        gs.append(g)
        rbars.append(rbar)
        cache["branches"].append((lines, c))
    g = np.concatenate(gs, axis=-1)
    rbar = np.concatenate(rbars, axis=-1)
    cache["g"] = g
    cache["rbar"] = rbar
    scores = np.einsum("bd,bkd->bk", g, rbar)
    return scores, cache


def backward_batch(p: SranParams, cache, dscores) -> dict:
    grads = zeros_like(p.weights)
    g, rbar = cache["g"], cache["rbar"]
    dg = np.einsum("bk,bkd->bd", dscores, rbar)
    drbar = dscores[..., None] * g[:, None, :]
    Pa = cache["Pa"]
    B = Pa.shape[0]
    dX = np.zeros((B, 16, p.d))
    d = p.d
    for bi, (lines, c) in enumerate(cache["branches"]):
        sl = slice(bi * d, (bi + 1) * d)
        _branch_backward(p, c, dg[:, sl], drbar[..., sl], grads, dX, lines)
    if p.mask.cell:
        dpre = mlp_backward(p.weights, "cell", cache["cell"], dX, grads)
        h = dpre.shape[-1]
        grads["cell.0.W"][cache["active"]] += Pa.reshape(-1, Pa.shape[-1]).T @ dpre.reshape(-1, h)
        grads["cell.0.b"] += dpre.reshape(-1, h).sum(axis=0)
    return grads


def batch_loss(scores, targets) -> tuple:
    """Mean tuplet loss over a batch and its gradient w.r.t. the scores."""
    lp = log_softmax(scores)
    n = len(targets)
    loss = -lp[np.arange(n), targets].mean()
    dscores = np.exp(lp)
    dscores[np.arange(n), targets] -= 1.0
    return float(loss), dscores / n


def loss_and_gradient(p: SranParams, P, targets, dropout=None):
    scores, cache = forward_batch(p, P, dropout)
    loss, dscores = batch_loss(scores, np.asarray(targets))
    return loss, backward_batch(p, cache, dscores)


def loss_gradient(puzzle, p: SranParams, dropout=None) -> dict:
    """Exact gradient of the tuplet loss of one puzzle w.r.t. every weight.

    `dropout` is a fixed (d,) mask or None for evaluation mode.
    """
    P = _as_features(puzzle)[None]
    dm = None if dropout is None else np.asarray(dropout)[None]
    return loss_and_gradient(p, P, [puzzle.target], dm)[1]
