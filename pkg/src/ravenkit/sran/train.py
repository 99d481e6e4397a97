"""Minibatch Adam training, evaluation and JSON checkpoints for the network."""
from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .network import (
    HierarchyMask,
    SranParams,
    batch_loss,
    backward_batch,
    draw_dropout,
    forward_batch,
    puzzle_features,
)
from .nn import Adam

CHECKPOINT_FORMAT = "ravenkit-sran"
CHECKPOINT_VERSION = 1


@dataclass
class TrainConfig:
    epochs: int = 10
    lr: float = 1e-3
    batch_size: int = 32
    seed: int = 0
    time_budget: float | None = None  # seconds; stops after the epoch that crosses it


@dataclass
class TrainTrace:
    epoch_loss: list = field(default_factory=list)
    val_accuracy: list = field(default_factory=list)
    seconds: float = 0.0


def encode_puzzles(puzzles) -> tuple:
    """(N, 16, F) uint8 features and (N,) targets."""
    if not puzzles:
        raise ValueError("no puzzles to encode")
    feats = np.stack([puzzle_features(p) for p in puzzles]).astype(np.uint8)
    targets = np.array([p.target for p in puzzles], dtype=int)
    return feats, targets


def predict(params: SranParams, feats, batch_size: int = 256) -> np.ndarray:
    out = []
    for start in range(0, len(feats), batch_size):
        scores, _ = forward_batch(params, feats[start : start + batch_size])
        out.append(np.argmax(scores, axis=1))
    return np.concatenate(out) if out else np.zeros(0, dtype=int)


def accuracy(params: SranParams, feats, targets) -> float:
    return float(np.mean(predict(params, feats) == targets))


def train(params: SranParams, train_data, cfg: TrainConfig, val_data=None, log=None) -> TrainTrace:
    """Train `params` in place.

    `train_data`/`val_data` are (features, targets) from `encode_puzzles`.
    Shuffling and dropout draw from one generator seeded by `cfg.seed`.
    """
    feats, targets = train_data
    if len(feats) == 0:
        raise ValueError("cannot train on an empty dataset")
    rng = np.random.default_rng(cfg.seed)
    opt = Adam(params.weights, lr=cfg.lr)
    trace = TrainTrace()
    t0 = time.process_time()
    for epoch in range(cfg.epochs):
        order = rng.permutation(len(feats))
        total = 0.0
        for start in range(0, len(order), cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            dm = draw_dropout(rng, params.d, (len(idx),))
            scores, cache = forward_batch(params, feats[idx], dm)
            loss, dscores = batch_loss(scores, targets[idx])
            opt.step(backward_batch(params, cache, dscores))
            total += loss * len(idx)
        trace.epoch_loss.append(total / len(feats))
        if val_data is not None:
            trace.val_accuracy.append(accuracy(params, *val_data))
        trace.seconds = time.process_time() - t0
        if log is not None:
            val = f" val {trace.val_accuracy[-1]:.4f}" if val_data is not None else ""
            log(f"epoch {epoch + 1}/{cfg.epochs} loss {trace.epoch_loss[-1]:.4f}{val} ({trace.seconds:.0f}s)")
        if cfg.time_budget is not None and trace.seconds >= cfg.time_budget:
            break
    return trace


# -- checkpoints -------------------------------------------------------------

def params_to_json(params: SranParams, extra: dict | None = None) -> dict:
    return {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "d": params.d,
        "mask": str(params.mask),
        "orderless_cells": params.orderless_cells,
        "use_columns": params.use_columns,
        "embed_depth": params.embed_depth,
        "extra": extra or {},
        "weights": {
            k: {"shape": list(v.shape), "data": v.ravel().tolist()} for k, v in sorted(params.weights.items())
        },
    }


def params_from_json(obj: dict) -> SranParams:
    if obj.get("format") != CHECKPOINT_FORMAT:
        raise ValueError("not a network checkpoint")
    if obj.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"checkpoint version {obj.get('version')!r} not supported")
    weights = {k: np.array(v["data"], dtype=float).reshape(v["shape"]) for k, v in obj["weights"].items()}
    return SranParams(
        weights,
        int(obj["d"]),
        HierarchyMask.parse(obj["mask"]),
        bool(obj["orderless_cells"]),
        bool(obj["use_columns"]),
        int(obj["embed_depth"]),
    )


def save_checkpoint(params: SranParams, path, extra: dict | None = None) -> None:
    Path(path).write_text(json.dumps(params_to_json(params, extra), sort_keys=True) + "\n")


def load_checkpoint(path) -> SranParams:
    return params_from_json(json.loads(Path(path).read_text()))


def config_dict(cfg: TrainConfig) -> dict:
    return asdict(cfg)
