"""Answer-set fairness checks: mode back-door, answer graphs, balance, context-blind probe."""
from __future__ import annotations

import random
from collections import Counter
from dataclasses import dataclass

import networkx as nx
import numpy as np

from .abt import AnswerSet
from .model import FEATURE_DIM, RULE_ELIGIBLE, AttributeAddress, attribute_value, encode_panels, panel_diff
from .oracle import solve
from .sran.nn import Adam, log_softmax, mlp_backward, mlp_forward, mlp_init, zeros_like

_CUBE = nx.hypercube_graph(3)


@dataclass(frozen=True)
class AnswerGraph:
    n_nodes: int
    edges: tuple

    @property
    def degrees(self) -> tuple:
        deg = [0] * self.n_nodes
        for u, v in self.edges:
            deg[u] += 1
            deg[v] += 1
        return tuple(deg)

    def to_networkx(self) -> nx.Graph:
        g = nx.Graph()
        g.add_nodes_from(range(self.n_nodes))
        g.add_edges_from(self.edges)
        return g

    def is_cube(self) -> bool:
        return self.n_nodes == 8 and nx.is_isomorphic(self.to_networkx(), _CUBE)


def build_answer_graph(s: AnswerSet) -> AnswerGraph:
    cands = s.candidates
    edges = tuple(
        (u, v)
        for u in range(len(cands))
        for v in range(u + 1, len(cands))
        if len(panel_diff(cands[u], cands[v])) == 1
    )
    return AnswerGraph(len(cands), edges)


def _addresses(s: AnswerSet):
    n = len(s.candidates[0].components)
    return [AttributeAddress(c, a) for c in range(n) for a in RULE_ELIGIBLE]


def mode_scores(s: AnswerSet) -> list:
    """Per candidate, the number of addresses where it holds a modal value."""
    scores = [0] * len(s.candidates)
    for addr in _addresses(s):
        vals = [attribute_value(c, addr) for c in s.candidates]
        counts = Counter(vals)
        top = max(counts.values())
        for k, v in enumerate(vals):
            if counts[v] == top:
                scores[k] += 1
    return scores


def mode_heuristic_predict(s: AnswerSet, rng: random.Random) -> int:
    scores = mode_scores(s)
    best = max(scores)
    return rng.choice([k for k, sc in enumerate(scores) if sc == best])


def balance_histogram(s: AnswerSet) -> dict:
    """address -> {value: count} over the candidates."""
    out = {}
    for addr in _addresses(s):
        out[addr] = dict(Counter(attribute_value(c, addr) for c in s.candidates))
    return out


# -- context-blind probe -----------------------------------------------------

AFFINE = "affine"
SET_MLP = "set-mlp"


@dataclass
class ProbeModel:
    """Scores eight candidates from their features alone.

    `affine`: one linear map from the concatenated 8x198 features to 8
    scores. `set-mlp`: a shared per-candidate MLP over [own features, mean
    features of the set], which lets the score depend on how common a
    candidate's values are within the set.
    """

    kind: str
    params: dict

    def scores(self, feats: np.ndarray):
        """feats: (B, 8, 198) -> (scores (B, 8), cache)."""
        if self.kind == AFFINE:
            x = feats.reshape(len(feats), -1)
            return x @ self.params["W"] + self.params["b"], x
        mean = np.broadcast_to(feats.mean(axis=1, keepdims=True), feats.shape)
        u = np.concatenate([feats, mean], axis=-1)
        out, cache = mlp_forward(self.params, "set", u)
        return out[..., 0], cache

    def backward(self, cache, dscores, grads):
        if self.kind == AFFINE:
            grads["W"] += cache.T @ dscores
            grads["b"] += dscores.sum(axis=0)
        else:
            mlp_backward(self.params, "set", cache, dscores[..., None], grads)

    def predict(self, feats: np.ndarray) -> np.ndarray:
        return np.argmax(self.scores(feats)[0], axis=1)

    def accuracy(self, feats, targets) -> float:
        if len(feats) == 0:
            return float("nan")
        return float(np.mean(self.predict(feats) == targets))


def init_probe(kind: str, rng: np.random.Generator, hidden: int = 64) -> ProbeModel:
    if kind == AFFINE:
        params = {
            "W": rng.normal(0.0, 0.01, size=(8 * FEATURE_DIM, 8)),
            "b": np.zeros(8),
        }
    elif kind == SET_MLP:
        params = mlp_init(rng, (2 * FEATURE_DIM, hidden, 1), "set")
    else:
        raise ValueError(f"unknown probe kind {kind!r}")
    return ProbeModel(kind, params)


def candidate_features(puzzles) -> tuple:
    feats = np.stack([encode_panels(p.candidates, p.cfg) for p in puzzles]) if puzzles else np.zeros((0, 8, FEATURE_DIM))
    targets = np.array([p.target for p in puzzles], dtype=int)
    return feats, targets


def train_context_blind_probe(
    train, epochs: int = 10, lr: float = 1e-3, seed: int = 0, kind: str = SET_MLP, batch_size: int = 64
) -> ProbeModel:
    """Softmax cross-entropy on candidate features only; `train` is a list of puzzles."""
    if len(train) == 0:
        raise ValueError("cannot train a probe on an empty dataset")
    rng = np.random.default_rng(seed)
    model = init_probe(kind, rng)
    feats, targets = candidate_features(train)
    opt = Adam(model.params, lr=lr)
    for _ in range(epochs):
        order = rng.permutation(len(feats))
        for start in range(0, len(order), batch_size):
            idx = order[start : start + batch_size]
            scores, cache = model.scores(feats[idx])
            probs = np.exp(log_softmax(scores))
            probs[np.arange(len(idx)), targets[idx]] -= 1.0
            grads = zeros_like(model.params)
            model.backward(cache, probs / len(idx), grads)
            opt.step(grads)
    return model


# -- dataset report ----------------------------------------------------------

def _degree_key(deg) -> str:
    return ",".join(str(d) for d in sorted(deg, reverse=True))


def audit_dataset(ds, seed: int = 0, probe_epochs: int = 10, probe_kind: str = SET_MLP) -> dict:
    """Aggregate fairness statistics over every record of a dataset.

    Returns a JSON-ready report; the probe trains on the train split and is
    scored on train and val.
    """
    puzzles = ds.all()
    if not puzzles:
        raise ValueError("dataset is empty")
    rng = random.Random(seed)
    mode_hits = 0
    degree_seqs = Counter()
    node_degrees = Counter()
    cubes = 0
    hub7 = 0
    balance = {}
    statuses = Counter()
    oracle_hits = 0
    for p in puzzles:
        s = p.answers
        mode_hits += mode_heuristic_predict(s, rng) == s.target
        g = build_answer_graph(s)
        deg = g.degrees
        degree_seqs[_degree_key(deg)] += 1
        node_degrees.update(deg)
        cubes += g.is_cube()
        hub7 += 7 in deg
        for addr, table in balance_histogram(s).items():
            pattern = "/".join(str(c) for c in sorted(table.values(), reverse=True))
            balance.setdefault(addr.attribute.value, Counter())[pattern] += 1
        res = solve(p)
        statuses[res.status] += 1
        oracle_hits += res.index == s.target
    n = len(puzzles)
    report = {
        "n_records": n,
        "n_errors": len(ds.errors),
        "errors": [f"{f}:{line}: {msg}" for f, line, msg in ds.errors],
        "mode_heuristic_accuracy": mode_hits / n,
        "degree_sequences": dict(sorted(degree_seqs.items())),
        "node_degree_histogram": {str(k): v for k, v in sorted(node_degrees.items())},
        "cube_fraction": cubes / n,
        "degree7_fraction": hub7 / n,
        "balance": {k: dict(sorted(v.items())) for k, v in sorted(balance.items())},
        "oracle_status": dict(sorted(statuses.items())),
        "oracle_accuracy": oracle_hits / n,
    }
    train = ds.splits.get("train", [])
    val = ds.splits.get("val", [])
    if probe_epochs >= 0 and train:
        model = train_context_blind_probe(train, epochs=probe_epochs, seed=seed, kind=probe_kind)
        report["probe"] = {
            "kind": probe_kind,
            "epochs": probe_epochs,
            "train_accuracy": model.accuracy(*candidate_features(train)),
            "val_accuracy": model.accuracy(*candidate_features(val)) if val else None,
        }
    return report


def summarize(report: dict) -> str:
    lines = [
        f"records            {report['n_records']} ({report['n_errors']} malformed)",
        f"mode heuristic     {report['mode_heuristic_accuracy']:.4f}",
        f"3-cube graphs      {report['cube_fraction']:.4f}",
        f"degree-7 hub       {report['degree7_fraction']:.4f}",
        f"oracle accuracy    {report['oracle_accuracy']:.4f}  {report['oracle_status']}",
    ]
    if "probe" in report:
        pr = report["probe"]
        val = "n/a" if pr["val_accuracy"] is None else f"{pr['val_accuracy']:.4f}"
        lines.append(f"probe ({pr['kind']})  train {pr['train_accuracy']:.4f}  val {val}")
    top = sorted(report["node_degree_histogram"].items(), key=lambda kv: -kv[1])[:3]
    lines.append("node degrees       " + ", ".join(f"{k}:{v}" for k, v in top))
    return "\n".join(lines)
