from __future__ import annotations

import random

import numpy as np
import pytest

from ravenkit.abt import RAVEN, AnswerSet
from ravenkit.audit import (
    AFFINE,
    SET_MLP,
    AnswerGraph,
    audit_dataset,
    balance_histogram,
    build_answer_graph,
    candidate_features,
    init_probe,
    mode_heuristic_predict,
    mode_scores,
    summarize,
    train_context_blind_probe,
)
from ravenkit.io import Dataset
from ravenkit.model import AttributeAddress, AttributeKind, Panel, make_component
from ravenkit.sran.nn import zeros_like


def _center(t, s, c):
    return Panel((make_component([0], t, s, c, 0),))


def _set(panels, target=0):
    return AnswerSet(tuple(panels), target, RAVEN, (), tuple(range(-1, 7)))


def test_fig4a_style_set_mode_picks_correct():
    # correct: pentagon, size 3, black; each distractor changes one attribute
    correct = _center(2, 3, 9)
    ds = [_center(0, 3, 9), _center(4, 3, 9), _center(2, 1, 9), _center(2, 5, 9), _center(2, 3, 4), _center(2, 3, 1), _center(1, 3, 9)]
    s = _set([correct] + ds)
    scores = mode_scores(s)
    assert scores[0] == 5 and all(sc < 5 for sc in scores[1:])
    assert mode_heuristic_predict(s, random.Random(0)) == 0


def test_abt_set_mode_heuristic_is_uniform(abt_puzzles):
    s = abt_puzzles[0].answers
    # every candidate is modal on all non-bisected addresses and ties on bisected ones
    assert len(set(mode_scores(s))) == 1
    picks = {mode_heuristic_predict(s, random.Random(i)) for i in range(200)}
    assert picks == set(range(8))


def test_degenerate_repeated_set():
    s = _set([_center(1, 1, 1)] * 8)
    assert 0 <= mode_heuristic_predict(s, random.Random(1)) < 8


def test_mode_scores_invariant_to_shuffle(raven_puzzles):
    rng = random.Random(3)
    for p in raven_puzzles[:40]:
        s = p.answers
        order = list(range(8))
        rng.shuffle(order)
        shuffled = _set([s.candidates[i] for i in order])
        assert sorted(mode_scores(shuffled)) == sorted(mode_scores(s))
        assert mode_scores(shuffled) == [mode_scores(s)[i] for i in order]


def test_answer_graphs(abt_puzzles, raven_puzzles):
    for p in abt_puzzles:
        g = build_answer_graph(p.answers)
        assert g.degrees == (3,) * 8 and len(g.edges) == 12 and g.is_cube()
    for p in raven_puzzles:
        assert build_answer_graph(p.answers).degrees[p.target] == 7


def test_pairwise_far_panels_have_no_edges():
    panels = [_center(t % 5, (t + 1) % 6, t) for t in range(8)]
    g = build_answer_graph(_set(panels))
    assert g.edges == () and g.degrees == (0,) * 8 and not g.is_cube()


def test_cube_detection():
    cube = AnswerGraph(8, tuple((u, u ^ (1 << b)) for u in range(8) for b in range(3) if u < u ^ (1 << b)))
    assert cube.is_cube()
    star = AnswerGraph(8, tuple((0, v) for v in range(1, 8)))
    assert not star.is_cube() and star.degrees[0] == 7


def test_balance_histogram_bisected_four_four(abt_puzzles):
    for p in abt_puzzles[:30]:
        table = balance_histogram(p.answers)
        bisected = {a for a, _ in p.answers.changes}
        for addr, counts in table.items():
            if addr in bisected:
                assert sorted(counts.values()) == [4, 4]
            elif addr in p.assignment.governed() and addr.attribute is not AttributeKind.POSITION:
                assert list(counts.values()) == [8]


@pytest.mark.parametrize("kind", [AFFINE, SET_MLP])
def test_probe_gradients_match_finite_differences(kind, raven_puzzles):
    rng = np.random.default_rng(0)
    model = init_probe(kind, rng, hidden=8)
    for k in model.params:
        model.params[k] += rng.normal(0, 0.1, model.params[k].shape)
    feats, targets = candidate_features(raven_puzzles[:6])

    def loss():
        sc, _ = model.scores(feats)
        sc = sc - sc.max(axis=1, keepdims=True)
        lse = np.log(np.exp(sc).sum(axis=1))
        return float(np.mean(lse - sc[np.arange(len(targets)), targets]))

    sc, cache = model.scores(feats)
    p = np.exp(sc - sc.max(axis=1, keepdims=True))
    p /= p.sum(axis=1, keepdims=True)
    p[np.arange(len(targets)), targets] -= 1
    grads = zeros_like(model.params)
    model.backward(cache, p / len(targets), grads)
    for name, W in model.params.items():
        flat = W.reshape(-1)
        gflat = grads[name].reshape(-1)
        idx = rng.choice(flat.size, size=min(5, flat.size), replace=False)
        for i in idx:
            old = flat[i]
            flat[i] = old + 1e-6
            up = loss()
            flat[i] = old - 1e-6
            down = loss()
            flat[i] = old
            num = (up - down) / 2e-6
            assert abs(num - gflat[i]) <= 1e-5 + 1e-4 * abs(num)


def test_untrained_probe_is_near_chance(abt_puzzles):
    model = train_context_blind_probe(abt_puzzles, epochs=0, seed=0)
    assert model.accuracy(*candidate_features(abt_puzzles)) <= 0.3


def test_probe_requires_data():
    with pytest.raises(ValueError):
        train_context_blind_probe([], epochs=1)
    with pytest.raises(ValueError):
        init_probe("cnn", np.random.default_rng(0))


def test_probe_deterministic(raven_puzzles):
    a = train_context_blind_probe(raven_puzzles, epochs=2, seed=5)
    b = train_context_blind_probe(raven_puzzles, epochs=2, seed=5)
    assert all(np.array_equal(a.params[k], b.params[k]) for k in a.params)


def test_audit_report(abt_puzzles):
    ds = Dataset({}, {"train": abt_puzzles[:100], "val": abt_puzzles[100:], "test": []})
    report = audit_dataset(ds, seed=0, probe_epochs=1)
    assert report["n_records"] == 140
    assert report["cube_fraction"] == 1.0 and report["degree7_fraction"] == 0.0
    assert report["node_degree_histogram"] == {"3": 140 * 8}
    assert report["oracle_accuracy"] == 1.0
    assert sum(report["oracle_status"].values()) == 140
    for key in ("mode_heuristic_accuracy", "cube_fraction", "oracle_accuracy"):
        assert 0.0 <= report[key] <= 1.0
    assert report == audit_dataset(ds, seed=0, probe_epochs=1)
    assert "3-cube graphs" in summarize(report)


def test_audit_empty_dataset_errors():
    with pytest.raises(ValueError):
        audit_dataset(Dataset({}, {"train": [], "val": [], "test": []}))


def test_raven_balance_single_address():
    s = _set([_center(2, 3, 9)] + [_center(2, 3, c) for c in range(7)])
    table = balance_histogram(s)
    assert table[AttributeAddress(0, AttributeKind.COLOR)] == {9: 1, **{c: 1 for c in range(7)}}
