"""Canonical JSON-Lines serialization of puzzles, with a manifest per dataset directory."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__
from .abt import ABT, N_CANDIDATES, STYLES, AnswerSet
from .model import (
    CONFIGURATIONS,
    AttributeAddress,
    AttributeKind,
    ComponentState,
    Entity,
    Panel,
    validate_panel,
)
from .puzzle import PuzzleRecord
from .rules import NOISE, Arithmetic, Constant, DistributeThree, Progression, RuleAssignment

SCHEMA_VERSION = 1
SPLITS = ("train", "val", "test")
MANIFEST = "manifest.json"


class DatasetError(Exception):
    """Malformed, missing or inconsistent dataset files."""


@dataclass
class Dataset:
    manifest: dict
    splits: dict
    errors: list = field(default_factory=list)

    def all(self) -> list:
        return [p for s in SPLITS for p in self.splits.get(s, [])]


def dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=True)


# -- values ------------------------------------------------------------------

def value_to_json(v):
    if isinstance(v, frozenset):
        return sorted(v)
    return v


def value_from_json(attr: AttributeKind, v):
    if attr is AttributeKind.POSITION:
        return frozenset(v)
    return v


def rule_to_json(rule):
    if rule == NOISE:
        return NOISE
    if isinstance(rule, Constant):
        return {"kind": "Constant"}
    if isinstance(rule, Progression):
        return {"kind": "Progression", "delta": rule.delta}
    if isinstance(rule, Arithmetic):
        return {"kind": "Arithmetic", "sign": rule.sign}
    return {
        "kind": "DistributeThree",
        "values": [value_to_json(v) for v in rule.values],
        "arrangement": [list(r) for r in rule.arrangement],
    }


def rule_from_json(attr: AttributeKind, obj):
    if obj == NOISE:
        return NOISE
    kind = obj["kind"]
    if kind == "Constant":
        return Constant()
    if kind == "Progression":
        return Progression(obj["delta"])
    if kind == "Arithmetic":
        return Arithmetic(obj["sign"])
    if kind == "DistributeThree":
        return DistributeThree(
            tuple(value_from_json(attr, v) for v in obj["values"]),
            tuple(tuple(r) for r in obj["arrangement"]),
        )
    raise DatasetError(f"unknown rule kind {kind!r}")


# -- panels ------------------------------------------------------------------

def panel_to_json(p: Panel) -> dict:
    return {
        "components": [
            {
                "uniformity": c.uniformity,
                "entities": [[e.slot, e.type_idx, e.size_idx, e.color_idx, e.angle_idx] for e in c.entities],
            }
            for c in p.components
        ]
    }


def panel_from_json(obj) -> Panel:
    comps = []
    for c in obj["components"]:
        ents = tuple(Entity(*map(int, e)) for e in c["entities"])
        if any(len(e) != 5 for e in c["entities"]):
            raise DatasetError("entity arrays must have 5 fields")
        comps.append(ComponentState(ents, bool(c["uniformity"])))
    return Panel(tuple(comps))


def puzzle_to_json(p: PuzzleRecord) -> dict:
    ans = p.answers
    return {
        "id": p.id,
        "config": p.config,
        "seed": p.seed,
        "assignment": {
            "modes": list(p.assignment.modes),
            "rules": [{"address": str(a), "rule": rule_to_json(r)} for a, r in p.assignment.rules],
        },
        "context": [panel_to_json(x) for x in p.context],
        "candidates": [panel_to_json(x) for x in ans.candidates],
        "target": ans.target,
        "provenance": {
            "style": ans.style,
            "changes": [{"address": str(a), "value": value_to_json(v)} for a, v in ans.changes],
            "labels": [list(lab) if isinstance(lab, tuple) else lab for lab in ans.labels],
        },
    }


def puzzle_from_json(obj) -> PuzzleRecord:
    try:
        config = obj["config"]
        if config not in CONFIGURATIONS:
            raise DatasetError(f"unknown configuration {config!r}")
        cfg = CONFIGURATIONS[config]
        rules = []
        for item in obj["assignment"]["rules"]:
            addr = AttributeAddress.parse(item["address"])
            rules.append((addr, rule_from_json(addr.attribute, item["rule"])))
        asg = RuleAssignment(tuple(rules), tuple(obj["assignment"]["modes"]))
        context = tuple(panel_from_json(x) for x in obj["context"])
        candidates = tuple(panel_from_json(x) for x in obj["candidates"])
        if len(context) != 8:
            raise DatasetError(f"context must hold 8 panels, got {len(context)}")
        if len(candidates) != N_CANDIDATES:
            raise DatasetError(f"answer set must hold {N_CANDIDATES} candidates, got {len(candidates)}")
        target = obj["target"]
        if not isinstance(target, int) or not 0 <= target < N_CANDIDATES:
            raise DatasetError(f"target {target!r} out of range")
        for panel in context + candidates:
            validate_panel(panel, cfg)
        prov = obj["provenance"]
        if prov["style"] not in STYLES:
            raise DatasetError(f"unknown answer-set style {prov['style']!r}")
        changes = []
        for ch in prov["changes"]:
            addr = AttributeAddress.parse(ch["address"])
            changes.append((addr, value_from_json(addr.attribute, ch["value"])))
        labels = tuple(tuple(bool(b) for b in lab) if prov["style"] == ABT else int(lab) for lab in prov["labels"])
        ans = AnswerSet(candidates, target, prov["style"], tuple(changes), labels)
        return PuzzleRecord(str(obj["id"]), config, asg, context, ans, int(obj["seed"]))
    except DatasetError:
        raise
    except (KeyError, TypeError, ValueError, AttributeError) as exc:
        raise DatasetError(f"schema violation: {exc!r}") from exc


# -- files -------------------------------------------------------------------

def split_counts(n: int) -> dict:
    n_train = 6 * n // 10
    n_val = 2 * n // 10
    return {"train": n_train, "val": n_val, "test": n - n_train - n_val}


def write_dataset(puzzles, path, master_seed=None, configs=None, style=None) -> dict:
    """Write train/val/test shards (6:2:2 in id order) and the manifest; returns the manifest."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    puzzles = list(puzzles)
    counts = split_counts(len(puzzles))
    start = 0
    for split in SPLITS:
        chunk = puzzles[start : start + counts[split]]
        start += counts[split]
        with open(path / f"{split}.jsonl", "w", encoding="ascii", newline="\n") as fh:
            for p in chunk:
                fh.write(dumps(puzzle_to_json(p)) + "\n")
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "generator_version": f"ravenkit {__version__}",
        "master_seed": master_seed,
        "configs": sorted(set(p.config for p in puzzles)) if configs is None else list(configs),
        "style": style if style is not None else (puzzles[0].answers.style if puzzles else None),
        "counts": counts,
    }
    (path / MANIFEST).write_text(dumps(manifest) + "\n", encoding="ascii")
    return manifest


def read_manifest(path) -> dict:
    mpath = Path(path) / MANIFEST
    if not mpath.exists():
        raise DatasetError(f"missing manifest: {mpath}")
    try:
        manifest = json.loads(mpath.read_text())
    except json.JSONDecodeError as exc:
        raise DatasetError(f"{mpath}: {exc}") from exc
    if manifest.get("schema_version") != SCHEMA_VERSION:
        raise DatasetError(
            f"schema version {manifest.get('schema_version')!r} not supported (expected {SCHEMA_VERSION})"
        )
    return manifest


def read_dataset(path, strict: bool = True) -> Dataset:
    """Load and validate a dataset directory.

    With strict=False malformed lines are collected in `Dataset.errors` as
    (file, line, message) instead of raising.
    """
    path = Path(path)
    manifest = read_manifest(path)
    splits = {}
    errors = []
    for split in SPLITS:
        fpath = path / f"{split}.jsonl"
        records = []
        if not fpath.exists():
            raise DatasetError(f"missing shard: {fpath}")
        with open(fpath, encoding="ascii") as fh:
            for lineno, line in enumerate(fh, 1):
                try:
                    records.append(puzzle_from_json(json.loads(line)))
                except (json.JSONDecodeError, DatasetError) as exc:
                    msg = f"{fpath.name}:{lineno}: {exc}"
                    if strict:
                        raise DatasetError(msg) from exc
                    errors.append((fpath.name, lineno, str(exc)))
        expected = manifest["counts"][split]
        n_lines = len(records) + sum(1 for e in errors if e[0] == fpath.name)
        if n_lines != expected:
            msg = f"{fpath.name}: manifest says {expected} records, found {n_lines}"
            if strict:
                raise DatasetError(msg)
            errors.append((fpath.name, 0, msg))
        splits[split] = records
    ids = [p.id for s in SPLITS for p in splits[s]]
    if len(set(ids)) != len(ids):
        raise DatasetError("puzzle ids are not unique across splits")
    return Dataset(manifest, splits, errors)
