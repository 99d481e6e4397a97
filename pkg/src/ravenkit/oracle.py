"""Symbolic solver: induce rules from two rows, force the third, pick the consistent candidate."""
from __future__ import annotations

from dataclasses import dataclass

from .model import (
    ENTITY_ATTRIBUTES,
    RULE_ELIGIBLE,
    AttributeAddress,
    AttributeKind,
    FigureConfiguration,
    attribute_domain,
    attribute_value,
)
from .puzzle import PuzzleRecord
from .rules import (
    APPLICABLE,
    ARITHMETIC_SIGNS,
    PROGRESSION_DELTAS,
    Arithmetic,
    Constant,
    DistributeThree,
    Progression,
    evaluate_rule,
    solve_third,
)

UNCONSTRAINED = "unconstrained"

SOLVED = "solved"
AMBIGUOUS = "ambiguous"
NONE_CONSISTENT = "none_consistent"


@dataclass(frozen=True)
class SolveResult:
    status: str
    index: int | None
    qualifiers: tuple


def _distribute_three_from(t1: tuple, t2: tuple):
    """The Latin-square rule whose first two rows are t1 and t2, if they form one."""
    if len(set(t1)) != 3 or set(t1) != set(t2):
        return None
    perm = tuple(t1.index(v) for v in t2)
    last = tuple(3 - a - b for a, b in zip((0, 1, 2), perm))
    try:
        return DistributeThree(t1, ((0, 1, 2), perm, last))
    except ValueError:
        return None


def _candidate_rules(attr, t1, t2):
    allowed = APPLICABLE[attr]
    out = []
    if Constant in allowed:
        out.append(Constant())
    numeric = all(isinstance(v, int) for v in t1 + t2)
    if numeric and Progression in allowed:
        out.extend(Progression(d) for d in PROGRESSION_DELTAS)
    if numeric and Arithmetic in allowed:
        out.extend(Arithmetic(s) for s in ARITHMETIC_SIGNS)
    if DistributeThree in allowed:
        d3 = _distribute_three_from(t1, t2)
        if d3 is not None:
            out.append(d3)
    return out


def induce_consistent_rules(row1, row2) -> dict:
    """For each rule-eligible address, the rules satisfied by both rows (or UNCONSTRAINED)."""
    out = {}
    for ci in range(len(row1[0].components)):
        for attr in RULE_ELIGIBLE:
            addr = AttributeAddress(ci, attr)
            t1 = tuple(attribute_value(p, addr) for p in row1)
            t2 = tuple(attribute_value(p, addr) for p in row2)
            fits = frozenset(
                r for r in _candidate_rules(attr, t1, t2) if evaluate_rule(r, *t1) and evaluate_rule(r, *t2)
            )
            out[addr] = fits if fits else UNCONSTRAINED
    return out


def forced_values(rules: dict, prefix, cfg: FigureConfiguration) -> dict:
    """Per address, the union of third-panel values the consistent rules allow."""
    out = {}
    for addr, fits in rules.items():
        domain = attribute_domain(addr.attribute, cfg.components[addr.component])
        if fits == UNCONSTRAINED:
            out[addr] = frozenset(domain)
            continue
        v1 = attribute_value(prefix[0], addr)
        v2 = attribute_value(prefix[1], addr)
        vals = set()
        for rule in fits:
            try:
                v3 = solve_third(rule, v1, v2, domain)
            except TypeError:
                v3 = None
            if v3 is not None:
                vals.add(v3)
        out[addr] = frozenset(vals)
    return out


def consistent(panel, forced: dict) -> bool:
    return all(attribute_value(panel, addr) in vals for addr, vals in forced.items())


def solve(puzzle: PuzzleRecord) -> SolveResult:
    row1, row2, prefix = puzzle.rows()
    forced = forced_values(induce_consistent_rules(row1, row2), prefix, puzzle.cfg)
    quals = tuple(k for k, c in enumerate(puzzle.candidates) if consistent(c, forced))
    if len(quals) == 1:
        return SolveResult(SOLVED, quals[0], quals)
    return SolveResult(AMBIGUOUS if quals else NONE_CONSISTENT, None, quals)


def verify_unique(puzzle: PuzzleRecord) -> bool:
    res = solve(puzzle)
    return res.status == SOLVED and res.index == puzzle.target


def columns_viable(puzzle: PuzzleRecord) -> bool:
    """Whether a complete rule assignment also exists column-wise.

    Every component needs a consistent column rule for Type, Size and Color
    (plus Number or Position for grids) that completes the third column in-domain.
    """
    c = puzzle.context
    col1 = (c[0], c[3], c[6])
    col2 = (c[1], c[4], c[7])
    prefix = (c[2], c[5])
    cfg = puzzle.cfg
    rules = induce_consistent_rules(col1, col2)
    forced = forced_values(rules, prefix, cfg)

    def ok(addr):
        return rules[addr] != UNCONSTRAINED and bool(forced[addr])

    for ci, layout in enumerate(cfg.components):
        if not all(ok(AttributeAddress(ci, a)) for a in ENTITY_ATTRIBUTES):
            return False
        if layout.grid and not (
            ok(AttributeAddress(ci, AttributeKind.NUMBER)) or ok(AttributeAddress(ci, AttributeKind.POSITION))
        ):
            return False
    return True
