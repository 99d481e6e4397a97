"""Row-wise rules, rule assignments and rule-consistent context generation."""
from __future__ import annotations

import random
from dataclasses import dataclass
from functools import lru_cache

from .model import (
    ENTITY_ATTRIBUTES,
    N_ANGLES,
    AttributeAddress,
    AttributeKind,
    ComponentLayout,
    FigureConfiguration,
    Panel,
    attribute_domain,
    make_component,
)

RETRY_BUDGET = 100

# the two Latin squares of order 3 whose first row is the identity
LATIN_SQUARES = (
    ((0, 1, 2), (1, 2, 0), (2, 0, 1)),
    ((0, 1, 2), (2, 0, 1), (1, 2, 0)),
)
PROGRESSION_DELTAS = (-2, -1, 1, 2)
ARITHMETIC_SIGNS = (1, -1)


class GenerationError(RuntimeError):
    """Raised when sampling cannot satisfy an assignment within the retry budget."""


@dataclass(frozen=True)
class Constant:
    kind = "Constant"


@dataclass(frozen=True)
class Progression:
    delta: int
    kind = "Progression"

    def __post_init__(self):
        if self.delta not in PROGRESSION_DELTAS:
            raise ValueError(f"progression delta must be one of {PROGRESSION_DELTAS}")


@dataclass(frozen=True)
class Arithmetic:
    sign: int
    kind = "Arithmetic"

    def __post_init__(self):
        if self.sign not in ARITHMETIC_SIGNS:
            raise ValueError("arithmetic sign must be +1 or -1")


@dataclass(frozen=True)
class DistributeThree:
    """Three distinct values laid out by a Latin square; row r of the matrix uses arrangement row r."""

    values: tuple
    arrangement: tuple = LATIN_SQUARES[0]
    kind = "DistributeThree"

    def __post_init__(self):
        if len(self.values) != 3 or len(set(self.values)) != 3:
            raise ValueError("DistributeThree needs three distinct values")
        rows = self.arrangement
        cols = list(zip(*rows))
        if len(rows) != 3 or any(sorted(r) != [0, 1, 2] for r in list(rows) + cols):
            raise ValueError(f"arrangement {rows} is not a Latin square of order 3")

    def row(self, r: int) -> tuple:
        return tuple(self.values[i] for i in self.arrangement[r])


RULE_KINDS = (Constant, Progression, Arithmetic, DistributeThree)

APPLICABLE = {
    AttributeKind.NUMBER: (Constant, Progression, Arithmetic, DistributeThree),
    AttributeKind.POSITION: (Constant, DistributeThree),
    AttributeKind.TYPE: (Constant, Progression, DistributeThree),
    AttributeKind.SIZE: (Constant, Progression, Arithmetic, DistributeThree),
    AttributeKind.COLOR: (Constant, Progression, Arithmetic, DistributeThree),
}

NOISE = "Noise"


def _check_domain(values, domain):
    if domain is None:
        return
    for v in values:
        if v not in domain:
            raise ValueError(f"value {v!r} outside the attribute domain")


def evaluate_rule(rule, v1, v2, v3, domain=None) -> bool:
    _check_domain((v1, v2, v3), domain)
    if isinstance(rule, Constant):
        return v1 == v2 == v3
    if isinstance(rule, Progression):
        return v2 - v1 == rule.delta and v3 - v2 == rule.delta
    if isinstance(rule, Arithmetic):
        return v3 == v1 + rule.sign * v2
    if isinstance(rule, DistributeThree):
        return any((v1, v2, v3) == rule.row(r) for r in range(3))
    raise TypeError(f"not a rule: {rule!r}")


def solve_third(rule, v1, v2, domain):
    """Unique third value completing a row, or None if it does not exist in `domain`."""
    if isinstance(rule, Constant):
        v3 = v1 if v1 == v2 else None
    elif isinstance(rule, Progression):
        v3 = v2 + rule.delta if v2 - v1 == rule.delta else None
    elif isinstance(rule, Arithmetic):
        v3 = v1 + rule.sign * v2
    elif isinstance(rule, DistributeThree):
        rest = [v for v in rule.values if v != v1 and v != v2]
        v3 = rest[0] if len(rest) == 1 and (v1, v2, rest[0]) in [rule.row(r) for r in range(3)] else None
    else:
        raise TypeError(f"not a rule: {rule!r}")
    if v3 is None or v3 not in domain:
        return None
    return v3


@dataclass(frozen=True)
class RuleAssignment:
    """Per-address rule or NOISE; `modes[c]` is 'number', 'position' or None for single-slot components."""

    rules: tuple  # ((AttributeAddress, rule-or-NOISE), ...) sorted by address
    modes: tuple

    @property
    def mapping(self) -> dict:
        return dict(self.rules)

    def governed(self) -> list:
        return [a for a, r in self.rules if r != NOISE]

    def rule_at(self, addr):
        return self.mapping[addr]


def rule_domain(attr: AttributeKind, layout: ComponentLayout) -> tuple:
    """Values used when sampling rows. Position excludes the full slot set so it can always be moved."""
    dom = attribute_domain(attr, layout)
    if attr is AttributeKind.POSITION:
        dom = tuple(s for s in dom if len(s) < layout.n_slots)
    return dom


def _min_operand(domain) -> int:
    # arithmetic never uses a zero second operand; it would read as a copy of column one
    return max(1, min(domain))


@lru_cache(maxsize=None)
def _feasible(rule_cls, param, domain: tuple) -> bool:
    dset = set(domain)
    if rule_cls is Progression:
        return any(v + param in dset and v + 2 * param in dset for v in domain)
    if rule_cls is Arithmetic:
        lo = _min_operand(domain)
        return any(b >= lo and a + param * b in dset for a in domain for b in domain)
    return True


def _sample_rule(attr: AttributeKind, layout: ComponentLayout, rng: random.Random):
    domain = rule_domain(attr, layout)
    options = []
    for cls in APPLICABLE[attr]:
        if cls is Progression:
            params = [d for d in PROGRESSION_DELTAS if _feasible(Progression, d, domain)]
        elif cls is Arithmetic:
            params = [s for s in ARITHMETIC_SIGNS if _feasible(Arithmetic, s, domain)]
        elif cls is DistributeThree:
            params = [None] if len(domain) >= 3 else []
        else:
            params = [None]
        if params:
            options.append((cls, params))
    cls, params = rng.choice(options)
    if cls is Constant:
        return Constant()
    if cls is Progression:
        return Progression(rng.choice(params))
    if cls is Arithmetic:
        return Arithmetic(rng.choice(params))
    if attr is AttributeKind.POSITION:
        k = rng.randint(1, layout.n_slots - 1)
        pool = [s for s in domain if len(s) == k]
        values = tuple(rng.sample(pool, 3))
    else:
        values = tuple(rng.sample(list(domain), 3))
    return DistributeThree(values, rng.choice(LATIN_SQUARES))


def sample_assignment(cfg: FigureConfiguration, rng: random.Random) -> RuleAssignment:
    rules = []
    modes = []
    for ci, layout in enumerate(cfg.components):
        if layout.grid:
            mode = rng.choice(("number", "position"))
            active = AttributeKind.NUMBER if mode == "number" else AttributeKind.POSITION
            passive = AttributeKind.POSITION if mode == "number" else AttributeKind.NUMBER
            rules.append((AttributeAddress(ci, active), _sample_rule(active, layout, rng)))
            rules.append((AttributeAddress(ci, passive), NOISE))
        else:
            mode = None
            rules.append((AttributeAddress(ci, AttributeKind.NUMBER), NOISE))
            rules.append((AttributeAddress(ci, AttributeKind.POSITION), NOISE))
        modes.append(mode)
        for attr in ENTITY_ATTRIBUTES:
            rules.append((AttributeAddress(ci, attr), _sample_rule(attr, layout, rng)))
    rules.sort(key=lambda item: item[0].sort_key())
    return RuleAssignment(tuple(rules), tuple(modes))


def validate_assignment(asg: RuleAssignment, cfg: FigureConfiguration) -> None:
    m = asg.mapping
    for ci, layout in enumerate(cfg.components):
        num = m[AttributeAddress(ci, AttributeKind.NUMBER)]
        pos = m[AttributeAddress(ci, AttributeKind.POSITION)]
        if layout.grid:
            if (num == NOISE) == (pos == NOISE):
                raise ValueError(f"component {ci}: exactly one of Number/Position must be governed")
        elif num != NOISE or pos != NOISE:
            raise ValueError(f"component {ci}: single-slot components do not govern Number/Position")
        for attr in ENTITY_ATTRIBUTES:
            if m[AttributeAddress(ci, attr)] == NOISE:
                raise ValueError(f"component {ci}: {attr.value} must be governed")
        for attr in (AttributeKind.NUMBER, AttributeKind.POSITION) + ENTITY_ATTRIBUTES:
            rule = m[AttributeAddress(ci, attr)]
            if rule != NOISE and type(rule) not in APPLICABLE[attr]:
                raise ValueError(f"{rule.kind} is not applicable to {attr.value}")


def _row_values(rule, r: int, domain: tuple, rng: random.Random) -> tuple:
    dset = set(domain)
    if isinstance(rule, DistributeThree):
        return rule.row(r)
    for _ in range(RETRY_BUDGET):
        if isinstance(rule, Progression):
            v1 = rng.choice(domain)
            row = (v1, v1 + rule.delta, v1 + 2 * rule.delta)
        else:
            v1 = rng.choice(domain)
            v2 = rng.choice(domain)
            if v2 < _min_operand(domain):
                continue
            row = (v1, v2, v1 + rule.sign * v2)
        if all(v in dset for v in row):
            return row
    raise GenerationError(f"no in-domain row for {rule} after {RETRY_BUDGET} draws")


def _value_matrix(rule, domain, rng) -> list:
    if isinstance(rule, Constant):
        # one value for the whole matrix
        v = rng.choice(domain)
        return [(v, v, v)] * 3
    return [_row_values(rule, r, domain, rng) for r in range(3)]


def generate_context(asg: RuleAssignment, cfg: FigureConfiguration, rng: random.Random):
    """Sample a 3x3 matrix obeying `asg` row-wise.

    Returns (context, correct): the eight given panels in row-major order and
    the panel completing position (3, 3).
    """
    m = asg.mapping
    per_component = []  # for each component: 9 ComponentStates
    for ci, layout in enumerate(cfg.components):
        vals = {}
        for attr in ENTITY_ATTRIBUTES:
            rule = m[AttributeAddress(ci, attr)]
            vals[attr] = _value_matrix(rule, rule_domain(attr, layout), rng)
        slot_sets = [[None] * 3 for _ in range(3)]
        mode = asg.modes[ci]
        if mode == "number":
            rule = m[AttributeAddress(ci, AttributeKind.NUMBER)]
            counts = _value_matrix(rule, rule_domain(AttributeKind.NUMBER, layout), rng)
            for r in range(3):
                for c in range(3):
                    slot_sets[r][c] = frozenset(rng.sample(range(layout.n_slots), counts[r][c]))
        elif mode == "position":
            rule = m[AttributeAddress(ci, AttributeKind.POSITION)]
            slot_sets = _value_matrix(rule, rule_domain(AttributeKind.POSITION, layout), rng)
        else:
            slot_sets = [[frozenset({0})] * 3 for _ in range(3)]
        states = []
        for r in range(3):
            for c in range(3):
                slots = slot_sets[r][c]
                uniform = rng.random() < 0.5
                if uniform:
                    angles = rng.randrange(N_ANGLES)
                else:
                    angles = {s: rng.randrange(N_ANGLES) for s in sorted(slots)}
                states.append(
                    make_component(
                        slots,
                        vals[AttributeKind.TYPE][r][c],
                        vals[AttributeKind.SIZE][r][c],
                        vals[AttributeKind.COLOR][r][c],
                        angles,
                        uniform,
                    )
                )
        per_component.append(states)
    panels = [Panel(tuple(comp[i] for comp in per_component)) for i in range(9)]
    return tuple(panels[:8]), panels[8]
