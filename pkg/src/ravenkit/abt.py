"""Answer-set generation: the attribute bisection tree and the one-edit baseline."""
from __future__ import annotations

import random
from dataclasses import dataclass, replace

from .model import (
    N_ANGLES,
    AttributeAddress,
    AttributeKind,
    ComponentState,
    Entity,
    FigureConfiguration,
    Panel,
    attribute_domain,
    attribute_value,
    panel_diff,
)
from .rules import GenerationError, RuleAssignment

ABT = "abt"
RAVEN = "raven"
STYLES = (ABT, RAVEN)
N_CANDIDATES = 8

_FIELDS = {
    AttributeKind.TYPE: "type_idx",
    AttributeKind.SIZE: "size_idx",
    AttributeKind.COLOR: "color_idx",
}


@dataclass(frozen=True)
class AnswerSet:
    """Eight candidates plus how they were derived from the correct answer.

    `changes` holds the (address, value) edits: the three bisected attributes
    for ABT, one edit per distractor for the baseline. `labels[k]` says which
    edits candidate k carries: a 3-bit tuple for ABT, an index into `changes`
    (or -1 for the target) for the baseline.
    """

    candidates: tuple
    target: int
    style: str
    changes: tuple
    labels: tuple

    @property
    def correct(self) -> Panel:
        return self.candidates[self.target]


def _relocate(comp: ComponentState, new_slots: frozenset, prng: random.Random) -> ComponentState:
    # entities on kept slots stay; vacated ones move in slot order; extra slots get fresh entities
    old = {e.slot: e for e in comp.entities}
    vacated = sorted(set(old) - new_slots)
    arriving = sorted(new_slots - set(old))
    ents = [old[s] for s in sorted(new_slots & set(old))]
    template = comp.entities[0]
    for i, s in enumerate(arriving):
        if i < len(vacated):
            ents.append(replace(old[vacated[i]], slot=s))
        else:
            angle = template.angle_idx if comp.uniformity else prng.randrange(N_ANGLES)
            ents.append(Entity(s, template.type_idx, template.size_idx, template.color_idx, angle))
    ents.sort(key=lambda e: e.slot)
    return ComponentState(tuple(ents), comp.uniformity)


def modification_domain(p: Panel, addr: AttributeAddress, cfg: FigureConfiguration) -> tuple:
    """Values `addr` may be changed to (Position keeps the entity count)."""
    layout = cfg.components[addr.component]
    dom = attribute_domain(addr.attribute, layout)
    if addr.attribute is AttributeKind.POSITION:
        k = p.components[addr.component].count
        dom = tuple(s for s in dom if len(s) == k)
    return dom


def alternatives(p: Panel, addr: AttributeAddress, cfg: FigureConfiguration) -> list:
    cur = attribute_value(p, addr)
    return [v for v in modification_domain(p, addr, cfg) if v != cur]


def modify_attribute(
    p: Panel, addr: AttributeAddress, v, cfg: FigureConfiguration, placement_seed: int = 0
) -> Panel:
    """Copy of `p` with one attribute set to `v`.

    A Number change re-draws the occupied slots from (placement_seed,
    component, v), so every panel at one tree level receives the same layout.
    """
    if addr.attribute not in _FIELDS and addr.attribute not in (
        AttributeKind.NUMBER,
        AttributeKind.POSITION,
    ):
        raise ValueError(f"{addr.attribute.value} cannot be modified")
    if v == attribute_value(p, addr):
        raise ValueError(f"{addr} already has value {v!r}")
    if v not in modification_domain(p, addr, cfg):
        raise ValueError(f"value {v!r} outside the domain of {addr}")
    comp = p.components[addr.component]
    if addr.attribute in _FIELDS:
        field = _FIELDS[addr.attribute]
        new = ComponentState(tuple(replace(e, **{field: v}) for e in comp.entities), comp.uniformity)
    else:
        prng = random.Random(f"{placement_seed}:{addr.component}:{addr.attribute.value}:{sorted(v) if isinstance(v, frozenset) else v}")
        if addr.attribute is AttributeKind.NUMBER:
            n = cfg.components[addr.component].n_slots
            slots = frozenset(prng.sample(range(n), v))
        else:
            slots = v
        new = _relocate(comp, slots, prng)
    comps = list(p.components)
    comps[addr.component] = new
    return Panel(tuple(comps))


def eligible_addresses(correct: Panel, asg: RuleAssignment, cfg: FigureConfiguration) -> list:
    return [a for a in asg.governed() if alternatives(correct, a, cfg)]


def bisection_tree(correct: Panel, edits, cfg: FigureConfiguration, placement_seed: int = 0) -> list:
    """Run the three doubling iterations; returns the answer set after each level."""
    omega = [correct]
    levels = []
    for addr, v in edits:
        gamma = [modify_attribute(w, addr, v, cfg, placement_seed) for w in omega]
        omega = omega + gamma
        levels.append(list(omega))
    return levels


def _is_position_like(addr):
    return addr.attribute in (AttributeKind.NUMBER, AttributeKind.POSITION)


def sample_bisection(correct: Panel, asg: RuleAssignment, cfg: FigureConfiguration, rng: random.Random):
    pool = eligible_addresses(correct, asg, cfg)
    if len(pool) < 3:
        raise GenerationError(f"only {len(pool)} governed addresses available, need 3")
    for _ in range(100):
        picks = rng.sample(pool, 3)
        if sum(_is_position_like(a) for a in picks) <= 1:
            break
    else:
        raise GenerationError("could not pick three attributes with at most one of Number/Position")
    return [(a, rng.choice(alternatives(correct, a, cfg))) for a in picks]


def generate_abt_answer_set(
    correct: Panel, asg: RuleAssignment, cfg: FigureConfiguration, rng: random.Random
) -> AnswerSet:
    edits = sample_bisection(correct, asg, cfg, rng)
    placement_seed = rng.getrandbits(62)
    omega = bisection_tree(correct, edits, cfg, placement_seed)[-1]
    # node j carries edit i iff bit i of j is set (level i appended the modified half)
    bits = [tuple(bool(j >> i & 1) for i in range(3)) for j in range(N_CANDIDATES)]
    order = list(range(N_CANDIDATES))
    rng.shuffle(order)
    return AnswerSet(
        candidates=tuple(omega[j] for j in order),
        target=order.index(0),
        style=ABT,
        changes=tuple(edits),
        labels=tuple(bits[j] for j in order),
    )


def generate_raven_style_answer_set(
    correct: Panel, asg: RuleAssignment, cfg: FigureConfiguration, rng: random.Random
) -> AnswerSet:
    pool = eligible_addresses(correct, asg, cfg)
    if not pool:
        raise GenerationError("no governed address to modify")
    placement_seed = rng.getrandbits(62)
    cands = [correct]
    edits = []
    while len(cands) < N_CANDIDATES:
        for _ in range(1000):
            addr = rng.choice(pool)
            v = rng.choice(alternatives(correct, addr, cfg))
            d = modify_attribute(correct, addr, v, cfg, placement_seed)
            if all(panel_diff(d, c) for c in cands):
                break
        else:
            raise GenerationError("could not draw eight distinct candidates")
        cands.append(d)
        edits.append((addr, v))
    order = list(range(N_CANDIDATES))
    rng.shuffle(order)
    return AnswerSet(
        candidates=tuple(cands[j] for j in order),
        target=order.index(0),
        style=RAVEN,
        changes=tuple(edits),
        labels=tuple(j - 1 for j in order),
    )


def generate_answer_set(style: str, correct, asg, cfg, rng) -> AnswerSet:
    if style == ABT:
        return generate_abt_answer_set(correct, asg, cfg, rng)
    if style == RAVEN:
        return generate_raven_style_answer_set(correct, asg, cfg, rng)
    raise ValueError(f"unknown answer-set style {style!r}")
