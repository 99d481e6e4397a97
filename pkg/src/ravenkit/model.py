"""Symbolic panel model: configurations, entities, panels and the feature encoding."""
from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple

import numpy as np


class AttributeKind(enum.Enum):
    NUMBER = "Number"
    POSITION = "Position"
    TYPE = "Type"
    SIZE = "Size"
    COLOR = "Color"
    UNIFORMITY = "Uniformity"
    ANGLE = "Angle"


RULE_ELIGIBLE = (
    AttributeKind.NUMBER,
    AttributeKind.POSITION,
    AttributeKind.TYPE,
    AttributeKind.SIZE,
    AttributeKind.COLOR,
)
NOISE_ONLY = (AttributeKind.UNIFORMITY, AttributeKind.ANGLE)
ENTITY_ATTRIBUTES = (AttributeKind.TYPE, AttributeKind.SIZE, AttributeKind.COLOR)

TYPE_NAMES = ("triangle", "square", "pentagon", "hexagon", "circle")
# edge counts used by the rasterizer; 0 marks the circle
TYPE_EDGES = (3, 4, 5, 6, 0)
N_TYPES = 5
N_SIZES = 6
N_COLORS = 10
N_ANGLES = 8
SIZE_SCALES = (0.4, 0.5, 0.6, 0.7, 0.8, 0.9)

BLOCK_WIDTH = 1 + N_TYPES + N_SIZES + N_COLORS
N_BLOCKS = 9
FEATURE_DIM = N_BLOCKS * BLOCK_WIDTH

_TYPE_OFF = 1
_SIZE_OFF = _TYPE_OFF + N_TYPES
_COLOR_OFF = _SIZE_OFF + N_SIZES


def gray_level(color_idx: int) -> int:
    """Fill intensity for a color index (0 is white, 9 is black)."""
    return (255 * (N_COLORS - 1 - color_idx)) // (N_COLORS - 1)


class AttributeAddress(NamedTuple):
    component: int
    attribute: AttributeKind

    def sort_key(self):
        return (self.component, list(AttributeKind).index(self.attribute))

    def __str__(self):
        return f"{self.component}:{self.attribute.value}"

    @classmethod
    def parse(cls, text: str) -> "AttributeAddress":
        comp, attr = text.split(":")
        return cls(int(comp), AttributeKind(attr))


@dataclass(frozen=True)
class ComponentLayout:
    """Slot geometry of one component; boxes are (cx, cy, w, h) in unit panel coordinates."""

    n_slots: int
    boxes: tuple
    grid: bool
    block_offset: int


@dataclass(frozen=True)
class FigureConfiguration:
    name: str
    components: tuple

    @property
    def n_components(self) -> int:
        return len(self.components)

    def addresses(self) -> list:
        return [AttributeAddress(c, a) for c in range(self.n_components) for a in RULE_ELIGIBLE]


def _grid_boxes(rows: int, cols: int, cx=0.5, cy=0.5, w=1.0, h=1.0) -> tuple:
    cw, ch = w / cols, h / rows
    x0, y0 = cx - w / 2, cy - h / 2
    return tuple(
        (x0 + (j + 0.5) * cw, y0 + (i + 0.5) * ch, cw, ch)
        for i in range(rows)
        for j in range(cols)
    )


def _single(box, offset):
    return ComponentLayout(1, (box,), False, offset)


FULL = (0.5, 0.5, 1.0, 1.0)

CONFIGURATIONS = {
    "Center": FigureConfiguration("Center", (_single(FULL, 0),)),
    "TwoByTwoGrid": FigureConfiguration(
        "TwoByTwoGrid", (ComponentLayout(4, _grid_boxes(2, 2), True, 0),)
    ),
    "ThreeByThreeGrid": FigureConfiguration(
        "ThreeByThreeGrid", (ComponentLayout(9, _grid_boxes(3, 3), True, 0),)
    ),
    "OutInCenter": FigureConfiguration(
        "OutInCenter",
        (_single(FULL, 0), _single((0.5, 0.5, 0.33, 0.33), 1)),
    ),
    "OutInGrid": FigureConfiguration(
        "OutInGrid",
        (
            _single(FULL, 0),
            ComponentLayout(4, _grid_boxes(2, 2, w=0.5, h=0.5), True, 1),
        ),
    ),
    "LeftRight": FigureConfiguration(
        "LeftRight",
        (_single((0.25, 0.5, 0.5, 1.0), 0), _single((0.75, 0.5, 0.5, 1.0), 1)),
    ),
    "UpDown": FigureConfiguration(
        "UpDown",
        (_single((0.5, 0.25, 1.0, 0.5), 0), _single((0.5, 0.75, 1.0, 0.5), 1)),
    ),
}
CONFIG_NAMES = tuple(CONFIGURATIONS)

_ALIASES = {
    "center": "Center",
    "2x2grid": "TwoByTwoGrid",
    "3x3grid": "ThreeByThreeGrid",
    "o-ic": "OutInCenter",
    "o-ig": "OutInGrid",
    "l-r": "LeftRight",
    "u-d": "UpDown",
}


def get_configuration(name: str) -> FigureConfiguration:
    key = _ALIASES.get(name.lower(), name)
    for cand in CONFIGURATIONS:
        if cand.lower() == key.lower():
            return CONFIGURATIONS[cand]
    raise KeyError(f"unknown configuration {name!r}")


@dataclass(frozen=True)
class Entity:
    slot: int
    type_idx: int
    size_idx: int
    color_idx: int
    angle_idx: int = 0


@dataclass(frozen=True)
class ComponentState:
    entities: tuple  # sorted by slot
    uniformity: bool = True

    @property
    def slots(self) -> frozenset:
        return frozenset(e.slot for e in self.entities)

    @property
    def count(self) -> int:
        return len(self.entities)


@dataclass(frozen=True)
class Panel:
    components: tuple


def make_component(slots, type_idx, size_idx, color_idx, angles, uniformity=True) -> ComponentState:
    """Build a component whose entities share type/size/color; `angles` maps slot -> angle."""
    ents = tuple(
        Entity(s, type_idx, size_idx, color_idx, angles[s] if not isinstance(angles, int) else angles)
        for s in sorted(slots)
    )
    return ComponentState(ents, uniformity)


def validate_panel(p: Panel, cfg: FigureConfiguration) -> None:
    if len(p.components) != cfg.n_components:
        raise ValueError(
            f"panel has {len(p.components)} components, {cfg.name} needs {cfg.n_components}"
        )
    for ci, (comp, layout) in enumerate(zip(p.components, cfg.components)):
        slots = [e.slot for e in comp.entities]
        if len(set(slots)) != len(slots):
            raise ValueError(f"component {ci}: duplicate slots {slots}")
        if slots != sorted(slots):
            raise ValueError(f"component {ci}: entities not sorted by slot")
        for e in comp.entities:
            if not 0 <= e.slot < layout.n_slots:
                raise ValueError(f"component {ci}: slot {e.slot} out of range")
            if not (
                0 <= e.type_idx < N_TYPES
                and 0 <= e.size_idx < N_SIZES
                and 0 <= e.color_idx < N_COLORS
                and 0 <= e.angle_idx < N_ANGLES
            ):
                raise ValueError(f"component {ci}: entity {e} out of domain")


def _entity_field(attr: AttributeKind) -> str:
    return {
        AttributeKind.TYPE: "type_idx",
        AttributeKind.SIZE: "size_idx",
        AttributeKind.COLOR: "color_idx",
        AttributeKind.ANGLE: "angle_idx",
    }[attr]


def attribute_value(p: Panel, addr: AttributeAddress):
    """Value of a rule-eligible attribute.

    Number is the entity count and Position the occupied slot set. Type, Size
    and Color give the shared index, or a per-slot tuple when entities disagree
    (None for an empty component).
    """
    comp = p.components[addr.component]
    attr = addr.attribute
    if attr is AttributeKind.NUMBER:
        return comp.count
    if attr is AttributeKind.POSITION:
        return comp.slots
    if attr is AttributeKind.UNIFORMITY:
        return comp.uniformity
    field = _entity_field(attr)
    vals = tuple(getattr(e, field) for e in comp.entities)
    if not vals:
        return None
    if all(v == vals[0] for v in vals):
        return vals[0]
    return tuple((e.slot, v) for e, v in zip(comp.entities, vals))


def panel_diff(a: Panel, b: Panel) -> set:
    """Rule-eligible addresses at which two panels differ.

    Number and Position are reported independently: a count change reports
    Number only, a slot-set change at equal count reports Position.
    """
    if len(a.components) != len(b.components):
        raise ValueError("panels belong to different configurations")
    out = set()
    for ci, (ca, cb) in enumerate(zip(a.components, b.components)):
        if ca.count != cb.count:
            out.add(AttributeAddress(ci, AttributeKind.NUMBER))
        elif ca.slots != cb.slots:
            out.add(AttributeAddress(ci, AttributeKind.POSITION))
        for attr in ENTITY_ATTRIBUTES:
            addr = AttributeAddress(ci, attr)
            if attribute_value(a, addr) != attribute_value(b, addr):
                out.add(addr)
    return out


@lru_cache(maxsize=None)
def _slot_subsets(n: int) -> tuple:
    subs = []
    for k in range(1, n + 1):
        subs.extend(frozenset(c) for c in itertools.combinations(range(n), k))
    return tuple(subs)


def attribute_domain(attr: AttributeKind, layout: ComponentLayout) -> tuple:
    """All admissible values of a rule-eligible attribute within one component."""
    if attr is AttributeKind.NUMBER:
        return tuple(range(1, layout.n_slots + 1))
    if attr is AttributeKind.POSITION:
        return _slot_subsets(layout.n_slots)
    if attr is AttributeKind.TYPE:
        return tuple(range(N_TYPES))
    if attr is AttributeKind.SIZE:
        return tuple(range(N_SIZES))
    if attr is AttributeKind.COLOR:
        return tuple(range(N_COLORS))
    raise ValueError(f"{attr} is not rule-eligible")


def encode_panel(p: Panel, cfg: FigureConfiguration, out: np.ndarray | None = None) -> np.ndarray:
    """Fixed-length feature vector; blind to Angle and Uniformity."""
    vec = np.zeros(FEATURE_DIM) if out is None else out
    for comp, layout in zip(p.components, cfg.components):
        for e in comp.entities:
            base = (layout.block_offset + e.slot) * BLOCK_WIDTH
            vec[base] = 1.0
            vec[base + _TYPE_OFF + e.type_idx] = 1.0
            vec[base + _SIZE_OFF + e.size_idx] = 1.0
            vec[base + _COLOR_OFF + e.color_idx] = 1.0
    return vec


def encode_panels(panels, cfg: FigureConfiguration) -> np.ndarray:
    out = np.zeros((len(panels), FEATURE_DIM))
    for i, p in enumerate(panels):
        encode_panel(p, cfg, out[i])
    return out
