"""Grayscale rendering of symbolic panels to portable graymaps (P5)."""
from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .model import SIZE_SCALES, TYPE_EDGES, FigureConfiguration, Panel, gray_level

DEFAULT_PX = 160
MIN_PX = 32
RADIUS_FRACTION = 0.45
OUTLINE_PX = 1.5
FRAME_PX = 2


def _shape_masks(xs, ys, cx, cy, r, edges, rotation):
    """(inside, interior) boolean masks; interior excludes the outline band."""
    dx, dy = xs - cx, ys - cy
    if edges == 0:
        dist = np.hypot(dx, dy)
        return dist <= r, dist <= r - OUTLINE_PX
    # signed distance to each edge of a regular polygon, first vertex up
    apothem = r * math.cos(math.pi / edges)
    slack = None
    for i in range(edges):
        normal = -math.pi / 2 + rotation + (2 * i + 1) * math.pi / edges
        s = apothem - (dx * math.cos(normal) + dy * math.sin(normal))
        slack = s if slack is None else np.minimum(slack, s)
    return slack >= 0, slack >= OUTLINE_PX


def rasterize_panel(panel: Panel, cfg: FigureConfiguration, px: int = DEFAULT_PX) -> np.ndarray:
    """(px, px) uint8 image: white ground, black frame, filled outlined shapes."""
    if px < MIN_PX:
        raise ValueError(f"px must be at least {MIN_PX}")
    img = np.full((px, px), 255, dtype=np.uint8)
    coords = np.arange(px) + 0.5
    xs, ys = np.meshgrid(coords, coords)
    for comp, layout in zip(panel.components, cfg.components):
        for e in comp.entities:
            bx, by, bw, bh = layout.boxes[e.slot]
            half = min(bw, bh) * px / 2
            r = SIZE_SCALES[e.size_idx] * RADIUS_FRACTION * half
            inside, interior = _shape_masks(
                xs, ys, bx * px, by * px, r, TYPE_EDGES[e.type_idx], e.angle_idx * math.pi / 4
            )
            img[inside] = 0
            img[interior] = gray_level(e.color_idx)
    img[:FRAME_PX] = 0
    img[-FRAME_PX:] = 0
    img[:, :FRAME_PX] = 0
    img[:, -FRAME_PX:] = 0
    return img


def pgm_bytes(img: np.ndarray) -> bytes:
    h, w = img.shape
    return f"P5\n{w} {h}\n255\n".encode("ascii") + np.ascontiguousarray(img, dtype=np.uint8).tobytes()


def read_pgm(data: bytes) -> np.ndarray:
    parts = data.split(b"\n", 3)
    if parts[0] != b"P5" or parts[2] != b"255":
        raise ValueError("not an 8-bit P5 graymap")
    w, h = map(int, parts[1].split())
    return np.frombuffer(parts[3], dtype=np.uint8).reshape(h, w)


def cell_names() -> list:
    return [f"ctx{i}" for i in range(8)] + [f"cand{k}" for k in range(8)]


def render_puzzles(puzzles, out, px: int = DEFAULT_PX) -> dict:
    """Write img/<id>/<cell>.pgm for every panel plus index.json; returns the index."""
    out = Path(out)
    index = {"px": px, "cells": cell_names(), "puzzles": []}
    for p in puzzles:
        d = out / "img" / p.id
        d.mkdir(parents=True, exist_ok=True)
        for name, panel in zip(index["cells"], tuple(p.context) + tuple(p.candidates)):
            (d / f"{name}.pgm").write_bytes(pgm_bytes(rasterize_panel(panel, p.cfg, px)))
        index["puzzles"].append({"id": p.id, "config": p.config, "target": p.target})
    out.mkdir(parents=True, exist_ok=True)
    (out / "index.json").write_text(json.dumps(index, sort_keys=True, indent=1) + "\n")
    return index
