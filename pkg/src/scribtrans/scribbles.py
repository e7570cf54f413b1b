"""Synthetic scribbles from dense masks.

Stands in for human strokes: per connected region the generator erodes the
region, draws a random polyline through interior points with the requested
stroke width, and truncates strokes so the labeled fraction stays within the
coverage budget. Every stamped pixel is clipped to its source region, so a
scribble can never disagree with the dense mask. Every class occupying at
least ``min_region_area`` pixels keeps at least one labeled pixel (a reserved
seed pixel), or the budget is rejected as infeasible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import ContractError, InfeasibleBudgetError
from .masks import DENSE, IGNORE, SCRIBBLE, LabelMask

_EIGHT = np.ones((3, 3), dtype=bool)


@dataclass
class ScribbleParams:
    stroke_width: int = 2
    coverage_budget: float = 0.05
    min_region_area: int = 16
    seed: int = 0

    def validate(self) -> None:
        if self.stroke_width < 1:
            raise ContractError(f"stroke_width must be >= 1, got {self.stroke_width}")
        if not (0 < self.coverage_budget <= 1):
            raise ContractError(f"coverage_budget must be in (0, 1], got {self.coverage_budget}")


def _disk_offsets(width: int) -> np.ndarray:
    r = width / 2.0
    span = int(np.floor(r))
    dy, dx = np.mgrid[-span : span + 1, -span : span + 1]
    keep = dy * dy + dx * dx <= r * r
    return np.stack([dy[keep], dx[keep]], axis=1)


def _line_points(p0: np.ndarray, p1: np.ndarray) -> np.ndarray:
    n = int(max(abs(p1[0] - p0[0]), abs(p1[1] - p0[1]))) + 1
    ys = np.rint(np.linspace(p0[0], p1[0], n)).astype(np.int64)
    xs = np.rint(np.linspace(p0[1], p1[1], n)).astype(np.int64)
    return np.stack([ys, xs], axis=1)


def _interior_coords(region: np.ndarray, stroke_width: int) -> np.ndarray:
    for it in range(stroke_width, 0, -1):
        eroded = ndimage.binary_erosion(region, structure=_EIGHT, iterations=it)
        if eroded.any():
            return np.argwhere(eroded)
    return np.argwhere(region)


def _polyline(region: np.ndarray, rng: np.random.Generator, stroke_width: int) -> np.ndarray:
    """Ordered thin-line pixel coordinates of a random polyline through the
    region interior."""
    coords = _interior_coords(region, stroke_width)
    m = int(rng.integers(2, 6))
    idx = rng.choice(len(coords), size=min(m, len(coords)), replace=False)
    pts = coords[idx].astype(np.float64)
    # visit points in angular order around their centroid to avoid doubling back
    center = pts.mean(axis=0)
    pts = pts[np.argsort(np.arctan2(pts[:, 0] - center[0], pts[:, 1] - center[1]))]
    segs = [_line_points(pts[i], pts[i + 1]) for i in range(len(pts) - 1)]
    if not segs:
        return pts.astype(np.int64)
    return np.concatenate(segs, axis=0)


def synthesize_scribbles(dense: LabelMask, params: ScribbleParams) -> LabelMask:
    """Derive a scribble-kind mask from a dense mask, deterministic in
    ``params.seed``."""
    params.validate()
    if dense.kind != DENSE:
        raise ContractError(f"expected a dense mask, got kind {dense.kind!r}")
    dense.validate()

    h, w = dense.shape
    budget_px = int(np.floor(params.coverage_budget * h * w))
    areas = np.bincount(dense.data[dense.labeled()].ravel(), minlength=dense.num_classes)
    qualifying = [c for c in range(dense.num_classes) if areas[c] >= max(params.min_region_area, 1)]
    if budget_px < len(qualifying):
        raise InfeasibleBudgetError(
            f"budget of {budget_px} px cannot cover {len(qualifying)} classes "
            f"(coverage_budget={params.coverage_budget})"
        )

    rng = np.random.default_rng(params.seed)
    out = np.full((h, w), IGNORE, dtype=np.int64)
    total = 0
    offsets = _disk_offsets(params.stroke_width)

    # collect connected regions per class, largest first
    regions: list[tuple[int, np.ndarray, int]] = []
    components: dict[int, list[np.ndarray]] = {}
    for c in range(dense.num_classes):
        labeled, n = ndimage.label(dense.data == c, structure=_EIGHT)
        comps = sorted(
            (labeled == i for i in range(1, n + 1)), key=lambda m: -int(m.sum())
        )
        comps = [m for m in comps if m.any()]
        components[c] = comps
        for comp in comps:
            if int(comp.sum()) >= max(params.min_region_area, 1):
                regions.append((c, comp, int(comp.sum())))

    # reserve one seed pixel per qualifying class so no class can starve
    for c in qualifying:
        comp = components[c][0]
        coords = _interior_coords(comp, params.stroke_width)
        y, x = coords[int(rng.integers(0, len(coords)))]
        if out[y, x] == IGNORE:
            out[y, x] = c
            total += 1

    region_area = sum(a for _, _, a in regions)
    for c, comp, area in regions:
        if total >= budget_px:
            break
        quota = max(1, int(np.floor(budget_px * area / max(region_area, 1))))
        stamped = 0
        for y, x in _polyline(comp, rng, params.stroke_width):
            if stamped >= quota or total >= budget_px:
                break
            for dy, dx in offsets:
                yy, xx = y + dy, x + dx
                if not (0 <= yy < h and 0 <= xx < w):
                    continue
                if not comp[yy, xx] or out[yy, xx] != IGNORE:
                    continue
                out[yy, xx] = c
                stamped += 1
                total += 1
                if stamped >= quota or total >= budget_px:
                    break

    return LabelMask(out, dense.num_classes, SCRIBBLE)
