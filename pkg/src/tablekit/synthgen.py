"""Deterministic synthetic wired tables with ground-truth spans.

Randomness comes from :class:`tablekit.rng.SplitMix64` only, so a config
(seed included) always yields the same annotation on any platform.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .annotation import Annotation, Cell, Table
from .geometry import CellQuad, Deformation, GeometryError, homography_from_points, warp_points
from .rng import ALGORITHM, SplitMix64
from .structure import TableGrid


class SynthError(ValueError):
    pass


@dataclass(frozen=True)
class SynthConfig:
    rows: int = 3
    cols: int = 3
    merge_prob: float = 0.0
    cell_width: tuple[float, float] = (40.0, 90.0)
    cell_height: tuple[float, float] = (24.0, 48.0)
    margin: float = 24.0
    deformation: Deformation = field(default_factory=Deformation.identity)
    seed: int = 0
    merges: tuple = ()  # forced ((r0, c0), (r1, c1)) rectangles, applied first
    max_span: int = 3
    origin: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise SynthError("rows and cols must be >= 1")
        if not 0 <= self.merge_prob < 1:
            raise SynthError("merge_prob must lie in [0, 1)")
        for lo, hi in (self.cell_width, self.cell_height):
            if not 0 < lo <= hi:
                raise SynthError("cell size ranges must be positive and ordered")
        if self.margin < 0:
            raise SynthError("margin must be >= 0")


def _try_merge(owner: np.ndarray, r0, c0, r1, c1, max_span: int, check_lines: bool = True) -> bool:
    rows, cols = owner.shape
    if not (0 <= r0 <= r1 < rows and 0 <= c0 <= c1 < cols):
        return False
    if r1 - r0 + 1 > max_span or c1 - c0 + 1 > max_span:
        return False
    ids = set(owner[r0:r1 + 1, c0:c1 + 1].ravel())
    for i in ids:
        rr, cc = np.nonzero(owner == i)
        if rr.min() < r0 or rr.max() > r1 or cc.min() < c0 or cc.max() > c1:
            return False
    trial = owner.copy()
    trial[r0:r1 + 1, c0:c1 + 1] = min(ids)
    if check_lines:
        # every interior grid line must still bound some cell
        for r in range(1, rows):
            if np.all(trial[r - 1] == trial[r]):
                return False
        for c in range(1, cols):
            if np.all(trial[:, c - 1] == trial[:, c]):
                return False
    owner[:] = trial
    return True


def generate_table(cfg: SynthConfig, table_id: int = 0) -> Annotation:
    """Axis-aligned grid with random row heights, column widths and rectangular merges.

    Row heights and column widths are whole pixels.  The table sits at
    ``origin + margin`` and the image is the table plus a margin all round;
    ``cfg.deformation`` is applied afterwards via :func:`deform_annotation`.
    """
    rng = SplitMix64(cfg.seed)
    widths = [rng.randint(int(math.ceil(cfg.cell_width[0])), int(cfg.cell_width[1])) for _ in range(cfg.cols)]
    heights = [rng.randint(int(math.ceil(cfg.cell_height[0])), int(cfg.cell_height[1])) for _ in range(cfg.rows)]
    if min(widths + heights) <= 0:
        raise SynthError("cell size range admits no positive integer size")
    ox, oy = cfg.origin[0] + cfg.margin, cfg.origin[1] + cfg.margin
    xs = ox + np.concatenate([[0], np.cumsum(widths)]).astype(float)
    ys = oy + np.concatenate([[0], np.cumsum(heights)]).astype(float)

    owner = np.arange(cfg.rows * cfg.cols).reshape(cfg.rows, cfg.cols)
    for (r0, c0), (r1, c1) in cfg.merges:
        if not _try_merge(owner, r0, c0, r1, c1, max(cfg.max_span, r1 - r0 + 1, c1 - c0 + 1), check_lines=False):
            raise SynthError(f"forced merge {(r0, c0)}-{(r1, c1)} is not a rectangular union")
    if cfg.merge_prob > 0:
        for r in range(cfg.rows):
            for c in range(cfg.cols):
                if rng.random() < cfg.merge_prob:
                    dr, dc = rng.choice(((0, 1), (1, 0), (1, 1), (0, 2)))
                    lo_r, lo_c = np.argwhere(owner == owner[r, c]).min(axis=0)
                    hi_r, hi_c = np.argwhere(owner == owner[r, c]).max(axis=0)
                    _try_merge(owner, lo_r, lo_c, hi_r + dr, hi_c + dc, cfg.max_span)

    cells = []
    for i in sorted(set(owner.ravel()), key=lambda i: tuple(np.argwhere(owner == i)[0])):
        rr, cc = np.nonzero(owner == i)
        r0, r1, c0, c1 = int(rr.min()), int(rr.max()), int(cc.min()), int(cc.max())
        quad = CellQuad.from_box(xs[c0], ys[r0], xs[c1 + 1], ys[r1 + 1])
        cells.append(Cell(len(cells), quad, r0, r1, c0, c1))
    TableGrid.from_table(Table(table_id, cells))  # self-check of span invariants

    size = (int(math.ceil(xs[-1] + cfg.margin)), int(math.ceil(ys[-1] + cfg.margin)))
    a = Annotation(size, [Table(table_id, cells)])
    if cfg.deformation.kind != "identity":
        a = deform_annotation(a, cfg.deformation, pad=cfg.margin)
    return a


def table_bounds(a: Annotation) -> tuple[float, float, float, float]:
    pts = np.concatenate([c.quad.vertices for c in a.cells])
    return (*pts.min(axis=0), *pts.max(axis=0))


def deform_annotation(a: Annotation, d: Deformation, pad: float = 16.0) -> Annotation:
    """Warp every vertex; spans are untouched.

    If the warped cells leave the image, everything is shifted and the canvas
    enlarged to keep ``pad`` pixels of margin.  Raises :class:`SynthError`
    naming the cell when a cell would stop being a convex quad, or when a
    curve's amplitude exceeds half the smallest cell extent along the
    displaced axis.
    """
    if d.kind == "curve" and a.cells:
        ext = []
        for c in a.cells:
            v = c.quad.vertices
            ext.append(min(np.linalg.norm(v[3] - v[0]), np.linalg.norm(v[2] - v[1])) if d.axis == "y"
                       else min(np.linalg.norm(v[1] - v[0]), np.linalg.norm(v[2] - v[3])))
        worst = int(np.argmin(ext))
        if d.amplitude > 0.5 * ext[worst]:
            raise SynthError(f"curve amplitude {d.amplitude:g} exceeds half the extent of cell "
                             f"{a.cells[worst].id} ({ext[worst]:g} px)")

    tables = []
    for t in a.tables:
        cells = []
        for c in t.cells:
            try:
                quad = CellQuad(warp_points(c.quad.vertices, d))
            except GeometryError as exc:
                raise SynthError(f"cell {c.id} is no longer a convex quad after deformation: {exc}") from None
            cells.append(Cell(c.id, quad, c.start_row, c.end_row, c.start_col, c.end_col))
        tables.append(Table(t.id, cells))
    out = Annotation(a.image_size, tables)
    if not out.cells:
        return out

    x0, y0, x1, y1 = table_bounds(out)
    w, h = a.image_size
    if x0 >= 0 and y0 >= 0 and x1 <= w and y1 <= h:
        return out
    sx, sy = max(0.0, pad - x0), max(0.0, pad - y0)
    shift = Deformation.affine([[1, 0, sx], [0, 1, sy]])
    out = out.map_quads(lambda q: CellQuad(warp_points(q.vertices, shift)))
    size = (int(math.ceil(max(w + sx, x1 + sx + pad))), int(math.ceil(max(h + sy, y1 + sy + pad))))
    return Annotation(size, out.tables)


def stack_tables(annotations, gap: float = 40.0) -> Annotation:
    """Place single-image annotations side by side in one image, renumbering cells and tables."""
    tables, x_off, height, next_id = [], 0.0, 0, 0
    for a in annotations:
        shift = Deformation.affine([[1, 0, x_off], [0, 1, 0]])
        for t in a.tables:
            cells = []
            for c in t.cells:
                cells.append(Cell(next_id, CellQuad(warp_points(c.quad.vertices, shift)),
                                  c.start_row, c.end_row, c.start_col, c.end_col))
                next_id += 1
            tables.append(Table(len(tables), cells))
        x_off += a.image_size[0] + gap
        height = max(height, a.image_size[1])
    return Annotation((int(math.ceil(x_off - gap)), height), tables)


# --------------------------------------------------------------------------
# deformation families used by the round-trip suite

def random_deformation(rng: SplitMix64, a: Annotation, kind: str | None = None,
                       max_rotation: float = 30.0, max_curve_frac: float = 0.05,
                       max_perspective_frac: float = 0.05) -> Deformation:
    """Draw a deformation for the table in ``a``.

    Rotations stay within ``max_rotation`` degrees about the table center;
    curves have amplitude at most ``max_curve_frac`` of the table height (and
    at most half the smallest cell height) with a half-wave over the table
    width; perspective jitters the table corners by up to
    ``max_perspective_frac`` of the table size.
    """
    x0, y0, x1, y1 = table_bounds(a)
    w, h = x1 - x0, y1 - y0
    kind = kind or rng.choice(("identity", "rotation", "perspective", "curve"))
    if kind == "identity":
        return Deformation.identity()
    if kind == "rotation":
        return Deformation.rotation(rng.uniform(-max_rotation, max_rotation), ((x0 + x1) / 2, (y0 + y1) / 2))
    if kind == "perspective":
        src = [(x0, y0), (x1, y0), (x1, y1), (x0, y1)]
        dst = [(x + rng.uniform(-1, 1) * max_perspective_frac * w, y + rng.uniform(-1, 1) * max_perspective_frac * h)
               for x, y in src]
        return Deformation.perspective(homography_from_points(src, dst))
    if kind == "curve":
        min_h = min(min(np.linalg.norm(c.quad.vertices[3] - c.quad.vertices[0]),
                        np.linalg.norm(c.quad.vertices[2] - c.quad.vertices[1])) for c in a.cells)
        amp = rng.uniform(0.0, 1.0) * min(max_curve_frac * h, 0.5 * min_h)
        return Deformation.curve(amp, 2.0 * w, "y", origin=x0)
    raise SynthError(f"unknown deformation kind {kind!r}")


def suite_config(seed: int, rows=(2, 10), cols=(2, 10), merge_prob: float = 0.2) -> tuple[SynthConfig, str]:
    """Config for one round-trip case: random size, merges and deformation family."""
    rng = SplitMix64(seed ^ 0x5DEECE66D)
    base = SynthConfig(rows=rng.randint(*rows), cols=rng.randint(*cols), merge_prob=merge_prob, seed=seed)
    kind = rng.choice(("identity", "rotation", "perspective", "curve"))
    a = generate_table(base)
    d = random_deformation(rng, a, kind)
    return SynthConfig(base.rows, base.cols, base.merge_prob, base.cell_width, base.cell_height,
                       base.margin, d, seed), kind


RNG_ALGORITHM = ALGORITHM
