"""End-to-end decoding and the synthetic round-trip check."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .annotation import Annotation, Cell, Table
from .decoder import CENTER, VERTEX, DecodeConfig, cycle_match, decode_cells, extract_peaks, group_and_snap
from .geometry import CellQuad, GeometryError, is_convex_clockwise
from .metrics import adjacency_prf, grids_of, match_cells, table_teds
from .structure import ParseCell, StructureError, parse_table
from .synthgen import SynthConfig, generate_table
from .targets import TargetMaps, encode_annotation

logger = logging.getLogger(__name__)


class StageError(RuntimeError):
    """An error raised inside one pipeline stage; ``stage`` names it."""

    def __init__(self, stage: str, exc: Exception):
        super().__init__(f"[{stage}] {exc}")
        self.stage = stage
        self.cause = exc


@dataclass
class Decoded:
    annotation: Annotation
    diagnostics: list[str] = field(default_factory=list)


def decode_maps(maps: TargetMaps, cfg: DecodeConfig = DecodeConfig(),
                image_size: tuple[int, int] | None = None) -> Decoded:
    """Maps -> grouped cells with spans, as an :class:`Annotation`.

    Groups that fail to parse keep their cells without spans; the failure is
    recorded in ``diagnostics``.
    """
    s = maps.stride
    centers = extract_peaks(maps.keypoint_heatmap[0], maps.offset_map, s, cfg.center_threshold, cfg.max_peaks, CENTER)
    vertices = extract_peaks(maps.keypoint_heatmap[1], maps.offset_map, s, cfg.vertex_threshold, cfg.max_peaks, VERTEX)
    cells = decode_cells(centers, maps.cv_map, s)
    matches = cycle_match(cells, vertices, maps.vc_map, s, cfg.tau_for(s), cfg.mutual)
    groups, snapped = group_and_snap(cells, matches)
    by_id = {c.id: c for c in snapped}

    diagnostics = []
    tables = []
    for g in groups:
        members = [by_id[i] for i in g.cell_ids]
        quads = {}
        for c in members:
            corners = c.corners if is_convex_clockwise(c.corners) else None
            try:
                quads[c.id] = CellQuad(corners) if corners is not None else CellQuad.from_points(c.corners)
            except GeometryError:
                quads[c.id] = None
        members = [c for c in members if quads[c.id] is not None]
        pcs = [ParseCell(c.id, quads[c.id].vertices.copy(), list(c.vertex_ids)) for c in members]
        try:
            grid = parse_table(pcs, g.table_id, quads)
            tables.append(Table(g.table_id, sorted(grid.cells, key=lambda c: c.id)))
        except StructureError as exc:
            diagnostics.append(f"table {g.table_id}: {exc}")
            tables.append(Table(g.table_id, [Cell(c.id, quads[c.id]) for c in members]))
    if image_size is None:
        image_size = (maps.width * s, maps.height * s)
    return Decoded(Annotation(image_size, tables), diagnostics)


@dataclass
class Verdict:
    seed: int
    kind: str
    n_tables: int
    n_groups: int
    adjacency_f1: float
    teds: list[float]
    max_corner_error: float
    error: str | None = None

    @property
    def ok(self) -> bool:
        return (self.error is None and self.n_groups == self.n_tables and self.adjacency_f1 == 1.0
                and all(t == 1.0 for t in self.teds) and self.max_corner_error <= 0.5)


def max_corner_error(pred: Annotation, gt: Annotation, iou: float = 0.5) -> float:
    """Largest corner displacement over matched cells; inf if any ground-truth cell is unmatched."""
    mapping = match_cells(pred.cells, gt.cells, iou)
    if len(mapping) < len(gt.cells):
        return math.inf
    gt_by_id = {c.id: c for c in gt.cells}
    worst = 0.0
    for c in pred.cells:
        if c.id in mapping:
            d = np.linalg.norm(c.quad.vertices - gt_by_id[mapping[c.id]].quad.vertices, axis=1).max()
            worst = max(worst, float(d))
    return worst


def roundtrip_annotation(gt: Annotation, stride: int = 4, cfg: DecodeConfig = DecodeConfig(),
                         seed: int = -1, kind: str = "") -> Verdict:
    """Encode ``gt`` into ideal maps, decode and parse it back, and score the result."""
    n_tables = len(gt.tables)
    try:
        maps = encode_annotation(gt, stride)
    except Exception as exc:  # noqa: BLE001 - stage tag is the point
        return Verdict(seed, kind, n_tables, 0, 0.0, [0.0] * n_tables, math.inf, str(StageError("encode", exc)))
    try:
        decoded = decode_maps(maps, cfg, gt.image_size)
    except Exception as exc:  # noqa: BLE001
        return Verdict(seed, kind, n_tables, 0, 0.0, [0.0] * n_tables, math.inf, str(StageError("decode", exc)))
    pred = decoded.annotation
    error = "; ".join(decoded.diagnostics) or None
    pg, gg = grids_of(pred), grids_of(gt)
    f1 = adjacency_prf(pg, gg, 0.6)[2]
    return Verdict(seed, kind, n_tables, len(pred.tables), f1, table_teds(pg, gg),
                   max_corner_error(pred, gt), error)


def roundtrip(cfg: SynthConfig, stride: int = 4, decode_cfg: DecodeConfig = DecodeConfig(), kind: str = "") -> Verdict:
    try:
        gt = generate_table(cfg)
    except Exception as exc:  # noqa: BLE001
        return Verdict(cfg.seed, kind, 1, 0, 0.0, [0.0], math.inf, str(StageError("generate", exc)))
    return roundtrip_annotation(gt, stride, decode_cfg, cfg.seed, kind or cfg.deformation.kind)


def roundtrip_seed(seed: int, stride: int = 4, decode_cfg: DecodeConfig = DecodeConfig()) -> Verdict:
    """One case of the standard round-trip suite."""
    from .synthgen import suite_config

    cfg, kind = suite_config(seed)
    return roundtrip(cfg, stride, decode_cfg, kind)
