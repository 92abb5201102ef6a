import numpy as np
import pytest

from tablekit.annotation import Cell
from tablekit.geometry import CellQuad, Deformation
from tablekit.structure import (HORIZONTAL, VERTICAL, ParseCell, StructureError, TableGrid, assign_rc, build_lines,
                                order_lines, parse_cells_from_quads, parse_table)
from tablekit.synthgen import SynthConfig, generate_table

from conftest import grid_quads, merged_top_annotation


def spans_by_id(grid):
    return {c.id: c.spans for c in grid.cells}


def parse_annotation(a):
    t = a.tables[0]
    cells = parse_cells_from_quads([c.quad for c in t.cells], [c.id for c in t.cells])
    return parse_table(cells)


@pytest.mark.parametrize("quads, n_lines", [
    (grid_quads(1, 1), 2),
    (grid_quads(2, 2), 3),
])
def test_build_lines_counts(quads, n_lines):
    lines = build_lines(parse_cells_from_quads(quads))
    assert len(lines[HORIZONTAL]) == n_lines and len(lines[VERTICAL]) == n_lines


def test_build_lines_merged_top():
    a = merged_top_annotation()
    lines = build_lines(parse_cells_from_quads([c.quad for c in a.cells]))
    assert len(lines[HORIZONTAL]) == 3 and len(lines[VERTICAL]) == 3
    middle = [ln for ln in lines[VERTICAL] if {e[0] for e in ln.edges} == {1, 2}]
    assert len(middle) == 1
    assert sorted(middle[0].edges) == [(1, "right"), (2, "left")]


def test_order_lines_two_rows_top_to_bottom():
    cells = parse_cells_from_quads(grid_quads(2, 1))
    lines = order_lines(build_lines(cells), cells)
    by_index = sorted(lines[HORIZONTAL], key=lambda ln: ln.index)
    assert [ln.index for ln in by_index] == [0, 1, 2]
    ys = [np.mean([cells[c].corners[0 if s == "up" else 3][1] for c, s in ln.edges]) for ln in by_index]
    assert ys == sorted(ys)


def test_single_cell_indices():
    cells = parse_cells_from_quads(grid_quads(1, 1))
    lines = order_lines(build_lines(cells), cells)
    assert sorted(ln.index for ln in lines[HORIZONTAL]) == [0, 1]
    assert sorted(ln.index for ln in lines[VERTICAL]) == [0, 1]


@pytest.mark.parametrize("deformation", [Deformation.rotation(25, (150, 40)), Deformation.rotation(-25, (150, 40))])
def test_tilted_three_row_table_uses_containment_order(deformation):
    cfg = SynthConfig(rows=3, cols=1, cell_width=(300, 300), cell_height=(20, 20), deformation=deformation)
    a = generate_table(cfg)
    quads = [c.quad.vertices for c in a.cells]
    # the line below row 1 reaches higher than the lowest point of the line above it
    assert quads[1][2:, 1].min() < quads[0][2:, 1].max()
    grid = parse_annotation(a)
    assert spans_by_id(grid) == {c.id: c.spans for c in a.cells}


def test_curved_three_row_table():
    cfg = SynthConfig(rows=3, cols=4, cell_width=(60, 60), cell_height=(24, 24),
                      deformation=Deformation.curve(11, 240, "y", 24))
    a = generate_table(cfg)
    assert spans_by_id(parse_annotation(a)) == {c.id: c.spans for c in a.cells}


def test_assign_rc_2x2():
    grid = parse_table(parse_cells_from_quads(grid_quads(2, 2)))
    assert spans_by_id(grid) == {0: (0, 0, 0, 0), 1: (0, 0, 1, 1), 2: (1, 1, 0, 0), 3: (1, 1, 1, 1)}
    assert (grid.n_rows, grid.n_cols) == (2, 2)


def test_assign_rc_merged_top():
    grid = parse_annotation(merged_top_annotation())
    assert spans_by_id(grid) == {0: (0, 0, 0, 1), 1: (1, 1, 0, 0), 2: (1, 1, 1, 1)}


def test_assign_rc_single_row():
    grid = parse_table(parse_cells_from_quads(grid_quads(1, 3)))
    assert [(c.start_row, c.start_col) for c in sorted(grid.cells, key=lambda c: c.id)] == [(0, 0), (0, 1), (0, 2)]


def test_assign_rc_rejects_misordered_lines():
    cells = parse_cells_from_quads(grid_quads(1, 1))
    lines = order_lines(build_lines(cells), cells)
    for ln in lines[HORIZONTAL]:
        ln.index = 1 - ln.index
    with pytest.raises(StructureError):
        assign_rc(cells, lines)


def test_permutation_invariance(rng):
    for seed in range(8):
        a = generate_table(SynthConfig(rows=5, cols=5, merge_prob=0.3, seed=seed,
                                       deformation=Deformation.rotation(12, (100, 100))))
        t = a.tables[0]
        expected = {c.id: c.spans for c in t.cells}
        order = rng.permutation(len(t.cells))
        quads = [t.cells[i].quad for i in order]
        ids = [t.cells[i].id for i in order]
        cells = parse_cells_from_quads(quads, ids)
        assert spans_by_id(parse_table(cells)) == expected


def test_generator_spans_reproduced():
    for seed in range(30):
        a = generate_table(SynthConfig(rows=6, cols=6, merge_prob=0.25, seed=seed))
        assert spans_by_id(parse_annotation(a)) == {c.id: c.spans for c in a.cells}


def test_table_grid_rejects_overlap():
    q = CellQuad.from_box(0, 0, 1, 1)
    with pytest.raises(StructureError):
        TableGrid(0, [Cell(0, q, 0, 0, 0, 1), Cell(1, q, 0, 0, 1, 1)], 1, 2)


def test_table_grid_rejects_out_of_range():
    q = CellQuad.from_box(0, 0, 1, 1)
    with pytest.raises(StructureError):
        TableGrid(0, [Cell(0, q, 0, 2, 0, 0)], 2, 1)


def test_empty_table():
    grid = parse_table([])
    assert grid.cells == [] and grid.n_rows == 0


def test_parse_cell_vertex_key():
    c = ParseCell(3, np.zeros((4, 2)), [None, 7, None, None])
    assert c.vertex_key(0) == ("own", 3, 0) and c.vertex_key(1) == ("v", 7)
