import numpy as np
import pytest

from tablekit.annotation import Annotation, Cell, Table
from tablekit.geometry import CellQuad


def grid_quads(rows, cols, w=40.0, h=30.0, x0=20.0, y0=20.0):
    return [CellQuad.from_box(x0 + c * w, y0 + r * h, x0 + (c + 1) * w, y0 + (r + 1) * h)
            for r in range(rows) for c in range(cols)]


def grid_annotation(rows, cols, w=40.0, h=30.0, size=None):
    cells = [Cell(i, q, i // cols, i // cols, i % cols, i % cols)
             for i, q in enumerate(grid_quads(rows, cols, w, h))]
    size = size or (int(40 + cols * w), int(40 + rows * h))
    return Annotation(size, [Table(0, cells)])


def merged_top_annotation():
    """2x2 grid whose top row is one cell: A on top, B and C below."""
    a = CellQuad.from_box(20, 20, 100, 50)
    b = CellQuad.from_box(20, 50, 60, 80)
    c = CellQuad.from_box(60, 50, 100, 80)
    cells = [Cell(0, a, 0, 0, 0, 1), Cell(1, b, 1, 1, 0, 0), Cell(2, c, 1, 1, 1, 1)]
    return Annotation((120, 100), [Table(0, cells)])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
