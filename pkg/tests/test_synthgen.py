import numpy as np
import pytest

from tablekit.annotation import dumps_annotation
from tablekit.geometry import Deformation
from tablekit.metrics import adjacency_relations, grids_of
from tablekit.rng import SplitMix64
from tablekit.structure import TableGrid
from tablekit.synthgen import (SynthConfig, SynthError, deform_annotation, generate_table, random_deformation,
                               stack_tables, suite_config, table_bounds)


def test_splitmix64_reference_stream():
    r = SplitMix64(1234567)
    assert [r.next_u64() for _ in range(2)] == [6457827717110365317, 3203168211198807973]


def test_rng_ranges():
    r = SplitMix64(5)
    draws = [r.randint(2, 4) for _ in range(300)]
    assert set(draws) == {2, 3, 4}
    assert all(0 <= r.random() < 1 for _ in range(300))


def test_plain_2x2():
    a = generate_table(SynthConfig(rows=2, cols=2))
    assert sorted(c.spans for c in a.cells) == [(0, 0, 0, 0), (0, 0, 1, 1), (1, 1, 0, 0), (1, 1, 1, 1)]


def test_forced_merge():
    a = generate_table(SynthConfig(rows=2, cols=2, merges=(((0, 0), (0, 1)),)))
    assert len(a.cells) == 3
    assert sorted(c.col_span for c in a.cells) == [1, 1, 2]


def test_forced_merge_must_be_rectangular_union():
    cfg = SynthConfig(rows=3, cols=3, merges=(((0, 0), (1, 1)), ((1, 1), (2, 2))))
    with pytest.raises(SynthError):
        generate_table(cfg)


def test_same_seed_byte_identical():
    cfg = SynthConfig(rows=6, cols=5, merge_prob=0.3, seed=42, deformation=Deformation.rotation(7, (100, 80)))
    assert dumps_annotation(generate_table(cfg)) == dumps_annotation(generate_table(cfg))


def test_different_seeds_differ():
    a = generate_table(SynthConfig(rows=4, cols=4, merge_prob=0.3, seed=1))
    b = generate_table(SynthConfig(rows=4, cols=4, merge_prob=0.3, seed=2))
    assert dumps_annotation(a) != dumps_annotation(b)


def test_generated_grids_are_valid():
    for seed in range(40):
        a = generate_table(SynthConfig(rows=8, cols=8, merge_prob=0.4, seed=seed))
        grid = TableGrid.from_table(a.tables[0])
        assert (grid.n_rows, grid.n_cols) == (8, 8)
        assert max(max(c.row_span, c.col_span) for c in a.cells) <= 3


def test_identity_deformation_unchanged():
    a = generate_table(SynthConfig(seed=3, merge_prob=0.3))
    assert dumps_annotation(deform_annotation(a, Deformation.identity())) == dumps_annotation(a)


def test_rotation_keeps_spans():
    a = generate_table(SynthConfig(rows=2, cols=2))
    x0, y0, x1, y1 = table_bounds(a)
    b = deform_annotation(a, Deformation.rotation(10, ((x0 + x1) / 2, (y0 + y1) / 2)))
    assert [c.spans for c in b.cells] == [c.spans for c in a.cells]
    assert not np.allclose(b.cells[0].quad.vertices, a.cells[0].quad.vertices)
    assert adjacency_relations(grids_of(a)[0]) == adjacency_relations(grids_of(b)[0])


def test_excessive_curve_rejected_naming_cell():
    a = generate_table(SynthConfig(rows=2, cols=2, cell_height=(20, 20)))
    with pytest.raises(SynthError, match="cell"):
        deform_annotation(a, Deformation.curve(10.5, 200))
    deform_annotation(a, Deformation.curve(10.0, 200))


def test_deformed_content_stays_on_canvas():
    a = generate_table(SynthConfig(rows=4, cols=6, margin=2))
    b = deform_annotation(a, Deformation.rotation(30, (0, 0)))
    x0, y0, x1, y1 = table_bounds(b)
    assert x0 >= 0 and y0 >= 0 and x1 <= b.image_size[0] and y1 <= b.image_size[1]


def test_stack_tables_renumbers():
    a = generate_table(SynthConfig(rows=2, cols=2, seed=1))
    b = generate_table(SynthConfig(rows=3, cols=2, seed=2))
    s = stack_tables([a, b])
    assert [t.id for t in s.tables] == [0, 1]
    assert [c.id for c in s.cells] == list(range(10))


def test_random_deformation_families():
    a = generate_table(SynthConfig(rows=5, cols=5))
    x0, y0, x1, y1 = table_bounds(a)
    rng = SplitMix64(9)
    for _ in range(20):
        rot = random_deformation(rng, a, "rotation")
        angle = np.degrees(np.arctan2(rot.matrix[1, 0], rot.matrix[0, 0]))
        assert abs(angle) <= 30
        curve = random_deformation(rng, a, "curve")
        assert 0 <= curve.amplitude <= 0.05 * (y1 - y0)
        deform_annotation(a, random_deformation(rng, a, "perspective"))


def test_suite_covers_all_families():
    kinds = {suite_config(s)[1] for s in range(40)}
    assert kinds == {"identity", "rotation", "perspective", "curve"}


def test_config_validation():
    with pytest.raises(SynthError):
        SynthConfig(rows=0)
    with pytest.raises(SynthError):
        SynthConfig(merge_prob=1.0)
