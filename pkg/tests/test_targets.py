import numpy as np
import pytest

from tablekit.geometry import CellQuad
from tablekit.targets import (CORNER_TO_SLOT, MAGIC, N_PLANES, EncodingError, TargetMaps, collect_shared_vertices,
                              encode_annotation, encode_targets, keypoint_pixel, splat_gaussian)

from conftest import grid_annotation, grid_quads


@pytest.mark.parametrize("quads, n_vertices, max_incident", [
    (grid_quads(1, 1), 4, 1),
    (grid_quads(1, 2), 6, 2),
    (grid_quads(2, 2), 9, 4),
])
def test_collect_shared_vertices(quads, n_vertices, max_incident):
    vs = collect_shared_vertices(quads, tol=2)
    assert len(vs) == n_vertices
    assert max(len(v.incident_cells) for v in vs) == max_incident
    if n_vertices == 6:
        assert sorted(len(v.incident_cells) for v in vs) == [1, 1, 1, 1, 2, 2]


def test_splat_gaussian_peak_and_tail():
    plane = np.zeros((20, 20))
    splat_gaussian(plane, (5, 7), radius=3)
    assert plane[7, 5] == 1.0
    splat_gaussian(plane, (5, 7), radius=3)
    assert plane[7, 5] == 1.0
    # sigma = 1, so 3 sigma away is exp(-4.5)
    assert plane[7, 8] == pytest.approx(np.exp(-4.5), rel=1e-12)
    assert plane[7, 8] == pytest.approx(0.0111, abs=1e-4)


def test_splat_outside_plane_is_clipped():
    plane = np.zeros((5, 5))
    splat_gaussian(plane, (-3, 2), radius=4)
    assert plane.max() < 1.0


def test_encode_cell_example():
    q = CellQuad.from_points([(8, 8), (12, 8), (12, 12), (8, 12)])
    maps = encode_targets([[q]], (24, 24), stride=1)
    assert maps.cv_mask[0, 10, 10] == 1
    assert maps.cv_map[:, 10, 10].tolist() == [2, 2, -2, 2, -2, -2, 2, -2]
    assert maps.keypoint_heatmap[0, 10, 10] == 1.0


def test_keypoint_rounding_residual():
    assert keypoint_pixel(10.6, 7.2) == (11, 7)
    q = CellQuad.from_box(8.6, 5.2, 12.6, 9.2)  # center (10.6, 7.2)
    maps = encode_targets([[q]], (24, 24), stride=1)
    assert maps.offset_map[:, 7, 11] == pytest.approx([-0.4, 0.2], abs=1e-6)


def test_two_cell_vertex_slots():
    quads = grid_quads(1, 2)  # vertices at x = 20, 60, 100
    maps = encode_targets([quads], (120, 60), stride=1)
    # top shared vertex (60, 20): cells below it occupy down-left / down-right
    assert maps.vc_mask[:, 20, 60].tolist() == [0, 0, 1, 1]
    assert np.all(maps.vc_map[0:4, 20, 60] == 0)
    assert maps.vc_mask[:, 50, 60].tolist() == [1, 1, 0, 0]


def test_mask_invariants():
    a = grid_annotation(3, 4)
    maps = encode_annotation(a, stride=4)
    assert int(maps.cv_mask.sum()) == 12
    n_vertex_pixels = int((maps.vc_mask.sum(axis=0) > 0).sum())
    assert n_vertex_pixels == 20
    slot_mask = np.repeat(maps.vc_mask, 2, axis=0)
    assert np.all(maps.vc_map[slot_mask == 0] == 0)
    assert len(maps.pairs) == 4 * 12


def test_corner_slot_mapping_is_a_permutation():
    assert sorted(CORNER_TO_SLOT) == [0, 1, 2, 3]


def test_center_collision_raises():
    a = CellQuad.from_box(0, 0, 4, 4)
    b = CellQuad.from_box(0.5, 0.5, 4.5, 4.5)
    with pytest.raises(EncodingError):
        encode_targets([[a], [b]], (40, 40), stride=8)


def test_outside_image_raises():
    with pytest.raises(EncodingError):
        encode_targets([[CellQuad.from_box(0, 0, 50, 50)]], (20, 20), stride=1)


def test_binary_roundtrip(tmp_path):
    maps = encode_annotation(grid_annotation(2, 3), stride=4)
    data = maps.to_bytes()
    assert data[:4] == MAGIC
    assert len(data) == 16 + 4 * N_PLANES * maps.height * maps.width
    back = TargetMaps.from_bytes(data)
    assert np.array_equal(back.planes(), maps.planes())
    assert back.stride == 4
    assert sorted(map(tuple, back.pairs.tolist())) == sorted(map(tuple, maps.pairs.tolist()))
    maps.save(tmp_path / "m.cctm")
    assert np.array_equal(TargetMaps.load(tmp_path / "m.cctm").planes(), maps.planes())


def test_binary_rejects_bad_magic():
    data = bytearray(encode_annotation(grid_annotation(1, 1), stride=4).to_bytes())
    data[:4] = b"XXXX"
    with pytest.raises(ValueError):
        TargetMaps.from_bytes(bytes(data))


def test_binary_rejects_truncation():
    data = encode_annotation(grid_annotation(1, 1), stride=4).to_bytes()
    with pytest.raises(ValueError):
        TargetMaps.from_bytes(data[:-4])
