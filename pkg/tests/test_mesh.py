import numpy as np
import pytest

from monodomain.mesh import (FIBROBLAST, MYOCYTE_EPI, RegionSelector, assign_fibrosis, build_regular_grid,
                             build_regular_sheet, build_truncated_sheet, load_mesh, nearest_node,
                             save_mesh, select_nodes, signed_areas)


@pytest.mark.parametrize("h, nodes, elements", [(0.01, 251001, 250000), (0.02, 63001, 62500)])
def test_table_counts(h, nodes, elements):
    m = build_regular_sheet(5.0, 5.0, h)
    assert (m.n_nodes, m.n_elements) == (nodes, elements)


@pytest.mark.parametrize("h_um, side", [(200, 251), (180, 278), (160, 313), (140, 358), (120, 417), (100, 501)])
def test_truncated_counts(h_um, side):
    m = build_truncated_sheet(5.0, 5.0, h_um * 1e-4)
    assert m.n_nodes == side * side
    assert m.n_elements == (side - 1) ** 2


def test_single_element():
    h = 0.03
    m = build_regular_sheet(h, h, h)
    assert (m.n_nodes, m.n_elements) == (4, 1)
    np.testing.assert_array_equal(m.elements[0], [0, 1, 3, 2])
    m.validate()


def test_non_divisible_rejected():
    with pytest.raises(ValueError, match="not an exact multiple"):
        build_regular_sheet(1.0, 1.0, 0.03)


def test_defaults_and_fibers():
    m = build_regular_sheet(0.2, 0.1, 0.05, fiber_angle=np.pi / 6)
    assert set(m.node_tags) == {MYOCYTE_EPI}
    np.testing.assert_allclose(m.element_fibers, [[np.cos(np.pi / 6), np.sin(np.pi / 6)]] * m.n_elements)
    np.testing.assert_allclose(np.linalg.norm(m.element_fibers, axis=1), 1.0, atol=1e-12)
    assert np.all(signed_areas(m) > 0)


def test_node_numbering_row_major():
    m = build_regular_grid(3, 2, 1.0)
    np.testing.assert_array_equal(m.node_coords[5], [1.0, 1.0])
    assert nearest_node(m, (2.0, 1.0)) == 1 * 4 + 2


def test_pure_construction():
    a = build_regular_sheet(1.0, 0.5, 0.05)
    b = build_regular_sheet(1.0, 0.5, 0.05)
    assert np.array_equal(a.node_coords, b.node_coords)
    assert np.array_equal(a.elements, b.elements)


def test_fibrosis_extremes(small_sheet):
    assert not np.any(assign_fibrosis(small_sheet, 0.0, 1).node_tags == FIBROBLAST)
    assert np.all(assign_fibrosis(small_sheet, 1.0, 1).node_tags == FIBROBLAST)
    with pytest.raises(ValueError):
        assign_fibrosis(small_sheet, 1.5, 1)


def test_fibrosis_count_and_repeatability():
    m = build_regular_sheet(5.0, 5.0, 0.02)
    a = assign_fibrosis(m, 0.1, 7)
    b = assign_fibrosis(m, 0.1, 7)
    assert np.count_nonzero(a.node_tags == FIBROBLAST) == 6300
    assert np.array_equal(a.node_tags, b.node_tags)
    assert a.metadata["fibrosis"]["rng"].startswith("numpy.random.Generator")
    assert a.metadata["fibrosis"]["seed"] == 7


def test_fibrosis_overlap_statistics():
    m = build_regular_sheet(1.0, 1.0, 0.01)
    f = 0.1
    sets = [assign_fibrosis(m, f, s).node_tags == FIBROBLAST for s in range(21)]
    overlaps = np.array([np.mean(sets[0] & s) for s in sets[1:]])
    sigma = np.sqrt(f * f * (1 - f * f) / m.n_nodes)
    assert abs(overlaps.mean() - f * f) < 3 * sigma


def test_select_left_edge():
    m = build_regular_sheet(5.0, 5.0, 0.1)
    idx = select_nodes(m, RegionSelector("half_plane_x", {"value": 0.0, "side": "le"}))
    assert idx.size == 51
    assert np.all(m.node_coords[idx, 0] == 0.0)
    assert np.all(np.diff(idx) > 0)


def test_select_s2_rectangle():
    m = build_regular_sheet(5.0, 5.0, 0.05)
    idx = select_nodes(m, RegionSelector("rectangle", {"xmin": 0, "xmax": 1.25, "ymin": 0, "ymax": 2.5}))
    assert idx.size == 26 * 51
    xy = m.node_coords[idx]
    assert xy[:, 0].max() == pytest.approx(1.25) and xy[:, 1].max() == pytest.approx(2.5)


def test_select_empty_and_malformed(small_sheet):
    empty = RegionSelector("rectangle", {"xmin": 1.0, "xmax": 0.0, "ymin": 0, "ymax": 1})
    assert select_nodes(small_sheet, empty).size == 0
    with pytest.raises(ValueError, match="missing parameter"):
        select_nodes(small_sheet, RegionSelector("rectangle", {"xmin": 0}))
    with pytest.raises(ValueError, match="unknown selector"):
        select_nodes(small_sheet, RegionSelector("sphere", {}))
    with pytest.raises(ValueError):
        select_nodes(small_sheet, RegionSelector("nodes", {"indices": [10 ** 6]}))


def test_select_disc_and_nodes(small_sheet):
    disc = select_nodes(small_sheet, RegionSelector("disc", {"center": (0.25, 0.15), "radius": 0.05}))
    assert disc.size == 5
    nodes = select_nodes(small_sheet, RegionSelector.from_dict({"kind": "nodes", "indices": [3, 1, 3]}))
    np.testing.assert_array_equal(nodes, [1, 3])


def test_mesh_file_round_trip(tmp_path, small_sheet):
    m = assign_fibrosis(small_sheet, 0.2, 3)
    path = tmp_path / "sheet.mesh"
    save_mesh(m, path)
    back = load_mesh(path)
    assert np.array_equal(back.node_coords, m.node_coords)
    assert np.array_equal(back.elements, m.elements)
    assert np.array_equal(back.node_tags.astype(str), m.node_tags.astype(str))
    assert np.array_equal(back.element_fibers, m.element_fibers)
    assert back.spacing_h == m.spacing_h


def test_mesh_file_rejects_foreign(tmp_path):
    p = tmp_path / "x.mesh"
    p.write_text("hello\n")
    with pytest.raises(ValueError, match="not a monodomain mesh"):
        load_mesh(p)
