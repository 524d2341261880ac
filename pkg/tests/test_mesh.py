import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fractop import mesh as fm


def test_single_quad_element():
    m = fm.build_structured_mesh(2, [1, 1], [1.0, 1.0])
    assert m.n_nodes == 4
    assert m.n_elems == 1


def test_two_hex_elements():
    m = fm.build_structured_mesh(3, [2, 1, 1], [2.0, 1.0, 1.0])
    assert m.n_nodes == 12
    assert m.n_elems == 2


def test_beam_mesh_counts_lexicographic():
    m = fm.build_structured_mesh(2, [20, 8], [8.0, 2.0])
    assert m.n_nodes == 21 * 9
    assert m.n_elems == 160
    # lexicographic node ordering: x fastest
    assert np.allclose(m.coords[1] - m.coords[0], [0.4, 0.0])
    assert np.allclose(m.coords[21] - m.coords[0], [0.0, 0.25])
    span = m.coords[m.conn[0]].max(axis=0) - m.coords[m.conn[0]].min(axis=0)
    assert np.allclose(span, [0.4, 0.25])


@pytest.mark.parametrize("args", [
    (2, [0, 1], [1, 1]),
    (2, [1, 1], [1, -1]),
    (2, [1, 1], [0, 1]),
    (4, [1, 1, 1, 1], [1, 1, 1, 1]),
])
def test_invalid_mesh_arguments(args):
    with pytest.raises(ValueError):
        fm.build_structured_mesh(*args)


def test_bilinear_center_and_corner():
    vals, _ = fm.shape_values(2, [0.0, 0.0])
    assert np.allclose(vals, 0.25)
    vals, _ = fm.shape_values(2, [-1.0, -1.0])
    assert np.allclose(vals, [1.0, 0.0, 0.0, 0.0])


def test_trilinear_center():
    vals, _ = fm.shape_values(3, [0.0, 0.0, 0.0])
    assert np.allclose(vals, 0.125)


@settings(max_examples=100, deadline=None)
@given(st.integers(min_value=2, max_value=3),
       st.lists(st.floats(min_value=-1.0, max_value=1.0), min_size=3,
                max_size=3))
def test_partition_of_unity(dim, point):
    vals, grads = fm.shape_values(dim, point[:dim])
    assert abs(vals.sum() - 1.0) < 1e-12
    assert np.abs(grads.sum(axis=0)).max() < 1e-12


def test_quadrature_rules():
    q2 = fm.quadrature(2)
    assert len(q2.weights) == 4
    assert np.allclose(np.abs(q2.points), 1.0 / np.sqrt(3.0))
    assert np.allclose(q2.weights, 1.0)
    assert q2.weights.sum() == pytest.approx(4.0)
    q3 = fm.quadrature(3)
    assert len(q3.weights) == 8
    assert q3.weights.sum() == pytest.approx(8.0)
    with pytest.raises(ValueError):
        fm.quadrature(1)


@pytest.mark.parametrize("dim,counts,extents", [
    (2, [3, 2], [1.5, 2.0]),
    (3, [2, 3, 2], [1.0, 1.5, 0.5]),
])
def test_integrating_one_gives_box_volume(dim, counts, extents):
    m = fm.build_structured_mesh(dim, counts, extents)
    assert m.total_volume() == pytest.approx(np.prod(extents), rel=1e-12)


def test_isoparametric_corners_reproduce_nodes():
    m = fm.build_structured_mesh(2, [2, 2], [2.0, 1.0])
    corners = fm._CORNERS_2D
    for e in range(m.n_elems):
        for a in range(4):
            vals, _ = fm.shape_values(2, corners[a])
            mapped = vals @ m.coords[m.conn[e]]
            assert np.allclose(mapped, m.coords[m.conn[e, a]])


def test_tag_region_left_edge():
    m = fm.build_structured_mesh(2, [2, 1], [2.0, 1.0])
    fm.tag_region(m, lambda x: x[0] == 0.0, "left")
    assert np.array_equal(m.node_sets["left"], [0, 3])


def test_tag_region_empty_warns():
    m = fm.build_structured_mesh(2, [1, 1], [1.0, 1.0])
    with pytest.warns(UserWarning):
        fm.tag_region(m, lambda x: False, "nothing")
    assert m.node_sets["nothing"].size == 0


def test_tag_region_duplicate_name_rejected():
    m = fm.build_structured_mesh(2, [1, 1], [1.0, 1.0])
    fm.tag_region(m, lambda x: True, "all")
    with pytest.raises(ValueError):
        fm.tag_region(m, lambda x: True, "all")


def test_tag_loaded_band_on_beam_top():
    # band 3 <= x <= 5 on the top edge of the bend-beam analog
    m = fm.build_structured_mesh(2, [20, 8], [8.0, 2.0])
    fm.tag_region(m, lambda x: 3.0 <= x[0] <= 5.0 and x[1] == 2.0, "load")
    nodes = m.node_sets["load"]
    # node spacing 0.4: x in {3.2, 3.6, 4.0, 4.4, 4.8}
    assert nodes.size == 5
    assert np.all(m.coords[nodes, 1] == 2.0)
    assert np.all((m.coords[nodes, 0] >= 3.0) & (m.coords[nodes, 0] <= 5.0))


def test_positive_jacobians_cached():
    m = fm.build_structured_mesh(3, [2, 2, 2], [1.0, 1.0, 1.0])
    assert np.all(m.w_detj > 0.0)
