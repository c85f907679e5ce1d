import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from devgraph.mesh import (
    DeviceSpec,
    build_device_mesh,
    build_rect_mesh,
    control_volumes,
    extract_edges,
    graded_points,
    triangle_areas,
)


class TestExtractEdges:
    def test_single_triangle(self):
        edges = extract_edges(np.array([[0, 1, 2]]))
        assert edges.tolist() == [[0, 1], [0, 2], [1, 2]]

    def test_two_triangles_sharing_a_side(self):
        edges = extract_edges(np.array([[0, 1, 2], [1, 2, 3]]))
        assert len(edges) == 5

    def test_empty(self):
        assert extract_edges(np.zeros((0, 3), dtype=int)).shape == (0, 2)

    def test_out_of_range_index(self):
        with pytest.raises(ValueError):
            extract_edges(np.array([[0, 1, 5]]), n_vertices=3)
        with pytest.raises(ValueError):
            extract_edges(np.array([[0, -1, 2]]))

    @given(st.lists(st.tuples(st.integers(0, 8), st.integers(0, 8), st.integers(0, 8)),
                    min_size=1, max_size=12))
    @settings(max_examples=50, deadline=None)
    def test_order_independent(self, tris):
        tris = [t for t in tris if len(set(t)) == 3]
        if not tris:
            return
        arr = np.array(tris)
        perm = arr[::-1]
        assert np.array_equal(extract_edges(arr), extract_edges(perm))

    def test_idempotent_on_rect_mesh(self):
        m = build_rect_mesh(1.0, 1.0, 5, 4)
        again = extract_edges(m.triangles, n_vertices=m.n_vertices)
        assert np.array_equal(m.edges, again)


class TestRectMesh:
    def test_counts_4x3(self):
        m = build_rect_mesh(1.0, 1.0, 4, 3)
        assert m.n_vertices == 12
        assert m.n_triangles == 12  # (nx-1)(ny-1)*2

    def test_counts_2x2(self):
        m = build_rect_mesh(1.0, 1.0, 2, 2)
        assert m.n_vertices == 4
        assert m.n_triangles == 2
        assert len(m.edges) == 5

    def test_contacts_disjoint_and_cover_boundary(self):
        m = build_rect_mesh(2.0, 1.0, 6, 5)
        all_idx = np.concatenate([m.contacts[c] for c in ("left", "right", "top", "bottom")])
        assert len(all_idx) == len(set(all_idx.tolist()))
        x, y = m.vertices[:, 0], m.vertices[:, 1]
        boundary = np.flatnonzero((x == 0) | (x == 2.0) | (y == 0) | (y == 1.0))
        assert set(all_idx.tolist()) == set(boundary.tolist())


class TestControlVolumes:
    def test_interior_vertex_volume_is_h_squared(self):
        h = 0.25
        m = build_rect_mesh(1.0, 1.0, 5, 5)
        interior = np.flatnonzero(
            (m.vertices[:, 0] > 0) & (m.vertices[:, 0] < 1)
            & (m.vertices[:, 1] > 0) & (m.vertices[:, 1] < 1))
        assert np.allclose(m.cv_volume[interior], h * h, rtol=1e-12)

    def test_five_point_stencil_on_uniform_grid(self):
        # circumcenter of a right triangle sits on the hypotenuse midpoint,
        # so diagonal edges get zero coefficient and axis edges get 1
        m = build_rect_mesh(1.0, 1.0, 5, 5)
        d = m.vertices[m.edges[:, 0]] - m.vertices[m.edges[:, 1]]
        diagonal = (d[:, 0] != 0) & (d[:, 1] != 0)
        assert np.allclose(m.cv_coeff[diagonal], 0.0, atol=1e-12)
        axis_interior = ~diagonal
        # interior axis edges are shared by two triangles: coefficient 1/2 + 1/2
        full_rows = np.abs(m.cv_coeff[axis_interior] - 1.0) < 1e-12
        half_rows = np.abs(m.cv_coeff[axis_interior] - 0.5) < 1e-12
        assert np.all(full_rows | half_rows)

    def test_volumes_sum_to_area_rect(self):
        m = build_rect_mesh(3.0, 2.0, 7, 5)
        assert np.isclose(m.cv_volume.sum(), 6.0, rtol=1e-9)

    def test_volumes_sum_to_area_device(self):
        spec = DeviceSpec()
        m = build_device_mesh(spec)
        expected = spec.width * spec.body_depth + spec.gate_length * spec.oxide_thickness
        assert np.isclose(m.cv_volume.sum(), expected, rtol=1e-9)
        assert np.isclose(m.cv_volume.sum(), m.area, rtol=1e-9)

    def test_obtuse_triangles_clamped_nonnegative(self):
        verts = np.array([[0.0, 0.0], [4.0, 0.0], [2.0, 0.4], [2.0, -0.4]])
        tris = np.array([[0, 1, 2], [0, 3, 1]])
        from devgraph.mesh import DeviceMesh
        m = DeviceMesh(verts, tris, ["body"], np.zeros(4, dtype=np.int64),
                       np.zeros(2, dtype=np.int64), {})
        assert np.all(m.cv_coeff >= 0)
        assert np.isclose(m.cv_volume.sum(),
                          triangle_areas(verts, tris).sum(), rtol=1e-12)

    def test_degenerate_triangle_rejected(self):
        verts = np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]])
        with pytest.raises(ValueError, match="degenerate"):
            from devgraph.mesh import DeviceMesh
            DeviceMesh(verts, np.array([[0, 1, 2]]), ["body"],
                       np.zeros(3, dtype=np.int64), np.zeros(1, dtype=np.int64), {})

    def test_recompute_matches_constructed(self):
        m = build_device_mesh(DeviceSpec())
        vol, coeff = control_volumes(m)
        assert np.array_equal(vol, m.cv_volume)
        assert np.array_equal(coeff, m.cv_coeff)


class TestDeviceMesh:
    def test_default_contacts_nonempty_disjoint(self):
        m = build_device_mesh(DeviceSpec())
        names = ["gate", "source", "drain", "body"]
        for c in names:
            assert len(m.contacts[c]) > 0
        all_idx = np.concatenate([m.contacts[c] for c in names])
        assert len(all_idx) == len(set(all_idx.tolist()))

    def test_every_vertex_in_exactly_one_region(self):
        m = build_device_mesh(DeviceSpec())
        assert m.region_of_vertex.min() >= 0
        assert m.region_of_vertex.max() < len(m.region_names)

    def test_deterministic_construction(self):
        a = build_device_mesh(DeviceSpec())
        b = build_device_mesh(DeviceSpec())
        assert np.array_equal(a.vertices, b.vertices)
        assert np.array_equal(a.triangles, b.triangles)
        assert np.array_equal(a.cv_volume, b.cv_volume)
        assert np.array_equal(a.cv_coeff, b.cv_coeff)

    def test_gate_vertices_are_oxide(self):
        m = build_device_mesh(DeviceSpec())
        ox = m.region_id("oxide")
        assert np.all(m.region_of_vertex[m.contacts["gate"]] == ox)

    def test_source_vertices_are_well(self):
        m = build_device_mesh(DeviceSpec())
        sw = m.region_id("source_well")
        assert np.all(m.region_of_vertex[m.contacts["source"]] == sw)

    def test_bad_junction_depth_names_parameter(self):
        with pytest.raises(ValueError, match="junction_depth"):
            build_device_mesh(DeviceSpec(junction_depth=1e-6, body_depth=0.8e-6))

    def test_bad_lengths_name_parameter(self):
        with pytest.raises(ValueError, match="gate_length"):
            DeviceSpec(gate_length=-1e-6)
        with pytest.raises(ValueError, match="nx"):
            DeviceSpec(nx=1)

    def test_unknown_template(self):
        with pytest.raises(ValueError, match="template"):
            build_device_mesh(DeviceSpec(template="finfet"))

    def test_mesh_is_immutable(self):
        m = build_device_mesh(DeviceSpec())
        with pytest.raises(ValueError):
            m.vertices[0, 0] = 1.0


class TestGradedPoints:
    def test_endpoints_and_monotone(self):
        pts = graded_points(0.0, 2.0, 7)
        assert pts[0] == 0.0 and pts[-1] == 2.0
        assert np.all(np.diff(pts) > 0)

    def test_single_interval(self):
        assert graded_points(1.0, 3.0, 1).tolist() == [1.0, 3.0]

    def test_clusters_toward_ends(self):
        pts = graded_points(0.0, 1.0, 8)
        gaps = np.diff(pts)
        assert gaps[0] < gaps[len(gaps) // 2]
        assert gaps[-1] < gaps[len(gaps) // 2]
