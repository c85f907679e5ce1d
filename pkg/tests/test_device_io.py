from pathlib import Path

import numpy as np
import pytest

from devgraph.device_io import (
    FieldFile,
    GridFile,
    ParameterFile,
    ParseError,
    SweepTable,
    grid_from_mesh,
    mesh_from_grid,
    parse_field,
    parse_grid,
    parse_parameters,
    parse_sweep,
    write_field,
    write_grid,
    write_parameters,
    write_sweep,
)
from devgraph.mesh import DeviceSpec, build_device_mesh, build_rect_mesh

GOLDEN = Path(__file__).parent / "golden"


def grids_equal(a: GridFile, b: GridFile) -> bool:
    return (a.region_names == b.region_names
            and np.array_equal(a.vertices, b.vertices)
            and np.array_equal(a.vertex_region, b.vertex_region)
            and np.array_equal(a.triangles, b.triangles)
            and np.array_equal(a.triangle_region, b.triangle_region)
            and set(a.contacts) == set(b.contacts)
            and all(np.array_equal(a.contacts[k], b.contacts[k]) for k in a.contacts))


class TestGrid:
    def test_two_vertex_no_triangle_file(self):
        text = ("dgrid 1\nregions 1\nbody\nvertices 2\n"
                "0.0 0.0 0\n1.0 0.5 0\ntriangles 0\ncontacts 0\n")
        grid = parse_grid(text)
        assert len(grid.vertices) == 2
        assert len(grid.triangles) == 0

    def test_round_trip_rect_mesh(self):
        mesh = build_rect_mesh(1.0, 2.0, 4, 3)
        grid = grid_from_mesh(mesh)
        back = parse_grid(write_grid(grid))
        assert grids_equal(grid, back)
        mesh2 = mesh_from_grid(back)
        assert np.array_equal(mesh.vertices, mesh2.vertices)
        assert np.array_equal(mesh.triangles, mesh2.triangles)
        assert np.array_equal(mesh.cv_volume, mesh2.cv_volume)
        assert np.array_equal(mesh.cv_coeff, mesh2.cv_coeff)

    def test_round_trip_device_mesh(self):
        mesh = build_device_mesh(DeviceSpec(nx=9, ny=9))
        back = mesh_from_grid(parse_grid(write_grid(grid_from_mesh(mesh))))
        assert np.array_equal(mesh.vertices, back.vertices)
        assert set(mesh.contacts) == set(back.contacts)
        for name in mesh.contacts:
            assert np.array_equal(mesh.contacts[name], back.contacts[name])

    def test_missing_vertex_record_line_number(self):
        text = "dgrid 1\nregions 1\nbody\nvertices 3\n0.0 0.0 0\n1.0 0.0 0\n"
        with pytest.raises(ParseError) as err:
            parse_grid(text)
        assert err.value.line == 7  # record should start where the file ended

    def test_unknown_version(self):
        with pytest.raises(ParseError, match="version"):
            parse_grid("dgrid 99\n")

    def test_out_of_range_triangle_index(self):
        text = ("dgrid 1\nregions 1\nbody\nvertices 2\n0.0 0.0 0\n1.0 0.0 0\n"
                "triangles 1\n0 1 5 0\ncontacts 0\n")
        with pytest.raises(ParseError, match="out of range") as err:
            parse_grid(text)
        assert err.value.line == 8


class TestField:
    def test_basic(self):
        f = parse_field("dfield 1\nname Potential\nunit V\nvalues 3\n1.0\n2.0\n-0.5\n")
        assert f.name == "Potential"
        assert f.unit == "V"
        assert len(f.values) == 3

    def test_round_trip_exact(self):
        rng = np.random.default_rng(7)
        values = rng.standard_normal(40) * 10.0 ** rng.integers(-9, 9, 40)
        f = FieldFile("ElectronDensity", "1/m^3", values)
        back = parse_field(write_field(f))
        assert back.name == f.name and back.unit == f.unit
        assert np.array_equal(back.values, values)

    def test_nan_rejected_with_row(self):
        text = "dfield 1\nname x\nunit V\nvalues 2\n1.0\nnan\n"
        with pytest.raises(ParseError, match="non-finite") as err:
            parse_field(text)
        assert err.value.line == 6

    def test_count_mismatch(self):
        with pytest.raises(ParseError):
            parse_field("dfield 1\nname x\nunit V\nvalues 2\n1.0\n")


class TestParameters:
    def test_silicon_fixture(self):
        text = (GOLDEN / "silicon.dpar").read_text()
        par = parse_parameters(text)
        assert par.material_class == "semiconductor"
        assert par.params["eps_r"] == 11.7
        assert par.params["mu_n"] == 0.135

    def test_missing_class(self):
        with pytest.raises(ParseError, match="class"):
            parse_parameters("name = si\neps_r = 11.7\n")

    def test_duplicate_key_named(self):
        with pytest.raises(ParseError, match="eps_r"):
            parse_parameters("name = si\nclass = insulator\neps_r = 3.9\neps_r = 4\n")

    def test_unknown_keys_preserved(self):
        par = parse_parameters(
            "name = si\nclass = semiconductor\nmu_n = 0.1\nmu_p = 0.05\n"
            "srh_tau_n = 1e-6\n")
        assert par.extra["srh_tau_n"] == "1e-6"
        back = parse_parameters(write_parameters(par))
        assert back.extra == par.extra

    def test_comments_ignored(self):
        par = parse_parameters("# top comment\nname = ox # trailing\nclass = insulator\n")
        assert par.name == "ox"

    def test_invalid_eps_r(self):
        with pytest.raises(ParseError, match="eps_r"):
            parse_parameters("name = x\nclass = insulator\neps_r = 0.5\n")


class TestSweep:
    def test_basic(self):
        t = parse_sweep("dsweep 1\ncolumns 2\nV_drain I_drain\nrows 3\n"
                        "0.0 0.0\n0.5 1e-6\n1.0 2e-6\n")
        assert len(t.rows) == 3
        assert t.column("V_drain")[2] == 1.0

    def test_ragged_row_reports_index(self):
        text = "dsweep 1\ncolumns 2\nA B\nrows 2\n1.0 2.0\n3.0\n"
        with pytest.raises(ParseError, match="row 2") as err:
            parse_sweep(text)
        assert err.value.line == 6

    def test_round_trip_exact(self):
        rng = np.random.default_rng(3)
        rows = rng.standard_normal((5, 4)) * 10.0 ** rng.integers(-12, 3, (5, 4))
        t = SweepTable(["V_gate", "V_drain", "I_drain", "I_source"], rows)
        back = parse_sweep(write_sweep(t))
        assert back.columns == t.columns
        assert np.array_equal(back.rows, rows)

    def test_duplicate_column_rejected(self):
        with pytest.raises(ParseError, match="duplicate"):
            parse_sweep("dsweep 1\ncolumns 2\nA A\nrows 0\n")


class TestFuzzRoundTrips:
    def test_random_grids(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            n = int(rng.integers(3, 12))
            t = int(rng.integers(0, 8))
            n_regions = int(rng.integers(1, 4))
            grid = GridFile(
                version=1,
                region_names=[f"r{k}" for k in range(n_regions)],
                vertices=rng.standard_normal((n, 2)),
                vertex_region=rng.integers(0, n_regions, n),
                triangles=rng.integers(0, n, (t, 3)),
                triangle_region=rng.integers(0, n_regions, t),
                contacts={"c0": rng.permutation(n)[: int(rng.integers(0, n))]},
            )
            assert grids_equal(grid, parse_grid(write_grid(grid)))

    def test_random_fields(self):
        rng = np.random.default_rng(12)
        for _ in range(20):
            f = FieldFile("f", "u", rng.standard_normal(int(rng.integers(0, 30))))
            back = parse_field(write_field(f))
            assert np.array_equal(back.values, f.values)

    def test_random_sweeps(self):
        rng = np.random.default_rng(13)
        for _ in range(20):
            k = int(rng.integers(1, 6))
            m = int(rng.integers(0, 10))
            t = SweepTable([f"c{j}" for j in range(k)], rng.standard_normal((m, k)))
            back = parse_sweep(write_sweep(t))
            assert np.array_equal(back.rows, t.rows)


class TestGoldenFiles:
    @pytest.mark.parametrize("name,parser", [
        ("device.dgrid", parse_grid),
        ("potential.dfield", parse_field),
        ("silicon.dpar", parse_parameters),
        ("iv.dsweep", parse_sweep),
    ])
    def test_golden_parses(self, name, parser):
        parser((GOLDEN / name).read_text())

    def test_golden_grid_round_trip(self):
        text = (GOLDEN / "device.dgrid").read_text()
        assert write_grid(parse_grid(text)) == text
