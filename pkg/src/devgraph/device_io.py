"""Open text file formats bridging the physics oracle and the learning stack.

Four line-oriented, whitespace-delimited formats with explicit counts in their
headers (see FORMATS.md for the grammars and golden files):

    .dgrid   mesh geometry, regions, contacts
    .dfield  one scalar value per mesh vertex
    .dpar    material parameters, ``key = value`` lines with ``#`` comments
    .dsweep  bias/current tables (currents in amperes per meter of depth)

Floats are rendered with ``repr`` so write/parse round trips are exact.
Parse errors always carry a 1-based line number.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .mesh import DeviceMesh

FORMAT_VERSION = 1

MATERIAL_CLASSES = ("metal", "insulator", "semiconductor")

# .dpar keys with physical meaning; anything else is preserved in `extra`
KNOWN_PARAMETERS = ("eps_r", "bandgap_ev", "ni", "mu_n", "mu_p")


class ParseError(ValueError):
    """Malformed file content; `line` is 1-based."""

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


@dataclass
class GridFile:
    version: int
    region_names: list[str]
    vertices: np.ndarray  # (N, 2)
    vertex_region: np.ndarray  # (N,)
    triangles: np.ndarray  # (T, 3)
    triangle_region: np.ndarray  # (T,)
    contacts: dict[str, np.ndarray]


@dataclass
class FieldFile:
    name: str
    unit: str
    values: np.ndarray  # (N,)


@dataclass
class ParameterFile:
    name: str
    material_class: str
    params: dict[str, float]
    extra: dict[str, str] = field(default_factory=dict)  # unknown keys, verbatim

    def __post_init__(self):
        if self.material_class not in MATERIAL_CLASSES:
            raise ValueError(
                f"material class must be one of {MATERIAL_CLASSES}, "
                f"got {self.material_class!r}")
        eps_r = self.params.get("eps_r")
        if eps_r is not None and eps_r < 1.0:
            raise ValueError(f"eps_r must be >= 1, got {eps_r}")
        if self.material_class == "semiconductor":
            for key in ("mu_n", "mu_p"):
                if self.params.get(key, 0.0) <= 0.0:
                    raise ValueError(f"{key} must be positive for semiconductors")


@dataclass
class SweepTable:
    columns: list[str]
    rows: np.ndarray  # (M, K)

    def __post_init__(self):
        self.rows = np.asarray(self.rows, dtype=np.float64).reshape(-1, len(self.columns))
        if len(set(self.columns)) != len(self.columns):
            raise ValueError("sweep column names must be unique")

    def column(self, name: str) -> np.ndarray:
        return self.rows[:, self.columns.index(name)]


def _fmt(x: float) -> str:
    return repr(float(x))


class _Cursor:
    def __init__(self, text: str):
        self.lines = text.splitlines()
        self.pos = 0  # 0-based index of the next line

    @property
    def line_no(self) -> int:
        return self.pos + 1

    def next(self, what: str) -> str:
        if self.pos >= len(self.lines):
            raise ParseError(f"unexpected end of file, expected {what}",
                             len(self.lines) + 1)
        line = self.lines[self.pos]
        self.pos += 1
        return line

    def expect_count(self, keyword: str) -> int:
        line = self.next(f"'{keyword} <count>'")
        parts = line.split()
        if len(parts) != 2 or parts[0] != keyword:
            raise ParseError(f"expected '{keyword} <count>', got {line!r}",
                             self.line_no - 1)
        try:
            count = int(parts[1])
        except ValueError:
            raise ParseError(f"bad count {parts[1]!r}", self.line_no - 1) from None
        if count < 0:
            raise ParseError(f"negative count {count}", self.line_no - 1)
        return count

    def floats(self, n: int, what: str) -> list[float]:
        line = self.next(what)
        parts = line.split()
        if len(parts) != n:
            raise ParseError(f"expected {n} fields for {what}, got {len(parts)}",
                             self.line_no - 1)
        try:
            return [float(p) for p in parts]
        except ValueError:
            raise ParseError(f"malformed number in {what}: {line!r}",
                             self.line_no - 1) from None


def _check_header(cursor: _Cursor, magic: str) -> int:
    line = cursor.next(f"'{magic} <version>' header")
    parts = line.split()
    if len(parts) != 2 or parts[0] != magic:
        raise ParseError(f"expected '{magic} <version>' header, got {line!r}", 1)
    try:
        version = int(parts[1])
    except ValueError:
        raise ParseError(f"bad version {parts[1]!r}", 1) from None
    if version != FORMAT_VERSION:
        raise ParseError(f"unknown {magic} version {version}", 1)
    return version


def _check_done(cursor: _Cursor):
    while cursor.pos < len(cursor.lines):
        if cursor.lines[cursor.pos].strip():
            raise ParseError(f"trailing content {cursor.lines[cursor.pos]!r}",
                             cursor.line_no)
        cursor.pos += 1


# ---------------------------------------------------------------------------
# .dgrid

def write_grid(grid: GridFile) -> str:
    out = [f"dgrid {grid.version}"]
    out.append(f"regions {len(grid.region_names)}")
    out.extend(grid.region_names)
    out.append(f"vertices {len(grid.vertices)}")
    for (x, y), r in zip(grid.vertices, grid.vertex_region):
        out.append(f"{_fmt(x)} {_fmt(y)} {int(r)}")
    out.append(f"triangles {len(grid.triangles)}")
    for (a, b, c), r in zip(grid.triangles, grid.triangle_region):
        out.append(f"{int(a)} {int(b)} {int(c)} {int(r)}")
    out.append(f"contacts {len(grid.contacts)}")
    for name, idx in grid.contacts.items():
        out.append(" ".join([name, str(len(idx))] + [str(int(i)) for i in idx]))
    return "\n".join(out) + "\n"


def parse_grid(text: str) -> GridFile:
    cur = _Cursor(text)
    version = _check_header(cur, "dgrid")

    n_regions = cur.expect_count("regions")
    region_names = []
    for _ in range(n_regions):
        name = cur.next("region name").strip()
        if not name or len(name.split()) != 1:
            raise ParseError(f"bad region name {name!r}", cur.line_no - 1)
        region_names.append(name)

    n_vertices = cur.expect_count("vertices")
    coords = np.zeros((n_vertices, 2))
    vregion = np.zeros(n_vertices, dtype=np.int64)
    for k in range(n_vertices):
        x, y, r = cur.floats(3, "vertex record")
        if not (math.isfinite(x) and math.isfinite(y)):
            raise ParseError("non-finite vertex coordinate", cur.line_no - 1)
        if r != int(r) or not 0 <= int(r) < n_regions:
            raise ParseError(f"vertex region id {r} out of range", cur.line_no - 1)
        coords[k] = (x, y)
        vregion[k] = int(r)

    n_triangles = cur.expect_count("triangles")
    tris = np.zeros((n_triangles, 3), dtype=np.int64)
    tregion = np.zeros(n_triangles, dtype=np.int64)
    for k in range(n_triangles):
        a, b, c, r = cur.floats(4, "triangle record")
        for v in (a, b, c):
            if v != int(v) or not 0 <= int(v) < n_vertices:
                raise ParseError(f"triangle vertex index {v} out of range",
                                 cur.line_no - 1)
        if r != int(r) or not 0 <= int(r) < n_regions:
            raise ParseError(f"triangle region id {r} out of range", cur.line_no - 1)
        tris[k] = (int(a), int(b), int(c))
        tregion[k] = int(r)

    n_contacts = cur.expect_count("contacts")
    contacts: dict[str, np.ndarray] = {}
    for _ in range(n_contacts):
        parts = cur.next("contact record").split()
        if len(parts) < 2:
            raise ParseError("contact record needs a name and a count",
                             cur.line_no - 1)
        name = parts[0]
        if name in contacts:
            raise ParseError(f"duplicate contact {name!r}", cur.line_no - 1)
        try:
            count = int(parts[1])
            idx = [int(p) for p in parts[2:]]
        except ValueError:
            raise ParseError("malformed contact record", cur.line_no - 1) from None
        if len(idx) != count:
            raise ParseError(
                f"contact {name!r} declares {count} vertices but lists {len(idx)}",
                cur.line_no - 1)
        if any(not 0 <= i < n_vertices for i in idx):
            raise ParseError(f"contact {name!r} vertex index out of range",
                             cur.line_no - 1)
        contacts[name] = np.asarray(idx, dtype=np.int64)

    _check_done(cur)
    return GridFile(version, region_names, coords, vregion, tris, tregion, contacts)


def grid_from_mesh(mesh: DeviceMesh) -> GridFile:
    return GridFile(
        version=FORMAT_VERSION,
        region_names=list(mesh.region_names),
        vertices=np.array(mesh.vertices),
        vertex_region=np.array(mesh.region_of_vertex),
        triangles=np.array(mesh.triangles),
        triangle_region=np.array(mesh.region_of_triangle),
        contacts={k: np.array(v) for k, v in mesh.contacts.items()},
    )


def mesh_from_grid(grid: GridFile) -> DeviceMesh:
    """Rebuild a mesh; dual geometry is recomputed deterministically."""
    return DeviceMesh(
        vertices=grid.vertices,
        triangles=grid.triangles,
        region_names=list(grid.region_names),
        region_of_vertex=grid.vertex_region,
        region_of_triangle=grid.triangle_region,
        contacts={k: np.array(v) for k, v in grid.contacts.items()},
    )


# ---------------------------------------------------------------------------
# .dfield

def write_field(f: FieldFile) -> str:
    out = [f"dfield {FORMAT_VERSION}", f"name {f.name}", f"unit {f.unit}",
           f"values {len(f.values)}"]
    out.extend(_fmt(v) for v in f.values)
    return "\n".join(out) + "\n"


def parse_field(text: str) -> FieldFile:
    cur = _Cursor(text)
    _check_header(cur, "dfield")
    name_line = cur.next("'name <field name>'")
    if not name_line.startswith("name ") and name_line != "name":
        raise ParseError(f"expected 'name <field name>', got {name_line!r}",
                         cur.line_no - 1)
    name = name_line[5:].strip()
    unit_line = cur.next("'unit <unit string>'")
    if not unit_line.startswith("unit ") and unit_line != "unit":
        raise ParseError(f"expected 'unit <unit string>', got {unit_line!r}",
                         cur.line_no - 1)
    unit = unit_line[5:].strip()
    n = cur.expect_count("values")
    values = np.zeros(n)
    for k in range(n):
        (v,) = cur.floats(1, "field value")
        if not math.isfinite(v):
            raise ParseError(f"non-finite value in row {k + 1}", cur.line_no - 1)
        values[k] = v
    _check_done(cur)
    return FieldFile(name, unit, values)


# ---------------------------------------------------------------------------
# .dpar

def write_parameters(par: ParameterFile) -> str:
    out = ["# devgraph material parameters",
           f"name = {par.name}",
           f"class = {par.material_class}"]
    for key in KNOWN_PARAMETERS:
        if key in par.params:
            out.append(f"{key} = {_fmt(par.params[key])}")
    for key, value in par.extra.items():
        out.append(f"{key} = {value}")
    return "\n".join(out) + "\n"


def parse_parameters(text: str) -> ParameterFile:
    name = None
    material_class = None
    params: dict[str, float] = {}
    extra: dict[str, str] = {}
    seen: set[str] = set()
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(f"expected 'key = value', got {raw!r}", line_no)
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if not key:
            raise ParseError("empty key", line_no)
        if key in seen:
            raise ParseError(f"duplicate key {key!r}", line_no)
        seen.add(key)
        if key == "name":
            name = value
        elif key == "class":
            material_class = value
        elif key in KNOWN_PARAMETERS:
            try:
                params[key] = float(value)
            except ValueError:
                raise ParseError(f"bad numeric value for {key!r}: {value!r}",
                                 line_no) from None
        else:
            extra[key] = value
    n_lines = len(text.splitlines())
    if material_class is None:
        raise ParseError("missing 'class' line", n_lines + 1)
    if name is None:
        raise ParseError("missing 'name' line", n_lines + 1)
    try:
        return ParameterFile(name, material_class, params, extra)
    except ValueError as exc:
        raise ParseError(str(exc), n_lines + 1) from None


# ---------------------------------------------------------------------------
# .dsweep

def write_sweep(table: SweepTable) -> str:
    out = [f"dsweep {FORMAT_VERSION}", f"columns {len(table.columns)}",
           " ".join(table.columns), f"rows {len(table.rows)}"]
    for row in table.rows:
        out.append(" ".join(_fmt(v) for v in row))
    return "\n".join(out) + "\n"


def parse_sweep(text: str) -> SweepTable:
    cur = _Cursor(text)
    _check_header(cur, "dsweep")
    n_cols = cur.expect_count("columns")
    names = cur.next("column names").split()
    if len(names) != n_cols:
        raise ParseError(f"expected {n_cols} column names, got {len(names)}",
                         cur.line_no - 1)
    if len(set(names)) != n_cols:
        raise ParseError("duplicate column name", cur.line_no - 1)
    n_rows = cur.expect_count("rows")
    rows = np.zeros((n_rows, n_cols))
    for k in range(n_rows):
        rows[k] = cur.floats(n_cols, f"row {k + 1}")
        if not np.all(np.isfinite(rows[k])):
            raise ParseError(f"non-finite value in row {k + 1}", cur.line_no - 1)
    _check_done(cur)
    return SweepTable(names, rows)
