"""Unstructured 2D triangular device meshes with box-method control volumes.

Meshes are tensor grids of axis-aligned quads, each split into two triangles
along the lower-left/upper-right diagonal.  The planar nMOSFET template is a
staircase domain: a silicon rectangle with an oxide band sitting only over the
channel, n+ wells in the top corners, and four boundary contacts (gate on the
oxide top, source/drain on the well tops, body on the bottom).

Every vertex owns a control volume (dual cell built from edge midpoints and
per-triangle dual points); every edge owns a dimensionless coefficient
dual-face-length/edge-length used by the finite-volume discretizations.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

GRADING_RATIO = 1.2  # geometric stretch toward junctions/interfaces

REGION_BODY = "body"
REGION_SOURCE_WELL = "source_well"
REGION_DRAIN_WELL = "drain_well"
REGION_OXIDE = "oxide"


class Point2D(NamedTuple):
    x: float
    y: float


@dataclass(frozen=True)
class DeviceSpec:
    """Parameters of a device template (lengths in meters, doping in 1/m^3)."""

    template: str = "nmosfet"
    gate_length: float = 0.5e-6
    oxide_thickness: float = 8e-9
    body_depth: float = 0.8e-6
    well_width: float = 0.3e-6
    junction_depth: float = 0.2e-6
    nx: int = 21
    ny: int = 17
    donor_level: float = 1e25  # N_D inside the source/drain wells
    acceptor_level: float = 1e23  # N_A inside the p body

    def __post_init__(self):
        for name in ("gate_length", "oxide_thickness", "body_depth",
                     "well_width", "junction_depth"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if self.nx < 2:
            raise ValueError(f"nx must be >= 2, got {self.nx}")
        if self.ny < 2:
            raise ValueError(f"ny must be >= 2, got {self.ny}")
        if self.donor_level < 0:
            raise ValueError(f"donor_level must be >= 0, got {self.donor_level}")
        if self.acceptor_level < 0:
            raise ValueError(f"acceptor_level must be >= 0, got {self.acceptor_level}")

    @property
    def width(self) -> float:
        return 2.0 * self.well_width + self.gate_length

    @property
    def height(self) -> float:
        return self.body_depth + self.oxide_thickness


@dataclass
class DeviceMesh:
    """Immutable triangular mesh with regions, contacts, and dual geometry."""

    vertices: np.ndarray  # (N, 2) float64
    triangles: np.ndarray  # (T, 3) int64
    region_names: list[str]
    region_of_vertex: np.ndarray  # (N,) int64
    region_of_triangle: np.ndarray  # (T,) int64
    contacts: dict[str, np.ndarray]  # name -> sorted vertex indices
    edges: np.ndarray = field(init=False)  # (E, 2) int64, i < j, lexicographic
    cv_volume: np.ndarray = field(init=False)  # (N,) m^2
    cv_coeff: np.ndarray = field(init=False)  # (E,) dimensionless

    def __post_init__(self):
        self.vertices = np.ascontiguousarray(self.vertices, dtype=np.float64)
        self.triangles = np.ascontiguousarray(self.triangles, dtype=np.int64)
        n = len(self.vertices)
        if self.triangles.size and (self.triangles.min() < 0 or self.triangles.max() >= n):
            raise ValueError("triangle vertex index out of range")
        self.edges = extract_edges(self.triangles, n_vertices=n)
        self.cv_volume, self.cv_coeff = _control_volumes(
            self.vertices, self.triangles, self.edges)
        for arr in (self.vertices, self.triangles, self.region_of_vertex,
                    self.region_of_triangle, self.edges, self.cv_volume,
                    self.cv_coeff):
            arr.flags.writeable = False
        for name, idx in self.contacts.items():
            idx = np.asarray(idx, dtype=np.int64)
            idx.flags.writeable = False
            self.contacts[name] = idx

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @property
    def area(self) -> float:
        return float(np.sum(triangle_areas(self.vertices, self.triangles)))

    @property
    def bounding_box(self) -> tuple[Point2D, Point2D]:
        lo = self.vertices.min(axis=0)
        hi = self.vertices.max(axis=0)
        return Point2D(lo[0], lo[1]), Point2D(hi[0], hi[1])

    def region_id(self, name: str) -> int:
        return self.region_names.index(name)

    def vertex_regions(self) -> list[str]:
        return [self.region_names[r] for r in self.region_of_vertex]


def triangle_areas(vertices: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    """Signed-area magnitude of each triangle."""
    if len(triangles) == 0:
        return np.zeros(0)
    a = vertices[triangles[:, 0]]
    b = vertices[triangles[:, 1]]
    c = vertices[triangles[:, 2]]
    return 0.5 * np.abs((b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1])
                        - (c[:, 0] - a[:, 0]) * (b[:, 1] - a[:, 1]))


def extract_edges(triangles: np.ndarray, n_vertices: int | None = None) -> np.ndarray:
    """Unique undirected edges of a triangle list, sorted lexicographically."""
    triangles = np.asarray(triangles, dtype=np.int64).reshape(-1, 3)
    if triangles.size == 0:
        return np.zeros((0, 2), dtype=np.int64)
    if triangles.min() < 0:
        raise ValueError("triangle vertex index out of range")
    if n_vertices is not None and triangles.max() >= n_vertices:
        raise ValueError(
            f"triangle vertex index {triangles.max()} out of range for "
            f"{n_vertices} vertices")
    sides = np.concatenate([triangles[:, [0, 1]], triangles[:, [1, 2]],
                            triangles[:, [0, 2]]])
    sides = np.sort(sides, axis=1)
    return np.unique(sides, axis=0)


def _dual_points(a, b, c):
    """Per-triangle dual points: circumcenters, clamped to the barycenter for
    obtuse triangles so every dual-face length (and cv_coeff) stays >= 0."""
    ab = b - a
    ac = c - a
    bc = c - b
    d = 2.0 * (ab[:, 0] * ac[:, 1] - ab[:, 1] * ac[:, 0])
    if np.any(d == 0.0):
        raise ValueError(
            f"degenerate triangle (zero area) at index {int(np.argmax(d == 0.0))}")
    nab = np.einsum("ij,ij->i", ab, ab)
    nac = np.einsum("ij,ij->i", ac, ac)
    ux = (ac[:, 1] * nab - ab[:, 1] * nac) / d
    uy = (ab[:, 0] * nac - ac[:, 0] * nab) / d
    circum = a + np.column_stack([ux, uy])
    obtuse = ((np.einsum("ij,ij->i", ab, ac) < 0.0)
              | (np.einsum("ij,ij->i", -ab, bc) < 0.0)
              | (np.einsum("ij,ij->i", ac, bc) < 0.0))
    bary = (a + b + c) / 3.0
    return np.where(obtuse[:, None], bary, circum)


def _quad_areas(p0, p1, p2, p3):
    """Shoelace areas of quadrilaterals p0-p1-p2-p3, rows paired."""
    s = np.zeros(len(p0))
    pts = (p0, p1, p2, p3)
    for k in range(4):
        pa, pb = pts[k], pts[(k + 1) % 4]
        s += pa[:, 0] * pb[:, 1] - pb[:, 0] * pa[:, 1]
    return 0.5 * np.abs(s)


def _control_volumes(vertices, triangles, edges):
    """Per-vertex dual-cell areas and per-edge dual-face/edge-length ratios."""
    n = len(vertices)
    cv_volume = np.zeros(n)
    cv_coeff = np.zeros(len(edges))
    if len(triangles) == 0:
        return cv_volume, cv_coeff
    areas = triangle_areas(vertices, triangles)
    if np.any(areas <= 0.0):
        raise ValueError(
            f"degenerate triangle at index {int(np.argmax(areas <= 0.0))}")
    a = vertices[triangles[:, 0]]
    b = vertices[triangles[:, 1]]
    c = vertices[triangles[:, 2]]
    dual = _dual_points(a, b, c)
    m_ab = (a + b) / 2.0
    m_bc = (b + c) / 2.0
    m_ac = (a + c) / 2.0

    edge_keys = edges[:, 0] * n + edges[:, 1]
    for (u, v), mid in (((0, 1), m_ab), ((1, 2), m_bc), ((0, 2), m_ac)):
        pair = np.sort(triangles[:, [u, v]], axis=1)
        keys = pair[:, 0] * n + pair[:, 1]
        idx = np.searchsorted(edge_keys, keys)
        length = np.linalg.norm(vertices[pair[:, 0]] - vertices[pair[:, 1]], axis=1)
        face = np.linalg.norm(dual - mid, axis=1)
        np.add.at(cv_coeff, idx, face / length)
    np.add.at(cv_volume, triangles[:, 0], _quad_areas(a, m_ab, dual, m_ac))
    np.add.at(cv_volume, triangles[:, 1], _quad_areas(b, m_bc, dual, m_ab))
    np.add.at(cv_volume, triangles[:, 2], _quad_areas(c, m_ac, dual, m_bc))
    return cv_volume, cv_coeff


def control_volumes(mesh: DeviceMesh) -> tuple[np.ndarray, np.ndarray]:
    """Recompute (cv_volume, cv_coeff) from mesh geometry."""
    return _control_volumes(mesh.vertices, mesh.triangles, mesh.edges)


def _tensor_triangulation(xs: np.ndarray, ys: np.ndarray):
    """Full tensor-grid vertices and triangle list (fixed diagonal ll-ur)."""
    nx, ny = len(xs), len(ys)
    xx, yy = np.meshgrid(xs, ys, indexing="ij")
    vertices = np.column_stack([xx.ravel(), yy.ravel()])

    def vid(ix, iy):
        return ix * ny + iy

    triangles = []
    for ix in range(nx - 1):
        for iy in range(ny - 1):
            ll = vid(ix, iy)
            lr = vid(ix + 1, iy)
            ur = vid(ix + 1, iy + 1)
            ul = vid(ix, iy + 1)
            triangles.append((ll, lr, ur))
            triangles.append((ll, ur, ul))
    return vertices, np.asarray(triangles, dtype=np.int64).reshape(-1, 3)


def build_rect_mesh(width: float, height: float, nx: int, ny: int,
                    x_coords: np.ndarray | None = None,
                    y_coords: np.ndarray | None = None,
                    region: str = REGION_BODY) -> DeviceMesh:
    """Single-region rectangle with contacts left/right/top/bottom.

    Corner vertices belong to the left/right contacts; top/bottom hold the
    strict interior of their sides so the four sets stay disjoint.
    Optional explicit coordinate vectors override the uniform spacing.
    """
    if nx < 2:
        raise ValueError(f"nx must be >= 2, got {nx}")
    if ny < 2:
        raise ValueError(f"ny must be >= 2, got {ny}")
    xs = np.linspace(0.0, width, nx) if x_coords is None else np.asarray(x_coords, float)
    ys = np.linspace(0.0, height, ny) if y_coords is None else np.asarray(y_coords, float)
    vertices, triangles = _tensor_triangulation(xs, ys)
    n = len(vertices)
    x, y = vertices[:, 0], vertices[:, 1]
    left = np.flatnonzero(x == xs[0])
    right = np.flatnonzero(x == xs[-1])
    interior_x = (x != xs[0]) & (x != xs[-1])
    bottom = np.flatnonzero((y == ys[0]) & interior_x)
    top = np.flatnonzero((y == ys[-1]) & interior_x)
    contacts = {"left": np.sort(left), "right": np.sort(right),
                "bottom": np.sort(bottom), "top": np.sort(top)}
    return DeviceMesh(
        vertices=vertices,
        triangles=triangles,
        region_names=[region],
        region_of_vertex=np.zeros(n, dtype=np.int64),
        region_of_triangle=np.zeros(len(triangles), dtype=np.int64),
        contacts=contacts,
    )


def graded_points(a: float, b: float, n_intervals: int,
                  ratio: float = GRADING_RATIO) -> np.ndarray:
    """Points on [a, b] with spacings shrinking geometrically toward both ends."""
    if n_intervals < 1:
        raise ValueError("n_intervals must be >= 1")
    half = n_intervals // 2
    spac = [ratio ** k for k in range(half)]
    spacings = spac + ([ratio ** half] if n_intervals % 2 else []) + spac[::-1]
    spacings = np.asarray(spacings)
    pts = np.concatenate([[0.0], np.cumsum(spacings)])
    pts = a + (b - a) * pts / pts[-1]
    pts[0], pts[-1] = a, b
    return pts


def _allocate_intervals(total: int, lengths: list[float], minimum: int) -> list[int]:
    """Split `total` intervals among panels, proportional with a floor."""
    n_panels = len(lengths)
    if total < minimum * n_panels:
        raise ValueError("not enough intervals for panel minimums")
    weights = np.asarray(lengths) / sum(lengths)
    alloc = np.maximum(np.floor(weights * total).astype(int), minimum)
    while alloc.sum() > total:
        k = int(np.argmax(alloc - minimum))
        alloc[k] -= 1
    while alloc.sum() < total:
        deficit = weights * total - alloc
        alloc[int(np.argmax(deficit))] += 1
    return [int(v) for v in alloc]


def _panelled_axis(breaks: list[float], n_points: int, minimum: int = 2) -> np.ndarray:
    """Graded coordinates spanning consecutive panels between break values."""
    lengths = [breaks[k + 1] - breaks[k] for k in range(len(breaks) - 1)]
    alloc = _allocate_intervals(n_points - 1, lengths, minimum)
    coords = [np.array([breaks[0]])]
    for k, n_iv in enumerate(alloc):
        pts = graded_points(breaks[k], breaks[k + 1], n_iv)
        coords.append(pts[1:])
    return np.concatenate(coords)


def build_device_mesh(spec: DeviceSpec) -> DeviceMesh:
    """Construct the mesh for a device spec (only the nmosfet template at v1)."""
    if spec.template != "nmosfet":
        raise ValueError(f"unknown template {spec.template!r}")
    if spec.junction_depth >= spec.body_depth:
        raise ValueError(
            f"junction_depth ({spec.junction_depth}) must be smaller than "
            f"body_depth ({spec.body_depth})")
    if spec.nx < 7:
        raise ValueError(f"nx must be >= 7 for the nmosfet template, got {spec.nx}")
    if spec.ny < 7:
        raise ValueError(f"ny must be >= 7 for the nmosfet template, got {spec.ny}")

    w_well = spec.well_width
    l_gate = spec.gate_length
    t_body = spec.body_depth
    t_ox = spec.oxide_thickness
    width = spec.width
    height = spec.height
    y_junction = t_body - spec.junction_depth

    xs = _panelled_axis([0.0, w_well, w_well + l_gate, width], spec.nx)
    ys = _panelled_axis([0.0, y_junction, t_body, height], spec.ny)
    vertices, triangles = _tensor_triangulation(xs, ys)

    # drop oxide cells outside the gate footprint (staircase domain)
    centroids = vertices[triangles].mean(axis=1)
    in_gate = (centroids[:, 0] >= w_well) & (centroids[:, 0] <= w_well + l_gate)
    keep = (centroids[:, 1] <= t_body) | in_gate
    triangles = triangles[keep]
    centroids = centroids[keep]

    used = np.unique(triangles)
    remap = -np.ones(len(vertices), dtype=np.int64)
    remap[used] = np.arange(len(used))
    vertices = vertices[used]
    triangles = remap[triangles]

    region_names = [REGION_BODY, REGION_SOURCE_WELL, REGION_DRAIN_WELL, REGION_OXIDE]

    # interface points (y == t_body exactly) count as silicon so that carriers
    # exist along the channel; wells are closed boxes in the silicon
    def classify(px, py):
        if py > t_body:
            return 3
        if py >= y_junction:
            if px <= w_well:
                return 1
            if px >= width - w_well:
                return 2
        return 0

    region_of_triangle = np.array(
        [classify(cx, cy) for cx, cy in centroids], dtype=np.int64)
    region_of_vertex = np.array(
        [classify(px, py) for px, py in vertices], dtype=np.int64)

    x, y = vertices[:, 0], vertices[:, 1]
    gate = np.flatnonzero(y == height)
    source = np.flatnonzero((y == t_body) & (x <= w_well))
    drain = np.flatnonzero((y == t_body) & (x >= width - w_well))
    body = np.flatnonzero(y == 0.0)
    contacts = {"gate": np.sort(gate), "source": np.sort(source),
                "drain": np.sort(drain), "body": np.sort(body)}
    for name, idx in contacts.items():
        if len(idx) == 0:
            raise ValueError(f"contact {name!r} has no vertices; refine nx/ny")

    return DeviceMesh(
        vertices=vertices,
        triangles=triangles,
        region_names=region_names,
        region_of_vertex=region_of_vertex,
        region_of_triangle=region_of_triangle,
        contacts=contacts,
    )
