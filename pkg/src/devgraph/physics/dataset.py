"""Oracle dataset generation: randomized devices and bias points, solved by
the Gummel iteration, with a manifest recording convergence per sample."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..mesh import DeviceMesh, DeviceSpec, build_device_mesh
from .materials import BiasPoint, DopingProfile, build_doping, default_materials
from .poisson import SolverError
from .transport import SolutionFields, gummel_solve


@dataclass(frozen=True)
class ParameterRange:
    lo: float
    hi: float
    log: bool = False
    integer: bool = False

    def __post_init__(self):
        if self.lo > self.hi:
            raise ValueError(f"empty range [{self.lo}, {self.hi}]")
        if self.log and self.lo <= 0:
            raise ValueError("log-spaced range needs a positive lower bound")

    def sample(self, rng: np.random.Generator):
        if self.log:
            value = self.lo * (self.hi / self.lo) ** rng.random()
        else:
            value = self.lo + (self.hi - self.lo) * rng.random()
        return int(round(value)) if self.integer else value


@dataclass(frozen=True)
class TemplateRanges:
    """Sampling ranges for the nmosfet template and its bias.

    The default bias window (V_G in [0, 1.5] V, V_D in [0.05, 1.0] V) and the
    desk-scale node counts are declared conventions of this artifact.
    """

    template: str = "nmosfet"
    gate_length: ParameterRange = ParameterRange(2e-7, 8e-7, log=True)
    oxide_thickness: ParameterRange = ParameterRange(3e-9, 1.2e-8, log=True)
    body_depth: ParameterRange = ParameterRange(4e-7, 9e-7)
    well_width: ParameterRange = ParameterRange(1.5e-7, 3.5e-7)
    junction_fraction: ParameterRange = ParameterRange(0.15, 0.35)
    donor_level: ParameterRange = ParameterRange(1e24, 1e26, log=True)
    acceptor_level: ParameterRange = ParameterRange(3e22, 5e23, log=True)
    nx: ParameterRange = ParameterRange(15, 21, integer=True)
    ny: ParameterRange = ParameterRange(13, 19, integer=True)
    v_gate: ParameterRange = ParameterRange(0.0, 1.5)
    v_drain: ParameterRange = ParameterRange(0.05, 1.0)
    temperature: float = 300.0

    def sample_spec(self, rng: np.random.Generator) -> DeviceSpec:
        body = self.body_depth.sample(rng)
        return DeviceSpec(
            template=self.template,
            gate_length=self.gate_length.sample(rng),
            oxide_thickness=self.oxide_thickness.sample(rng),
            body_depth=body,
            well_width=self.well_width.sample(rng),
            junction_depth=self.junction_fraction.sample(rng) * body,
            nx=self.nx.sample(rng),
            ny=self.ny.sample(rng),
            donor_level=self.donor_level.sample(rng),
            acceptor_level=self.acceptor_level.sample(rng),
        )

    def sample_bias(self, rng: np.random.Generator) -> BiasPoint:
        return BiasPoint(
            voltages={"gate": self.v_gate.sample(rng),
                      "drain": self.v_drain.sample(rng),
                      "source": 0.0, "body": 0.0},
            temperature=self.temperature,
        )


@dataclass
class Sample:
    sample_id: int
    spec: DeviceSpec
    mesh: DeviceMesh
    doping: DopingProfile
    bias: BiasPoint
    fields: SolutionFields


@dataclass
class ManifestEntry:
    sample_id: int
    converged: bool
    n_vertices: int = 0
    error: str = ""


@dataclass
class DatasetManifest:
    seed: int
    count: int
    temperature: float
    entries: list[ManifestEntry] = field(default_factory=list)

    @property
    def n_converged(self) -> int:
        return sum(e.converged for e in self.entries)


def _solve_sample(sample_id: int, child_seed, ranges: TemplateRanges):
    rng = np.random.default_rng(child_seed)
    spec = ranges.sample_spec(rng)
    bias = ranges.sample_bias(rng)
    mesh = build_device_mesh(spec)
    doping = build_doping(mesh, spec)
    materials = default_materials(ranges.temperature)
    try:
        fields = gummel_solve(mesh, doping, materials, bias)
    except SolverError as exc:
        return (ManifestEntry(sample_id, False, mesh.n_vertices, str(exc)), None)
    sample = Sample(sample_id, spec, mesh, doping, bias, fields)
    return (ManifestEntry(sample_id, True, mesh.n_vertices), sample)


def generate_dataset(ranges: TemplateRanges, count: int, seed: int,
                     threads: int = 1) -> tuple[list[Sample], DatasetManifest]:
    """Solve `count` randomized devices; skips (and logs) non-converged solves.

    Deterministic for a given seed regardless of `threads`: each sample draws
    from its own spawned bit-stream and results merge by sample index.
    """
    if count < 0:
        raise ValueError(f"count must be >= 0, got {count}")
    manifest = DatasetManifest(seed=seed, count=count,
                               temperature=ranges.temperature)
    children = np.random.SeedSequence(seed).spawn(count)
    if threads > 1 and count > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(
                lambda args: _solve_sample(*args),
                [(k, children[k], ranges) for k in range(count)]))
    else:
        results = [_solve_sample(k, children[k], ranges) for k in range(count)]
    samples = []
    for entry, sample in results:
        manifest.entries.append(entry)
        if sample is not None:
            samples.append(sample)
    return samples, manifest
