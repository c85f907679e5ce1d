"""Material parameters, doping profiles, and bias points (all SI units)."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..constants import EPS0, thermal_voltage
from ..device_io import ParameterFile
from ..mesh import DeviceMesh, DeviceSpec

EINSTEIN_RTOL = 1e-12  # required agreement of D/mu with kT/q


@dataclass(frozen=True)
class MaterialParams:
    """Physics-ready material; diffusivities obey D = mu * kT/q at `temperature`."""

    name: str
    cls: str  # metal | insulator | semiconductor
    eps_r: float
    temperature: float = 300.0
    n_i: float = 0.0  # intrinsic density, 1/m^3
    mu_n: float = 0.0  # m^2/Vs
    mu_p: float = 0.0
    bandgap_ev: float = 0.0
    d_n: float = field(init=False)
    d_p: float = field(init=False)

    def __post_init__(self):
        if self.cls not in ("metal", "insulator", "semiconductor"):
            raise ValueError(f"unknown material class {self.cls!r}")
        if self.eps_r < 1.0:
            raise ValueError(f"eps_r must be >= 1, got {self.eps_r}")
        if self.cls == "semiconductor":
            if self.mu_n <= 0 or self.mu_p <= 0:
                raise ValueError("semiconductor mobilities must be positive")
            if self.n_i <= 0:
                raise ValueError("semiconductor intrinsic density must be positive")
        vt = thermal_voltage(self.temperature)
        object.__setattr__(self, "d_n", self.mu_n * vt)
        object.__setattr__(self, "d_p", self.mu_p * vt)

    @property
    def eps(self) -> float:
        """Absolute permittivity, F/m."""
        return self.eps_r * EPS0

    @property
    def v_t(self) -> float:
        return thermal_voltage(self.temperature)

    @classmethod
    def from_parameter_file(cls, par: ParameterFile,
                            temperature: float = 300.0) -> "MaterialParams":
        return cls(
            name=par.name,
            cls=par.material_class,
            eps_r=par.params.get("eps_r", 1.0),
            temperature=temperature,
            n_i=par.params.get("ni", 0.0),
            mu_n=par.params.get("mu_n", 0.0),
            mu_p=par.params.get("mu_p", 0.0),
            bandgap_ev=par.params.get("bandgap_ev", 0.0),
        )

    def to_parameter_file(self) -> ParameterFile:
        params = {"eps_r": self.eps_r}
        if self.cls == "semiconductor":
            params.update({"bandgap_ev": self.bandgap_ev, "ni": self.n_i,
                           "mu_n": self.mu_n, "mu_p": self.mu_p})
        return ParameterFile(self.name, self.cls, params)


def silicon(temperature: float = 300.0) -> MaterialParams:
    return MaterialParams(name="silicon", cls="semiconductor", eps_r=11.7,
                          temperature=temperature, n_i=1.45e16,
                          mu_n=0.135, mu_p=0.048, bandgap_ev=1.12)


def oxide(temperature: float = 300.0) -> MaterialParams:
    return MaterialParams(name="sio2", cls="insulator", eps_r=3.9,
                          temperature=temperature)


def default_materials(temperature: float = 300.0) -> dict[str, MaterialParams]:
    """Region -> material map for the nmosfet template."""
    si = silicon(temperature)
    return {"body": si, "source_well": si, "drain_well": si,
            "oxide": oxide(temperature)}


@dataclass
class DopingProfile:
    """Fully ionized donor/acceptor densities per vertex (1/m^3)."""

    donor: np.ndarray
    acceptor: np.ndarray

    def __post_init__(self):
        self.donor = np.asarray(self.donor, dtype=np.float64)
        self.acceptor = np.asarray(self.acceptor, dtype=np.float64)
        if self.donor.shape != self.acceptor.shape:
            raise ValueError("donor/acceptor length mismatch")
        if np.any(self.donor < 0) or np.any(self.acceptor < 0):
            raise ValueError("doping densities must be non-negative")

    @property
    def net(self) -> np.ndarray:
        return self.donor - self.acceptor


def build_doping(mesh: DeviceMesh, spec: DeviceSpec) -> DopingProfile:
    """Abrupt profile: N_D in the wells, N_A in the body, zero in the oxide."""
    donor = np.zeros(mesh.n_vertices)
    acceptor = np.zeros(mesh.n_vertices)
    names = mesh.region_names
    for rid, name in enumerate(names):
        sel = mesh.region_of_vertex == rid
        if name in ("source_well", "drain_well"):
            donor[sel] = spec.donor_level
        elif name == "body":
            acceptor[sel] = spec.acceptor_level
    return DopingProfile(donor, acceptor)


def equilibrium_carriers(net: np.ndarray, n_i) -> tuple[np.ndarray, np.ndarray]:
    """Charge-neutral n, p from net doping; stable against cancellation."""
    net = np.asarray(net, dtype=np.float64)
    n_i = np.broadcast_to(np.asarray(n_i, dtype=np.float64), net.shape)
    half = net / 2.0
    root = np.hypot(half, n_i)
    n = np.where(net >= 0.0, half + root, n_i * n_i / (root - half))
    p = np.where(net >= 0.0, n_i * n_i / (half + root), root - half)
    return n, p


@dataclass(frozen=True)
class BiasPoint:
    """Voltages per contact plus the operating temperature."""

    voltages: dict[str, float]
    temperature: float = 300.0

    def __post_init__(self):
        if self.temperature <= 0:
            raise ValueError(f"temperature must be positive, got {self.temperature}")

    @property
    def v_t(self) -> float:
        return thermal_voltage(self.temperature)

    def voltage(self, contact: str) -> float:
        return self.voltages.get(contact, 0.0)
