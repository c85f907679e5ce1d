"""Scharfetter-Gummel drift-diffusion: continuity solves, Gummel iteration,
and contact-current integration.

Sign conventions
----------------
- `sg_edge_flux` returns the electron particle flux counted as inflow to the
  first endpoint, so at zero field it reduces to D * cv_coeff * (n_j - n_i)
  and F_ij = -F_ji.  Hole fluxes use the opposite sign of delta.
- Contact currents are conventional current flowing into the device; for a
  converged solve the driven-contact currents sum to zero (no recombination).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import spsolve

from ..constants import Q_E
from ..mesh import DeviceMesh
from .materials import (
    EINSTEIN_RTOL,
    BiasPoint,
    DopingProfile,
    MaterialParams,
    equilibrium_carriers,
)
from .poisson import (
    NonConvergenceError,
    _newton_poisson,
    assemble_pinned_laplacian,
    charge_density,
    edge_property,
    vertex_semiconductor,
)

GUMMEL_TOL = 1e-7  # volts, max |delta phi| between outer iterations
GUMMEL_MAX_ITER = 200
DENSITY_FLOOR = 1.0  # 1/m^3, guards logs and roundoff negatives


def bernoulli(x):
    """B(x) = x / (exp(x) - 1), series branch below |x| = 1e-4, overflow-safe."""
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    small = np.abs(x) < 1e-4
    xs = x[small]
    out[small] = 1.0 - xs / 2.0 + xs * xs / 12.0
    big_pos = (~small) & (x > 0)
    xp = x[big_pos]
    em = np.exp(-np.minimum(xp, 700.0))
    out[big_pos] = xp * em / (1.0 - em)
    big_neg = (~small) & (x < 0)
    xn = x[big_neg]
    out[big_neg] = xn / (np.exp(np.maximum(xn, -700.0)) - 1.0)
    if out.ndim == 0:
        return float(out)
    return out


def sg_edge_flux(delta, n_i, n_j, diffusivity, cv_coeff):
    """Electron particle inflow to vertex i along edge (i, j), per meter depth.

    delta = (phi_j - phi_i) / V_T; `cv_coeff` is the dual-face-length to
    edge-length ratio that carries the geometry.
    """
    delta = np.asarray(delta, dtype=np.float64)
    return diffusivity * cv_coeff * (bernoulli(-delta) * np.asarray(n_j)
                                     - bernoulli(delta) * np.asarray(n_i))


@dataclass
class SolutionFields:
    """Converged solver state: potential, carriers, charge, contact currents."""

    phi: np.ndarray  # V
    n: np.ndarray  # 1/m^3
    p: np.ndarray
    rho: np.ndarray  # C/m^3
    currents: dict[str, float]  # A per meter of depth, positive into the device
    bias: BiasPoint
    iterations: int = 0
    delta_history: list[float] = field(default_factory=list)


def _classify_contacts(mesh: DeviceMesh, materials: dict[str, MaterialParams],
                       names) -> dict[str, bool]:
    """contact -> True when ohmic (all vertices in semiconductor regions)."""
    semi_mask, _ = vertex_semiconductor(mesh, materials)
    out = {}
    for name in names:
        if name not in mesh.contacts:
            raise KeyError(f"unknown contact {name!r}")
        on_semi = semi_mask[mesh.contacts[name]]
        if np.all(on_semi):
            out[name] = True
        elif not np.any(on_semi):
            out[name] = False
        else:
            raise ValueError(f"contact {name!r} mixes semiconductor and "
                             "insulator vertices")
    return out


def _continuity_matrix(mesh, semi_vertex, semi_edge, w_edge, delta, pinned,
                       holes: bool):
    """SG continuity system; identity rows at pinned and non-semiconductor
    vertices.  `w_edge` is D * cv_coeff per (semiconductor) edge."""
    n = mesh.n_vertices
    i = mesh.edges[semi_edge, 0]
    j = mesh.edges[semi_edge, 1]
    if holes:
        delta = -delta
    b_p = bernoulli(delta)
    b_m = bernoulli(-delta)
    free_i = ~pinned[i]
    free_j = ~pinned[j]
    fixed_rows = np.flatnonzero(pinned | ~semi_vertex)
    rows = np.concatenate([i[free_i], i[free_i], j[free_j], j[free_j], fixed_rows])
    cols = np.concatenate([i[free_i], j[free_i], j[free_j], i[free_j], fixed_rows])
    vals = np.concatenate([
        (w_edge * b_p)[free_i], -(w_edge * b_m)[free_i],
        (w_edge * b_m)[free_j], -(w_edge * b_p)[free_j],
        np.ones(len(fixed_rows)),
    ])
    return sparse.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()


def _solve_continuity(mesh, semi_vertex, semi_edge, w_edge, phi, v_t, pinned,
                      pinned_values, holes):
    i = mesh.edges[semi_edge, 0]
    j = mesh.edges[semi_edge, 1]
    delta = (phi[j] - phi[i]) / v_t
    a = _continuity_matrix(mesh, semi_vertex, semi_edge, w_edge, delta, pinned,
                           holes)
    b = np.where(pinned, pinned_values, 0.0)
    density = spsolve(a, b)
    return np.where(semi_vertex, np.maximum(density, DENSITY_FLOOR), 0.0)


def gummel_solve(mesh: DeviceMesh, doping: DopingProfile,
                 materials: dict[str, MaterialParams], bias: BiasPoint, *,
                 tol: float = GUMMEL_TOL, max_iter: int = GUMMEL_MAX_ITER,
                 gate_workfunction: float = 0.0) -> SolutionFields:
    """Decoupled Poisson/continuity iteration at a bias point.

    Contacts named in `bias.voltages` are driven: ohmic contacts (vertices in
    semiconductor regions) get Dirichlet potential V + V_T asinh(net / 2 n_i)
    and charge-neutral carrier densities; insulator contacts (the gate) pin
    the potential only.  Unnamed contacts float.
    """
    v_t = bias.v_t
    semi_vertex, ni_vertex = vertex_semiconductor(mesh, materials)
    for name in mesh.region_names:
        mat = materials[name]
        if mat.cls == "semiconductor":
            for d, mu in ((mat.d_n, mat.mu_n), (mat.d_p, mat.mu_p)):
                if abs(d / mu - v_t) > EINSTEIN_RTOL * v_t:
                    raise ValueError(
                        f"material {mat.name!r} diffusivities are inconsistent "
                        f"with the bias temperature {bias.temperature} K")
    if np.any((doping.donor[~semi_vertex] != 0)
              | (doping.acceptor[~semi_vertex] != 0)):
        raise ValueError("doping must be zero outside semiconductor regions")

    net = doping.net
    is_ohmic = _classify_contacts(mesh, materials, bias.voltages)

    pinned_phi = np.zeros(mesh.n_vertices, dtype=bool)
    phi_bc = np.zeros(mesh.n_vertices)
    pinned_car = np.zeros(mesh.n_vertices, dtype=bool)
    n_bc = np.zeros(mesh.n_vertices)
    p_bc = np.zeros(mesh.n_vertices)
    for name, ohmic in is_ohmic.items():
        idx = mesh.contacts[name]
        pinned_phi[idx] = True
        if ohmic:
            offset = v_t * np.arcsinh(net[idx] / (2.0 * ni_vertex[idx]))
            phi_bc[idx] = bias.voltage(name) + offset
            pinned_car[idx] = True
            n_bc[idx], p_bc[idx] = equilibrium_carriers(net[idx], ni_vertex[idx])
        else:
            phi_bc[idx] = bias.voltage(name) + gate_workfunction

    eps = {name: materials[name].eps for name in mesh.region_names}
    a_poisson = assemble_pinned_laplacian(
        mesh, edge_property(mesh, eps) * mesh.cv_coeff, pinned_phi)

    semi_edge = (semi_vertex[mesh.edges[:, 0]] & semi_vertex[mesh.edges[:, 1]])
    d_n = {name: materials[name].d_n for name in mesh.region_names}
    d_p = {name: materials[name].d_p for name in mesh.region_names}
    w_n = (edge_property(mesh, d_n) * mesh.cv_coeff)[semi_edge]
    w_p = (edge_property(mesh, d_p) * mesh.cv_coeff)[semi_edge]

    n, p = equilibrium_carriers(net, ni_vertex)
    n = np.where(semi_vertex, n, 0.0)
    p = np.where(semi_vertex, p, 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        phi = np.where(semi_vertex,
                       v_t * np.arcsinh(net / np.where(semi_vertex,
                                                       2.0 * ni_vertex, 1.0)),
                       0.0)

    history: list[float] = []
    for iteration in range(1, max_iter + 1):
        safe_n = np.maximum(n, DENSITY_FLOOR)
        safe_p = np.maximum(p, DENSITY_FLOOR)
        with np.errstate(divide="ignore", invalid="ignore"):
            qf_n = np.where(semi_vertex, phi - v_t * np.log(safe_n / np.where(
                semi_vertex, ni_vertex, 1.0)), 0.0)
            qf_p = np.where(semi_vertex, phi + v_t * np.log(safe_p / np.where(
                semi_vertex, ni_vertex, 1.0)), 0.0)
        phi_new, _, _ = _newton_poisson(
            a_poisson, mesh, pinned_phi, phi_bc, semi_vertex, ni_vertex, v_t,
            qf_n, qf_p, net, phi)
        delta = float(np.abs(phi_new - phi).max(initial=0.0))
        history.append(delta)
        phi = phi_new
        n = _solve_continuity(mesh, semi_vertex, semi_edge, w_n, phi, v_t,
                              pinned_car, n_bc, holes=False)
        p = _solve_continuity(mesh, semi_vertex, semi_edge, w_p, phi, v_t,
                              pinned_car, p_bc, holes=True)
        if delta <= tol:
            break
    else:
        raise NonConvergenceError(
            f"Gummel iteration did not converge in {max_iter} iterations", history)

    fields = SolutionFields(
        phi=phi, n=n, p=p,
        rho=charge_density(n, p, doping.donor, doping.acceptor),
        currents={}, bias=bias, iterations=iteration, delta_history=history)
    fields.currents = {name: contact_current(fields, mesh, materials, name)
                       for name in bias.voltages}
    return fields


def contact_current(fields: SolutionFields, mesh: DeviceMesh,
                    materials: dict[str, MaterialParams], contact: str) -> float:
    """Conventional current into the device through a contact, A/m of depth.

    Sums q * (electron inflow - hole inflow) SG fluxes over the mesh edges
    crossing the contact's control-volume boundary.
    """
    if contact not in mesh.contacts:
        raise KeyError(f"unknown contact {contact!r}")
    v_t = fields.bias.v_t
    semi_vertex, _ = vertex_semiconductor(mesh, materials)
    in_contact = np.zeros(mesh.n_vertices, dtype=bool)
    in_contact[mesh.contacts[contact]] = True

    i = mesh.edges[:, 0]
    j = mesh.edges[:, 1]
    crossing = ((in_contact[i] ^ in_contact[j])
                & semi_vertex[i] & semi_vertex[j])
    if not crossing.any():
        return 0.0
    d_n = edge_property(mesh, {r: materials[r].d_n for r in mesh.region_names})
    d_p = edge_property(mesh, {r: materials[r].d_p for r in mesh.region_names})
    # orient every crossing edge from the contact vertex outward
    u = np.where(in_contact[i[crossing]], i[crossing], j[crossing])
    v = np.where(in_contact[i[crossing]], j[crossing], i[crossing])
    coeff = mesh.cv_coeff[crossing]
    delta = (fields.phi[v] - fields.phi[u]) / v_t
    f_n = sg_edge_flux(delta, fields.n[u], fields.n[v], d_n[crossing], coeff)
    f_p = sg_edge_flux(-delta, fields.p[u], fields.p[v], d_p[crossing], coeff)
    return Q_E * (math.fsum(f_n) - math.fsum(f_p))
