"""Box-method Poisson solvers on device meshes.

Discretization at a free vertex i:

    sum_j eps_ij * cv_coeff_ij * (phi_i - phi_j) = rho_i * cv_volume_i

with eps_ij the harmonic mean of the endpoint-region permittivities on
region-boundary edges.  Dirichlet vertices are pinned by identity rows.
The nonlinear solver closes the system with Boltzmann carriers
n = n_i exp((phi - phi_n)/V_T), p = n_i exp((phi_p - phi)/V_T) at frozen
quasi-Fermi potentials and runs damped Newton.
"""

from __future__ import annotations

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import spsolve

from ..constants import Q_E, thermal_voltage
from ..mesh import DeviceMesh
from .materials import DopingProfile, MaterialParams, equilibrium_carriers

LINEAR_RESIDUAL_RTOL = 1e-10
NEWTON_TOL = 1e-9  # volts, max |delta phi|
EXP_CLIP = 200.0


class SolverError(RuntimeError):
    pass


class SingularSystemError(SolverError):
    pass


class NonConvergenceError(SolverError):
    def __init__(self, message: str, residuals: list[float]):
        super().__init__(f"{message} (last residual {residuals[-1]:.3e})"
                         if residuals else message)
        self.residuals = residuals


def charge_density(n, p, donor, acceptor) -> np.ndarray:
    """rho = q (p - n + N_D - N_A), C/m^3."""
    n, p = np.asarray(n, float), np.asarray(p, float)
    donor, acceptor = np.asarray(donor, float), np.asarray(acceptor, float)
    if not n.shape == p.shape == donor.shape == acceptor.shape:
        raise ValueError(
            f"length mismatch: n {n.shape}, p {p.shape}, "
            f"N_D {donor.shape}, N_A {acceptor.shape}")
    return Q_E * (p - n + donor - acceptor)


def edge_property(mesh: DeviceMesh, by_region: dict[str, float]) -> np.ndarray:
    """Per-edge value from endpoint-region values; harmonic mean across regions."""
    values = np.array([by_region[name] for name in mesh.region_names])
    r_i = mesh.region_of_vertex[mesh.edges[:, 0]]
    r_j = mesh.region_of_vertex[mesh.edges[:, 1]]
    v_i, v_j = values[r_i], values[r_j]
    same = r_i == r_j
    with np.errstate(divide="ignore", invalid="ignore"):
        harm = np.where(v_i + v_j > 0, 2.0 * v_i * v_j / (v_i + v_j), 0.0)
    return np.where(same, v_i, harm)


def dirichlet_arrays(mesh: DeviceMesh, dirichlet: dict) -> tuple[np.ndarray, np.ndarray]:
    """Expand {contact: scalar-or-array} into a (mask, values) vertex pair."""
    mask = np.zeros(mesh.n_vertices, dtype=bool)
    values = np.zeros(mesh.n_vertices)
    for name, val in dirichlet.items():
        if name not in mesh.contacts:
            raise KeyError(f"unknown contact {name!r}")
        idx = mesh.contacts[name]
        val = np.asarray(val, dtype=np.float64)
        if val.ndim == 0:
            values[idx] = float(val)
        else:
            if len(val) != len(idx):
                raise ValueError(
                    f"contact {name!r} has {len(idx)} vertices, got {len(val)} values")
            values[idx] = val
        mask[idx] = True
    return mask, values


def assemble_pinned_laplacian(mesh: DeviceMesh, g_edge: np.ndarray,
                              pinned: np.ndarray) -> sparse.csr_matrix:
    """CSR matrix: flux rows at free vertices, identity rows at pinned ones."""
    i = mesh.edges[:, 0]
    j = mesh.edges[:, 1]
    free_i = ~pinned[i]
    free_j = ~pinned[j]
    rows = np.concatenate([i[free_i], i[free_i], j[free_j], j[free_j],
                           np.flatnonzero(pinned)])
    cols = np.concatenate([i[free_i], j[free_i], j[free_j], i[free_j],
                           np.flatnonzero(pinned)])
    vals = np.concatenate([g_edge[free_i], -g_edge[free_i],
                           g_edge[free_j], -g_edge[free_j],
                           np.ones(int(pinned.sum()))])
    n = mesh.n_vertices
    return sparse.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()


def _check_residual(a: sparse.csr_matrix, x: np.ndarray, b: np.ndarray):
    scale = max(float(np.abs(b).max(initial=0.0)),
                float(np.abs(x).max(initial=0.0)), 1e-300)
    residual = float(np.abs(a @ x - b).max(initial=0.0)) / scale
    if residual > LINEAR_RESIDUAL_RTOL:
        raise NonConvergenceError("linear solve residual too large", [residual])


def solve_linear_poisson(mesh: DeviceMesh, eps_by_region: dict[str, float],
                         rho: np.ndarray, dirichlet: dict) -> np.ndarray:
    """Potential for a given charge density and contact voltages.

    `dirichlet` maps contact names to a scalar voltage or one value per
    contact vertex; at least one contact is required.
    """
    rho = np.asarray(rho, dtype=np.float64)
    if rho.shape != (mesh.n_vertices,):
        raise ValueError(f"rho must have shape ({mesh.n_vertices},), got {rho.shape}")
    pinned, values = dirichlet_arrays(mesh, dirichlet)
    if not pinned.any():
        raise SingularSystemError("at least one Dirichlet contact is required")
    g_edge = edge_property(mesh, eps_by_region) * mesh.cv_coeff
    a = assemble_pinned_laplacian(mesh, g_edge, pinned)
    b = np.where(pinned, values, rho * mesh.cv_volume)
    phi = spsolve(a, b)
    _check_residual(a, phi, b)
    return phi


def _newton_poisson(a: sparse.csr_matrix, mesh: DeviceMesh, pinned, pinned_values,
                    semi_mask, n_i, v_t, phi_n, phi_p, net_doping, phi0,
                    tol: float = NEWTON_TOL, max_iter: int = 100):
    """Damped Newton on the Boltzmann-closed Poisson system.

    Returns (phi, n, p).  Quasi-Fermi potentials phi_n/phi_p are frozen.
    """
    cv = mesh.cv_volume
    diag_pin = pinned.astype(float)

    def carriers(phi):
        n = np.where(semi_mask,
                     n_i * np.exp(np.clip((phi - phi_n) / v_t, -EXP_CLIP, EXP_CLIP)),
                     0.0)
        p = np.where(semi_mask,
                     n_i * np.exp(np.clip((phi_p - phi) / v_t, -EXP_CLIP, EXP_CLIP)),
                     0.0)
        return n, p

    def residual(phi, n, p):
        rho = Q_E * (p - n + net_doping)
        b = np.where(pinned, pinned_values, rho * cv)
        return a @ phi - b

    phi = np.where(pinned, pinned_values, phi0)
    n, p = carriers(phi)
    f = residual(phi, n, p)
    norm = float(np.linalg.norm(f))
    history = [norm]
    for _ in range(max_iter):
        d_charge = np.where(semi_mask & ~pinned, Q_E * (n + p) / v_t * cv, 0.0)
        jac = a + sparse.diags(d_charge * (1.0 - diag_pin))
        delta = spsolve(jac, -f)
        step = 1.0
        while True:
            phi_try = phi + step * delta
            n_try, p_try = carriers(phi_try)
            f_try = residual(phi_try, n_try, p_try)
            norm_try = float(np.linalg.norm(f_try))
            if norm_try <= (1.0 - 0.25 * step) * norm or norm == 0.0:
                break
            step *= 0.5
            if step < 2.0 ** -30:
                raise NonConvergenceError("Newton damping exhausted", history)
        applied = float(np.abs(step * delta).max(initial=0.0))
        phi, n, p, f, norm = phi_try, n_try, p_try, f_try, norm_try
        history.append(norm)
        if applied <= tol:
            return phi, n, p
    raise NonConvergenceError(f"Newton did not converge in {max_iter} iterations",
                              history)


def equilibrium_potential(mesh: DeviceMesh, doping: DopingProfile,
                          materials: dict[str, MaterialParams],
                          temperature: float = 300.0,
                          dirichlet: dict | None = None,
                          tol: float = NEWTON_TOL) -> np.ndarray:
    """Zero-bias self-consistent potential (quasi-Fermi levels at zero).

    With `dirichlet` omitted every contact floats; the carrier response keeps
    the system nonsingular as long as a semiconductor region is present.
    """
    v_t = thermal_voltage(temperature)
    semi_mask, n_i = vertex_semiconductor(mesh, materials)
    if not semi_mask.any():
        raise SingularSystemError("no semiconductor region present")
    pinned, values = dirichlet_arrays(mesh, dirichlet or {})
    eps = {name: materials[name].eps for name in mesh.region_names}
    a = assemble_pinned_laplacian(mesh, edge_property(mesh, eps) * mesh.cv_coeff,
                                  pinned)
    net = doping.net
    with np.errstate(divide="ignore", invalid="ignore"):
        phi0 = np.where(semi_mask, v_t * np.arcsinh(
            np.where(semi_mask, net, 0.0) / np.where(semi_mask, 2.0 * n_i, 1.0)), 0.0)
    zeros = np.zeros(mesh.n_vertices)
    phi, _, _ = _newton_poisson(a, mesh, pinned, values, semi_mask, n_i, v_t,
                                zeros, zeros, net, phi0, tol=tol)
    return phi


def vertex_semiconductor(mesh: DeviceMesh,
                         materials: dict[str, MaterialParams]):
    """(mask, n_i) per vertex; n_i is zero outside semiconductors."""
    classes = np.array([materials[name].cls == "semiconductor"
                        for name in mesh.region_names])
    ni_region = np.array([materials[name].n_i for name in mesh.region_names])
    mask = classes[mesh.region_of_vertex]
    n_i = ni_region[mesh.region_of_vertex]
    return mask, np.where(mask, n_i, 0.0)
