"""Finite-volume device physics: Poisson, drift-diffusion, dataset generation."""

from .materials import (
    BiasPoint,
    DopingProfile,
    MaterialParams,
    build_doping,
    default_materials,
    equilibrium_carriers,
    oxide,
    silicon,
)
from .poisson import (
    NonConvergenceError,
    SingularSystemError,
    SolverError,
    charge_density,
    equilibrium_potential,
    solve_linear_poisson,
)
from .transport import (
    SolutionFields,
    bernoulli,
    contact_current,
    gummel_solve,
    sg_edge_flux,
)
from .dataset import (
    DatasetManifest,
    ParameterRange,
    Sample,
    TemplateRanges,
    generate_dataset,
)

__all__ = [
    "BiasPoint", "DopingProfile", "MaterialParams", "build_doping",
    "default_materials", "equilibrium_carriers", "oxide", "silicon",
    "NonConvergenceError", "SingularSystemError", "SolverError",
    "charge_density", "equilibrium_potential", "solve_linear_poisson",
    "SolutionFields", "bernoulli", "contact_current", "gummel_solve",
    "sg_edge_flux",
    "DatasetManifest", "ParameterRange", "Sample", "TemplateRanges",
    "generate_dataset",
]
