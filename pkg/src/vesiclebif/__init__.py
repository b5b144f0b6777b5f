"""Spectral bifurcation toolkit for a two-phase lipid-vesicle model.

Modules:
    harmonics    real spherical harmonics, quadrature, transforms
    geometry     radial-graph surface geometry and curvature operators
    model        constitutive laws, states, energy, multipliers
    residual     nonlinear equilibrium residual and Galerkin reduction
    linear       linearized analysis along the spherical branch
    symmetry     O(3) subgroup catalogue, fixed spaces, reduced bases
    continuation branch switching and pseudo-arclength continuation
    cli          command-line front end
"""

__version__ = "1.0.0"

from .harmonics import (
    GridField,
    QuadratureGrid,
    SpectralField,
    analyze,
    build_grid,
    real_harmonic,
    sf_index,
    synthesize,
)
from .geometry import (
    DegenerateSurfaceError,
    enclosed_volume,
    geometry_from_u,
    surface_area,
)
from .model import (
    Constitutive,
    ModelState,
    constitutive_from_config,
    quartic_constitutive,
)
from .residual import ResidualValue, full_residual
from .linear import ModeData, characteristic_roots, mode_data, sigma_tau
from .symmetry import CATALOG, FixedSpace, fixed_space, subgroup
from .continuation import (
    Branch,
    BranchPoint,
    ContinuationConfig,
    branch_switch,
    continue_branch,
    detect_bifurcations,
    frozen_u_probe,
)

__all__ = [
    "GridField", "QuadratureGrid", "SpectralField", "analyze", "build_grid",
    "real_harmonic", "sf_index", "synthesize",
    "DegenerateSurfaceError", "enclosed_volume", "geometry_from_u",
    "surface_area",
    "Constitutive", "ModelState", "constitutive_from_config",
    "quartic_constitutive",
    "ResidualValue", "full_residual",
    "ModeData", "characteristic_roots", "mode_data", "sigma_tau",
    "CATALOG", "FixedSpace", "fixed_space", "subgroup",
    "Branch", "BranchPoint", "ContinuationConfig", "branch_switch",
    "continue_branch", "detect_bifurcations", "frozen_u_probe",
    "__version__",
]
