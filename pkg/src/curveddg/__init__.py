"""Discontinuous Galerkin solvers for second- and fourth-order problems on curved triangulations."""

from .analysis import ErrorRecord, InequalityReport, eoc, error_norms, l2_project, ls_slope, verify_inequalities
from .assembly import (
    Discretization,
    PenaltyConfig,
    SparseSystem,
    assemble_biharmonic,
    assemble_poisson,
    eval_form_C,
    norm_matrix,
)
from .estimators import BiharmonicDG, PoissonDG
from .mesh import Mesh, build_connectivity, curve_boundary, generate_disk_mesh, load_mesh, mesh_metrics, write_mesh
from .solver import ConvergenceError, NotSPDError, SolveReport, solve_spd

__version__ = "0.1.0"

__all__ = [
    "BiharmonicDG",
    "ConvergenceError",
    "Discretization",
    "ErrorRecord",
    "InequalityReport",
    "Mesh",
    "NotSPDError",
    "PenaltyConfig",
    "PoissonDG",
    "SolveReport",
    "SparseSystem",
    "assemble_biharmonic",
    "assemble_poisson",
    "build_connectivity",
    "curve_boundary",
    "eoc",
    "error_norms",
    "eval_form_C",
    "generate_disk_mesh",
    "l2_project",
    "load_mesh",
    "ls_slope",
    "mesh_metrics",
    "norm_matrix",
    "solve_spd",
    "verify_inequalities",
    "write_mesh",
]
