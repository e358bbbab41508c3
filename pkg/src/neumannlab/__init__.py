"""Neumann problems with drift: assembly, Green functions, rearrangements, experiments."""
from .assembly import (ProblemError, ProblemSpec, assemble_forms, check_sign_condition, kernel_analysis,
                       scale_problem, solve_adjoint, solve_neumann)
from .fe import CoefficientField, FeFunction, P0Field, interpolate, lp_norm
from .green import check_green_scaling, check_symmetry, green_table, represent_solution
from .lorentz import LorentzSpec, decreasing_rearrangement, lorentz_norm, weak_norm
from .mesh import SimplicialMesh, build_box_mesh, build_graph_domain_mesh, build_half_ball_mesh, unit_cube
from .splitting import split_mean_zero, split_plain, verify_split

__version__ = "0.1.0"

__all__ = [
    "ProblemError", "ProblemSpec", "assemble_forms", "check_sign_condition", "kernel_analysis", "scale_problem",
    "solve_adjoint", "solve_neumann", "CoefficientField", "FeFunction", "P0Field", "interpolate", "lp_norm",
    "check_green_scaling", "check_symmetry", "green_table", "represent_solution", "LorentzSpec",
    "decreasing_rearrangement", "lorentz_norm", "weak_norm", "SimplicialMesh", "build_box_mesh",
    "build_graph_domain_mesh", "build_half_ball_mesh", "unit_cube", "split_mean_zero", "split_plain",
    "verify_split",
]
