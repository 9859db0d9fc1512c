"""Cut finite element solver for the cell-by-cell electrophysiology model.

Bulk potentials live on unfitted Q1 spaces over a Cartesian background
mesh, the membrane currents and states on the cut cells, and time
stepping splits the membrane ODEs from the static PDE solve. The
experiments module exposes the study harness behind the command line.
"""

from .assembly import (AssembledSystem, EmiParams, assemble_ghost_penalty,
                       assemble_load, assemble_multi_dim, assemble_single_dim,
                       assemble_surface_mass, assemble_stiffness)
from .driver import (EmiConfig, ManufacturedProblem, PdeContext, PdeSolution,
                     SimulationResult, build_spaces, pde_step, run_simulation,
                     update_v)
from .levelset import (CutTopology, DegenerateCutError, LevelSet,
                       build_cut_topology, make_circle, make_ellipse,
                       make_levelset, make_levelset1, make_two_lobes,
                       translated_circle)
from .linalg import (LUFactorization, SingularMatrixError, SparseMatrix,
                     UnsupportedSizeError, condition_number_2, factorize,
                     is_singular, solve_direct)
from .membrane import (HHParams, MembraneState, SurfaceOde, gating_rates,
                       initialize_state, ionic_current, ode_step,
                       project_surface)
from .mesh import (ActiveMesh, BackgroundMesh, FaceSet, active_mesh,
                   build_cartesian_mesh, ghost_faces, interior_faces)
from .quadrature import (QuadratureRule, bulk_rule, face_rule, gauss_1d,
                         polygon_rule, surface_rule)
from .spaces import FESpace, build_space, eval_basis, interpolate

__version__ = "0.1.0"

__all__ = [
    "AssembledSystem", "EmiParams", "assemble_ghost_penalty", "assemble_load",
    "assemble_multi_dim", "assemble_single_dim", "assemble_surface_mass",
    "assemble_stiffness",
    "EmiConfig", "ManufacturedProblem", "PdeContext", "PdeSolution",
    "SimulationResult", "build_spaces", "pde_step", "run_simulation",
    "update_v",
    "CutTopology", "DegenerateCutError", "LevelSet", "build_cut_topology",
    "make_circle", "make_ellipse", "make_levelset", "make_levelset1",
    "make_two_lobes", "translated_circle",
    "LUFactorization", "SingularMatrixError", "SparseMatrix",
    "UnsupportedSizeError", "condition_number_2", "factorize", "is_singular",
    "solve_direct",
    "HHParams", "MembraneState", "SurfaceOde", "gating_rates",
    "initialize_state", "ionic_current", "ode_step", "project_surface",
    "ActiveMesh", "BackgroundMesh", "FaceSet", "active_mesh",
    "build_cartesian_mesh", "ghost_faces", "interior_faces",
    "QuadratureRule", "bulk_rule", "face_rule", "gauss_1d", "polygon_rule",
    "surface_rule",
    "FESpace", "build_space", "eval_basis", "interpolate",
    "__version__",
]
