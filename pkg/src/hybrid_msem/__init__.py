"""Hybrid mimetic spectral element method for 2D Darcy flow."""

from .assembly import (
    DarcyProblem,
    GlobalSaddle,
    LocalSaddle,
    PermeabilitySpec,
    assemble_global,
    assemble_locals,
    project_dirichlet,
    project_source,
    weighted_mass_matrix,
)
from .errors import (
    AssemblyError,
    ConfigError,
    HybridMSEMError,
    IllPosedSystemError,
    InvalidDegreeError,
    MeshDegeneracyError,
)
from .mesh import ElementMap, Mesh, MeshConfig, build_mesh, jacobian
from .polybasis import (
    BasisSet1D,
    DofVector1D,
    diff_1d,
    eval_edge,
    eval_lagrange,
    gll_nodes,
    mass_matrix_0,
    mass_matrix_1,
    to_dual,
)
from .solver import SchurSystem, SolutionFields, build_schur, condition_number, solve_monolithic, solve_schur
from .topology import connectivity_en, count_dofs, incidence_e21, trace_matrix
from .verification import (
    ConvergenceRecord,
    ManufacturedCase,
    RunSpec,
    error_div_residual,
    error_hdiv_velocity,
    error_l2_pressure,
    herbin_case,
    run_case,
    run_convergence,
)

__version__ = "0.1.0"
