"""Weak Galerkin finite elements for the clamped biharmonic problem on triangles."""
from .analysis import (
    ConvergenceTable,
    ManufacturedSolution,
    example_mesh,
    get_example,
    l2_error,
    rate,
    run_convergence,
    triple_bar_error,
    triple_bar_norm,
)
from .element import ElementDofLayout, LocalOperators, local_operators, project_Qh
from .errors import ConvergenceError, DegenerateElementError, NotPositiveDefiniteError, WGError
from .mesh import Mesh, build_lshape_initial, build_unit_square_mesh, load_mesh, lshape_level, refine_uniform, validate
from .solver import (
    BoundaryData,
    DofMap,
    WGFunction,
    assemble_full,
    check_equivalence,
    condense,
    recover_interior,
    solve,
    solve_wg,
)

__version__ = "0.1.0"
