"""Boundary-element solver for a nonlinear transmission problem in 2D.

A perforated domain (annular region between an outer boundary and a
perturbable inclusion) carries two harmonic fields represented by single
layer potentials; nonlinear interface laws couple them.  The package
discretizes the boundary integral system with spectrally accurate
periodic quadrature, solves it by Picard/Newton iteration, and continues
the solution branch along one-parameter shape families.
"""

from .expressions import ExpressionError, ExpressionFn, parse_expression
from .geometry import (
    DiscreteBoundary,
    GeometryError,
    ParametricCurve,
    ShapeMap,
    ShapeValidity,
    circle,
    contains_points,
    discretize,
    ellipse,
    expression_curve,
    sigma_tilde,
    star,
    validate_shape,
)
from .nonlinear import (
    ConvergenceError,
    GrowthReport,
    HarmonicPair,
    NonlinearError,
    TransmissionData,
    TransmissionSystem,
    check_growth,
    linearization_matrix,
    nemytskii_apply,
    reconstruct_solution,
    solve_unperturbed,
)
from .operators import (
    AdmissibilityReport,
    BlockOperator,
    DensitySet,
    MatrixField,
    OperatorError,
    assemble_JA,
    check_A_conditions,
    density_set_from_vector,
    smallest_singular_value,
    solve_JA,
    zero_density_set,
)
from .oracle import (
    ConcentricSolution,
    ManufacturedCase,
    OracleError,
    concentric_linear_solve,
    fourier_V_eigenvalue,
    manufactured_affine_case,
    mean_value_check,
)
from .potential import (
    BoundaryDensity,
    apply_Wstar,
    eval_single_layer,
    fundamental_solution,
    grad_single_layer,
    normal_derivative,
    trace_V,
    trace_V_matrix,
    wstar_matrix,
)
from .shape import (
    BranchError,
    BranchPoint,
    OrderDiagnostic,
    ShapeFamily,
    ShapeSolveError,
    continue_branch,
    residual_M,
    smoothness_probe,
    solve_at_shape,
    trefoil_family,
)

__version__ = "0.1.0"
