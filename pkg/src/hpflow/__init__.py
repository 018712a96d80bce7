"""Simulation and stability analysis for Hamilton-Poisson systems with
energy-preserving Casimir dissipation."""

from .analysis import (
    EquilibriumReport,
    LyapunovCertificate,
    build_certificate,
    classify_point,
    predict_limit,
)
from .dissipation import DissipatedField, IdentityResiduals, dissipation_matrix
from .expressions import (
    Expr,
    ExpressionError,
    ParseError,
    ScalarField,
    differentiate,
    parse,
    substitute,
    to_source,
)
from .integrators import (
    InvariantReport,
    Trajectory,
    detect_convergence,
    integrate_adaptive,
    monitor,
    step_rk4,
)
from .rigid_body import (
    InertiaTriple,
    RigidBodyCase,
    analytic_equilibria,
    case3_lyapunov,
    lyapunov_psi,
    make_case,
    make_system,
    predicted_limit,
)
from .systems import PoissonSystem, StructureReport, verify_structure

__version__ = "0.1.0"

__all__ = [
    "Expr",
    "ExpressionError",
    "ParseError",
    "ScalarField",
    "parse",
    "differentiate",
    "substitute",
    "to_source",
    "PoissonSystem",
    "StructureReport",
    "verify_structure",
    "DissipatedField",
    "IdentityResiduals",
    "dissipation_matrix",
    "Trajectory",
    "InvariantReport",
    "integrate_adaptive",
    "step_rk4",
    "monitor",
    "detect_convergence",
    "EquilibriumReport",
    "LyapunovCertificate",
    "classify_point",
    "build_certificate",
    "predict_limit",
    "InertiaTriple",
    "RigidBodyCase",
    "make_system",
    "make_case",
    "analytic_equilibria",
    "predicted_limit",
    "lyapunov_psi",
    "case3_lyapunov",
    "__version__",
]
