"""Radial solutions of a quasilinear Schroedinger equation via the dual transform.

The substitution ``w = f(u)`` with ``f' = 1 / sqrt(1 + 2 f^2)`` turns the
quasilinear problem into a semilinear one for ``u``, which is solved by a
numerical mountain-pass method on a geometric radial mesh.
"""

from .config import ConfigError, RunConfig, load_config, parse_config
from .dual_transform import DEFAULT_TRANSFORM, DualTransform
from .energy import DiscreteEnergy
from .estimator import GroundStateSolver
from .exceptions import (
    DomainError,
    EndpointSearchError,
    NotInSpaceError,
    PotentialOverflowError,
    SolverDivergenceError,
)
from .exponents import (
    AdmissibilityReport,
    Envelope,
    alpha_star,
    delta_rate_infinity,
    delta_rate_zero,
    existence_check,
    q0_star,
    q1_range,
    q2_lower_bound,
    q_inf_star,
)
from .mesh import MeshMismatchError, RadialFunction, RadialMesh
from .mountain_pass import SolveReport, refine, rho_certificate, solve
from .nonlinearity import NonlinearitySpec
from .potentials import PotentialSpec
from .verify import ResidualReport, embedding_rate_fit, verify_solution

__version__ = "0.1.0"

__all__ = [
    "AdmissibilityReport", "ConfigError", "DEFAULT_TRANSFORM", "DiscreteEnergy", "DomainError",
    "DualTransform", "EndpointSearchError", "Envelope", "GroundStateSolver", "MeshMismatchError",
    "NonlinearitySpec", "NotInSpaceError", "PotentialOverflowError", "PotentialSpec",
    "RadialFunction", "RadialMesh", "ResidualReport", "RunConfig", "SolveReport",
    "SolverDivergenceError", "alpha_star", "delta_rate_infinity", "delta_rate_zero",
    "embedding_rate_fit", "existence_check", "load_config", "parse_config", "q0_star",
    "q1_range", "q2_lower_bound", "q_inf_star", "refine", "rho_certificate", "solve",
    "verify_solution",
]
