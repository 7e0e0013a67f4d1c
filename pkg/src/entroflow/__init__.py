"""Entropy of moving domains: closed-form heat fields, boundary flows and checks."""

from .entropy import (
    EckerSample,
    EntropySample,
    ecker_functional,
    entropy_boundary_form,
    entropy_forms,
    entropy_interior_form,
    entropy_rhs,
    fd_time_derivative,
    harnack_check,
    harnack_quantity,
)
from .flows import (
    BoundaryKinematics,
    ExtinctionError,
    FlowState,
    advect_domain,
    advect_trajectory,
    boundary_kinematics,
    mcf_flow_curve,
    mcf_step_curve,
    mcf_step_sphere,
)
from .geometry import (
    Domain,
    GeometryError,
    MarkerBoundary,
    NonConvexError,
    NotStarShapedError,
    SphereSurface,
    SupportCurve,
    star_domain_quadrature,
)
from .heat_field import HeatSolution, evaluate_jet
from .minimizer import CriticalityReport, ProfileFamily, minimize_mu

__version__ = "0.1.0"

__all__ = [
    "BoundaryKinematics", "CriticalityReport", "Domain", "EckerSample", "EntropySample", "ExtinctionError",
    "FlowState", "GeometryError", "HeatSolution", "MarkerBoundary", "NonConvexError", "NotStarShapedError",
    "ProfileFamily", "SphereSurface", "SupportCurve", "advect_domain", "advect_trajectory",
    "boundary_kinematics", "ecker_functional", "entropy_boundary_form", "entropy_forms",
    "entropy_interior_form", "entropy_rhs", "evaluate_jet", "fd_time_derivative", "harnack_check",
    "harnack_quantity", "mcf_flow_curve", "mcf_step_curve", "mcf_step_sphere", "minimize_mu",
    "star_domain_quadrature",
]
