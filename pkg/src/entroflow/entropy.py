"""W-entropy of a moving domain, its derivative formula, and the Harnack quantity.

With u = e^{-f} / (4 pi t)^{(n+1)/2} a positive heat solution and beta the
inward normal speed of the boundary,

    W = int_Omega (t |grad f|^2 + f - (n+1)) u dV - 2 t int_M beta u dS.

When beta = -grad f . N this equals int_Omega W(f) u dV with the pointwise
W(f) = t (2 Lap f - |grad f|^2) + f - (n+1), and along the gradient flow
dx/dt = grad f

    dW/dt = -2t int |Hess f - Id/2t|^2 u dV
            -2t int (d_t beta + 2 grad beta . grad f + h(grad f, grad f) + beta/2t) u dS.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import Domain, SphereSurface
from .heat_field import HeatSolution, evaluate_jet, hessian_defect_sq, w_from_jet

HARNACK_GRADF_MULTIPLES = (1.0, 2.0, -2.0)


@dataclass
class EntropySample:
    t: float
    W_boundary: float
    W_interior: float
    rhs_volume: float = np.nan
    rhs_boundary: float = np.nan
    fd_dWdt: float = np.nan
    harnack_min: float = np.nan
    H_min: float = np.nan
    residuals: dict = field(default_factory=dict)

    @property
    def rhs_total(self) -> float:
        return self.rhs_volume + self.rhs_boundary


@dataclass(frozen=True)
class EckerSample:
    tau: float
    W_ecker: float


def _beta_default(domain: Domain, jet) -> np.ndarray:
    return -np.sum(jet.grad_f * domain.surface.normals, axis=1)


def entropy_boundary_form(domain: Domain, u: HeatSolution, t: float, beta=None) -> float:
    """Volume integral of (t|grad f|^2 + f - (n+1)) u plus -2t times the boundary integral of beta u."""
    d = domain.ambient_dim
    jv = evaluate_jet(u, domain.volume.nodes, t, order=2)
    vol = domain.volume.integrate((t * jv.grad_f_sq + jv.f - d) * jv.u)
    js = evaluate_jet(u, domain.surface.nodes, t, order=2)
    beta = _beta_default(domain, js) if beta is None else np.asarray(beta, dtype=float)
    return vol - 2 * t * domain.surface.integrate(beta * js.u)


def entropy_interior_form(domain: Domain, u: HeatSolution, t: float) -> float:
    jv = evaluate_jet(u, domain.volume.nodes, t, order=2)
    return domain.volume.integrate(w_from_jet(jv) * jv.u)


def entropy_forms(domain: Domain, u: HeatSolution, t: float) -> dict:
    """Both entropy forms and the volume part of the derivative from one set of jets.

    Returns W_boundary, W_interior, rhs_volume, the mass int u dV, the maximum
    of the pointwise volume integrand |Hess f - Id/2t|^2 over the quadrature
    nodes, and u at the surface nodes.
    """
    d = domain.ambient_dim
    jv = evaluate_jet(u, domain.volume.nodes, t, order=2)
    uv = jv.u
    js = evaluate_jet(u, domain.surface.nodes, t, order=2)
    beta = _beta_default(domain, js)
    W_b = domain.volume.integrate((t * jv.grad_f_sq + jv.f - d) * uv) - 2 * t * domain.surface.integrate(beta * js.u)
    defect = hessian_defect_sq(jv)
    return {
        "W_boundary": W_b,
        "W_interior": domain.volume.integrate(w_from_jet(jv) * uv),
        "rhs_volume": -2 * t * domain.volume.integrate(defect * uv),
        "mass": domain.volume.integrate(uv),
        "volume_integrand_max": float(np.max(defect)),
        "surface_u": js.u,
    }


def boundary_integrand(kin) -> np.ndarray:
    """d_t beta + 2 grad beta . grad f + h(grad f, grad f) + beta/(2t)."""
    return kin.dt_beta + 2 * kin.grad_beta_t * kin.grad_f_t + kin.second_form_ff + kin.beta / (2 * kin.t)


def volume_integrand(domain: Domain, u: HeatSolution, t: float):
    jv = evaluate_jet(u, domain.volume.nodes, t, order=2)
    return hessian_defect_sq(jv), jv.u


def entropy_rhs(domain: Domain, kin, u: HeatSolution) -> tuple[float, float]:
    """(volume term, boundary term) of the predicted dW/dt at the kinematics time."""
    if kin is None:
        raise ValueError("entropy_rhs needs boundary kinematics at the sample time")
    t = kin.t
    defect, uv = volume_integrand(domain, u, t)
    vol = -2 * t * domain.volume.integrate(defect * uv)
    us = u.value(domain.surface.nodes, t)
    if us.shape != kin.beta.shape:
        raise ValueError("kinematics and surface grid disagree on the node count")
    bdry = -2 * t * domain.surface.integrate(boundary_integrand(kin) * us)
    return vol, bdry


def harnack_quantity(boundary, V_t: np.ndarray, dt_H: np.ndarray, t: float,
                     curvature: np.ndarray | None = None, dH_ds: np.ndarray | None = None) -> np.ndarray:
    """d_t H + 2 grad H . V + h(V, V) + H/(2t) per node, for tangent V = V_t * T.

    On spheres H and h are closed-form and grad H vanishes.
    """
    V_t = np.asarray(V_t, dtype=float)
    if isinstance(boundary, SphereSurface):
        H = np.full(V_t.shape, boundary.mean_curvature)
        return dt_H + V_t**2 / boundary.radius + H / (2 * t)
    kappa = boundary.curvature if curvature is None else curvature
    ks = boundary.d_ds(kappa) if dH_ds is None else dH_ds
    return dt_H + 2 * ks * V_t + kappa * V_t**2 + kappa / (2 * t)


@dataclass(frozen=True)
class HarnackCheck:
    minimum: float
    at_grad_f: np.ndarray
    H_min: float
    applicable: bool
    note: str = ""


def harnack_check(boundary, dt_H, t, grad_f_t) -> HarnackCheck:
    """Minimum of the Harnack quantity over {0, +-unit tangent, grad f, +-2 grad f}.

    The inequality only applies to weakly convex boundaries (H >= 0); when
    that fails the result is flagged not applicable.
    """
    kappa = (np.full(np.shape(dt_H), boundary.mean_curvature) if isinstance(boundary, SphereSurface)
             else boundary.curvature)
    ks = None if isinstance(boundary, SphereSurface) else boundary.d_ds(kappa)
    H_min = float(np.min(kappa))
    one = np.ones_like(grad_f_t)
    vectors = [0 * one, one, -one] + [m * grad_f_t for m in HARNACK_GRADF_MULTIPLES]
    values = [harnack_quantity(boundary, v, dt_H, t, kappa, ks) for v in vectors]
    minimum = float(min(np.min(v) for v in values))
    if H_min < 0:
        return HarnackCheck(minimum, values[3], H_min, False, "boundary is not weakly convex (H < 0)")
    return HarnackCheck(minimum, values[3], H_min, True)


def ecker_functional(domain: Domain, f, beta, tau: float) -> float:
    """int (tau |grad f|^2 + f - (n+1)) u dV + 2 tau int beta u dS, u = e^{-f}/(4 pi tau)^{(n+1)/2}.

    `f` is a callable returning (values, gradients) at an array of points;
    `beta` holds the supplied normal speed at the surface nodes.
    """
    if not tau > 0:
        raise ValueError("tau must be positive")
    d = domain.ambient_dim
    norm = (4 * np.pi * tau) ** (-d / 2)
    fv, gv = f(domain.volume.nodes)
    uv = norm * np.exp(-fv)
    vol = domain.volume.integrate((tau * np.sum(gv * gv, axis=1) + fv - d) * uv)
    fs, _ = f(domain.surface.nodes)
    us = norm * np.exp(-fs)
    return vol + 2 * tau * domain.surface.integrate(np.asarray(beta, dtype=float) * us)


def fd_time_derivative(times, values, rtol: float = 1e-9) -> np.ndarray:
    """Second-order finite-difference derivative of a uniformly sampled series."""
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    if times.size < 3:
        raise ValueError("need at least 3 samples")
    steps = np.diff(times)
    if np.max(np.abs(steps - steps[0])) > rtol * abs(steps[0]):
        raise ValueError("time samples are not uniformly spaced")
    return np.gradient(values, steps[0], edge_order=2)
