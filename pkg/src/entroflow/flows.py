"""Mean curvature flow, gradient-flow advection, and boundary kinematics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from ._stencils import periodic_derivative_matrix, time_stencil
from .geometry import (
    GeometryError,
    MarkerBoundary,
    NonConvexError,
    SphereSurface,
    SupportCurve,
)
from .heat_field import HeatSolution, evaluate_jet

MAX_RETRIES = 10
EXTINCTION_FRACTION = 1e-4
# L-stable two-stage Rosenbrock (ROS2) parameter
ROS2_GAMMA = 1.0 + 1.0 / np.sqrt(2.0)


class ExtinctionError(RuntimeError):
    def __init__(self, message: str, t_ext: float | None = None):
        super().__init__(message)
        self.t_ext = t_ext


@dataclass(frozen=True, eq=False)
class FlowState:
    t: float
    boundary: object
    provenance: str

    def __post_init__(self):
        if not self.t > 0:
            raise ValueError(f"flow states live at t > 0, got t={self.t}")
        if self.provenance not in ("mcf", "gradient-advection", "analytic-sphere"):
            raise ValueError(f"unknown provenance {self.provenance!r}")


# ---------------------------------------------------------------------------
# mean curvature flow


def _ros2_step(y, rhs, jac, dt):
    A = np.eye(y.size) - ROS2_GAMMA * dt * jac(y)
    lu = lu_factor(A)
    k1 = lu_solve(lu, rhs(y))
    k2 = lu_solve(lu, rhs(y + dt * k1) - 2 * k1)
    return y + dt * (1.5 * k1 + 0.5 * k2)


def _curve_ros2(h, D2, dt):
    def rhs(v):
        rho = v + D2 @ v
        if np.min(rho) <= 0:
            raise NonConvexError(int(np.argmin(rho)), float(np.min(rho)))
        return -1.0 / rho

    def jac(v):
        rho = v + D2 @ v
        return (1.0 / rho**2)[:, None] * (np.eye(v.size) + D2)

    return _ros2_step(h, rhs, jac, dt)


def mcf_step_curve(c: SupportCurve, dt: float, scale: float | None = None) -> SupportCurve:
    """Advance dh/dt = -1/(h + h'') by one semi-implicit ROS2 step of size dt.

    A step that loses convexity or lets some support value grow is retried as 2, 4, ... substeps (at most
    MAX_RETRIES halvings).  `scale` is the initial size used for extinction
    detection; defaults to the current mean support value.
    """
    if dt < 0:
        raise ValueError("dt must be nonnegative")
    if dt == 0:
        return c
    scale = float(np.mean(c.h)) if scale is None else scale
    D2 = periodic_derivative_matrix(c.n, 2, c.stencil)
    for attempt in range(MAX_RETRIES + 1):
        substeps = 2**attempt
        h = c.h.copy()
        try:
            for _ in range(substeps):
                h_prev = h
                h = _curve_ros2(h, D2, dt / substeps)
                if np.any(h >= h_prev):
                    # support values decrease strictly under the flow; growth means overshoot
                    raise FloatingPointError("non-monotone step")
                rho = h + D2 @ h
                if np.min(rho) <= EXTINCTION_FRACTION * scale or np.min(h) <= EXTINCTION_FRACTION * scale:
                    raise ExtinctionError("curve is close to extinction")
            return SupportCurve(h, c.stencil)
        except (NonConvexError, FloatingPointError):
            continue
    raise ExtinctionError(f"convexity lost after {MAX_RETRIES} step halvings (surface near extinction)")


def mcf_flow_curve(c: SupportCurve, t0: float, dt: float, steps: int) -> list[FlowState]:
    scale = float(np.mean(c.h))
    states = [FlowState(t0, c, "mcf")]
    for k in range(steps):
        c = mcf_step_curve(c, dt, scale)
        states.append(FlowState(t0 + (k + 1) * dt, c, "mcf"))
    return states


def isoperimetric_ratio(c) -> float:
    """L^2 / (4 pi A); equals 1 exactly for circles."""
    return c.length**2 / (4 * np.pi * c.area)


def sphere_mcf_radius(n: int, R0: float, t: float) -> float:
    """Radius sqrt(R0^2 - 2 n t) of a sphere shrinking by mean curvature."""
    t_ext = R0**2 / (2 * n)
    if t >= t_ext:
        raise ExtinctionError(f"sphere of radius {R0} in dimension {n} vanishes at t={t_ext}", t_ext)
    return float(np.sqrt(R0**2 - 2 * n * t))


def mcf_step_sphere(s: SphereSurface, dt: float) -> SphereSurface:
    """ROS2 step of dR/dt = -n/R (same scheme as the curve stepper)."""
    n = s.dim
    R = _ros2_step(np.array([s.radius]), lambda r: -n / r, lambda r: np.array([[n / r[0] ** 2]]), dt)[0]
    if not EXTINCTION_FRACTION * s.radius < R < s.radius:
        raise ExtinctionError("sphere is close to extinction")
    return SphereSurface(n, float(R), s.center)


def expanding_sphere(n: int, t: float) -> SphereSurface:
    """The sphere of radius sqrt(2 n t) about the origin."""
    if not t > 0:
        raise ValueError("expanding sphere needs t > 0")
    return SphereSurface(n, float(np.sqrt(2 * n * t)))


# ---------------------------------------------------------------------------
# gradient-flow advection


def _velocity(u: HeatSolution, x, t):
    return evaluate_jet(u, x, t, order=2).grad_f


def advect_points(u: HeatSolution, x: np.ndarray, t: float, dt: float) -> np.ndarray:
    """Classical RK4 step of dx/dt = grad f(x, t)."""
    k1 = _velocity(u, x, t)
    k2 = _velocity(u, x + 0.5 * dt * k1, t + 0.5 * dt)
    k3 = _velocity(u, x + 0.5 * dt * k2, t + 0.5 * dt)
    k4 = _velocity(u, x + dt * k3, t + dt)
    return x + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def advect_domain(state: FlowState, u: HeatSolution, dt: float) -> FlowState:
    """Move every marker along grad f; the new boundary is re-checked for star-shapedness."""
    b = state.boundary
    if not isinstance(b, MarkerBoundary):
        raise TypeError("advection works on marker boundaries")
    pts = advect_points(u, b.points, state.t, dt)
    return FlowState(state.t + dt, b.with_points(pts), "gradient-advection")


def advect_trajectory(state: FlowState, u: HeatSolution, dt: float, steps: int) -> list[FlowState]:
    states = [state]
    for _ in range(steps):
        states.append(advect_domain(states[-1], u, dt))
    return states


# ---------------------------------------------------------------------------
# kinematics


@dataclass(frozen=True, eq=False)
class BoundaryKinematics:
    """Per-node boundary kinematics at time t.

    `dt_beta` is the normal-time derivative recovered from the material one
    through d beta/dt = d_t beta + grad beta . grad f; `dt_beta_normal` is
    the same quantity evaluated directly from the jet (pure normal motion).
    """

    t: float
    beta: np.ndarray
    dbeta_dt: np.ndarray
    dt_beta: np.ndarray
    dt_beta_normal: np.ndarray
    grad_beta_t: np.ndarray  # d beta / ds along the unit tangent
    grad_f_t: np.ndarray  # tangential component of grad f
    second_form_ff: np.ndarray  # h(grad f, grad f)
    curvature: np.ndarray
    dt_H: np.ndarray
    neumann_residual: float
    normal_rate_residual: float
    decomposition_residual: float


def _check_uniform(times, rtol=1e-9):
    times = np.asarray(times, dtype=float)
    steps = np.diff(times)
    if np.any(steps <= 0):
        raise ValueError("states must be strictly increasing in time")
    if np.max(np.abs(steps - steps[0])) > rtol * abs(steps[0]) + 1e-14:
        raise ValueError("states are not adjacent in time (nonuniform spacing)")
    return float(steps[0])


def _stencil(states, index, order):
    dt = _check_uniform([s.t for s in states])
    offsets, w = time_stencil(index, len(states), order)
    return offsets, w / dt


def boundary_kinematics(states: list[FlowState], u: HeatSolution, index: int | None = None,
                        order: int = 6, angular_count: int = 32) -> BoundaryKinematics:
    """Kinematics of the boundary at states[index] from neighbouring states.

    Material derivatives are finite differences along marker trajectories
    with a (order+1)-point stencil, shifted near the ends of the trajectory.
    `angular_count` sets the node grid on sphere trajectories and must match
    the surface quadrature the result is integrated against.
    """
    if len(states) < 3:
        raise ValueError("kinematics need at least 3 consecutive states")
    index = len(states) // 2 if index is None else index
    offsets, w = _stencil(states, index, order)
    st = states[index]
    if isinstance(st.boundary, SphereSurface):
        return _sphere_kinematics(states, u, index, offsets, w, angular_count)
    window = [states[index + o] for o in offsets]

    def beta_and_normal(s):
        j = evaluate_jet(u, s.boundary.position, s.t, order=2)
        return -np.sum(j.grad_f * s.boundary.normal, axis=1), s.boundary.normal, j

    data = [beta_and_normal(s) for s in window]
    b = st.boundary
    beta, N, jet = beta_and_normal(st)
    T = b.tangent
    dbeta = sum(wk * d[0] for wk, d in zip(w, data))
    dN = sum(wk * d[1] for wk, d in zip(w, data))
    dx = sum(wk * s.boundary.position for wk, s in zip(w, window))
    dkappa = sum(wk * s.boundary.curvature for wk, s in zip(w, window))

    gf = jet.grad_f
    gf_t = np.sum(gf * T, axis=1)
    grad_beta = b.d_ds(beta)
    kappa = b.curvature
    dt_beta = dbeta - grad_beta * gf_t

    j3 = evaluate_jet(u, b.position, st.t, order=3)
    H = j3.hess_f
    nHn = np.einsum("pi,pij,pj->p", N, H, N)
    dt_beta_normal = -np.sum(j3.dt_grad_f * N, axis=1) + beta * nHn - gf_t * grad_beta

    normal_formula = (grad_beta + kappa * gf_t)[:, None] * T
    beta_kin = -np.sum(dx * N, axis=1)
    dt_H = dkappa - b.d_ds(kappa) * gf_t
    return BoundaryKinematics(
        t=st.t, beta=beta, dbeta_dt=dbeta, dt_beta=dt_beta, dt_beta_normal=dt_beta_normal,
        grad_beta_t=grad_beta, grad_f_t=gf_t, second_form_ff=kappa * gf_t**2, curvature=kappa,
        dt_H=dt_H,
        neumann_residual=float(np.max(np.abs(beta_kin - beta))),
        normal_rate_residual=float(np.max(np.abs(dN - normal_formula))),
        decomposition_residual=float(np.max(np.abs(dbeta - (dt_beta_normal + grad_beta * gf_t)))),
    )


def sphere_states(n: int, times) -> list[FlowState]:
    return [FlowState(float(t), expanding_sphere(n, float(t)), "analytic-sphere") for t in times]


def _sphere_kinematics(states, u, index, offsets, w, angular_count=32):
    """Kinematics on a trajectory of spheres whose material points move radially.

    Nodes of the boundary grid are tracked by their direction; this is exact
    only when grad f has no tangential part, which is checked.
    """
    st = states[index]
    s = st.boundary
    grid = s.boundary_grid(angular_count)
    dirs = grid.normals

    def beta_at(state):
        sp = state.boundary
        x = sp.center + sp.radius * dirs
        j = evaluate_jet(u, x, state.t, order=2)
        return -np.sum(j.grad_f * dirs, axis=1), x, j

    window = [states[index + o] for o in offsets]
    data = [beta_at(sw) for sw in window]
    beta, x, jet = beta_at(st)
    gf = jet.grad_f
    gf_tan = gf - np.sum(gf * dirs, axis=1)[:, None] * dirs
    tan_norm = np.linalg.norm(gf_tan, axis=1)
    if np.max(tan_norm) > 1e-10 * max(1.0, float(np.max(np.abs(gf)))):
        raise GeometryError("sphere kinematics need a radial gradient field")
    dbeta = sum(wk * d[0] for wk, d in zip(w, data))
    dx = sum(wk * d[1] for wk, d in zip(w, data))
    dR = sum(wk * sw.boundary.radius for wk, sw in zip(w, window))
    j3 = evaluate_jet(u, x, st.t, order=3)
    H = j3.hess_f
    Hn = np.einsum("pij,pj->pi", H, dirs)
    # tangential gradient of beta = -(Hess f N)^T - h(grad^T f)
    grad_beta = -(Hn - np.sum(Hn * dirs, axis=1)[:, None] * dirs) - gf_tan / s.radius
    grad_beta_mag = np.linalg.norm(grad_beta, axis=1)
    nHn = np.sum(Hn * dirs, axis=1)
    dt_beta_normal = -np.sum(j3.dt_grad_f * dirs, axis=1) + beta * nHn - np.sum(gf_tan * grad_beta, axis=1)
    Hmean = np.full(beta.shape, s.mean_curvature)
    dt_H = np.full(beta.shape, -s.dim * dR / s.radius**2)
    return BoundaryKinematics(
        t=st.t, beta=beta, dbeta_dt=dbeta, dt_beta=dbeta - np.sum(grad_beta * gf_tan, axis=1),
        dt_beta_normal=dt_beta_normal, grad_beta_t=grad_beta_mag, grad_f_t=tan_norm,
        second_form_ff=tan_norm**2 / s.radius, curvature=Hmean, dt_H=dt_H,
        neumann_residual=float(np.max(np.abs(-np.sum(dx * dirs, axis=1) - beta))),
        normal_rate_residual=0.0,
        decomposition_residual=float(np.max(np.abs(dbeta - dt_beta_normal - np.sum(grad_beta * gf_tan, axis=1)))),
    )


def harnack_dtH(states: list[FlowState], index: int | None = None, order: int = 6) -> np.ndarray:
    """Normal-time derivative of the curvature on a support-function trajectory.

    The Gauss-map parametrisation moves points tangentially with speed
    d/dtheta (dh/dt); the fixed-theta rate of kappa is corrected by that drift:
    d_t H = d_t kappa|_theta - (d kappa/ds) * v_tan.
    """
    if len(states) < 3:
        raise ValueError("harnack_dtH needs at least 3 consecutive states")
    if not all(isinstance(s.boundary, SupportCurve) for s in states):
        raise TypeError("harnack_dtH works on support-function curves")
    index = len(states) // 2 if index is None else index
    offsets, w = _stencil(states, index, order)
    window = [states[index + o].boundary for o in offsets]
    dkappa = sum(wk * c.curvature for wk, c in zip(w, window))
    dh = sum(wk * c.h for wk, c in zip(w, window))
    c = states[index].boundary
    kappa = c.curvature
    v_tan = c.derivative(dh, 1)
    return dkappa - c.d_ds(kappa) * v_tan


__all__ = [
    "ExtinctionError", "FlowState", "BoundaryKinematics", "mcf_step_curve", "mcf_flow_curve",
    "isoperimetric_ratio", "sphere_mcf_radius", "mcf_step_sphere", "expanding_sphere",
    "advect_points", "advect_domain", "advect_trajectory", "boundary_kinematics", "sphere_states",
    "harnack_dtH",
]
