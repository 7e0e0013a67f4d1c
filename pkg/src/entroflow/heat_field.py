"""Positive heat solutions as Gaussian mixtures, with exact derivative jets.

A mixture is ``u(x, t) = sum_i w_i (4 pi (t + s_i))^(-d/2) exp(-|x - c_i|^2 / (4 (t + s_i)))``
on R^d, d = n + 1.  Everything is evaluated in log space: spatial derivatives
are returned normalised by u (``p_k = D^k u / u``) and are built from the
per-mode Hermite ratios, weighted by the mode posteriors ``g_i / u``.  The
potential is ``f = -log u - (d/2) log(4 pi t)``.

Time derivatives of the modes are differentiated directly (not replaced by
Laplacians), so the heat-equation residual compares two independent paths.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from itertools import permutations, product

import numpy as np
from scipy.special import logsumexp


@dataclass(frozen=True, eq=False)
class HeatSolution:
    weights: np.ndarray
    centers: np.ndarray
    offsets: np.ndarray

    def __post_init__(self):
        w = np.atleast_1d(np.asarray(self.weights, dtype=float))
        c = np.atleast_2d(np.asarray(self.centers, dtype=float))
        s = np.atleast_1d(np.asarray(self.offsets, dtype=float))
        if not (w.shape[0] == c.shape[0] == s.shape[0]):
            raise ValueError("weights, centers and offsets must describe the same number of modes")
        if np.any(w <= 0):
            raise ValueError("mode weights must be positive")
        if np.any(s < 0):
            raise ValueError("time offsets must be nonnegative")
        for a in (w, c, s):
            a.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "centers", c)
        object.__setattr__(self, "offsets", s)

    @classmethod
    def kernel(cls, dim: int, weight: float = 1.0, center=None, offset: float = 0.0) -> "HeatSolution":
        center = np.zeros(dim) if center is None else np.asarray(center, dtype=float)
        return cls([weight], [center], [offset])

    @classmethod
    def from_records(cls, records) -> "HeatSolution":
        return cls([r["weight"] for r in records], [r["center"] for r in records],
                   [r.get("offset", 0.0) for r in records])

    def to_records(self) -> list[dict]:
        return [{"weight": float(w), "center": [float(v) for v in c], "offset": float(s)}
                for w, c, s in zip(self.weights, self.centers, self.offsets)]

    @property
    def dim(self) -> int:
        return self.centers.shape[1]

    def scaled(self, factor: float) -> "HeatSolution":
        return HeatSolution(self.weights * factor, self.centers, self.offsets)

    def translated(self, shift) -> "HeatSolution":
        return HeatSolution(self.weights, self.centers + np.asarray(shift, float), self.offsets)

    def _modes(self, x, t):
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.dim:
            raise ValueError(f"points must have {self.dim} coordinates")
        t = float(t)
        if not t > 0:
            raise ValueError(f"heat solutions are evaluated at t > 0 only, got t={t}")
        tau = t + self.offsets
        y = x[..., None, :] - self.centers  # (..., M, d)
        r2 = np.sum(y * y, axis=-1)
        log_g = np.log(self.weights) - 0.5 * self.dim * np.log(4 * np.pi * tau) - r2 / (4 * tau)
        return y, r2, tau, log_g

    def log_value(self, x, t) -> np.ndarray:
        *_, log_g = self._modes(x, t)
        return logsumexp(log_g, axis=-1)

    def value(self, x, t) -> np.ndarray:
        return np.exp(self.log_value(x, t))

    def potential(self, x, t) -> np.ndarray:
        return -self.log_value(x, t) - 0.5 * self.dim * np.log(4 * np.pi * float(t))

    def jet(self, x, t, order: int = 3) -> "FieldJet":
        return evaluate_jet(self, x, t, order)


def _hermite_ratios(z: np.ndarray, a: np.ndarray, order: int) -> list[np.ndarray]:
    """q_k = a^k H_k(z): k-th y-derivative of exp(-z^2) divided by exp(-z^2), z = y / (2 sqrt(tau))."""
    H = [np.ones_like(z), 2 * z]
    for k in range(1, order):
        H.append(2 * z * H[k] - 2 * k * H[k - 1])
    return [a**k * H[k] for k in range(order + 1)]


def _moment_tensor(q, post, d: int, rank: int) -> np.ndarray:
    """sum_i post_i prod_j q[alpha_j](y_ij) for every index tuple of length `rank`."""
    shape = post.shape[:-1] + (d,) * rank
    out = np.empty(shape)
    cache = {}
    for idx in product(range(d), repeat=rank):
        key = tuple(sorted(idx))
        if key not in cache:
            counts = np.bincount(np.array(key, dtype=int), minlength=d)
            term = post.copy()
            for j, c in enumerate(counts):
                if c:
                    term = term * q[c][..., j]
            cache[key] = np.sum(term, axis=-1)
        out[(Ellipsis,) + idx] = cache[key]
    return out


def _sym(t: np.ndarray, rank: int) -> np.ndarray:
    """Sum over all distinct index permutations (unnormalised symmetrisation)."""
    lead = t.ndim - rank
    axes = list(range(lead))
    total = np.zeros_like(t)
    for perm in permutations(range(rank)):
        total = total + np.transpose(t, axes + [lead + p for p in perm])
    return total


def _pointwise_outer(a, b):
    """Outer product over trailing tensor axes, shared leading point axis."""
    return a.reshape(a.shape + (1,) * (b.ndim - 1)) * b.reshape(b.shape[:1] + (1,) * (a.ndim - 1) + b.shape[1:])


@dataclass(frozen=True, eq=False)
class FieldJet:
    """Derivative jet of u and of f = -log u - (d/2) log(4 pi t) at a batch of points.

    ``p1..p4`` are D^k u / u; ``dt_u_over_u``, ``dt_p1``, ``dt_p2`` are
    (d/dt D^k u) / u obtained from the explicit time derivative of each mode.
    Cumulant-type combinations of these give the log derivatives.
    """

    t: float
    dim: int
    log_u: np.ndarray
    p1: np.ndarray
    p2: np.ndarray
    p3: np.ndarray | None
    p4: np.ndarray | None
    dt_u_over_u: np.ndarray
    dt_p1: np.ndarray | None
    dt_p2: np.ndarray | None

    # -- u-side ------------------------------------------------------------
    @property
    def u(self) -> np.ndarray:
        return np.exp(self.log_u)

    @property
    def grad_u(self) -> np.ndarray:
        return self.u[:, None] * self.p1

    @property
    def hess_u(self) -> np.ndarray:
        return self.u[:, None, None] * self.p2

    @property
    def third_u(self) -> np.ndarray:
        return self.u[:, None, None, None] * self.p3

    @property
    def dt_u(self) -> np.ndarray:
        return self.u * self.dt_u_over_u

    @property
    def lap_u_over_u(self) -> np.ndarray:
        return np.trace(self.p2, axis1=1, axis2=2)

    # -- f-side ------------------------------------------------------------
    @property
    def f(self) -> np.ndarray:
        return -self.log_u - 0.5 * self.dim * np.log(4 * np.pi * self.t)

    @property
    def grad_f(self) -> np.ndarray:
        return -self.p1

    @cached_property
    def hess_f(self) -> np.ndarray:
        p1 = self.p1
        return -(self.p2 - p1[:, :, None] * p1[:, None, :])

    @cached_property
    def third_f(self) -> np.ndarray:
        p1, p2, p3 = self.p1, self.p2, self.p3
        k3 = p3 - _sym(_pointwise_outer(p2, p1), 3) / 2 + 2 * _pointwise_outer(_pointwise_outer(p1, p1), p1)
        return -k3

    @cached_property
    def fourth_f(self) -> np.ndarray:
        p1, p2, p3, p4 = self.p1, self.p2, self.p3, self.p4
        o = _pointwise_outer
        p11 = o(p1, p1)
        k4 = (p4
              - _sym(o(p3, p1), 4) / 6
              - _sym(o(p2, p2), 4) / 8
              + 2 * _sym(o(p2, p11), 4) / 4
              - 6 * o(p11, p11))
        return -k4

    @cached_property
    def grad_f_sq(self) -> np.ndarray:
        return np.sum(self.p1**2, axis=1)

    @cached_property
    def lap_f(self) -> np.ndarray:
        return -(self.lap_u_over_u - self.grad_f_sq)

    @cached_property
    def grad_lap_f(self) -> np.ndarray:
        return np.trace(self.third_f, axis1=2, axis2=3)

    @property
    def bilap_f(self) -> np.ndarray:
        f4 = self.fourth_f
        return np.einsum("pjjkk->p", f4)

    @property
    def lap_grad_f_sq(self) -> np.ndarray:
        """Delta |grad f|^2 via the chain rule on f-derivatives."""
        H = self.hess_f
        return 2 * np.sum(H * H, axis=(1, 2)) + 2 * np.sum(self.grad_f * self.grad_lap_f, axis=1)

    @property
    def dt_f(self) -> np.ndarray:
        return -self.dt_u_over_u - 0.5 * self.dim / self.t

    @property
    def dt_grad_f(self) -> np.ndarray:
        return -(self.dt_p1 - self.p1 * self.dt_u_over_u[:, None])

    @property
    def dt_hess_f(self) -> np.ndarray:
        dp1 = self.dt_p1 - self.p1 * self.dt_u_over_u[:, None]
        dp2 = self.dt_p2 - self.p2 * self.dt_u_over_u[:, None, None]
        p1 = self.p1
        return -(dp2 - dp1[:, :, None] * p1[:, None, :] - p1[:, :, None] * dp1[:, None, :])


def evaluate_jet(u: HeatSolution, x, t, order: int = 3) -> FieldJet:
    """Closed-form jet of u and f at points `x` (shape (P, d) or (d,)) and time t > 0.

    `order` is the highest spatial derivative of u computed (2, 3 or 4); the
    mixed time derivatives are filled in for order >= 3.
    """
    if order not in (2, 3, 4):
        raise ValueError("jet order must be 2, 3 or 4")
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y, r2, tau, log_g = u._modes(x, t)
    d = u.dim
    log_u = logsumexp(log_g, axis=-1)
    post = np.exp(log_g - log_u[:, None])  # (P, M), sums to 1 over modes
    z = y / (2 * np.sqrt(tau))[:, None]
    a = (-1.0 / (2 * np.sqrt(tau)))[:, None]
    q = _hermite_ratios(z, a, order)
    p1 = _moment_tensor(q, post, d, 1)
    p2 = _moment_tensor(q, post, d, 2)
    p3 = _moment_tensor(q, post, d, 3) if order >= 3 else None
    p4 = _moment_tensor(q, post, d, 4) if order >= 4 else None

    # explicit mode time derivatives: d/dt log g = -d/(2 tau) + r^2/(4 tau^2)
    dlog = -0.5 * d / tau + r2 / (4 * tau**2)  # (P, M)
    dt_u = np.sum(post * dlog, axis=-1)
    dt_p1 = dt_p2 = None
    if order >= 3:
        g1 = -y / (2 * tau)[:, None]  # D g / g
        dg1 = g1 * dlog[..., None] + y / (2 * tau**2)[:, None]
        dt_p1 = np.einsum("pm,pmj->pj", post, dg1)
        eye = np.eye(d)
        g2 = y[..., :, None] * y[..., None, :] / (4 * tau**2)[:, None, None] - eye / (2 * tau)[:, None, None]
        dg2 = (g2 * dlog[..., None, None]
               - y[..., :, None] * y[..., None, :] / (2 * tau**3)[:, None, None]
               + eye / (2 * tau**2)[:, None, None])
        dt_p2 = np.einsum("pm,pmjk->pjk", post, dg2)
    return FieldJet(float(t), d, log_u, p1, p2, p3, p4, dt_u, dt_p1, dt_p2)


# ---------------------------------------------------------------------------
# pointwise identities


def heat_residual(u: HeatSolution, x, t) -> np.ndarray:
    """(d_t u - Lap u) / u; zero for every mixture."""
    j = evaluate_jet(u, x, t, order=2)
    return j.dt_u_over_u - j.lap_u_over_u


def f_equation_residual_from_jet(j: FieldJet) -> np.ndarray:
    return j.dt_f - j.lap_f + j.grad_f_sq + 0.5 * j.dim / j.t


def f_equation_residual(u: HeatSolution, x, t) -> np.ndarray:
    """d_t f - Lap f + |grad f|^2 + (n+1)/(2t)."""
    return f_equation_residual_from_jet(evaluate_jet(u, x, t, order=2))


def w_from_jet(j: FieldJet) -> np.ndarray:
    return j.t * (2 * j.lap_f - j.grad_f_sq) + j.f - j.dim


def w_pointwise(u: HeatSolution, x, t) -> np.ndarray:
    """t (2 Lap f - |grad f|^2) + f - (n+1)."""
    return w_from_jet(evaluate_jet(u, x, t, order=2))


def hessian_defect_sq(j: FieldJet) -> np.ndarray:
    """|Hess f - Id/(2t)|^2 (Frobenius)."""
    D = j.hess_f - np.eye(j.dim) / (2 * j.t)
    return np.sum(D * D, axis=(1, 2))


def key_identity_terms(j: FieldJet) -> tuple[np.ndarray, np.ndarray]:
    """Both sides of (d_t - Lap)(W u) = -2 t u |Hess f - Id/(2t)|^2, divided by u.

    The left side is assembled from the 4th-order jet with explicit time
    derivatives; nothing on it uses the f-equation.
    """
    if j.p4 is None:
        raise ValueError("the key identity needs a 4th-order jet")
    t, d = j.t, j.dim
    gf = j.grad_f
    H = j.hess_f
    lap_f = j.lap_f
    glf = j.grad_lap_f
    W = t * (2 * lap_f - j.grad_f_sq) + j.f - d

    dt_gf = j.dt_grad_f
    dt_lap_f = np.trace(j.dt_hess_f, axis1=1, axis2=2)
    dt_W = 2 * lap_f - j.grad_f_sq + t * (2 * dt_lap_f - 2 * np.sum(gf * dt_gf, axis=1)) + j.dt_f

    grad_W = t * (2 * glf - 2 * np.einsum("pjk,pk->pj", H, gf)) + gf
    lap_W = t * (2 * j.bilap_f - 2 * np.sum(H * H, axis=(1, 2)) - 2 * np.sum(gf * glf, axis=1)) + lap_f

    # (d_t - Lap)(W u) / u = d_t W - Lap W - 2 (grad u / u) . grad W + W (d_t u - Lap u) / u
    lhs = dt_W - lap_W - 2 * np.sum(j.p1 * grad_W, axis=1) + W * (j.dt_u_over_u - j.lap_u_over_u)
    rhs = -2 * t * hessian_defect_sq(j)
    return lhs, rhs


def key_identity_residual(u: HeatSolution, x, t) -> np.ndarray:
    """(d_t - Lap)(W u) + 2 t u |Hess f - Id/(2t)|^2 at each point (u-scaled)."""
    j = evaluate_jet(u, x, t, order=4)
    lhs, rhs = key_identity_terms(j)
    return j.u * (lhs - rhs)


def bochner_terms(j: FieldJet) -> tuple[np.ndarray, np.ndarray]:
    """(1/2) Lap |grad f|^2 from the quotient rule on u, and <grad f, grad Lap f> + |Hess f|^2."""
    p1, p2, p3 = j.p1, j.p2, j.p3
    lap = np.trace(p2, axis1=1, axis2=2)
    s = np.sum(p1**2, axis=1)
    left = (np.sum(p2 * p2, axis=(1, 2))
            + np.sum(p1 * np.trace(p3, axis1=2, axis2=3), axis=1)
            - 4 * np.einsum("pj,pjk,pk->p", p1, p2, p1)
            + s * (3 * s - lap))
    H = j.hess_f
    right = np.sum(j.grad_f * j.grad_lap_f, axis=1) + np.sum(H * H, axis=(1, 2))
    return left, right


def bochner_residual(u: HeatSolution, x, t) -> np.ndarray:
    left, right = bochner_terms(evaluate_jet(u, x, t, order=3))
    return left - right


__all__ = [
    "HeatSolution", "FieldJet", "evaluate_jet", "heat_residual", "f_equation_residual",
    "f_equation_residual_from_jet", "w_pointwise", "w_from_jet", "hessian_defect_sq",
    "key_identity_terms", "key_identity_residual", "bochner_terms", "bochner_residual",
]
