"""Entropy infimum over normalised quadratic profiles.

Profiles are f(x) = s |x - c|^2 / (4t) + a.  For each (c, s) the offset a is
fixed by the constraint int_Omega e^{-f} / (4 pi t)^{d/2} dV = 1, i.e.
a = log of the unnormalised mass; the objective is the boundary-form entropy
with supplied boundary speed beta.

Its first variation along a perturbation phi of f (with int phi u = 0) is

    dJ = int phi u (1 - W) dV + 2t int_M phi u (grad f . N + beta) dS,

which is used to polish the golden-section descent down to machine precision.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .geometry import Domain

GOLDEN_REL_TOL = 1e-8


@dataclass(frozen=True)
class Profile:
    t: float
    center: np.ndarray
    scale: float
    offset: float

    @property
    def dim(self) -> int:
        return len(self.center)

    def raw(self, x):
        y = np.asarray(x) - self.center
        return self.scale * np.sum(y * y, axis=-1) / (4 * self.t)

    def f(self, x):
        return self.raw(x) + self.offset

    def grad(self, x):
        return self.scale * (np.asarray(x) - self.center) / (2 * self.t)

    def lap(self):
        return self.scale * self.dim / (2 * self.t)

    def u(self, x):
        return np.exp(-self.f(x)) / (4 * np.pi * self.t) ** (self.dim / 2)

    def W(self, x):
        g = self.grad(x)
        return self.t * (2 * self.lap() - np.sum(g * g, axis=-1)) + self.f(x) - self.dim

    def __call__(self, x):
        return self.f(x), self.grad(x)


@dataclass(frozen=True)
class ProfileFamily:
    """Which of (center, scale) are free; the offset is always solved exactly."""

    t: float
    dim: int
    free_center: bool = True
    free_scale: bool = True

    def n_free(self) -> int:
        return self.dim * self.free_center + self.free_scale

    def unpack(self, p, base: "Profile") -> tuple[np.ndarray, float]:
        p = list(p)
        c = np.array([p.pop(0) for _ in range(self.dim)], dtype=float) if self.free_center else base.center
        s = float(np.exp(p.pop(0))) if self.free_scale else base.scale
        return c, s

    def pack(self, prof: Profile) -> np.ndarray:
        out = list(prof.center) if self.free_center else []
        if self.free_scale:
            out.append(np.log(prof.scale))
        return np.array(out, dtype=float)


@dataclass
class CriticalityReport:
    mu: float
    center: list
    scale: float
    offset: float
    max_W_deviation: float
    max_beta_deviation: float
    normalization_residual: float
    converged: bool = True
    iterations: int = 0
    message: str = ""
    history: list = field(default_factory=list)

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("history")
        return d


def normalization(domain: Domain, u, t: float | None = None) -> float:
    """int_Omega u dV for a heat solution (with t) or a Profile."""
    if isinstance(u, Profile):
        return domain.volume.integrate(u.u(domain.volume.nodes))
    return domain.volume.integrate(u.value(domain.volume.nodes, t))


def normalized_profile(domain: Domain, t: float, center, scale: float) -> Profile:
    trial = Profile(t, np.asarray(center, dtype=float), float(scale), 0.0)
    return Profile(t, trial.center, trial.scale, float(np.log(normalization(domain, trial))))


def entropy_of_profile(domain: Domain, prof: Profile, beta) -> float:
    d = prof.dim
    xv = domain.volume.nodes
    g = prof.grad(xv)
    uv = prof.u(xv)
    vol = domain.volume.integrate((prof.t * np.sum(g * g, axis=1) + prof.f(xv) - d) * uv)
    us = prof.u(domain.surface.nodes)
    return vol - 2 * prof.t * domain.surface.integrate(np.asarray(beta) * us)


def entropy_gradient(domain: Domain, prof: Profile, beta, family: ProfileFamily) -> np.ndarray:
    """Exact derivative of the constrained objective in the packed parameters."""
    t = prof.t
    xv, xs = domain.volume.nodes, domain.surface.nodes
    uv, us = prof.u(xv), prof.u(xs)
    Wv = prof.W(xv)
    flux = np.sum(prof.grad(xs) * domain.surface.normals, axis=1) + np.asarray(beta)

    def raw_derivs(x):
        y = x - prof.center
        out = []
        if family.free_center:
            out.extend(-prof.scale * y[:, i] / (2 * t) for i in range(prof.dim))
        if family.free_scale:
            # derivative in log s
            out.append(prof.scale * np.sum(y * y, axis=1) / (4 * t))
        return out

    grads = []
    for phi_v, phi_s in zip(raw_derivs(xv), raw_derivs(xs)):
        mean = domain.volume.integrate(phi_v * uv)
        grads.append(domain.volume.integrate((phi_v - mean) * uv * (1 - Wv))
                     + 2 * t * domain.surface.integrate((phi_s - mean) * us * flux))
    return np.array(grads)


def criticality_residuals(domain: Domain, prof: Profile, beta, mu: float) -> CriticalityReport:
    xv = domain.volume.nodes
    W_dev = float(np.max(np.abs(prof.W(xv) - mu)))
    xs = domain.surface.nodes
    beta_dev = float(np.max(np.abs(np.asarray(beta) + np.sum(prof.grad(xs) * domain.surface.normals, axis=1))))
    norm_res = abs(normalization(domain, prof) - 1.0)
    return CriticalityReport(float(mu), [float(v) for v in prof.center], float(prof.scale), float(prof.offset),
                             W_dev, beta_dev, float(norm_res))


def minimize_mu(domain: Domain, t: float, family: ProfileFamily, beta, start: Profile | None = None,
                max_iter: int = 500, tol: float = 1e-10) -> CriticalityReport:
    """Coordinate descent over the free profile parameters.

    Each sweep runs a golden-section line search per coordinate (to about
    sqrt(machine eps)), then a bracketed root solve of the exact partial
    derivative.  Stops when a sweep moves no parameter by more than `tol`.
    """
    beta = np.asarray(beta, dtype=float)
    start = start or Profile(t, np.zeros(family.dim), 1.0, 0.0)

    def profile_of(p):
        c, s = family.unpack(p, start)
        return normalized_profile(domain, t, c, s)

    def J(p):
        return entropy_of_profile(domain, profile_of(p), beta)

    p = family.pack(start)
    history = []
    if p.size == 0:
        prof = profile_of(p)
        mu = entropy_of_profile(domain, prof, beta)
        rep = criticality_residuals(domain, prof, beta, mu)
        rep.message = "no free parameters; offset fixed by normalisation"
        return rep

    converged = False
    it = 0
    step = np.full(p.size, 0.1)
    for it in range(1, max_iter + 1):
        p_old = p.copy()
        for i in range(p.size):
            def line(x, i=i):
                q = p.copy()
                q[i] = x
                return J(q)

            res = minimize_scalar(line, bracket=(p[i] - step[i], p[i] + step[i]), method="golden",
                                  tol=GOLDEN_REL_TOL)
            p[i] = res.x
            p[i] = _polish(lambda x, i=i: _partial(domain, profile_of, p, i, x, beta, family), p[i],
                           max(abs(p_old[i] - p[i]), 1e-6))
        move = np.max(np.abs(p - p_old))
        step = np.clip(np.abs(p - p_old) * 4, 1e-4, 0.5)
        history.append((it, float(J(p)), float(move)))
        if move <= tol:
            converged = True
            break
    prof = profile_of(p)
    mu = entropy_of_profile(domain, prof, beta)
    rep = criticality_residuals(domain, prof, beta, mu)
    rep.converged = converged
    rep.iterations = it
    rep.history = history
    if not converged:
        rep.message = f"no convergence after {max_iter} sweeps; best-so-far reported"
    return rep


def _partial(domain, profile_of, p, i, x, beta, family):
    q = p.copy()
    q[i] = x
    return entropy_gradient(domain, profile_of(q), beta, family)[i]


def _polish(g, x0: float, width: float) -> float:
    """Root of the partial derivative g near x0; returns x0 if none is bracketed."""
    g0 = g(x0)
    if g0 == 0.0:
        return x0
    for _ in range(20):
        a, b = x0 - width, x0 + width
        ga, gb = g(a), g(b)
        if ga * g0 <= 0:
            return brentq(g, a, x0, xtol=1e-15, rtol=1e-15)
        if gb * g0 <= 0:
            return brentq(g, x0, b, xtol=1e-15, rtol=1e-15)
        width *= 2
    return x0
