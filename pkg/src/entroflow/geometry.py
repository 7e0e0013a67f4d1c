"""Hypersurfaces bounding star-shaped domains and their quadratures.

Three boundary representations are supported:

* :class:`SupportCurve` -- convex planar curve given by its support function
  h(theta) on a uniform Gauss-map grid.
* :class:`SphereSurface` -- round n-sphere, everything closed form.
* :class:`MarkerBoundary` -- ordered marker points of an advected closed curve.

Domain integrals use a star-shaped map ``c + rho * (x(sigma) - c)`` with
Gauss-Legendre nodes in ``rho`` and uniform nodes in the boundary parameter.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from functools import cached_property
from math import gamma, pi
from pathlib import Path

import numpy as np
from scipy.signal import resample

from ._stencils import check_stencil, periodic_derivative

MIN_NODES = 16


class GeometryError(ValueError):
    pass


class NonConvexError(GeometryError):
    def __init__(self, index: int, value: float):
        super().__init__(f"h + h'' = {value:.3e} <= 0 at node {index}")
        self.index = index
        self.value = value


class NotStarShapedError(GeometryError):
    def __init__(self, angle: float, detail: str = ""):
        msg = f"boundary is not star-shaped about its centroid along ray angle {angle:.6f}"
        super().__init__(msg + (f" ({detail})" if detail else ""))
        self.angle = angle


class TangencyError(GeometryError):
    pass


def _rot(v: np.ndarray) -> np.ndarray:
    """Rotate planar vectors by -90 degrees: tangent -> outward normal for CCW curves."""
    return np.stack([v[..., 1], -v[..., 0]], axis=-1)


def _cross(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


def gauss_legendre_unit(order: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on [0, 1]."""
    xi, w = np.polynomial.legendre.leggauss(order)
    return 0.5 * (xi + 1.0), 0.5 * w


@dataclass(frozen=True, eq=False)
class QuadratureGrid:
    nodes: np.ndarray
    weights: np.ndarray
    kind: str
    normals: np.ndarray | None = None

    def __post_init__(self):
        if np.any(self.weights <= 0):
            raise GeometryError(f"{self.kind} quadrature produced non-positive weights")

    def integrate(self, values: np.ndarray) -> float:
        return float(np.dot(self.weights, values))

    def __len__(self):
        return self.weights.size


@dataclass(frozen=True)
class CurveGeometry:
    position: np.ndarray
    normal: np.ndarray
    tangent: np.ndarray
    curvature: np.ndarray
    arclength_weight: np.ndarray


# ---------------------------------------------------------------------------
# support-function curves


@dataclass(frozen=True, eq=False)
class SupportCurve:
    """Convex planar curve x(theta) = h N + h' T with N = (cos theta, sin theta).

    `stencil` is the accuracy order of the periodic finite differences
    (even, >= 4) or ``"spectral"``.
    """

    h: np.ndarray
    stencil: int | str = 4

    def __post_init__(self):
        h = np.array(self.h, dtype=float)
        if h.ndim != 1 or h.size < MIN_NODES:
            raise GeometryError(f"support function needs a 1-d array of >= {MIN_NODES} nodes")
        check_stencil(self.stencil)
        h.setflags(write=False)
        object.__setattr__(self, "h", h)
        rho = self.radius_of_curvature
        bad = int(np.argmin(rho))
        if rho[bad] <= 0:
            raise NonConvexError(bad, float(rho[bad]))

    @classmethod
    def from_function(cls, func, n: int, stencil=4) -> "SupportCurve":
        theta = 2 * np.pi * np.arange(n) / n
        return cls(func(theta), stencil)

    @classmethod
    def circle(cls, radius: float, n: int, stencil=4) -> "SupportCurve":
        return cls(np.full(n, float(radius)), stencil)

    @property
    def n(self) -> int:
        return self.h.size

    @property
    def theta(self) -> np.ndarray:
        return 2 * np.pi * np.arange(self.n) / self.n

    def derivative(self, values: np.ndarray, k: int = 1) -> np.ndarray:
        return periodic_derivative(values, k, self.stencil)

    @cached_property
    def radius_of_curvature(self) -> np.ndarray:
        return self.h + self.derivative(self.h, 2)

    @property
    def curvature(self) -> np.ndarray:
        return 1.0 / self.radius_of_curvature

    @property
    def normal(self) -> np.ndarray:
        return np.stack([np.cos(self.theta), np.sin(self.theta)], axis=1)

    @property
    def tangent(self) -> np.ndarray:
        return np.stack([-np.sin(self.theta), np.cos(self.theta)], axis=1)

    @cached_property
    def position(self) -> np.ndarray:
        dh = self.derivative(self.h, 1)
        return self.h[:, None] * self.normal + dh[:, None] * self.tangent

    @property
    def arclength_weight(self) -> np.ndarray:
        return self.radius_of_curvature * (2 * np.pi / self.n)

    @property
    def length(self) -> float:
        return float(np.sum(self.arclength_weight))

    @property
    def area(self) -> float:
        # A = 1/2 * integral of h * (h + h'') dtheta
        return float(0.5 * np.sum(self.h * self.arclength_weight))

    @cached_property
    def centroid(self) -> np.ndarray:
        x, dx = self.position, self.tangent * self.radius_of_curvature[:, None]
        return _green_centroid(x, dx, 2 * np.pi / self.n)

    def d_ds(self, values: np.ndarray) -> np.ndarray:
        """Arclength derivative of nodal samples (ds = (h + h'') dtheta)."""
        return self.derivative(values, 1) * self.curvature

    def boundary_grid(self) -> QuadratureGrid:
        return QuadratureGrid(self.position, self.arclength_weight, "boundary", self.normal)

    def _param_samples(self, count: int | None):
        x = self.position
        dx = self.tangent * self.radius_of_curvature[:, None]
        if count is None or count == self.n:
            return x, dx
        h = resample(self.h, count)
        return SupportCurve(h, self.stencil)._param_samples(None)


def _green_centroid(x: np.ndarray, dx: np.ndarray, step: float) -> np.ndarray:
    area = 0.5 * step * np.sum(_cross(x, dx))
    cx = 0.5 * step * np.sum(x[:, 0] ** 2 * dx[:, 1]) / area
    cy = -0.5 * step * np.sum(x[:, 1] ** 2 * dx[:, 0]) / area
    return np.array([cx, cy])


def curve_geometry(c: "SupportCurve | MarkerBoundary") -> CurveGeometry:
    """Position, outward normal, tangent, curvature and arclength weight per node."""
    return CurveGeometry(c.position, c.normal, c.tangent, c.curvature, c.arclength_weight)


# ---------------------------------------------------------------------------
# spheres


@dataclass(frozen=True, eq=False)
class SphereSurface:
    dim: int
    radius: float
    center: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.dim < 1:
            raise GeometryError("sphere dimension must be >= 1")
        if not self.radius > 0:
            raise GeometryError(f"sphere radius must be positive, got {self.radius}")
        center = np.zeros(self.dim + 1) if self.center is None else np.asarray(self.center, float)
        if center.shape != (self.dim + 1,):
            raise GeometryError("sphere center must live in (n+1)-space")
        object.__setattr__(self, "center", center)

    @property
    def mean_curvature(self) -> float:
        return self.dim / self.radius

    @property
    def form_scale(self) -> float:
        return 1.0 / self.radius

    @property
    def area(self) -> float:
        n = self.dim
        return 2 * pi ** ((n + 1) / 2) / gamma((n + 1) / 2) * self.radius**n

    def _unit_grid(self, angular_count: int):
        if self.dim == 1:
            phi = 2 * np.pi * np.arange(angular_count) / angular_count
            dirs = np.stack([np.cos(phi), np.sin(phi)], axis=1)
            w = np.full(angular_count, 2 * np.pi / angular_count)
            return dirs, w
        if self.dim == 2:
            n_polar = max(angular_count // 2, 2)
            z, wz = np.polynomial.legendre.leggauss(n_polar)
            phi = 2 * np.pi * np.arange(angular_count) / angular_count
            Z, PHI = np.meshgrid(z, phi, indexing="ij")
            s = np.sqrt(1 - Z**2)
            dirs = np.stack([s * np.cos(PHI), s * np.sin(PHI), Z], axis=-1).reshape(-1, 3)
            w = (wz[:, None] * np.full(angular_count, 2 * np.pi / angular_count)).ravel()
            return dirs, w
        raise NotImplementedError("sphere quadrature is implemented for n = 1 and n = 2")

    def boundary_grid(self, angular_count: int = 64) -> QuadratureGrid:
        dirs, w = self._unit_grid(angular_count)
        return QuadratureGrid(self.center + self.radius * dirs, w * self.radius**self.dim, "boundary", dirs)


def sphere_geometry(s: SphereSurface) -> dict:
    return {"H": s.mean_curvature, "second_fundamental_form_scale": s.form_scale, "area": s.area}


# ---------------------------------------------------------------------------
# marker polylines


@dataclass(frozen=True, eq=False)
class MarkerBoundary:
    """Closed curve through ordered markers.

    `method` selects how the discrete geometry is built:

    ``"spectral"``  trigonometric interpolation in the marker index (default)
    ``"fit"``       least-squares circle through 5-point windows
    ``"linear"``    the polyline itself; quadrature is exact on polygons
    """

    points: np.ndarray
    method: str = "spectral"

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 5:
            raise GeometryError("markers must be an (N >= 5, 2) array")
        if self.method not in ("spectral", "fit", "linear"):
            raise GeometryError(f"unknown marker geometry method {self.method!r}")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        if self.signed_area <= 0:
            raise GeometryError("markers must be ordered counter-clockwise (positive signed area)")
        self.check_star_shaped()

    @classmethod
    def from_curve(cls, c: SupportCurve, method="spectral") -> "MarkerBoundary":
        return cls(c.position, method)

    @classmethod
    def circle(cls, radius: float, n: int, center=(0.0, 0.0), method="spectral") -> "MarkerBoundary":
        s = 2 * np.pi * np.arange(n) / n
        pts = np.asarray(center) + radius * np.stack([np.cos(s), np.sin(s)], axis=1)
        return cls(pts, method)

    @classmethod
    def polar(cls, radius_fn, n: int, center=(0.0, 0.0), method="spectral") -> "MarkerBoundary":
        s = 2 * np.pi * np.arange(n) / n
        r = radius_fn(s)
        pts = np.asarray(center) + r[:, None] * np.stack([np.cos(s), np.sin(s)], axis=1)
        return cls(pts, method)

    def with_points(self, points) -> "MarkerBoundary":
        return MarkerBoundary(points, self.method)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def position(self) -> np.ndarray:
        return self.points

    @cached_property
    def signed_area(self) -> float:
        p, q = self.points, np.roll(self.points, -1, axis=0)
        return 0.5 * float(np.sum(_cross(p, q)))

    @cached_property
    def _d1(self) -> np.ndarray:
        return periodic_derivative(self.points, 1, "spectral")

    @cached_property
    def _d2(self) -> np.ndarray:
        return periodic_derivative(self.points, 2, "spectral")

    @cached_property
    def centroid(self) -> np.ndarray:
        if self.method == "spectral":
            return _green_centroid(self.points, self._d1, 2 * np.pi / self.n)
        p, q = self.points, np.roll(self.points, -1, axis=0)
        c = _cross(p, q)
        return np.sum((p + q) * c[:, None], axis=0) / (6 * self.signed_area)

    def check_star_shaped(self) -> None:
        c = self.centroid
        rel = self.points - c
        if self.method == "spectral":
            cross = _cross(rel, self._d1)
            bad = np.flatnonzero(cross <= 0)
        else:
            cross = _cross(rel, np.roll(rel, -1, axis=0))
            bad = np.flatnonzero(cross <= 0)
        if bad.size:
            i = int(bad[0])
            raise NotStarShapedError(float(np.arctan2(rel[i, 1], rel[i, 0])), f"marker {i}")

    @cached_property
    def _fit(self):
        p = self.points
        n = self.n
        normals = np.empty_like(p)
        kappa = np.empty(n)
        for i in range(n):
            window = p[np.arange(i - 2, i + 3) % n]
            # algebraic (Kasa) fit: x^2 + y^2 + D x + E y + F = 0
            A = np.column_stack([window, np.ones(5)])
            b = -np.sum(window**2, axis=1)
            (D, E, F), *_ = np.linalg.lstsq(A, b, rcond=None)
            center = np.array([-D / 2, -E / 2])
            r = np.sqrt(max(center @ center - F, 0.0))
            chord = p[(i + 1) % n] - p[(i - 1) % n]
            outward = _rot(chord / np.linalg.norm(chord))
            radial = (p[i] - center) / r
            sign = 1.0 if radial @ outward > 0 else -1.0
            normals[i] = sign * radial
            kappa[i] = sign / r
        return normals, kappa

    @cached_property
    def _chord_weights(self) -> np.ndarray:
        seg = np.linalg.norm(np.roll(self.points, -1, axis=0) - self.points, axis=1)
        return 0.5 * (seg + np.roll(seg, 1))

    @cached_property
    def speed(self) -> np.ndarray:
        """|dx/dsigma| for the uniform marker parameter sigma in [0, 2 pi)."""
        if self.method == "spectral":
            return np.linalg.norm(self._d1, axis=1)
        return self._chord_weights * self.n / (2 * np.pi)

    @cached_property
    def tangent(self) -> np.ndarray:
        if self.method == "spectral":
            return self._d1 / self.speed[:, None]
        if self.method == "fit":
            nrm = self._fit[0]
            return -_rot(nrm)
        chord = np.roll(self.points, -1, axis=0) - np.roll(self.points, 1, axis=0)
        return chord / np.linalg.norm(chord, axis=1)[:, None]

    @cached_property
    def normal(self) -> np.ndarray:
        if self.method == "fit":
            return self._fit[0]
        return _rot(self.tangent)

    @cached_property
    def curvature(self) -> np.ndarray:
        if self.method == "spectral":
            return _cross(self._d1, self._d2) / self.speed**3
        if self.method == "fit":
            return self._fit[1]
        # turning angle over dual length
        e = np.roll(self.points, -1, axis=0) - self.points
        ang = np.arctan2(e[:, 1], e[:, 0])
        turn = np.angle(np.exp(1j * (ang - np.roll(ang, 1))))
        return turn / self._chord_weights

    @property
    def arclength_weight(self) -> np.ndarray:
        return self.speed * (2 * np.pi / self.n)

    @property
    def length(self) -> float:
        return float(np.sum(self.arclength_weight))

    def d_ds(self, values: np.ndarray) -> np.ndarray:
        values = np.asarray(values, dtype=float)
        if self.method == "spectral":
            return periodic_derivative(values, 1, "spectral") / self.speed.reshape((-1,) + (1,) * (values.ndim - 1))
        step = self._chord_weights * 2
        diff = np.roll(values, -1, axis=0) - np.roll(values, 1, axis=0)
        return diff / step.reshape((-1,) + (1,) * (values.ndim - 1))

    def boundary_grid(self) -> QuadratureGrid:
        return QuadratureGrid(self.points, self.arclength_weight, "boundary", self.normal)

    def _param_samples(self, count: int | None):
        if count is None or count == self.n:
            return self.points, self._d1
        pts = resample(self.points, count, axis=0)
        return pts, periodic_derivative(pts, 1, "spectral")


# ---------------------------------------------------------------------------
# quadrature and tangential calculus


def star_domain_quadrature(boundary, radial_order: int = 32, angular_count: int | None = None) -> QuadratureGrid:
    """Tensor quadrature over the domain enclosed by `boundary`.

    Radial direction: Gauss-Legendre with `radial_order` nodes.  Angular
    direction: uniform nodes in the boundary parameter (resampled spectrally
    to `angular_count` when given), or per-edge Gauss-Legendre for linear
    polylines.  Raises NotStarShapedError if some ray leaves and re-enters.
    """
    rho, w_rho = gauss_legendre_unit(radial_order)
    if isinstance(boundary, SphereSurface):
        dirs, w_dir = boundary._unit_grid(angular_count or 64)
        d = boundary.dim + 1
        r = boundary.radius * rho
        nodes = boundary.center + r[:, None, None] * dirs[None, :, :]
        weights = (w_rho * boundary.radius * r ** (d - 1))[:, None] * w_dir[None, :]
        return QuadratureGrid(nodes.reshape(-1, d), weights.ravel(), "radial-sphere")

    c = boundary.centroid
    if isinstance(boundary, MarkerBoundary) and boundary.method != "spectral":
        p = boundary.points - c
        q = np.roll(p, -1, axis=0)
        edge_cross = _cross(p, q)  # (x - c) x dx/dlambda is constant along an edge
        bad = np.flatnonzero(edge_cross <= 0)
        if bad.size:
            i = int(bad[0])
            raise NotStarShapedError(float(np.arctan2(p[i, 1], p[i, 0])), f"edge {i}")
        lam, w_lam = gauss_legendre_unit(angular_count or radial_order)
        edge_pts = p[:, None, :] + lam[None, :, None] * (q - p)[:, None, :]
        nodes = c + rho[:, None, None, None] * edge_pts[None]
        weights = (w_rho * rho)[:, None, None] * (edge_cross[:, None] * w_lam[None, :])[None]
        return QuadratureGrid(nodes.reshape(-1, 2), weights.ravel(), "polar-star-shaped")

    x, dx = boundary._param_samples(angular_count)
    rel = x - c
    jac = _cross(rel, dx)
    bad = np.flatnonzero(jac <= 0)
    if bad.size:
        i = int(bad[0])
        raise NotStarShapedError(float(np.arctan2(rel[i, 1], rel[i, 0])))
    step = 2 * np.pi / x.shape[0]
    nodes = c + rho[:, None, None] * rel[None, :, :]
    weights = (w_rho * rho)[:, None] * (jac * step)[None, :]
    return QuadratureGrid(nodes.reshape(-1, 2), weights.ravel(), "polar-star-shaped")


def surface_gradient(boundary, samples, ambient_gradient=None) -> np.ndarray:
    """Tangential gradient on the boundary.

    Curves: `samples` are nodal values; result is (d/ds samples) * T.
    Spheres: pass the ambient gradient at the boundary-grid nodes as
    `ambient_gradient`; it is projected onto the tangent space.
    """
    if isinstance(boundary, SphereSurface):
        if ambient_gradient is None:
            raise ValueError("spheres need ambient_gradient samples at the boundary grid nodes")
        g = np.asarray(ambient_gradient, dtype=float)
        grid = boundary.boundary_grid(_angular_count_for(boundary, g.shape[0]))
        nrm = grid.normals
        return g - np.sum(g * nrm, axis=1)[:, None] * nrm
    samples = np.asarray(samples, dtype=float)
    if samples.shape[0] != boundary.n:
        raise ValueError(f"got {samples.shape[0]} samples for {boundary.n} boundary nodes")
    return boundary.d_ds(samples)[:, None] * boundary.tangent


def _angular_count_for(sphere: SphereSurface, n_nodes: int) -> int:
    if sphere.dim == 1:
        return n_nodes
    m = int(round(np.sqrt(2 * n_nodes)))
    if max(m // 2, 2) * m != n_nodes:
        raise ValueError(f"{n_nodes} nodes do not match a sphere boundary grid")
    return m


def tangential_component(boundary, V: np.ndarray, tol: float = 1e-8) -> np.ndarray:
    """Signed component of V along the unit tangent; rejects non-tangent V."""
    V = np.asarray(V, dtype=float)
    nrm = boundary.normal
    normal_part = np.sum(V * nrm, axis=1)
    scale = max(1.0, float(np.max(np.abs(V)))) if V.size else 1.0
    if np.max(np.abs(normal_part), initial=0.0) > tol * scale:
        i = int(np.argmax(np.abs(normal_part)))
        raise TangencyError(f"V has normal component {normal_part[i]:.3e} at node {i}")
    return np.sum(V * boundary.tangent, axis=1)


def second_fundamental_form(boundary, V: np.ndarray, normals=None, tol: float = 1e-8) -> np.ndarray:
    """h(V, V) per node: kappa |V|^2 on curves, |V|^2 / R on spheres."""
    V = np.asarray(V, dtype=float)
    if isinstance(boundary, SphereSurface):
        if normals is not None:
            normal_part = np.sum(V * normals, axis=1)
            if np.max(np.abs(normal_part), initial=0.0) > tol * max(1.0, float(np.max(np.abs(V)))):
                raise TangencyError("V is not tangent to the sphere")
        return np.sum(V * V, axis=1) / boundary.radius
    vt = tangential_component(boundary, V, tol)
    return boundary.curvature * vt**2


def write_boundary_csv(boundary, path) -> Path:
    """Snapshot (param, x, y, kappa, nx, ny); param is theta for support curves."""
    path = Path(path)
    if isinstance(boundary, SupportCurve):
        param, label = boundary.theta, "theta"
    else:
        param, label = np.arange(boundary.n), "index"
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([label, "x", "y", "kappa", "nx", "ny"])
        for row in zip(param, boundary.position[:, 0], boundary.position[:, 1],
                       boundary.curvature, boundary.normal[:, 0], boundary.normal[:, 1]):
            w.writerow([repr(float(v)) for v in row])
    return path


@dataclass(frozen=True, eq=False)
class Domain:
    """A boundary together with its volume and surface quadratures."""

    boundary: object
    volume: QuadratureGrid
    surface: QuadratureGrid

    @classmethod
    def build(cls, boundary, radial_order: int = 32, angular_count: int | None = None) -> "Domain":
        volume = star_domain_quadrature(boundary, radial_order, angular_count)
        if isinstance(boundary, SphereSurface):
            surface = boundary.boundary_grid(angular_count or 64)
        else:
            surface = boundary.boundary_grid()
        return cls(boundary, volume, surface)

    @property
    def ambient_dim(self) -> int:
        return self.volume.nodes.shape[1]
