from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from entroflow.geometry import (
    Domain,
    MarkerBoundary,
    NonConvexError,
    NotStarShapedError,
    QuadratureGrid,
    SphereSurface,
    SupportCurve,
    TangencyError,
    curve_geometry,
    second_fundamental_form,
    sphere_geometry,
    star_domain_quadrature,
    surface_gradient,
    write_boundary_csv,
)
from entroflow.heat_field import HeatSolution

# frozen oracles
KAPPA_PERTURBED_AT_0 = 1 / 1.1  # h = 2 + 0.3 cos 2theta: h + h'' = 2 - 0.9 at theta = 0
KERNEL_MASS_SQRT_2T = 1 - math.exp(-0.5)  # 0.3934693402873666


def perturbed(n=128, a=2.0, b=0.3, stencil=4):
    return SupportCurve.from_function(lambda th: a + b * np.cos(2 * th), n, stencil)


class TestSupportCurve:
    def test_circle_geometry(self):
        c = SupportCurve.circle(2.0, 64)
        g = curve_geometry(c)
        np.testing.assert_allclose(g.curvature, 0.5, rtol=1e-14)
        np.testing.assert_allclose(np.linalg.norm(g.position, axis=1), 2.0, rtol=1e-14)
        np.testing.assert_allclose(g.normal, np.stack([np.cos(c.theta), np.sin(c.theta)], 1))
        assert c.length == pytest.approx(4 * math.pi, rel=1e-14)

    def test_perturbed_curvature_at_zero(self):
        c = perturbed(64, stencil="spectral")
        assert c.curvature[0] == pytest.approx(KAPPA_PERTURBED_AT_0, rel=1e-12)

    def test_nonconvex_rejected_with_index(self):
        # h + h'' = 1 - 1.5 cos 2theta < 0 at theta = 0
        with pytest.raises(NonConvexError) as exc:
            SupportCurve.from_function(lambda th: 1 + 0.5 * np.cos(2 * th), 64)
        assert exc.value.index == 0

    def test_too_few_nodes(self):
        with pytest.raises(ValueError):
            SupportCurve.circle(1.0, 8)

    @pytest.mark.parametrize("stencil", [4, 6])
    def test_curvature_converges_at_stencil_order(self, stencil):
        errs = []
        ns = [24, 48, 96]
        for n in ns:
            c = perturbed(n, stencil=stencil)
            exact = 1 / (2 - 0.9 * np.cos(2 * c.theta))
            errs.append(np.max(np.abs(c.curvature - exact)))
        order = -np.polyfit(np.log(ns), np.log(errs), 1)[0]
        assert abs(order - stencil) < 0.3

    def test_area_and_length_of_perturbed_curve(self):
        c = perturbed(128, stencil="spectral")
        # A = pi a^2 - pi b^2 * 3/2 for h = a + b cos 2theta (1/2 int h(h+h''))
        assert c.area == pytest.approx(math.pi * (4 - 1.5 * 0.09), rel=1e-12)
        assert c.length == pytest.approx(4 * math.pi, rel=1e-12)


class TestSphere:
    def test_examples(self):
        assert sphere_geometry(SphereSurface(1, math.sqrt(2 * 0.5)))["H"] == pytest.approx(1.0)
        assert sphere_geometry(SphereSurface(2, 3.0))["H"] == pytest.approx(2 / 3)
        assert sphere_geometry(SphereSurface(1, 2.0))["area"] == pytest.approx(4 * math.pi)
        assert sphere_geometry(SphereSurface(2, 2.0))["second_fundamental_form_scale"] == 0.5

    def test_surface_grid_area(self):
        s = SphereSurface(2, 1.5)
        g = s.boundary_grid(32)
        assert g.integrate(np.ones(len(g))) == pytest.approx(4 * math.pi * 1.5**2, rel=1e-13)

    def test_invalid(self):
        with pytest.raises(ValueError):
            SphereSurface(1, -1.0)


class TestMarkerBoundary:
    @pytest.mark.parametrize("method", ["spectral", "fit"])
    def test_circle_curvature(self, method):
        b = MarkerBoundary.circle(1.7, 64, center=(0.3, -0.1), method=method)
        np.testing.assert_allclose(b.curvature, 1 / 1.7, rtol=1e-3)

    def test_outward_normals(self):
        b = MarkerBoundary.polar(lambda s: 1 + 0.1 * np.cos(3 * s), 128, center=(0.05, 0.0))
        rel = b.points - b.centroid
        assert np.all(np.sum(rel * b.normal, axis=1) > 0)

    def test_clockwise_rejected(self):
        pts = MarkerBoundary.circle(1.0, 64).points[::-1]
        with pytest.raises(ValueError):
            MarkerBoundary(pts)

    def test_not_star_shaped_reports_angle(self):
        th = 2 * np.pi * np.arange(64) / 64
        spiral = np.c_[np.cos(3 * th) * (1 + th), np.sin(3 * th) * (1 + th)]
        with pytest.raises(NotStarShapedError) as exc:
            MarkerBoundary(spiral)
        assert math.isfinite(exc.value.angle)

    def test_agrees_with_support_curve(self):
        c = perturbed(256)
        b = MarkerBoundary.from_curve(c)
        np.testing.assert_allclose(b.curvature, c.curvature, rtol=1e-3)
        np.testing.assert_allclose(b.normal, c.normal, atol=1e-3)
        np.testing.assert_allclose(b.arclength_weight.sum(), c.length, rtol=1e-3)


class TestQuadrature:
    def test_unit_disk_area(self):
        q = star_domain_quadrature(MarkerBoundary.circle(1.0, 64), 16)
        assert q.integrate(np.ones(len(q))) == pytest.approx(math.pi, abs=1e-12)

    def test_heat_kernel_mass_on_disk(self):
        t = 0.25
        b = MarkerBoundary.circle(math.sqrt(2 * t), 128)
        q = star_domain_quadrature(b, 32)
        mass = q.integrate(HeatSolution.kernel(2).value(q.nodes, t))
        assert mass == pytest.approx(KERNEL_MASS_SQRT_2T, rel=1e-12)

    def test_square_polyline(self):
        sq = np.array([[1, -1], [1, 0], [1, 1], [0, 1], [-1, 1], [-1, 0], [-1, -1], [0, -1]], float)
        q = star_domain_quadrature(MarkerBoundary(sq, "linear"), 16)
        assert q.integrate(np.ones(len(q))) == pytest.approx(4.0, abs=1e-6)

    def test_radial_integrand_matches_radial_reference(self):
        R = 1.5
        q = star_domain_quadrature(MarkerBoundary.circle(R, 128), 32)
        val = q.integrate(np.exp(-np.sum(q.nodes**2, axis=1)))
        assert val == pytest.approx(math.pi * (1 - math.exp(-R**2)), rel=1e-8)

    def test_ball_volume(self):
        q = star_domain_quadrature(SphereSurface(2, 2.0), 8, 16)
        assert q.integrate(np.ones(len(q))) == pytest.approx(4 / 3 * math.pi * 8, rel=1e-12)

    def test_support_curve_domain(self):
        c = perturbed(128, stencil="spectral")
        q = star_domain_quadrature(c, 16)
        assert q.integrate(np.ones(len(q))) == pytest.approx(c.area, rel=1e-12)

    def test_nonpositive_weights_rejected(self):
        with pytest.raises(ValueError):
            QuadratureGrid(np.zeros((2, 2)), np.array([1.0, 0.0]), "boundary")

    @settings(max_examples=25, deadline=None)
    @given(R=st.floats(0.2, 5.0), cx=st.floats(-2, 2), cy=st.floats(-2, 2))
    def test_disk_area_any_circle(self, R, cx, cy):
        dom = Domain.build(MarkerBoundary.circle(R, 64, (cx, cy)), 8)
        assert dom.volume.integrate(np.ones(len(dom.volume))) == pytest.approx(math.pi * R**2, rel=1e-8)
        assert dom.surface.integrate(np.ones(len(dom.surface))) == pytest.approx(2 * math.pi * R, rel=1e-10)


class TestTangentialCalculus:
    def test_constant_has_zero_gradient(self):
        b = MarkerBoundary.polar(lambda s: 1 + 0.1 * np.cos(3 * s), 128)
        g = surface_gradient(b, np.full(128, 3.0))
        assert np.max(np.abs(g)) < 1e-12

    def test_sin_on_unit_circle(self):
        c = SupportCurve.circle(1.0, 64, "spectral")
        g = surface_gradient(c, np.sin(c.theta))
        np.testing.assert_allclose(np.linalg.norm(g, axis=1), np.abs(np.cos(c.theta)), atol=1e-12)

    def test_radial_field_on_sphere(self):
        s = SphereSurface(2, 1.3)
        grid = s.boundary_grid(16)
        g = surface_gradient(s, None, ambient_gradient=2 * grid.nodes)  # grad |x|^2
        assert np.max(np.abs(g)) < 1e-12

    def test_integration_by_parts(self):
        b = MarkerBoundary.polar(lambda s: 1 + 0.1 * np.cos(3 * s), 256)
        x, y = b.points.T
        a, w = np.sin(x) * y, np.cos(2 * y) + x
        lhs = np.sum(b.d_ds(a) * w * b.arclength_weight)
        rhs = -np.sum(a * b.d_ds(w) * b.arclength_weight)
        assert abs(lhs - rhs) < 1e-6

    def test_sample_count_mismatch(self):
        with pytest.raises(ValueError):
            surface_gradient(SupportCurve.circle(1.0, 32), np.zeros(31))

    def test_second_fundamental_form_examples(self):
        c = SupportCurve.circle(1.0, 32)
        assert np.all(second_fundamental_form(c, np.zeros((32, 2))) == 0)
        np.testing.assert_allclose(second_fundamental_form(c, c.tangent), 1.0)
        s = SphereSurface(2, 2.0)
        grid = s.boundary_grid(8)
        e3 = np.array([0.0, 0.0, 1.0])
        V = np.cross(grid.normals, e3)
        V = 3 * V / np.linalg.norm(V, axis=1)[:, None]
        np.testing.assert_allclose(second_fundamental_form(s, V, grid.normals), 4.5)

    def test_non_tangent_rejected(self):
        c = SupportCurve.circle(1.0, 32)
        with pytest.raises(TangencyError):
            second_fundamental_form(c, c.normal)


def test_boundary_csv(tmp_path):
    c = perturbed(32)
    p = write_boundary_csv(c, tmp_path / "b.csv")
    lines = p.read_text().splitlines()
    assert lines[0] == "theta,x,y,kappa,nx,ny"
    assert len(lines) == 33
    assert float(lines[1].split(",")[3]) == c.curvature[0]
