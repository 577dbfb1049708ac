"""Shapes, staggered grids, node classification, and surface sampling."""

import math

import numpy as np
import pytest
from scipy import integrate

from weinstein.errors import EmptyDomain, UnsupportedShape
from weinstein.geometry import (
    Ball,
    Box,
    Ellipsoid,
    StaggeredGrid,
    boundary_samples,
    grid_geometry,
    sphere_lattice,
)


# ---------------------------------------------------------------------------
# signed distances
# ---------------------------------------------------------------------------


def test_ball_signed_distance_and_reflection():
    b = Ball(radius=1.0, center=(0.5,))
    assert b.signed_distance(np.array([0.0, 0.5])) == pytest.approx(-1.0)
    assert b.signed_distance(np.array([0.6, 0.5])) == pytest.approx(-0.4)
    # the r coordinate enters through |r|: the shape is symmetric in r
    assert b.signed_distance(np.array([-0.6, 0.5])) == pytest.approx(-0.4)
    assert b.signed_distance(np.array([2.0, 0.5])) == pytest.approx(1.0)


def test_ball_gradient_is_unit_radial():
    b = Ball(radius=1.0, center=(0.0,))
    g = b.sd_gradient(np.array([0.3, 0.4]))
    assert g == pytest.approx([0.6, 0.8])


def _ellipse_distance_oracle(semi, q, n=200001):
    """Brute-force distance to the parametric ellipse boundary (k=1)."""
    th = np.linspace(0.0, 2.0 * np.pi, n)
    bd = np.stack([semi[0] * np.cos(th), semi[1] * np.sin(th)], axis=-1)
    d = np.min(np.linalg.norm(bd - q, axis=-1))
    level = (q[0] / semi[0]) ** 2 + (q[1] / semi[1]) ** 2
    return d if level >= 1.0 else -d


@pytest.mark.parametrize("q", [
    (0.3, 0.4), (0.9, 0.1), (0.0, 1.9), (1.4, 0.0), (1.2, 2.4), (0.7, 1.5),
])
def test_ellipsoid_signed_distance_vs_parametric_oracle(q):
    e = Ellipsoid(semi_axes=(1.0, 2.0), center=(0.0,))
    got = e.signed_distance(np.array(q))
    want = _ellipse_distance_oracle((1.0, 2.0), np.array(q))
    assert got == pytest.approx(want, abs=5e-7)


def test_ellipsoid_gradient_matches_finite_difference():
    e = Ellipsoid(semi_axes=(1.0, 2.0), center=(0.0,))
    p = np.array([0.6, 0.9])
    g = e.sd_gradient(p)
    eps = 1e-6
    for axis in range(2):
        d = np.zeros(2)
        d[axis] = eps
        fd = (e.signed_distance(p + d) - e.signed_distance(p - d)) / (2 * eps)
        assert g[axis] == pytest.approx(fd, abs=1e-5)
    assert np.linalg.norm(g) == pytest.approx(1.0, abs=1e-9)


def test_box_signed_distance_exact_corner():
    box = Box(half_widths=(1.0, 1.0), center=(0.0,))
    assert box.signed_distance(np.array([0.5, 0.25])) == pytest.approx(-0.5)
    # outside past a corner: Euclidean distance to the corner
    assert box.signed_distance(np.array([1.5, 1.5])) == pytest.approx(
        math.sqrt(0.5))
    assert box.signed_distance(np.array([-1.5, 0.0])) == pytest.approx(0.5)


def test_ball_requires_positive_radius():
    with pytest.raises(Exception):
        Ball(radius=-1.0, center=(0.0,))


# ---------------------------------------------------------------------------
# grids and node classification
# ---------------------------------------------------------------------------


def test_grid_is_staggered_off_axis_and_symmetric():
    dom = Ball(radius=1.0, center=(0.25,))
    grid = StaggeredGrid.from_domain(dom, 1 / 16)
    r = grid.r_nodes()
    assert r[0] == pytest.approx(grid.h_r / 2)
    assert np.all(r > 0)
    y = grid.y_nodes(0)
    # nodes straddle the center symmetrically, none lands on it
    assert np.min(np.abs(y - 0.25)) == pytest.approx(grid.h_y / 2)
    mids = y - 0.25
    assert np.max(np.abs(mids + mids[::-1])) < 1e-12


def test_cut_fraction_solves_boundary_crossing():
    dom = Ball(radius=1.0, center=(0.0,))
    grid = StaggeredGrid.from_domain(dom, 1 / 16)
    geo = grid_geometry(dom, grid)
    checked = 0
    for (axis, direction), theta in geo.cut_theta.items():
        idx = np.argwhere(np.isfinite(theta) & (theta > 0) & (theta < 1))
        for index in idx[:5]:
            t = theta[tuple(index)]
            p = grid.node_point(tuple(index)).copy()
            p[axis] += direction * t * (grid.h_r if axis == 0 else grid.h_y)
            assert abs(dom.signed_distance(p)) < 1e-8
            checked += 1
    assert checked > 0


def test_volume_fractions_integrate_the_half_disc():
    dom = Ball(radius=1.0, center=(0.0,))
    for h, tol in ((1 / 32, 2e-3), (1 / 64, 5e-4)):
        grid = StaggeredGrid.from_domain(dom, h)
        geo = grid_geometry(dom, grid)
        vol = float(np.sum(geo.volfrac)) * grid.h_r * grid.h_y
        assert vol == pytest.approx(math.pi / 2, abs=tol)


def test_box_volume_fractions_are_exact():
    dom = Box(half_widths=(0.5, 0.75), center=(0.0,))
    grid = StaggeredGrid.from_domain(dom, 1 / 16)
    geo = grid_geometry(dom, grid)
    vol = float(np.sum(geo.volfrac)) * grid.h_r * grid.h_y
    assert vol == pytest.approx(0.5 * 1.5, abs=1e-12)


def test_empty_domain_raises():
    dom = Ball(radius=0.05, center=(0.0,))
    with pytest.raises(EmptyDomain):
        grid = StaggeredGrid(h_r=0.2, h_y=0.2, n_r=4, n_y=(4,), y_start=(-0.3,))
        grid_geometry(dom, grid)


# ---------------------------------------------------------------------------
# sphere lattices and boundary samples
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("k,area", [
    (1, 2 * math.pi),
    (2, 4 * math.pi),
    (3, 2 * math.pi**2),
])
def test_sphere_lattice_weights_sum_to_area(k, area):
    pts, w0 = sphere_lattice(k, 2000)
    assert pts.shape == (2000, k + 1)
    assert np.max(np.abs(np.linalg.norm(pts, axis=-1) - 1.0)) < 1e-12
    assert w0 * 2000 == pytest.approx(area, rel=1e-12)


@pytest.mark.parametrize("k", [1, 2, 3])
def test_sphere_lattice_integrates_quadratics(k):
    # int_{S^k} x_0^2 = area / (k+1) by symmetry
    pts, w0 = sphere_lattice(k, 4000)
    total = w0 * 4000
    got = w0 * float(np.sum(pts[:, 0] ** 2))
    assert got == pytest.approx(total / (k + 1), rel=2e-3)


def test_sphere_lattice_rejects_high_dimension():
    with pytest.raises(UnsupportedShape):
        sphere_lattice(4, 100)


def test_ball_boundary_samples_lie_on_sphere():
    dom = Ball(radius=0.8, center=(0.3,))
    s = boundary_samples(dom, 4000)
    rad = np.linalg.norm(s.points - np.array([0.0, 0.3]), axis=-1)
    assert np.max(np.abs(rad - 0.8)) < 1e-12
    assert np.all(s.points[:, 0] > 0)
    outward = np.sum(s.normals * (s.points - np.array([0.0, 0.3])), axis=-1)
    assert np.all(outward > 0)
    assert np.max(np.abs(np.linalg.norm(s.normals, axis=-1) - 1)) < 1e-12
    # half circle of radius 0.8
    assert float(np.sum(s.weights)) == pytest.approx(math.pi * 0.8, rel=1e-3)


def test_ellipsoid_boundary_samples_weights_match_arc_length():
    dom = Ellipsoid(semi_axes=(1.0, 2.0), center=(0.0,))
    s = boundary_samples(dom, 20000)
    sd = dom.signed_distance(s.points)
    assert np.max(np.abs(sd)) < 1e-9

    def speed(th):
        return np.sqrt(np.sin(th) ** 2 + 4 * np.cos(th) ** 2)

    half_perimeter, _ = integrate.quad(speed, -np.pi / 2, np.pi / 2)
    assert float(np.sum(s.weights)) == pytest.approx(half_perimeter, rel=2e-3)

    # normals match the signed-distance gradient
    g = dom.sd_gradient(s.points)
    assert np.max(np.abs(g - s.normals)) < 1e-6


def test_ellipsoid_boundary_weighted_moment_oracle():
    # int over the half-ellipse of r dsigma, computed parametrically
    dom = Ellipsoid(semi_axes=(1.0, 2.0), center=(0.0,))
    s = boundary_samples(dom, 20000)

    def integrand(th):
        return np.cos(th) * np.sqrt(np.sin(th) ** 2 + 4 * np.cos(th) ** 2)

    want, _ = integrate.quad(integrand, -np.pi / 2, np.pi / 2)
    got = float(np.sum(s.weights * s.points[:, 0]))
    assert got == pytest.approx(want, rel=2e-3)


def test_box_boundary_samples_unsupported():
    with pytest.raises(UnsupportedShape):
        boundary_samples(Box(half_widths=(1.0, 1.0), center=(0.0,)), 100)


def test_k2_ball_boundary_samples_area():
    dom = Ball(radius=1.0, center=(0.0, 0.0))
    s = boundary_samples(dom, 20000)
    # half of the unit sphere area
    assert float(np.sum(s.weights)) == pytest.approx(2 * math.pi, rel=2e-3)
    rad = np.linalg.norm(s.points, axis=-1)
    assert np.max(np.abs(rad - 1.0)) < 1e-12


def test_descriptor_round_trip_fields():
    d = Ellipsoid(semi_axes=(1.0, 2.0), center=(0.5,)).descriptor()
    assert d["type"] == "ellipsoid"
    assert d["semi_axes"] == [1.0, 2.0]
    assert d["center"] == [0.5]
