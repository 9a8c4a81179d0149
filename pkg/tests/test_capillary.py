import math

import numpy as np
import pytest

from capgeo.capillary import (
    SearchStatus,
    StarVerdict,
    assemble_stability,
    capillary_defect,
    capillary_geodesic_from_shot,
    find_capillary_geodesics,
    find_critical_lassos,
    lasso_first_variation,
    morse_index,
    shoot_from_boundary,
    shoot_many,
    star_hypothesis_check,
    write_geodesics_csv,
    write_lassos_csv,
    write_spectrum_csv,
)
from capgeo.curve import segment_g_lengths
from capgeo.errors import DomainError, NoArrival, ResidualTooLarge
from capgeo.geom import ConformalDisk, HitType, boundary_geodesic_curvature

from oracles import (
    FROZEN_CONE_HALF_PI,
    FROZEN_ROBIN,
    chord_endpoint_param,
    flat_capillary_value,
    jacobi_shooting_eigenvalues,
    robin_spectrum_flat,
)

THETAS = [math.pi / 6, math.pi / 4, math.pi / 3]


def flat_geodesic(flat, theta, p=0.0):
    return capillary_geodesic_from_shot(flat, shoot_from_boundary(flat, p, theta), theta, p)


# shooting --------------------------------------------------------------------

@pytest.mark.parametrize("p", [0.0, 1.3, 4.0])
def test_shoot_diameter(flat, p):
    tr = shoot_from_boundary(flat, p, math.pi / 2)
    assert tr.hit is HitType.BOUNDARY
    assert tr.arrival_angle == pytest.approx(math.pi / 2, abs=1e-9)
    assert tr.arrival_param == pytest.approx((p + math.pi) % (2 * math.pi), abs=1e-9)
    assert tr.length == pytest.approx(2.0, abs=1e-6)


def test_shoot_tangent_chord(flat):
    tr = shoot_from_boundary(flat, 0.0, math.pi / 3)
    assert tr.arrival_angle == pytest.approx(math.pi / 3, abs=1e-9)
    assert tr.arrival_param == pytest.approx(chord_endpoint_param(0.0, math.pi / 3), abs=1e-9)


def test_shoot_cone_self_intersects(sharp):
    tr = shoot_from_boundary(sharp.chart, 0.0, math.pi / 4 + 0.05)
    assert tr.self_intersects


def test_shoot_rejects_angle(flat):
    with pytest.raises(DomainError):
        shoot_from_boundary(flat, 0.0, 0.0)


def test_shoot_many_order_independent_of_workers(bump):
    jobs = [(0.1 * i, 0.5 + 0.1 * i) for i in range(6)]
    serial = shoot_many(bump, jobs)
    pooled = shoot_many(bump, jobs, workers=2)
    for a, b in zip(serial, pooled):
        assert a.points.tobytes() == b.points.tobytes()


@pytest.mark.parametrize("theta", [math.pi / 3, math.pi / 4])
def test_flat_capillary_defect_vanishes(flat, theta):
    for i in range(32):
        assert abs(capillary_defect(flat, 2 * math.pi * i / 32, theta)) < 1e-6


def test_sharpness_defect_has_no_arrival(sharp):
    with pytest.raises(NoArrival):
        capillary_defect(sharp.chart, 0.0, math.pi / 4 + 0.05)


# capillary geodesics -------------------------------------------------------------

def test_find_flat_family(flat):
    res = find_capillary_geodesics(flat, math.pi / 3, grid_n=16)
    assert res.status is SearchStatus.S1_FAMILY
    assert len(res) == 16
    for g in res:
        assert g.measure.l_theta == pytest.approx(flat_capillary_value(math.pi / 3, True), abs=1e-4)
        assert g.complement_measure.l_theta == pytest.approx(math.sqrt(3) + math.pi / 3, abs=1e-4)
        assert g.residual.passes(1e-5)


def test_find_zero_conformal_matches_flat(flat):
    a = find_capillary_geodesics(flat, math.pi / 4, grid_n=16)
    b = find_capillary_geodesics(ConformalDisk("0"), math.pi / 4, grid_n=16)
    assert a.status is b.status
    for ga, gb in zip(a, b):
        np.testing.assert_allclose(ga.domain.points, gb.domain.points, atol=1e-12)


def test_find_sharpness_none(sharp):
    res = find_capillary_geodesics(sharp.chart, math.pi / 4 + 0.05, grid_n=16)
    assert res.status is SearchStatus.NONE_FOUND
    assert res.geodesics == []
    assert res.diagnostics


def test_find_needs_grid(flat):
    with pytest.raises(DomainError):
        find_capillary_geodesics(flat, 1.0, grid_n=8)


def test_find_isolated_roots():
    # an off-center conformal factor breaks the rotation family
    chart = ConformalDisk("0.15*x")
    res = find_capillary_geodesics(chart, math.pi / 3, grid_n=32)
    assert res.status is SearchStatus.FOUND
    assert 2 <= len(res) < 32
    for g in res:
        assert g.residual.passes(1e-5)


# lassos ------------------------------------------------------------------------

def test_flat_disk_has_no_lassos(flat):
    assert find_critical_lassos(flat, 10.0, basepoints=2, angles=24) == []


def test_tiny_bound_has_no_lassos(sharp):
    assert find_critical_lassos(sharp.chart, 1e-6, basepoints=2, angles=12) == []


def test_sharpness_lasso(sharp):
    window = np.linspace(0.6, 1.0, 9)
    recs = [r for r in find_critical_lassos(sharp.chart, 10.0, basepoints=1, angles=window) if r.critical]
    assert recs
    near = min(recs, key=lambda r: abs(r.launch_angle - math.pi / 4))
    assert near.alpha0 == pytest.approx(math.pi / 4, abs=1e-3)
    assert near.alphaL == pytest.approx(math.pi / 4, abs=1e-3)
    assert near.length == pytest.approx(FROZEN_CONE_HALF_PI["lasso_length"], abs=1e-3)


def test_lasso_first_variation_vanishes(sharp):
    tr = shoot_from_boundary(sharp.chart, 0.0, math.pi / 4)
    rng = np.random.default_rng(7)
    for _ in range(20):
        a = rng.normal(size=6)

        def X(x, y, a=a):
            rot = a[0] + a[1] * x + a[2] * y
            bulk = (1 - x * x - y * y)
            return np.column_stack([-y * rot + bulk * (a[3] + a[5] * y),
                                    x * rot + bulk * (a[4] - a[5] * x)])

        grid = np.linspace(-1, 1, 41)
        gx, gy = np.meshgrid(grid, grid)
        inside = gx**2 + gy**2 <= 1
        norm = float(np.max(np.hypot(*X(gx[inside], gy[inside]).T)))
        assert abs(lasso_first_variation(sharp.chart, tr, X)) < 1e-4 * norm


def test_lasso_bound_validation(flat):
    with pytest.raises(DomainError):
        find_critical_lassos(flat, 0.0)


def test_star_numerically_clear():
    # a small conformal bump creates a ring of negative curvature
    chart = ConformalDisk("0.05*exp(-((x-0.2)**2 + y**2)/0.05)")
    rep = star_hypothesis_check(chart, math.pi / 3, length_bound=10.0, basepoints=2, angles=24)
    assert rep.min_K < 0
    assert not rep.gb_sufficient
    assert not rep.scan_found_lasso
    assert rep.verdict is StarVerdict.NUMERICALLY_CLEAR


# second variation ---------------------------------------------------------------

def test_robin_oracle_frozen():
    for theta, frozen in FROZEN_ROBIN.items():
        np.testing.assert_allclose(robin_spectrum_flat(theta), frozen, atol=1e-10)


@pytest.mark.parametrize("theta", THETAS)
def test_flat_morse_index(flat, theta):
    rep = morse_index(flat, flat_geodesic(flat, theta))
    assert (rep.index, rep.nullity) == (1, 1)
    np.testing.assert_allclose(rep.eigenvalues[:3], FROZEN_ROBIN[theta], atol=1e-5)
    assert rep.length == pytest.approx(2 * math.sin(theta), abs=1e-9)


@pytest.mark.parametrize("theta", THETAS)
def test_linear_jacobi_and_constant(flat, theta):
    form = assemble_stability(flat, flat_geodesic(flat, theta))
    L = form.length
    assert abs(form.evaluate(form.nodes - 0.5 * L)) < 1e-6
    assert form.evaluate(np.ones_like(form.nodes)) == pytest.approx(-2 / math.sin(theta), abs=1e-8)


def test_mesh_doubling(flat):
    geo = flat_geodesic(flat, math.pi / 3)
    a = morse_index(flat, geo, n_nodes=201).eigenvalues[:3]
    b = morse_index(flat, geo, n_nodes=401).eigenvalues[:3]
    L = 2 * math.sin(math.pi / 3)
    assert np.max(np.abs(a - b)) < 1e-4 / L**2


def test_curved_spectrum_matches_jacobi_shooting(bump):
    theta = math.pi / 3
    geo = find_capillary_geodesics(bump, theta, grid_n=16).geodesics[0]
    rep = morse_index(bump, geo)
    pts = geo.domain.points
    s = np.concatenate([[0.0], np.cumsum(segment_g_lengths(bump, pts))])
    K = -np.exp(-2 * bump.phi(pts[:, 0], pts[:, 1])) * bump.lap_phi(pts[:, 0], pts[:, 1])
    sig1 = boundary_geodesic_curvature(bump, pts[0]) / math.sin(theta)
    sig2 = boundary_geodesic_curvature(bump, pts[-1]) / math.sin(theta)
    roots = jacobi_shooting_eigenvalues(s, K, sig1, sig2, -15.0, 1.0, n_scan=97)
    assert len(roots) == 2
    np.testing.assert_allclose(rep.eigenvalues[:2], roots, atol=1e-4)
    assert (rep.index, rep.nullity) == (1, 1)


def test_morse_requires_stationary(flat):
    geo = flat_geodesic(flat, math.pi / 3)
    bad = type(geo)(geo.domain, math.pi / 4, geo.measure,
                    type(geo.residual)(0.0, (0.2, 0.2)), geo.complement_measure, 0.0)
    with pytest.raises(ResidualTooLarge):
        morse_index(flat, bad)


def test_assembly_needs_nodes(flat):
    with pytest.raises(DomainError):
        assemble_stability(flat, flat_geodesic(flat, 1.0), n_nodes=50)


# catalogs -------------------------------------------------------------------------

def test_csv_emitters(flat, sharp, tmp_path):
    geo = flat_geodesic(flat, math.pi / 3)
    write_geodesics_csv(tmp_path / "g.csv", [geo])
    write_spectrum_csv(tmp_path / "s.csv", morse_index(flat, geo))
    recs = find_critical_lassos(sharp.chart, 10.0, basepoints=1, angles=np.linspace(0.6, 1.0, 5))
    write_lassos_csv(tmp_path / "l.csv", recs)
    assert (tmp_path / "g.csv").read_text().count("\n") == 2
    assert (tmp_path / "s.csv").read_text().startswith("node,s,eigenvalue")
    assert (tmp_path / "l.csv").read_text().count("\n") == len(recs) + 1
