import math

import numpy as np
import pytest

from capgeo.curve import DomainState, SimpleDomain, l_theta
from capgeo.errors import DegreeCheckFailed, DomainError, RowHasSentinel
from capgeo.minmax import (
    Sweepout,
    build_line_sweepout,
    continuity_defect,
    cut_height,
    endpoint_degree,
    estimate_widths,
    line_slice,
    sweepout_values,
    tighten_sweepout,
    verify_sweepout,
)

from oracles import line_family_sup

THETA = math.pi / 3


@pytest.fixture(scope="module")
def flat_sweepout(flat):
    return build_line_sweepout(flat, arity=2, grid_n=64)


def perturb(dom, amp=0.05):
    if dom.state is not DomainState.PROPER:
        return dom
    pts = dom.points
    a, b = pts[0], pts[-1]
    L = float(np.hypot(*(b - a)))
    nrm = np.array([-(b - a)[1], (b - a)[0]]) / L
    u = np.linspace(0.0, 1.0, len(pts))[:, None]
    bump = min(amp, 0.05 * L * L) * np.sin(math.pi * u) ** 2 * np.sin(2 * math.pi * u)
    new = pts + bump * nrm
    new[0], new[-1] = a, b
    return SimpleDomain.proper(new, dom.side)


def test_cut_height_profiles():
    assert cut_height(0.0) == 1.0 and cut_height(1.0) == -1.0
    assert cut_height(0.25, "linear") == 0.5
    with pytest.raises(DomainError):
        cut_height(0.5, "cubic")


def test_line_slice_sentinels(flat):
    assert line_slice(flat, 0.0, 1.0).state is DomainState.EMPTY
    assert line_slice(flat, 0.0, -1.0).state is DomainState.FULL
    cap = line_slice(flat, 0.0, 0.0)
    assert l_theta(flat, cap, THETA).boundary_len == pytest.approx(math.pi)


def test_boundary_rows(flat_sweepout):
    for col in flat_sweepout.slices:
        assert col[0].state is DomainState.EMPTY
        assert col[-1].state is DomainState.FULL


def test_degree_at_middle_row(flat_sweepout):
    assert endpoint_degree(flat_sweepout, 32) == 1
    assert all(endpoint_degree(flat_sweepout, j) == 1 for j in range(1, 64))


def test_frozen_endpoint_map_has_degree_zero(flat_sweepout):
    col = flat_sweepout.slices[0]
    frozen = Sweepout(2, flat_sweepout.grid_n, [col] * len(flat_sweepout.slices))
    assert endpoint_degree(frozen, 32) == 0
    with pytest.raises(DegreeCheckFailed):
        verify_sweepout(frozen)


def test_reversed_orientation(flat):
    sw = build_line_sweepout(flat, 2, 32, orientation=-1, verify=False)
    assert endpoint_degree(sw, 16) == -1


def test_degree_errors(flat_sweepout, flat):
    with pytest.raises(RowHasSentinel):
        bad = Sweepout(2, 64, [col[:1] * 65 for col in flat_sweepout.slices])
        endpoint_degree(bad, 5)
    with pytest.raises(DomainError):
        endpoint_degree(flat_sweepout, 0)
    with pytest.raises(DomainError):
        endpoint_degree(build_line_sweepout(flat, 1, 32), 5)


def test_continuity_within_bound(flat_sweepout):
    assert continuity_defect(flat_sweepout, bound=8 / 64) <= 8 / 64
    assert continuity_defect(flat_sweepout) <= 8 / 64


def test_build_validation(flat):
    with pytest.raises(DomainError):
        build_line_sweepout(flat, 3, 64)
    with pytest.raises(DomainError):
        build_line_sweepout(flat, 2, 16)


def test_one_parameter_sup_matches_oracle(flat):
    sw = build_line_sweepout(flat, 1, 64)
    vals = sweepout_values(flat, sw, THETA)
    fine = max(l_theta(flat, sw.slice_at(flat, 0.0, t), THETA).l_theta for t in np.linspace(0.6, 0.75, 301))
    assert fine == pytest.approx(line_family_sup(THETA), abs=1e-3)
    assert vals.max() <= line_family_sup(THETA) + 1e-12


def test_sentinels_never_the_sup(flat_sweepout, flat):
    vals = sweepout_values(flat, flat_sweepout, THETA)
    assert np.all(vals[:, 0] == 0.0)
    assert vals[0, -1] == pytest.approx(math.pi)
    assert vals[:, 1:-1].max() > vals[:, -1].max()


def test_tighten_flat_is_identity(flat):
    sw = build_line_sweepout(flat, 2, 32)
    tight = tighten_sweepout(flat, sw, theta=THETA)
    for c0, c1 in zip(sw.slices, tight.slices):
        for a, b in zip(c0, c1):
            if a.state is DomainState.PROPER:
                assert np.max(np.abs(a.points - b.points)) < 1e-10


def test_tighten_removes_perturbation(flat):
    sw = build_line_sweepout(flat, 2, 32)
    ref = sweepout_values(flat, sw, THETA).max()
    bumped = Sweepout(2, 32, [[perturb(d) for d in col] for col in sw.slices])
    assert sweepout_values(flat, bumped, THETA).max() > ref + 1e-3
    tight = tighten_sweepout(flat, bumped, theta=THETA)
    assert abs(sweepout_values(flat, tight, THETA).max() - ref) < 1e-3
    assert all(endpoint_degree(tight, j) == 1 for j in range(1, 32))


def test_widths_flat_coarse(flat):
    rep = estimate_widths(flat, THETA, grid_n=32)
    assert rep.lower_bound == pytest.approx(math.pi, abs=1e-12)
    assert rep.lower_bound < rep.w1_upper <= rep.w2_upper + 1e-9
    assert rep.w1_upper == pytest.approx(rep.w2_upper, abs=1e-3)
    assert rep.w1_upper == pytest.approx(math.sqrt(3) + 2 * math.pi / 3, abs=1e-3)
    assert min(rep.candidate_critical_values) <= rep.w1_upper + 1e-3
    assert rep.flags == []
    assert '"w1_upper"' in rep.to_json()


@pytest.mark.parametrize("theta", [math.pi / 6, math.pi / 4])
def test_lower_bound_margin(bump, sharp, theta):
    for chart in (bump, sharp.chart):
        rep = estimate_widths(chart, theta, grid_n=32, families=[{"profile": "cosine"}], candidates=False)
        assert rep.w1_upper - rep.lower_bound > 0.1
        assert rep.w1_upper <= rep.w2_upper + 1e-9


def test_cone_falls_back_to_straight_chords(sharp):
    from capgeo.errors import ContinuityCheckFailed

    with pytest.raises(ContinuityCheckFailed):
        build_line_sweepout(sharp.chart, 2, 32)
    sw = build_line_sweepout(sharp.chart, 2, 32, geodesic=False)
    assert all(endpoint_degree(sw, j) == 1 for j in range(1, 32))
