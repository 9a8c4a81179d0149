import math

import numpy as np
import pytest

from capgeo.curve import hausdorff, polyline_self_intersects
from capgeo.errors import DomainError, EmbeddednessLost, StepTooLarge
from capgeo.flow import csf_run, csf_step, initial_state, max_stable_dt

from oracles import chord_points, cone_chord_points


def bumped(a, b, amp, n=200, modes=1):
    s = np.linspace(0.0, 1.0, n)[:, None]
    nrm = np.array([-(b - a)[1], (b - a)[0]])
    nrm /= np.linalg.norm(nrm)
    pts = a + s * (b - a) + amp * np.sin(modes * math.pi * s) * np.sin(math.pi * s) * nrm
    pts[0], pts[-1] = a, b
    return pts


def test_chord_is_fixed_point(flat):
    st = initial_state(flat, chord_points(0.2, 1.0, 65))
    nxt = csf_step(flat, st, 0.5 * max_stable_dt(flat, st))
    assert np.max(np.abs(nxt.curve - st.curve)) < 1e-12


def test_arc_moves_toward_chord(flat):
    t = np.linspace(0.0, math.pi, 129)
    a, b = np.array([0.5, -0.2]), np.array([-0.5, -0.2])
    arc = np.column_stack([0.5 * np.cos(t), 0.5 * np.sin(t) - 0.2])
    st = initial_state(flat, arc)
    nxt = csf_step(flat, st, 0.5 * max_stable_dt(flat, st))
    assert nxt.length < st.length
    # interior heights drop toward y = -0.2
    assert np.max(nxt.curve[1:-1, 1]) < np.max(arc[1:-1, 1])
    assert nxt.curve[0].tobytes() == a.tobytes() or np.allclose(nxt.curve[0], a)


def test_step_above_ceiling_raises(flat):
    zig = np.column_stack([np.linspace(-0.5, 0.5, 41), 0.02 * (-1.0) ** np.arange(41)])
    st = initial_state(flat, zig)
    with pytest.raises(StepTooLarge):
        csf_step(flat, st, 10.0 * max_stable_dt(flat, st))


def test_bad_dt(flat):
    st = initial_state(flat, chord_points(0.0, 1.0, 9))
    with pytest.raises(DomainError):
        csf_step(flat, st, 0.0)


def test_non_embedded_input(flat):
    loop = np.array([[0, 0], [0.5, 0], [0.5, 0.5], [0.25, -0.25]], float)
    with pytest.raises(EmbeddednessLost):
        initial_state(flat, loop)


def test_s_curve_converges_to_diameter(flat):
    a, b = np.array([1.0, 0.0]), np.array([-1.0, 0.0])
    st = csf_run(flat, bumped(a, b, 0.3, modes=2), tol=1e-6)
    assert st.converged
    assert hausdorff(st.curve, np.array([a, b])) < 1e-4
    assert np.all(np.diff(st.length_history) <= 1e-9)
    assert st.curve[0].tobytes() == a.tobytes()
    assert st.curve[-1].tobytes() == b.tobytes()


def test_geodesic_input_converges_immediately(flat):
    pts = chord_points(0.5, 0.9, 129)
    st = csf_run(flat, pts, n_nodes=None)
    assert st.step_count <= 1
    assert np.max(np.abs(st.curve - pts)) < 1e-10


def test_cone_flow_matches_development(sharp):
    g = cone_chord_points(sharp.k, 0.0, 2.0)
    st = csf_run(sharp.chart, bumped(g[0], g[-1], 0.1, modes=2), tol=1e-6)
    assert st.converged
    assert hausdorff(st.curve, g) < 1e-4


def test_curved_chart_monotone_and_embedded(bump):
    a = np.array([math.cos(0.3), math.sin(0.3)])
    b = np.array([math.cos(2.5), math.sin(2.5)])
    st = csf_run(bump, bumped(a, b, 0.25, modes=3), tol=1e-6)
    assert st.converged
    assert np.all(np.diff(st.length_history) <= 1e-9)
    assert not polyline_self_intersects(st.curve)


def test_time_budget_flag(flat):
    a, b = np.array([1.0, 0.0]), np.array([-1.0, 0.0])
    st = csf_run(flat, bumped(a, b, 0.3), max_time=1e-4)
    assert not st.converged
    assert st.time == pytest.approx(1e-4)


def test_trace_file(flat, tmp_path):
    a, b = np.array([1.0, 0.0]), np.array([-1.0, 0.0])
    path = tmp_path / "trace.csv"
    st = csf_run(flat, bumped(a, b, 0.2), trace_path=path)
    lines = path.read_text().splitlines()
    assert lines[0] == "time,length,max_curvature"
    assert len(lines) == st.step_count + 2
