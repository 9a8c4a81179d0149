"""Line sweepouts of the disk, endpoint-map degree, flow tightening and
upper estimates of the capillary min-max widths.

A slice of the line family is the cap ``{<x, e_s> >= h(t)}`` cut off by a
chord. ``e_s`` points at boundary angle ``direction + 2 pi s * orientation``
and ``h`` runs from ``1`` (empty) to ``-1`` (full disk). On curved charts the
straight chord is replaced by the fixed-endpoint flow limit between the same
boundary points, i.e. the geodesic chord.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from .curve import (
    DomainState,
    SimpleDomain,
    check_theta,
    domain_hausdorff,
    endpoint_pair,
    l_theta,
    paired_distance_bound,
)
from .errors import (
    ContinuityCheckFailed,
    DegreeCheckFailed,
    DomainError,
    RowHasSentinel,
)
from .flow import csf_run
from .geom import TWO_PI, ChartKind, MetricChart

CONTINUITY_CONST = 8.0
PROFILES = ("cosine", "linear")


def cut_height(t: float, profile: str = "cosine") -> float:
    if profile == "cosine":
        return math.cos(math.pi * t)
    if profile == "linear":
        return 1.0 - 2.0 * t
    raise DomainError(f"unknown height profile {profile!r}")


def _rotate(pts: np.ndarray, angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return pts @ np.array([[c, s], [-s, c]])


def line_slice(chart: MetricChart, omega: float, h: float, n_vertices: int = 65,
               flow_tol: float = 1e-6, geodesic: bool = True) -> SimpleDomain:
    """Cap of the disk beyond the line ``<x, e> = h`` with ``e`` at angle ``omega``.

    With ``geodesic`` the chart chord is flowed to a geodesic on curved charts;
    otherwise the straight chart chord is kept.
    """
    if h >= 1.0:
        return SimpleDomain.empty()
    if h <= -1.0:
        return SimpleDomain.full()
    beta = math.acos(h)
    a = np.array([math.cos(omega - beta), math.sin(omega - beta)])
    b = np.array([math.cos(omega + beta), math.sin(omega + beta)])
    u = np.linspace(0.0, 1.0, n_vertices)[:, None]
    pts = a + u * (b - a)
    if geodesic and chart.kind is not ChartKind.FLAT:
        pts = csf_run(chart, pts, tol=flow_tol, n_nodes=n_vertices).curve
    return SimpleDomain.proper(pts, side=-1)


@dataclass
class Sweepout:
    """Discrete sweepout; ``slices[i][j]`` is the slice at ``(s_i, t_j)``
    with ``s_i = i / grid_n`` (periodic) and ``t_j = j / grid_n``. Arity one
    has a single ``s`` row."""

    arity: int
    grid_n: int
    slices: list
    direction: float = 0.0
    profile: str = "cosine"
    orientation: int = 1
    n_vertices: int = 65
    geodesic: bool = True

    @property
    def t_values(self):
        return [j / self.grid_n for j in range(self.grid_n + 1)]

    @property
    def s_values(self):
        return [i / self.grid_n for i in range(len(self.slices))]

    def row(self, j: int) -> list:
        """Slices at fixed ``t_j`` across ``s``."""
        return [col[j] for col in self.slices]

    def omega(self, s: float) -> float:
        return self.direction + TWO_PI * s * self.orientation

    def slice_at(self, chart: MetricChart, s: float, t: float) -> SimpleDomain:
        """Slice of the same family at arbitrary ``(s, t)``."""
        return line_slice(chart, self.omega(s), cut_height(t, self.profile), self.n_vertices,
                          geodesic=self.geodesic)


def _slice_job(args):
    chart, omega, h, n_vertices, geodesic = args
    return line_slice(chart, omega, h, n_vertices, geodesic=geodesic)


def build_line_sweepout(chart: MetricChart, arity: int = 2, grid_n: int = 64, direction: float = 0.0,
                        profile: str = "cosine", orientation: int = 1, n_vertices: int = 65,
                        workers: int = 1, verify: bool = True, geodesic: bool = True) -> Sweepout:
    """Line family of half-plane cuts. Arity two sweeps the direction once
    around the circle; the endpoint map then has degree ``orientation``.

    On rotationally symmetric charts the ``s = 0`` column is computed and
    rotated, which is exact up to rounding.
    """
    if arity not in (1, 2):
        raise DomainError("arity must be 1 or 2")
    if grid_n < 32:
        raise DomainError("grid_n must be at least 32")
    if orientation not in (1, -1):
        raise DomainError("orientation must be +1 or -1")
    ts = [j / grid_n for j in range(grid_n + 1)]
    hs = [cut_height(t, profile) for t in ts]
    hs[0], hs[-1] = 1.0, -1.0
    n_s = 1 if arity == 1 else grid_n
    sw = Sweepout(arity, grid_n, [], direction, profile, orientation, n_vertices, geodesic)
    if chart.rotationally_symmetric:
        base = [line_slice(chart, direction, h, n_vertices, geodesic=geodesic) for h in hs]
        for i in range(n_s):
            ang = TWO_PI * (i / grid_n) * orientation
            col = []
            for dom in base:
                if dom.state is DomainState.PROPER and i:
                    dom = SimpleDomain.proper(_rotate(dom.points, ang), dom.side, validate=False)
                col.append(dom)
            sw.slices.append(col)
    else:
        jobs = [(chart, sw.omega(i / grid_n), h, n_vertices, geodesic) for i in range(n_s) for h in hs]
        if workers > 1:
            with ProcessPoolExecutor(max_workers=workers) as ex:
                flat = list(ex.map(_slice_job, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
        else:
            flat = [_slice_job(j) for j in jobs]
        m = len(hs)
        sw.slices = [flat[i * m:(i + 1) * m] for i in range(n_s)]
    if verify:
        verify_sweepout(sw)
    return sw


def endpoint_degree(sw: Sweepout, t_row: int) -> int:
    """Winding number of ``s -> e(slice(s, t_row))`` around the circle."""
    if sw.arity != 2:
        raise DomainError("endpoint degree needs a two-parameter sweepout")
    if not 0 < t_row < sw.grid_n:
        raise DomainError("t_row must be an interior row")
    row = sw.row(t_row)
    if any(d.state is not DomainState.PROPER for d in row):
        raise RowHasSentinel(f"row {t_row} contains Empty or Full slices")
    e = [endpoint_pair(d)[0] for d in row]
    total = 0.0
    for a, b in zip(e, e[1:] + e[:1]):
        inc = (b - a + math.pi) % TWO_PI - math.pi
        if abs(inc) >= 0.5 * math.pi:
            raise DegreeCheckFailed(f"endpoint jumps by {inc:.3g} between adjacent slices")
        total += inc
    deg = total / TWO_PI
    if abs(deg - round(deg)) > 1e-6:
        raise DegreeCheckFailed(f"lifted endpoint map does not close ({deg:.6g} turns)")
    return int(round(deg))


def continuity_defect(sw: Sweepout, step: float = 0.02, bound: Optional[float] = None) -> float:
    """Largest distance between neighbouring slices.

    With ``bound`` given, pairs whose cheap paired-vertex estimate already
    lies below it keep that estimate (an upper bound); only the rest get the
    exact distance. The result then still certifies ``<= bound``.
    """
    worst = 0.0

    def dist(a, b):
        if bound is not None:
            ub = paired_distance_bound(a, b)
            if ub is not None and ub <= bound:
                return ub
        return domain_hausdorff(a, b, step)

    n_s = len(sw.slices)
    for i in range(n_s):
        col = sw.slices[i]
        for j in range(sw.grid_n):
            worst = max(worst, dist(col[j], col[j + 1]))
        if sw.arity == 2:
            nxt = sw.slices[(i + 1) % n_s]
            for j in range(1, sw.grid_n):
                worst = max(worst, dist(col[j], nxt[j]))
    return worst


def verify_sweepout(sw: Sweepout) -> dict:
    """Check boundary rows, continuity and (arity two) the degree."""
    for col in sw.slices:
        if col[0].state is not DomainState.EMPTY or col[-1].state is not DomainState.FULL:
            raise DomainError("sweepout must start Empty and end Full")
    bound = CONTINUITY_CONST / sw.grid_n
    worst = continuity_defect(sw, bound=bound)
    if worst > bound:
        raise ContinuityCheckFailed(f"neighbouring slices {worst:.4g} apart (bound {bound:.4g})")
    degrees = []
    if sw.arity == 2:
        degrees = [endpoint_degree(sw, j) for j in range(1, sw.grid_n)]
        if any(d != 1 for d in degrees):
            raise DegreeCheckFailed(f"endpoint degrees {sorted(set(degrees))}, expected 1")
    return {"continuity": worst, "degrees": degrees}


def _tighten_job(args):
    chart, dom, budget, tol = args
    if dom.state is not DomainState.PROPER:
        return dom
    st = csf_run(chart, dom.points, tol=tol, max_time=budget, n_nodes=len(dom.points))
    return SimpleDomain.proper(st.curve, dom.side)


def tighten_sweepout(chart: MetricChart, sw: Sweepout, flow_budget: Optional[float] = None,
                     theta: float = math.pi / 3, tol: float = 1e-6, workers: int = 1,
                     verify: bool = True) -> Sweepout:
    """Flow every proper slice with its endpoints held fixed.

    The wetted arcs never move, so the endpoint map and its degree are
    unchanged; the capillary functional of each slice cannot increase.
    """
    theta = check_theta(theta)
    flat = [dom for col in sw.slices for dom in col]
    jobs = [(chart, dom, flow_budget, tol) for dom in flat]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            out = list(ex.map(_tighten_job, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    else:
        out = [_tighten_job(j) for j in jobs]
    m = sw.grid_n + 1
    for k, (old, new) in enumerate(zip(flat, out)):
        if new.state is DomainState.PROPER:
            before = l_theta(chart, old, theta).l_theta
            after = l_theta(chart, new, theta).l_theta
            if after > before + 1e-9:
                i, j = divmod(k, m)
                raise DomainError(f"tightening raised the functional at slice (s={i}, t={j})")
    new_sw = Sweepout(sw.arity, sw.grid_n, [out[i * m:(i + 1) * m] for i in range(len(sw.slices))],
                      sw.direction, sw.profile, sw.orientation, sw.n_vertices, sw.geodesic)
    if verify:
        verify_sweepout(new_sw)
    return new_sw


def sweepout_values(chart: MetricChart, sw: Sweepout, theta: float) -> np.ndarray:
    """``L^theta`` over the grid, shape ``(n_s, grid_n + 1)``."""
    return np.array([[l_theta(chart, d, theta).l_theta for d in col] for col in sw.slices])


def _refined_sup(chart, sw: Sweepout, theta, vals, tighten: bool, tol=1e-10):
    i, j = np.unravel_index(int(np.argmax(vals)), vals.shape)
    s = i / sw.grid_n
    lo = max(j - 1, 0) / sw.grid_n
    hi = min(j + 1, sw.grid_n) / sw.grid_n

    def neg(t):
        dom = sw.slice_at(chart, s, t)
        if tighten and dom.state is DomainState.PROPER and chart.kind is not ChartKind.FLAT:
            dom = _tighten_job((chart, dom, None, 1e-6))
        return -l_theta(chart, dom, theta).l_theta

    res = minimize_scalar(neg, bounds=(lo, hi), method="bounded", options={"xatol": tol})
    best = max(float(vals[i, j]), -float(res.fun))
    t_best = float(res.x) if -res.fun >= vals[i, j] else j / sw.grid_n
    return best, (float(s), t_best)


@dataclass
class WidthReport:
    theta: float
    w1_upper: float
    w2_upper: float
    lower_bound: float
    candidate_critical_values: list
    families: list = field(default_factory=list)
    flags: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "theta": self.theta,
            "w1_upper": self.w1_upper,
            "w2_upper": self.w2_upper,
            "lower_bound": self.lower_bound,
            "candidate_critical_values": self.candidate_critical_values,
            "families": self.families,
            "flags": self.flags,
        }

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=2, sort_keys=True)


DEFAULT_FAMILIES = (
    {"profile": "cosine", "direction": 0.0},
    {"profile": "linear", "direction": 0.0},
    {"profile": "cosine", "direction": 0.5},
)


def estimate_widths(chart: MetricChart, theta: float, grid_n: int = 64,
                    families: Optional[Sequence[dict]] = None, tighten: bool = True,
                    candidates: bool = True, workers: int = 1) -> WidthReport:
    """Upper estimates of the 1- and 2-widths from line families.

    For every family the two-parameter sweepout is built (its ``s = 0`` row
    is the one-parameter sweepout), tightened, and the sup of the capillary
    functional refined by a bounded scalar search around the best grid
    slice. Each width estimate is the smallest sup over the families.
    """
    theta = check_theta(theta)
    families = list(families or DEFAULT_FAMILIES)
    lower = math.cos(theta) * float(chart.boundary_length)
    fam_out, flags = [], []
    w1s, w2s = [], []
    for fam in families:
        kw = dict(direction=float(fam.get("direction", 0.0)), profile=fam.get("profile", "cosine"),
                  workers=workers)
        fam_flags = []
        try:
            sw = build_line_sweepout(chart, 2, grid_n, **kw)
        except ContinuityCheckFailed:
            # geodesic chords can jump across a cone tip; straight chords still sweep out
            sw = build_line_sweepout(chart, 2, grid_n, geodesic=False, **kw)
            fam_flags.append("geodesic_slices_discontinuous")
        smooth = tighten and sw.geodesic
        if smooth:
            sw = tighten_sweepout(chart, sw, theta=theta, workers=workers)
        vals = sweepout_values(chart, sw, theta)
        sup1, arg1 = _refined_sup(chart, sw, theta, vals[:1], smooth)
        sup2, arg2 = _refined_sup(chart, sw, theta, vals, smooth)
        sup2 = max(sup2, sup1)
        if not lower < sup1:
            fam_flags.append("lower_bound_not_below_w1")
        if sup1 > sup2 + 1e-9:
            fam_flags.append("w1_exceeds_w2")
        flags.extend(fam_flags)
        w1s.append(sup1)
        w2s.append(sup2)
        fam_out.append({
            "profile": fam.get("profile", "cosine"),
            "direction": float(fam.get("direction", 0.0)),
            "sup_1": sup1,
            "sup_2": sup2,
            "argmax_1": list(arg1),
            "argmax_2": list(arg2),
            "grid_max_1": float(vals[0].max()),
            "grid_max_2": float(vals.max()),
            "flags": fam_flags,
        })
    cands = []
    if candidates:
        from .capillary import find_capillary_geodesics

        res = find_capillary_geodesics(chart, theta, grid_n=32, workers=workers)
        vals = sorted({round(g.measure.l_theta, 9) for g in res.geodesics})
        cands = [float(v) for v in vals]
    w1, w2 = min(w1s), min(w2s)
    if not lower < w1:
        flags.append("lower_bound_not_below_w1")
    if cands and min(cands) > w1 + 1e-3:
        flags.append("no_critical_value_below_w1")
    return WidthReport(theta, w1, w2, lower, cands, fam_out, sorted(set(flags)))
