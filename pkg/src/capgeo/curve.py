"""Simple domains in the disk, the capillary functional, first-variation
residuals and curve/varifold proximity measures.

A proper :class:`SimpleDomain` is stored as a polyline ``a -> b`` with both
ends on the unit circle and a ``side`` bit: ``+1`` when the domain lies to the
left of the direction of travel, ``-1`` when it lies to the right. The wetted
boundary arc of a left domain runs counterclockwise from ``b`` to ``a``.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.spatial import cKDTree
from scipy.spatial.distance import directed_hausdorff

from .errors import (
    DegenerateTangent,
    EmptyCurve,
    InvalidDomain,
    InvalidTheta,
    NoEndpoints,
)
from .geom import TWO_PI, MetricChart, _SegmentHash, ccw_delta, segments_cross

EMBED_TOL = 1e-10


class DomainState(str, enum.Enum):
    EMPTY = "Empty"
    FULL = "Full"
    PROPER = "Proper"


def check_theta(theta: float) -> float:
    theta = float(theta)
    if not 0.0 < theta < math.pi / 2:
        raise InvalidTheta(f"contact angle {theta!r} outside (0, pi/2)")
    return theta


# ---------------------------------------------------------------------------
# polyline helpers
# ---------------------------------------------------------------------------

def polyline_self_intersects(pts: np.ndarray, tol: float = EMBED_TOL) -> bool:
    """True if two non-adjacent segments of an open polyline meet."""
    pts = np.asarray(pts, float)
    m = len(pts) - 1
    if m < 3:
        return False
    if m <= 400:
        a, b = pts[:-1], pts[1:]
        i, j = np.triu_indices(m, k=2)
        p, q, r, s = a[i], b[i], a[j], b[j]

        def orient(u, v, w):
            return (v[:, 0] - u[:, 0]) * (w[:, 1] - u[:, 1]) - (v[:, 1] - u[:, 1]) * (w[:, 0] - u[:, 0])

        o1, o2, o3, o4 = orient(p, q, r), orient(p, q, s), orient(r, s, p), orient(r, s, q)
        # orientations are length x distance; compare distances against tol
        ta = tol * np.hypot(*(q - p).T)
        tc = tol * np.hypot(*(s - r).T)
        proper = (((o1 > ta) & (o2 < -ta)) | ((o1 < -ta) & (o2 > ta))) & (
            ((o3 > tc) & (o4 < -tc)) | ((o3 < -tc) & (o4 > tc)))
        if proper.any():
            return True

        def on_seg(u, v, w):
            return ((np.minimum(u[:, 0], v[:, 0]) - tol <= w[:, 0]) & (w[:, 0] <= np.maximum(u[:, 0], v[:, 0]) + tol)
                    & (np.minimum(u[:, 1], v[:, 1]) - tol <= w[:, 1]) & (w[:, 1] <= np.maximum(u[:, 1], v[:, 1]) + tol))

        touch = ((np.abs(o1) <= ta) & on_seg(p, q, r)) | ((np.abs(o2) <= ta) & on_seg(p, q, s)) | (
            (np.abs(o3) <= tc) & on_seg(r, s, p)) | ((np.abs(o4) <= tc) & on_seg(r, s, q))
        return bool(touch.any())
    seglen = np.hypot(*np.diff(pts, axis=0).T)
    index = _SegmentHash(cell=max(4.0 * float(np.median(seglen)), 1e-4))
    for k in range(m):
        a, b = tuple(pts[k]), tuple(pts[k + 1])
        if index.query(a, b) is not None:
            return True
        index.add(a, b)
    return False


def segment_g_lengths(chart: MetricChart, pts: np.ndarray) -> np.ndarray:
    """Trapezoidal g-length of each polyline segment."""
    pts = np.asarray(pts, float)
    ef = np.exp(chart.phi(pts[:, 0], pts[:, 1]))
    d = np.hypot(*np.diff(pts, axis=0).T)
    return 0.5 * (ef[:-1] + ef[1:]) * d


def polyline_g_length(chart: MetricChart, pts: np.ndarray) -> float:
    return float(np.sum(segment_g_lengths(chart, pts)))


def resample_polyline(chart: MetricChart, pts: np.ndarray, n: int) -> np.ndarray:
    """``n`` points equally spaced in g-arclength along ``pts``; ends kept bitwise."""
    pts = np.asarray(pts, float)
    cum = np.concatenate([[0.0], np.cumsum(segment_g_lengths(chart, pts))])
    target = np.linspace(0.0, cum[-1], n)
    out = np.column_stack([np.interp(target, cum, pts[:, 0]), np.interp(target, cum, pts[:, 1])])
    out[0], out[-1] = pts[0], pts[-1]
    return out


def discrete_curvature(chart: MetricChart, pts: np.ndarray):
    """Signed geodesic curvature at interior vertices w.r.t. the left normal.

    Uses the vertex curvature vector ``2 (t_i - t_{i-1}) / (h_{i-1} + h_i)``
    of the chart polyline and the conformal correction
    ``kappa_g = exp(-phi) (kappa_e - grad(phi) . N)``. Returns
    ``(kappa_g, normals)``.
    """
    pts = np.asarray(pts, float)
    d = np.diff(pts, axis=0)
    h = np.hypot(d[:, 0], d[:, 1])
    if np.any(h <= 0):
        raise DegenerateTangent("polyline has a repeated vertex")
    t = d / h[:, None]
    kvec = 2.0 * (t[1:] - t[:-1]) / (h[:-1] + h[1:])[:, None]
    tb = t[1:] + t[:-1]
    tb /= np.hypot(tb[:, 0], tb[:, 1])[:, None]
    nrm = np.column_stack([-tb[:, 1], tb[:, 0]])
    x, y = pts[1:-1, 0], pts[1:-1, 1]
    gx, gy = chart.grad_phi(x, y)
    ke = np.sum(kvec * nrm, axis=1)
    kg = np.exp(-chart.phi(x, y)) * (ke - (gx * nrm[:, 0] + gy * nrm[:, 1]))
    return kg, nrm


def end_tangent(pts: np.ndarray, at_end: bool) -> np.ndarray:
    """Euclidean unit tangent at a polyline end pointing out of the curve.

    Second-order one-sided estimate from the three terminal vertices.
    """
    pts = np.asarray(pts, float)
    if at_end:
        p0, p1, p2 = pts[-1], pts[-2], pts[-3] if len(pts) > 2 else None
    else:
        p0, p1, p2 = pts[0], pts[1], pts[2] if len(pts) > 2 else None
    h1 = math.hypot(*(p1 - p0))
    if h1 < 1e-9:
        raise DegenerateTangent(f"terminal segment of length {h1:.3g}")
    if p2 is None:
        v = p0 - p1
    else:
        h2 = math.hypot(*(p2 - p1))
        # derivative at p0 of the quadratic through p0, p1, p2 (parameter away from p0)
        d = (-(2 * h1 + h2) / (h1 * (h1 + h2))) * p0 + ((h1 + h2) / (h1 * h2)) * p1 - (h1 / (h2 * (h1 + h2))) * p2
        v = -d
    return v / math.hypot(*v)


# ---------------------------------------------------------------------------
# domains
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SimpleDomain:
    """Element of the space of simple domains: ``Empty``, ``Full`` or a
    side-marked embedded chord-like polyline."""

    state: DomainState
    points: Optional[np.ndarray] = None
    side: int = 1

    @classmethod
    def empty(cls) -> "SimpleDomain":
        return cls(DomainState.EMPTY)

    @classmethod
    def full(cls) -> "SimpleDomain":
        return cls(DomainState.FULL)

    @classmethod
    def proper(cls, points, side: int = 1, validate: bool = True) -> "SimpleDomain":
        pts = np.array(points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 2:
            raise InvalidDomain("relative boundary needs at least two 2-D points")
        if side not in (1, -1):
            raise InvalidDomain("side must be +1 or -1")
        for k in (0, -1):
            r = math.hypot(*pts[k])
            if abs(r - 1.0) > 1e-9:
                raise InvalidDomain(f"endpoint {pts[k]} is not on the unit circle")
            if r != 1.0:
                pts[k] = pts[k] / r
        if validate:
            if len(pts) > 2 and np.max(np.hypot(pts[1:-1, 0], pts[1:-1, 1])) >= 1.0:
                raise InvalidDomain("interior vertices must lie strictly inside the disk")
            if math.hypot(*(pts[0] - pts[-1])) < 1e-12:
                raise InvalidDomain("endpoints coincide")
            if polyline_self_intersects(pts):
                raise InvalidDomain("relative boundary is not embedded")
        pts.setflags(write=False)
        return cls(DomainState.PROPER, pts, side)

    @property
    def is_proper(self) -> bool:
        return self.state is DomainState.PROPER

    def complement(self) -> "SimpleDomain":
        if self.state is DomainState.EMPTY:
            return SimpleDomain.full()
        if self.state is DomainState.FULL:
            return SimpleDomain.empty()
        return SimpleDomain(DomainState.PROPER, self.points, -self.side)

    @property
    def end_params(self):
        """Boundary parameters of the first and last polyline vertex."""
        a, b = self.points[0], self.points[-1]
        return math.atan2(a[1], a[0]) % TWO_PI, math.atan2(b[1], b[0]) % TWO_PI

    def boundary_arc_points(self, step: float = 1e-3) -> np.ndarray:
        """Chart points along the wetted arc, counterclockwise from q1 to q2."""
        if self.state is DomainState.EMPTY:
            return np.zeros((0, 2))
        if self.state is DomainState.FULL:
            t = np.linspace(0.0, TWO_PI, max(int(TWO_PI / step), 8) + 1)
        else:
            q1, q2 = endpoint_pair(self)
            span = ccw_delta(q1, q2)
            t = q1 + np.linspace(0.0, span, max(int(span / step), 1) + 1)
        return np.column_stack([np.cos(t), np.sin(t)])

    def boundary_loop(self, step: float = 1e-3) -> np.ndarray:
        """Closed boundary of the domain: relative boundary plus wetted arc."""
        if self.state is not DomainState.PROPER:
            return self.boundary_arc_points(step)
        arc = self.boundary_arc_points(step)
        return np.vstack([self.points, arc])

    def __repr__(self):
        if self.state is DomainState.PROPER:
            return f"SimpleDomain(Proper, n={len(self.points)}, side={self.side:+d})"
        return f"SimpleDomain({self.state.value})"


def endpoint_pair(dom: SimpleDomain):
    """Ordered endpoints ``(q1, q2)``: the counterclockwise boundary arc
    starting at ``q1`` is the wetted arc, which ends at ``q2``."""
    if dom.state is not DomainState.PROPER:
        raise NoEndpoints(f"{dom.state.value} domain has no endpoints")
    a, b = dom.end_params
    return (b, a) if dom.side > 0 else (a, b)


def endpoint_map(dom: SimpleDomain) -> float:
    return endpoint_pair(dom)[0]


@dataclass(frozen=True)
class CapillaryMeasure:
    interior_len: float
    boundary_len: float
    l_theta: float

    def as_dict(self):
        return {"interior_len": self.interior_len, "boundary_len": self.boundary_len, "l_theta": self.l_theta}


def wetted_length(chart: MetricChart, dom: SimpleDomain) -> float:
    if dom.state is DomainState.EMPTY:
        return 0.0
    if dom.state is DomainState.FULL:
        return float(chart.boundary_length)
    q1, q2 = endpoint_pair(dom)
    return chart.boundary_arclength(q1, q2)


def l_theta(chart: MetricChart, dom: SimpleDomain, theta: float) -> CapillaryMeasure:
    """Interior length plus ``cos(theta)`` times the wetted boundary length."""
    theta = check_theta(theta)
    if dom.state is DomainState.EMPTY:
        return CapillaryMeasure(0.0, 0.0, 0.0)
    interior = 0.0 if dom.state is DomainState.FULL else polyline_g_length(chart, dom.points)
    wet = wetted_length(chart, dom)
    return CapillaryMeasure(interior, wet, interior + math.cos(theta) * wet)


def _endpoint_frames(dom: SimpleDomain):
    """For q1 and q2: (polyline end flag, boundary param, outward arc conormal)."""
    q1, q2 = endpoint_pair(dom)
    q1_is_last = dom.side > 0
    out = []
    for q, is_last, sign in ((q1, q1_is_last, -1.0), (q2, not q1_is_last, 1.0)):
        tau = np.array([-math.sin(q), math.cos(q)])
        out.append((is_last, q, sign * tau))
    return out


def contact_cosines(chart: MetricChart, dom: SimpleDomain):
    """``<eta, nu_bar>`` at ``q1`` and ``q2`` (conformal: Euclidean angles)."""
    if dom.state is not DomainState.PROPER:
        raise NoEndpoints("contact angles need a proper domain")
    vals = []
    for is_last, _, nubar in _endpoint_frames(dom):
        eta = end_tangent(dom.points, at_end=is_last)
        vals.append(float(eta @ nubar))
    return tuple(vals)


def contact_angles(chart: MetricChart, dom: SimpleDomain):
    """Contact angles ``theta_i`` with ``<eta, nu_bar> = -cos(theta_i)``.

    ``eta`` is the outward unit conormal of the relative boundary and
    ``nu_bar`` the outward conormal of the wetted arc at the same endpoint.
    """
    return tuple(math.acos(max(-1.0, min(1.0, -c))) for c in contact_cosines(chart, dom))


@dataclass(frozen=True)
class FirstVariation:
    max_interior_H: float
    angle_defect: tuple

    def as_dict(self):
        return {"max_interior_H": self.max_interior_H, "angle_defect": list(self.angle_defect)}

    def passes(self, tol: float = 1e-5) -> bool:
        return self.max_interior_H < tol and max(self.angle_defect) < tol


def first_variation_residual(chart: MetricChart, dom: SimpleDomain, theta: float) -> FirstVariation:
    """Interior curvature and boundary angle parts of the first variation of
    the capillary functional; both vanish exactly at capillary geodesics."""
    if dom.state is not DomainState.PROPER:
        raise NoEndpoints("first variation residual needs a proper domain")
    if len(dom.points) > 2:
        kg, _ = discrete_curvature(chart, dom.points)
        hmax = float(np.max(np.abs(kg)))
    else:
        hmax = 0.0
    c = math.cos(theta)
    return FirstVariation(hmax, tuple(abs(v + c) for v in contact_cosines(chart, dom)))


# ---------------------------------------------------------------------------
# proximity
# ---------------------------------------------------------------------------

_HARMONICS = [(1, 0), (0, 1), (1, 1), (1, -1), (2, 0), (0, 2), (2, 1)]
_DIRECTIONS = [(0, 0.0), (2, 0.0), (2, 0.5 * math.pi), (4, 0.0)]


def _dictionary_values(x, y, psi):
    """Evaluate the 64 normalized test functions at samples; shape (64, n)."""
    pos = [(np.ones_like(x), 0.0)]
    for a, b in _HARMONICS:
        arg = math.pi * (a * x + b * y)
        lip = math.pi * math.hypot(a, b)
        pos.append((np.cos(arg), lip))
        pos.append((np.sin(arg), lip))
    arg = math.pi * (x + 2 * y)
    pos.append((np.cos(arg), math.pi * math.sqrt(5.0)))
    rows = []
    for pv, plip in pos:
        for m, shift in _DIRECTIONS:
            dv = np.ones_like(psi) if m == 0 else np.cos(m * psi - shift)
            rows.append(pv * dv / (1.0 + plip + m))
    return np.array(rows)


def _varifold_samples(chart, dom: SimpleDomain, mode: str, theta: Optional[float], step: float):
    xs, ys, ps, ws = [], [], [], []
    if dom.state is DomainState.PROPER:
        pts = dom.points
        mid = 0.5 * (pts[1:] + pts[:-1])
        d = np.diff(pts, axis=0)
        xs.append(mid[:, 0]); ys.append(mid[:, 1])
        ps.append(np.arctan2(d[:, 1], d[:, 0]))
        ws.append(segment_g_lengths(chart, pts))
    if mode == "capillary":
        arc = dom.boundary_arc_points(step)
        if len(arc) >= 2:
            mid = 0.5 * (arc[1:] + arc[:-1])
            d = np.diff(arc, axis=0)
            xs.append(mid[:, 0]); ys.append(mid[:, 1])
            ps.append(np.arctan2(d[:, 1], d[:, 0]))
            ws.append(math.cos(theta) * segment_g_lengths(chart, arc))
    if not xs:
        return np.zeros(0), np.zeros(0), np.zeros(0), np.zeros(0)
    return tuple(np.concatenate(v) for v in (xs, ys, ps, ws))


def f_distance(chart: MetricChart, dom_a: SimpleDomain, dom_b: SimpleDomain,
               mode: str = "interior", theta: Optional[float] = None, step: float = 1e-3) -> float:
    """Lower bound for the varifold F-distance from a fixed dictionary.

    The dictionary has 64 products of position harmonics (up to order two)
    and direction functions of the doubled angle, each scaled by
    ``1/(1 + Lipschitz bound)`` so it is a bounded-Lipschitz test function.
    ``mode='capillary'`` adds ``cos(theta)`` times the wetted arc.
    """
    if mode not in ("interior", "capillary"):
        raise ValueError(f"unknown mode {mode!r}")
    if mode == "capillary":
        check_theta(theta)
    vals = []
    for dom in (dom_a, dom_b):
        x, y, p, w = _varifold_samples(chart, dom, mode, theta, step)
        vals.append(_dictionary_values(x, y, p) @ w if len(w) else np.zeros(64))
    return float(np.max(np.abs(vals[0] - vals[1])))


def densify(pts: np.ndarray, step: float = 1e-3) -> np.ndarray:
    """Insert points so consecutive samples are at most ``step`` apart."""
    pts = np.asarray(pts, float)
    if len(pts) < 2:
        return pts
    d = np.diff(pts, axis=0)
    k = np.maximum(np.ceil(np.hypot(d[:, 0], d[:, 1]) / step).astype(int), 1)
    seg = np.repeat(np.arange(len(d)), k)
    offs = np.arange(k.sum()) - np.repeat(np.cumsum(k) - k, k)
    frac = ((offs + 1) / np.repeat(k, k))[:, None]
    return np.vstack([pts[:1], pts[seg] + frac * d[seg]])


def _directed_to_polyline(a: np.ndarray, b: np.ndarray, k: int = 4) -> float:
    """max over points of ``a`` of the distance to the polyline ``b``.

    Candidate segments are those touching the ``k`` nearest vertices of the
    (densified) polyline.
    """
    if len(b) == 1:
        return float(np.max(np.hypot(*(a - b[0]).T)))
    tree = cKDTree(b)
    k = min(k, len(b))
    _, idx = tree.query(a, k=k)
    idx = idx.reshape(len(a), -1)
    nseg = len(b) - 1
    j = np.clip(np.concatenate([idx - 1, idx], axis=1), 0, nseg - 1)
    p, d = b[j], b[j + 1] - b[j]
    w = a[:, None, :] - p
    dd = np.maximum(np.einsum("ijk,ijk->ij", d, d), 1e-300)
    s = np.clip(np.einsum("ijk,ijk->ij", w, d) / dd, 0.0, 1.0)
    r = w - s[..., None] * d
    best = np.sqrt(np.einsum("ijk,ijk->ij", r, r).min(axis=1))
    return float(best.max())


def hausdorff(curve_a, curve_b, step: float = 1e-3) -> float:
    """Symmetric Hausdorff distance between polylines in chart coordinates.

    Both curves are resampled at ``step``; distances are taken from the
    samples of one curve to the segments of the other.
    """
    a = np.asarray(curve_a, float).reshape(-1, 2)
    b = np.asarray(curve_b, float).reshape(-1, 2)
    if len(a) == 0 or len(b) == 0:
        raise EmptyCurve("hausdorff distance of an empty curve")
    a, b = densify(a, step), densify(b, step)
    return max(_directed_to_polyline(a, b), _directed_to_polyline(b, a))


def _thickness(dom: SimpleDomain, step: float) -> float:
    # how far the domain's boundary reaches away from its own wetted arc
    arc = dom.boundary_arc_points(step)
    return directed_hausdorff(densify(dom.points, step), arc)[0]


def domain_hausdorff(dom_a: SimpleDomain, dom_b: SimpleDomain, step: float = 1e-3) -> float:
    """Distance between domains used for sweepout continuity.

    Proper pairs compare their closed boundary loops. A proper domain is
    within its thickness of ``Empty`` and within its complement's thickness
    of ``Full``.
    """
    sa, sb = dom_a.state, dom_b.state
    if sa is not DomainState.PROPER and sb is not DomainState.PROPER:
        return 0.0 if sa is sb else 2.0
    if sa is not DomainState.PROPER:
        dom_a, dom_b, sa, sb = dom_b, dom_a, sb, sa
    if sb is DomainState.EMPTY:
        return _thickness(dom_a, step)
    if sb is DomainState.FULL:
        return _thickness(dom_a.complement(), step)
    return hausdorff(dom_a.boundary_loop(step), dom_b.boundary_loop(step), step)


def paired_distance_bound(dom_a: SimpleDomain, dom_b: SimpleDomain) -> Optional[float]:
    """Cheap upper bound for :func:`domain_hausdorff` between proper domains.

    Relative boundaries with the same vertex count are matched vertex by
    vertex (linear interpolation between matched points bounds the Hausdorff
    distance of the polylines); the wetted arcs are matched by linear
    interpolation of their angles. Returns ``None`` when the domains cannot
    be paired.
    """
    if not (dom_a.is_proper and dom_b.is_proper) or dom_a.side != dom_b.side:
        return None
    if dom_a.points.shape != dom_b.points.shape:
        return None
    chords = float(np.max(np.hypot(*(dom_a.points - dom_b.points).T)))
    a1, a2 = endpoint_pair(dom_a)
    b1, b2 = endpoint_pair(dom_b)
    d1 = (b1 - a1 + math.pi) % TWO_PI - math.pi
    d2 = d1 + ccw_delta(b1, b2) - ccw_delta(a1, a2)
    shift = min(math.pi, max(abs(d1), abs(d2)))
    return max(chords, 2.0 * math.sin(0.5 * shift))


# ---------------------------------------------------------------------------
# CSV serialization
# ---------------------------------------------------------------------------

def write_domain_csv(path, dom: SimpleDomain, chart: Optional[MetricChart] = None, coords: str = "xy"):
    """Write a domain as CSV with columns ``state, side`` and ``x, y`` or
    ``u, t`` (the latter for disks of revolution)."""
    cols = ("x", "y") if coords == "xy" else ("u", "t")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["state", "side", *cols])
        if dom.state is not DomainState.PROPER:
            w.writerow([dom.state.value, dom.side, "", ""])
            return
        pts = dom.points if coords == "xy" else chart.to_ut(dom.points)
        for p in pts:
            w.writerow([dom.state.value, dom.side, repr(float(p[0])), repr(float(p[1]))])


def read_domain_csv(path, chart: Optional[MetricChart] = None) -> SimpleDomain:
    with open(path, "r", newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise InvalidDomain(f"{path}: empty file")
    header, body = rows[0], rows[1:]
    if not body:
        raise InvalidDomain(f"{path}: no rows")
    state = DomainState(body[0][0])
    side = int(body[0][1])
    if state is DomainState.EMPTY:
        return SimpleDomain.empty()
    if state is DomainState.FULL:
        return SimpleDomain.full()
    pts = np.array([[float(r[2]), float(r[3])] for r in body])
    if header[2] == "u":
        if chart is None:
            raise InvalidDomain("u,t coordinates need a chart")
        pts = chart.from_ut(pts[:, 0], pts[:, 1])
    return SimpleDomain.proper(pts, side)


def read_curve_csv(path) -> np.ndarray:
    """Read a bare ``x, y`` polyline (header optional)."""
    with open(path, "r", newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r]
    start = 0
    try:
        float(rows[0][-1])
    except ValueError:
        start = 1
    hdr = rows[0] if start else []
    ix = hdr.index("x") if "x" in hdr else len(rows[start]) - 2
    return np.array([[float(r[ix]), float(r[ix + 1])] for r in rows[start:]])
