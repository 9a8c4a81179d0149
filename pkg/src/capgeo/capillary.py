"""Boundary shooting for capillary geodesics and critical lassos, the
Gauss-Bonnet lasso-exclusion check, and the Morse index of capillary chords.

Shots start at the boundary point with parameter ``p`` and leave at interior
angle ``alpha`` measured from the counterclockwise boundary tangent. The
domain to the left of such a shot has contact angle ``alpha`` at its start,
so a shot at ``alpha = theta`` closes a capillary geodesic exactly when it
arrives at angle ``theta`` as well.
"""

from __future__ import annotations

import csv
import enum
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.linalg import eigh

from .curve import (
    CapillaryMeasure,
    FirstVariation,
    SimpleDomain,
    check_theta,
    first_variation_residual,
    l_theta,
    segment_g_lengths,
)
from .errors import DomainError, NoArrival, ResidualTooLarge
from .geom import (
    TWO_PI,
    HitType,
    MetricChart,
    Trajectory,
    boundary_curvature_samples,
    boundary_geodesic_curvature,
    geodesic_trace,
    min_gaussian_curvature,
)

DEFECT_ZERO = 1e-6
RESIDUAL_TOL = 1e-5
CRITICAL_TOL = 1e-5


def wrap_pi(a: float) -> float:
    """Reduce to ``(-pi, pi]``."""
    a = math.fmod(a + math.pi, TWO_PI)
    if a <= 0.0:
        a += TWO_PI
    return a - math.pi


# ---------------------------------------------------------------------------
# shooting
# ---------------------------------------------------------------------------

def launch_vector(chart: MetricChart, p: float, alpha: float) -> np.ndarray:
    c, s = math.cos(p), math.sin(p)
    f, _, _ = chart.phi_grad(c, s)
    e = math.exp(-f)
    tau = (-s, c)
    inward = (-c, -s)
    return np.array([
        e * (math.cos(alpha) * tau[0] + math.sin(alpha) * inward[0]),
        e * (math.cos(alpha) * tau[1] + math.sin(alpha) * inward[1]),
    ])


def shoot_from_boundary(chart: MetricChart, p: float, alpha: float,
                        max_len: Optional[float] = None, h: float = 1e-3) -> Trajectory:
    """Trace the geodesic leaving boundary parameter ``p`` at interior angle
    ``alpha``. On a boundary hit the trajectory carries ``arrival_param`` and
    ``arrival_angle``, the angle between the reversed arrival direction and
    the clockwise boundary tangent (equal to ``alpha`` for a flat chord)."""
    if not 0.0 < alpha < math.pi:
        raise DomainError(f"launch angle {alpha!r} outside (0, pi)")
    if max_len is None:
        max_len = 2.0 * chart.boundary_length
    p = float(p) % TWO_PI
    start = (math.cos(p), math.sin(p))
    tr = geodesic_trace(chart, start, launch_vector(chart, p, alpha), max_len, h=h)
    if tr.hit is HitType.BOUNDARY:
        q = tr.end_point
        tq = math.atan2(q[1], q[0]) % TWO_PI
        T = tr.end_tangent / math.hypot(*tr.end_tangent)
        cosang = T[0] * -math.sin(tq) + T[1] * math.cos(tq)
        tr.arrival_param = tq
        tr.arrival_angle = math.acos(max(-1.0, min(1.0, cosang)))
    return tr


def _shoot_job(args):
    chart, p, alpha, max_len = args
    return shoot_from_boundary(chart, p, alpha, max_len)


def shoot_many(chart: MetricChart, jobs: Sequence, max_len: Optional[float] = None,
               workers: int = 1) -> list:
    """Shoot ``(p, alpha)`` pairs; results are in job order for any worker count."""
    args = [(chart, float(p), float(a), max_len) for p, a in jobs]
    if workers <= 1 or len(args) < 2:
        return [_shoot_job(a) for a in args]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(_shoot_job, args, chunksize=max(1, len(args) // (4 * workers))))


def capillary_defect(chart: MetricChart, p: float, theta: float,
                     max_len: Optional[float] = None) -> float:
    """Arrival angle minus ``theta`` for the shot at ``theta`` from ``p``."""
    theta = check_theta(theta)
    tr = shoot_from_boundary(chart, p, theta, max_len)
    if tr.hit is not HitType.BOUNDARY:
        raise NoArrival(f"shot from p={p:.6g} ended with {tr.hit.value}")
    return tr.arrival_angle - theta


# ---------------------------------------------------------------------------
# capillary geodesics
# ---------------------------------------------------------------------------

@dataclass
class CapillaryGeodesic:
    """A capillary chord with its capillary side (left of the shot)."""

    domain: SimpleDomain
    theta: float
    measure: CapillaryMeasure
    residual: FirstVariation
    complement_measure: CapillaryMeasure
    basepoint: float

    def as_dict(self) -> dict:
        return {
            "basepoint": self.basepoint,
            "theta": self.theta,
            "measure": self.measure.as_dict(),
            "complement_measure": self.complement_measure.as_dict(),
            "residual": self.residual.as_dict(),
            "n_vertices": len(self.domain.points),
        }


class SearchStatus(str, enum.Enum):
    FOUND = "Found"
    S1_FAMILY = "S1Family"
    NONE_FOUND = "NoneFound"


@dataclass
class CapillarySearch:
    status: SearchStatus
    theta: float
    geodesics: list
    basepoints: list
    defects: list
    diagnostics: list = field(default_factory=list)

    @property
    def s1_family(self) -> bool:
        return self.status is SearchStatus.S1_FAMILY

    def __len__(self):
        return len(self.geodesics)

    def __iter__(self):
        return iter(self.geodesics)


def trajectory_domain(tr: Trajectory, side: int = 1) -> SimpleDomain:
    """Domain to the given side of a boundary-to-boundary trajectory."""
    pts = np.array(tr.points, dtype=float)
    seg = np.hypot(*np.diff(pts, axis=0).T)
    if len(pts) > 3 and seg[-1] < 0.5 * np.median(seg):
        pts = np.delete(pts, -2, axis=0)
    return SimpleDomain.proper(pts, side)


def capillary_geodesic_from_shot(chart: MetricChart, tr: Trajectory, theta: float, p: float) -> CapillaryGeodesic:
    dom = trajectory_domain(tr, side=1)
    return CapillaryGeodesic(
        domain=dom,
        theta=theta,
        measure=l_theta(chart, dom, theta),
        residual=first_variation_residual(chart, dom, theta),
        complement_measure=l_theta(chart, dom.complement(), theta),
        basepoint=float(p) % TWO_PI,
    )


def find_capillary_geodesics(chart: MetricChart, theta: float, grid_n: int = 32,
                             workers: int = 1, tol: float = 1e-8) -> CapillarySearch:
    """Scan the shooting defect over ``grid_n`` basepoints and close every
    sign change by bisection.

    If the defect vanishes (within ``1e-6``) at every sample the chart carries
    a rotating family of capillary chords; one representative per sample is
    returned with status ``S1Family``.
    """
    theta = check_theta(theta)
    if grid_n < 16:
        raise DomainError("grid_n must be at least 16")
    ps = [TWO_PI * i / grid_n for i in range(grid_n)]
    shots = shoot_many(chart, [(p, theta) for p in ps], workers=workers)
    defects = [tr.arrival_angle - theta if tr.hit is HitType.BOUNDARY else None for tr in shots]
    diagnostics = []
    if all(d is None for d in defects):
        hits = sorted({tr.hit.value for tr in shots})
        diagnostics.append(f"no shot returned to the boundary ({', '.join(hits)})")
        return CapillarySearch(SearchStatus.NONE_FOUND, theta, [], ps, defects, diagnostics)

    candidates = []
    if all(d is not None and abs(d) <= DEFECT_ZERO for d in defects):
        status = SearchStatus.S1_FAMILY
        candidates = list(zip(ps, shots))
    else:
        status = SearchStatus.FOUND
        for i in range(grid_n):
            j = (i + 1) % grid_n
            di, dj = defects[i], defects[j]
            if di is None or dj is None:
                continue
            if di == 0.0:
                candidates.append((ps[i], shots[i]))
                continue
            if di * dj < 0:
                lo, hi = ps[i], ps[i] + TWO_PI / grid_n
                dlo = di
                tr = None
                while hi - lo > tol:
                    mid = 0.5 * (lo + hi)
                    tr = shoot_from_boundary(chart, mid, theta)
                    if tr.hit is not HitType.BOUNDARY:
                        diagnostics.append(f"bracket at p={ps[i]:.6g} lost arrival during refinement")
                        tr = None
                        break
                    dm = tr.arrival_angle - theta
                    if (dm < 0) == (dlo < 0):
                        lo, dlo = mid, dm
                    else:
                        hi = mid
                if tr is not None:
                    pm = 0.5 * (lo + hi)
                    candidates.append((pm, shoot_from_boundary(chart, pm, theta)))

    geodesics = []
    for p, tr in candidates:
        geo = capillary_geodesic_from_shot(chart, tr, theta, p)
        if geo.residual.passes(RESIDUAL_TOL):
            geodesics.append(geo)
        else:
            diagnostics.append(
                f"candidate at p={p:.6g} rejected: H={geo.residual.max_interior_H:.3g}, "
                f"angle defects={tuple(round(v, 12) for v in geo.residual.angle_defect)}"
            )
    if not geodesics:
        status = SearchStatus.NONE_FOUND
    return CapillarySearch(status, theta, geodesics, ps, defects, diagnostics)


# ---------------------------------------------------------------------------
# lassos
# ---------------------------------------------------------------------------

@dataclass
class LassoRecord:
    basepoint: float
    launch_angle: float
    length: float
    eq4_residual: float
    alpha0: float
    alphaL: float
    closure_gap: float
    source: str = "shooting"

    @property
    def critical(self) -> bool:
        return self.eq4_residual < CRITICAL_TOL and self.closure_gap < CRITICAL_TOL

    def as_dict(self) -> dict:
        return {
            "basepoint": self.basepoint,
            "launch_angle": self.launch_angle,
            "length": self.length,
            "eq4_residual": self.eq4_residual,
            "alpha0": self.alpha0,
            "alphaL": self.alphaL,
            "closure_gap": self.closure_gap,
            "critical": self.critical,
            "source": self.source,
        }


def lasso_angles(chart: MetricChart, tr: Trajectory, p: float):
    """``(alpha0, alphaL, residual)`` of a closing trajectory.

    ``cos alpha0 = <gamma'(0), v>`` and ``cos alphaL = <gamma'(L), v>`` for a
    unit boundary tangent ``v`` oriented so that ``alpha0 + alphaL < pi``;
    the residual is ``|<gamma'(0) - gamma'(L), v>|``.
    """
    def g_cos(point, vec):
        t = math.atan2(point[1], point[0])
        f, _, _ = chart.phi_grad(float(point[0]), float(point[1]))
        return math.exp(f) * (vec[0] * -math.sin(t) + vec[1] * math.cos(t))

    c0 = max(-1.0, min(1.0, g_cos(tr.start_point, tr.start_tangent)))
    cL = max(-1.0, min(1.0, g_cos(tr.end_point, tr.end_tangent)))
    a0, aL = math.acos(c0), math.acos(cL)
    if a0 + aL >= math.pi:
        a0, aL = math.pi - a0, math.pi - aL
    return a0, aL, float(abs(c0 - cL))


def _gap(tr: Trajectory, p: float) -> Optional[float]:
    if tr.hit is not HitType.BOUNDARY:
        return None
    return wrap_pi(tr.arrival_param - p)


def _grid(n_or_values, lo, hi, endpoint_free=True):
    if np.ndim(n_or_values) == 0:
        n = int(n_or_values)
        return [lo + (hi - lo) * (j + 0.5) / n for j in range(n)]
    return [float(v) for v in n_or_values]


def find_critical_lassos(chart: MetricChart, length_bound: float, basepoints=8, angles=48,
                         workers: int = 1, tol: float = 1e-10, window: float = 0.5) -> list:
    """Scan basepoints x launch angles for shots that close up at their
    basepoint with length at most ``length_bound``.

    A bracket is an adjacent angle pair where the signed return gap changes
    sign, or where a small gap turns into a shot that never arrives. Each
    bracket is bisected in the launch angle; the closing trajectory is kept if
    it returns within ``1e-3`` and fits the bound. An empty result is
    numerical evidence only.
    """
    if not length_bound > 0:
        raise DomainError("length_bound must be positive")
    ps = _grid(basepoints, 0.0, TWO_PI)
    als = sorted(_grid(angles, 0.0, math.pi))
    shots = shoot_many(chart, [(p, a) for p in ps for a in als], max_len=length_bound, workers=workers)
    records = []
    for ip, p in enumerate(ps):
        gaps = [_gap(tr, p) for tr in shots[ip * len(als):(ip + 1) * len(als)]]
        for j in range(len(als) - 1):
            g1, g2 = gaps[j], gaps[j + 1]
            if g1 is None and g2 is None:
                continue
            if g1 is not None and g2 is not None:
                if not (g1 * g2 < 0 and max(abs(g1), abs(g2)) < window):
                    continue
                ref_sign = g1 < 0
            else:
                g = g1 if g1 is not None else g2
                if abs(g) >= window:
                    continue
                ref_sign = g < 0
            # lo keeps the side that arrives with the sign of the first sample
            lo, hi = als[j], als[j + 1]
            lo_is_ref = True
            if g1 is None:
                lo, hi = hi, lo
            best = None
            while abs(hi - lo) > tol:
                mid = 0.5 * (lo + hi)
                tr = shoot_from_boundary(chart, p, mid, length_bound)
                g = _gap(tr, p)
                if g is not None and (g < 0) == ref_sign:
                    lo, best = mid, tr
                else:
                    hi = mid
            if best is None:
                best = shoot_from_boundary(chart, p, lo, length_bound)
            if best.hit is not HitType.BOUNDARY:
                continue
            closure = float(math.hypot(*(best.end_point - best.start_point)))
            if closure >= 1e-3 or best.length > length_bound:
                continue
            a0, aL, res = lasso_angles(chart, best, p)
            records.append(LassoRecord(
                basepoint=p, launch_angle=lo, length=best.length, eq4_residual=res,
                alpha0=a0, alphaL=aL, closure_gap=closure,
            ))
    return records


def lasso_first_variation(chart: MetricChart, tr: Trajectory, X) -> float:
    """First variation of a closing trajectory's varifold along a vector
    field ``X(x, y) -> (n, 2)``: ``-int <X, H> ds + <X, gamma'(L) - gamma'(0)>``
    at the basepoint, all in the metric."""
    from .curve import discrete_curvature

    pts = tr.points
    kg, nrm = discrete_curvature(chart, pts)
    ds = segment_g_lengths(chart, pts)
    w = 0.5 * (ds[:-1] + ds[1:])
    x, y = pts[1:-1, 0], pts[1:-1, 1]
    ef = np.exp(chart.phi(x, y))
    Xv = np.asarray(X(x, y))
    # H = kappa_g times the g-unit normal exp(-phi) N; <X, H>_g = exp(phi) kappa_g X.N
    interior = float(np.sum(w * ef * kg * np.sum(Xv * nrm, axis=1)))
    p0 = tr.start_point
    Xp = np.asarray(X(np.array([p0[0]]), np.array([p0[1]])))[0]
    f0, _, _ = chart.phi_grad(float(p0[0]), float(p0[1]))
    boundary = math.exp(2 * f0) * float(Xp @ (tr.end_tangent - tr.start_tangent))
    return -interior + boundary


# ---------------------------------------------------------------------------
# hypothesis check
# ---------------------------------------------------------------------------

class StarVerdict(str, enum.Enum):
    PROVEN_BY_GB = "ProvenByGB"
    NUMERICALLY_CLEAR = "NumericallyClear"
    LASSO_FOUND = "LassoFound"


@dataclass
class StarReport:
    gb_sufficient: bool
    scan_found_lasso: bool
    verdict: StarVerdict
    min_K: float
    total_kappa: float
    length_bound: float
    lassos: list

    def as_dict(self) -> dict:
        return {
            "gb_sufficient": self.gb_sufficient,
            "scan_found_lasso": self.scan_found_lasso,
            "verdict": self.verdict.value,
            "min_K": self.min_K,
            "total_kappa": self.total_kappa,
            "length_bound": self.length_bound,
            "lassos": [r.as_dict() for r in self.lassos],
        }


def star_hypothesis_check(chart: MetricChart, theta: float, length_bound: Optional[float] = None,
                          basepoints=8, angles=48, workers: int = 1) -> StarReport:
    """Check absence of critical lassos up to ``length_bound``.

    The Gauss-Bonnet criterion (``K >= 0`` and total boundary curvature at
    least ``pi``) excludes every lasso; the shooting scan is run regardless.
    The bound defaults to twice the upper estimate of the 2-width.
    """
    theta = check_theta(theta)
    if length_bound is None:
        from .minmax import estimate_widths

        length_bound = 2.0 * estimate_widths(chart, theta, grid_n=32).w2_upper
    min_k = min_gaussian_curvature(chart)
    t, kap = boundary_curvature_samples(chart, 1024)
    total = float(np.sum(kap * chart.boundary_speed(t)) * (TWO_PI / len(t)))
    gb = bool(min_k >= -1e-9 and total >= math.pi - 1e-6)
    lassos = find_critical_lassos(chart, length_bound, basepoints, angles, workers=workers)
    critical = [r for r in lassos if r.critical]
    if critical:
        verdict = StarVerdict.LASSO_FOUND
    elif gb:
        verdict = StarVerdict.PROVEN_BY_GB
    else:
        verdict = StarVerdict.NUMERICALLY_CLEAR
    return StarReport(gb, bool(critical), verdict, min_k, total, float(length_bound), lassos)


# ---------------------------------------------------------------------------
# Morse index
# ---------------------------------------------------------------------------

@dataclass
class SpectrumReport:
    eigenvalues: np.ndarray
    index: int
    nullity: int
    zero_tol: float
    nodes: np.ndarray
    eigenfunctions: np.ndarray
    length: float

    def as_dict(self, n_values: int = 6) -> dict:
        return {
            "eigenvalues": [float(v) for v in self.eigenvalues[:n_values]],
            "index": self.index,
            "nullity": self.nullity,
            "zero_tol": self.zero_tol,
            "length": self.length,
            "n_nodes": int(len(self.nodes)),
        }


@dataclass
class StabilityForm:
    """Assembled discretization of the second variation on a chord."""

    nodes: np.ndarray
    points: np.ndarray
    stiffness: np.ndarray
    mass: np.ndarray
    form: np.ndarray
    robin: tuple
    length: float

    def evaluate(self, f) -> float:
        f = np.asarray(f, float)
        return float(f @ self.form @ f)


def assemble_stability(chart: MetricChart, geo: CapillaryGeodesic, n_nodes: int = 257) -> StabilityForm:
    """Quadratic finite elements on uniform g-arclength nodes.

    ``Q(f, f) = int (f'^2 - K f^2) ds - (kappa(p1) f(p1)^2 + kappa(p2) f(p2)^2) / sin(theta)``.
    ``n_nodes`` is rounded up to an odd count (two nodes per element plus
    one); integrals use four-point Gauss rules with ``K`` interpolated
    quadratically inside each element.
    """
    if n_nodes < 200:
        raise DomainError("the stability form needs at least 200 nodes")
    n = n_nodes + (1 - n_nodes % 2)
    pts = geo.domain.points
    cum = np.concatenate([[0.0], np.cumsum(segment_g_lengths(chart, pts))])
    L = float(cum[-1])
    s = np.linspace(0.0, L, n)
    xy = np.column_stack([np.interp(s, cum, pts[:, 0]), np.interp(s, cum, pts[:, 1])])
    xy[0], xy[-1] = pts[0], pts[-1]
    K = -np.exp(-2.0 * chart.phi(xy[:, 0], xy[:, 1])) * chart.lap_phi(xy[:, 0], xy[:, 1])
    h = 2.0 * L / (n - 1)

    xg, wg = np.polynomial.legendre.leggauss(4)
    xi = 0.5 * (xg + 1.0)
    wq = 0.5 * wg * h
    N = np.stack([2 * (xi - 0.5) * (xi - 1.0), -4 * xi * (xi - 1.0), 2 * xi * (xi - 0.5)])
    dN = np.stack([4 * xi - 3.0, 8 * xi * -1.0 + 4.0, 4 * xi - 1.0]) / h
    S_e = (dN * wq) @ dN.T
    M_e = (N * wq) @ N.T

    S = np.zeros((n, n))
    M = np.zeros((n, n))
    MK = np.zeros((n, n))
    for e in range(0, n - 1, 2):
        idx = np.array([e, e + 1, e + 2])
        Kq = K[idx] @ N
        blk = np.ix_(idx, idx)
        S[blk] += S_e
        M[blk] += M_e
        MK[blk] += (N * (wq * Kq)) @ N.T
    sin_t = math.sin(geo.theta)
    k1 = boundary_geodesic_curvature(chart, pts[0])
    k2 = boundary_geodesic_curvature(chart, pts[-1])
    A = S - MK
    A[0, 0] -= k1 / sin_t
    A[-1, -1] -= k2 / sin_t
    return StabilityForm(s, xy, S, M, A, (k1 / sin_t, k2 / sin_t), L)


def morse_index(chart: MetricChart, geo: CapillaryGeodesic, n_nodes: int = 257,
                zero_tol: float = 1e-4) -> SpectrumReport:
    """Index and nullity of the second variation of the capillary functional.

    Eigenvalues of ``Q`` relative to the ``L^2`` mass; ``|lambda|`` at most
    ``zero_tol / L^2`` counts toward the nullity.
    """
    if not geo.residual.passes(RESIDUAL_TOL):
        raise ResidualTooLarge(f"first variation residual too large: {geo.residual.as_dict()}")
    form = assemble_stability(chart, geo, n_nodes)
    vals, vecs = eigh(form.form, form.mass)
    vecs = vecs[:, :3].copy()
    for j in range(vecs.shape[1]):
        if vecs[np.argmax(np.abs(vecs[:, j])), j] < 0:
            vecs[:, j] *= -1.0
    tol = zero_tol / form.length**2
    return SpectrumReport(
        eigenvalues=vals,
        index=int(np.sum(vals < -tol)),
        nullity=int(np.sum(np.abs(vals) <= tol)),
        zero_tol=tol,
        nodes=form.nodes,
        eigenfunctions=vecs,
        length=form.length,
    )


# ---------------------------------------------------------------------------
# CSV emitters
# ---------------------------------------------------------------------------

def write_lassos_csv(path, records: Sequence[LassoRecord]):
    cols = ["basepoint", "launch_angle", "length", "eq4_residual", "alpha0", "alphaL", "closure_gap", "critical", "source"]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for r in records:
            d = r.as_dict()
            w.writerow([repr(d[c]) if isinstance(d[c], float) else d[c] for c in cols])


def write_geodesics_csv(path, geodesics: Sequence[CapillaryGeodesic]):
    cols = ["basepoint", "theta", "interior_len", "boundary_len", "l_theta", "complement_l_theta", "max_interior_H", "angle_defect_1", "angle_defect_2"]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for g in geodesics:
            m, r = g.measure, g.residual
            row = [g.basepoint, g.theta, m.interior_len, m.boundary_len, m.l_theta,
                   g.complement_measure.l_theta, r.max_interior_H, *r.angle_defect]
            w.writerow([repr(float(v)) for v in row])


def write_spectrum_csv(path, rep: SpectrumReport):
    """Node positions, eigenvalues (first rows) and the first three eigenfunctions."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["node", "s", "eigenvalue", "f1", "f2", "f3"])
        for i, s in enumerate(rep.nodes):
            ev = repr(float(rep.eigenvalues[i])) if i < len(rep.eigenvalues) else ""
            w.writerow([i, repr(float(s)), ev, *(repr(float(v)) for v in rep.eigenfunctions[i])])
