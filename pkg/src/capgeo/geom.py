"""Metric charts on the closed unit disk, curvature, geodesic tracing and
Gauss-Bonnet auditing.

Every chart is conformal: the metric is ``exp(2 phi) (dx^2 + dy^2)`` on the
closed unit disk and the boundary is the unit circle. Surfaces of revolution
are brought into this form through isothermal coordinates (see
:class:`RevolutionDisk`), so angles measured in the chart are Riemannian
angles and one geodesic integrator serves all charts.

Boundary points are addressed by their polar angle ``t`` in the chart.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import integrate, interpolate

from .errors import (
    ConfigError,
    DomainError,
    LeftChart,
    NonConvexBoundary,
    NonFiniteCurvature,
    NotOnBoundary,
    QuadratureFailure,
    StepUnderflow,
    TipSingularity,
)

TWO_PI = 2.0 * math.pi
BOUNDARY_TOL = 1e-9
TIP_RADIUS = 1e-3


class ChartKind(str, enum.Enum):
    FLAT = "FlatUnitDisk"
    CONFORMAL = "ConformalDisk"
    REVOLUTION = "RevolutionDisk"


def wrap_angle(a):
    """Reduce an angle (or array of angles) to ``[0, 2 pi)``."""
    return np.mod(a, TWO_PI) if isinstance(a, np.ndarray) else a % TWO_PI


def ccw_delta(t0, t1):
    """Counterclockwise angular distance from ``t0`` to ``t1`` in ``[0, 2 pi)``."""
    return (t1 - t0) % TWO_PI


def _bcast(val, like):
    return np.zeros(np.shape(like), dtype=float) + val


class MetricChart:
    """A Riemannian 2-disk in a conformal chart on the closed unit disk.

    Subclasses supply ``phi`` (vectorized), ``grad_phi`` (vectorized),
    ``lap_phi`` (vectorized) and ``phi_grad`` (fast scalar path used by the
    geodesic integrator). Instances are immutable after construction.
    """

    kind: ChartKind = ChartKind.CONFORMAL
    rotationally_symmetric: bool = False
    radial_breaks: tuple = ()

    def __init__(self, name: str = "", resolution: int = 64):
        self.name = name or self.kind.value
        self.resolution = int(resolution)

    # -- conformal factor -------------------------------------------------
    def phi(self, x, y):
        raise NotImplementedError

    def grad_phi(self, x, y):
        raise NotImplementedError

    def lap_phi(self, x, y):
        raise NotImplementedError

    def phi_grad(self, x: float, y: float):
        """Scalar ``(phi, phi_x, phi_y)``; the hot path of geodesic tracing."""
        gx, gy = self.grad_phi(np.asarray(x, float), np.asarray(y, float))
        return float(self.phi(np.asarray(x, float), np.asarray(y, float))), float(gx), float(gy)

    def conformal_factor(self, x, y):
        return np.exp(self.phi(x, y))

    def metric_tensor(self, p) -> np.ndarray:
        return math.exp(float(self.phi(np.asarray(p[0], float), np.asarray(p[1], float)))) ** 2 * np.eye(2)

    def norm(self, p, v) -> float:
        return math.exp(float(self.phi(np.asarray(p[0], float), np.asarray(p[1], float)))) * math.hypot(v[0], v[1])

    # -- boundary -----------------------------------------------------------
    @staticmethod
    def boundary_point(t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        return np.stack([np.cos(t), np.sin(t)], axis=-1)

    @staticmethod
    def boundary_tangent(t) -> np.ndarray:
        """Counterclockwise Euclidean unit tangent of the unit circle."""
        t = np.asarray(t, dtype=float)
        return np.stack([-np.sin(t), np.cos(t)], axis=-1)

    def boundary_speed(self, t):
        """``ds/dt`` along the boundary circle."""
        c, s = np.cos(t), np.sin(t)
        return np.exp(self.phi(c, s))

    @cached_property
    def boundary_length(self) -> float:
        n = 4096
        t = np.arange(n) * (TWO_PI / n)
        return float(np.sum(self.boundary_speed(t)) * (TWO_PI / n))

    def boundary_arclength(self, t0: float, t1: float) -> float:
        """Length of the counterclockwise boundary arc from ``t0`` to ``t1``."""
        d = ccw_delta(t0, t1)
        if d == 0.0:
            return 0.0
        val, _ = integrate.quad(
            lambda t: float(self.boundary_speed(t)), t0, t0 + d,
            epsabs=1e-13, epsrel=1e-12, limit=200,
        )
        return float(val)

    def boundary_param(self, p) -> float:
        x, y = float(p[0]), float(p[1])
        if abs(math.hypot(x, y) - 1.0) > BOUNDARY_TOL:
            raise NotOnBoundary(f"point ({x:.6g}, {y:.6g}) is not on the unit circle")
        return math.atan2(y, x) % TWO_PI

    def contains(self, p, tol: float = 1e-12) -> bool:
        return math.hypot(float(p[0]), float(p[1])) <= 1.0 + tol

    def describe(self) -> dict:
        return {"kind": self.kind.value, "name": self.name}

    def __repr__(self):
        return f"{type(self).__name__}(name={self.name!r})"


class ConformalDisk(MetricChart):
    """Metric ``exp(2 phi)(dx^2 + dy^2)`` with ``phi`` given as an expression
    in ``x``, ``y`` (``r`` is accepted as shorthand for ``sqrt(x^2+y^2)``) or
    as grid samples on ``[-1, 1]^2`` interpolated bicubically.
    """

    kind = ChartKind.CONFORMAL

    def __init__(self, phi="0", *, name: str = "", resolution: int = 64,
                 strict: bool = True, grid: Optional[tuple] = None):
        super().__init__(name=name, resolution=resolution)
        self._grid = grid
        self.phi_expr = None if grid is not None else str(phi)
        self._compile()
        if strict:
            kmin = min_boundary_curvature(self)
            if not kmin > 0.0:
                raise NonConvexBoundary(
                    f"boundary geodesic curvature reaches {kmin:.6g}; boundary must be strictly convex"
                )

    @classmethod
    def from_grid(cls, xs, ys, values, **kw) -> "ConformalDisk":
        xs = np.asarray(xs, float)
        ys = np.asarray(ys, float)
        values = np.asarray(values, float)
        if values.shape != (xs.size, ys.size):
            raise DomainError("grid values must have shape (len(xs), len(ys))")
        if xs[0] > -1.0 or xs[-1] < 1.0 or ys[0] > -1.0 or ys[-1] < 1.0:
            raise DomainError("grid must cover [-1, 1]^2")
        return cls(grid=(xs, ys, values), **kw)

    def _compile(self):
        if self._grid is not None:
            xs, ys, vals = self._grid
            spl = interpolate.RectBivariateSpline(xs, ys, vals, kx=3, ky=3)
            self._phi_v = lambda x, y: spl.ev(x, y)
            self._grad_v = lambda x, y: (spl.ev(x, y, dx=1), spl.ev(x, y, dy=1))
            self._lap_v = lambda x, y: spl.ev(x, y, dx=2) + spl.ev(x, y, dy=2)
            self._scalar = lambda x, y: (float(spl.ev(x, y)), float(spl.ev(x, y, dx=1)), float(spl.ev(x, y, dy=1)))
            return
        import sympy as sp

        x, y = sp.symbols("x y", real=True)
        try:
            expr = sp.sympify(self.phi_expr, locals={"x": x, "y": y, "r": sp.sqrt(x**2 + y**2)})
        except (sp.SympifyError, TypeError) as exc:
            raise ConfigError(f"cannot parse conformal factor {self.phi_expr!r}: {exc}") from exc
        extra = expr.free_symbols - {x, y}
        if extra:
            raise ConfigError(f"conformal factor has unknown symbols {sorted(map(str, extra))}")
        px, py = sp.diff(expr, x), sp.diff(expr, y)
        lap = sp.simplify(sp.diff(px, x) + sp.diff(py, y))
        self._sym = (expr, px, py, lap)
        rho, t = sp.symbols("rho t", positive=True)
        polar = expr.subs({x: rho * sp.cos(t), y: rho * sp.sin(t)}, simultaneous=True)
        self.rotationally_symmetric = sp.simplify(sp.diff(polar, t)) == 0
        fv = sp.lambdify((x, y), expr, "numpy")
        gv = sp.lambdify((x, y), (px, py), "numpy")
        lv = sp.lambdify((x, y), lap, "numpy")
        self._phi_v = lambda a, b: _bcast(fv(a, b), a)
        self._grad_v = lambda a, b: tuple(_bcast(g, a) for g in gv(a, b))
        self._lap_v = lambda a, b: _bcast(lv(a, b), a)
        self._scalar = sp.lambdify((x, y), (expr, px, py), "math")

    def __getstate__(self):
        state = self.__dict__.copy()
        for key in ("_phi_v", "_grad_v", "_lap_v", "_scalar", "_sym"):
            state.pop(key, None)
        return state

    def __setstate__(self, state):
        self.__dict__.update(state)
        self._compile()

    def phi(self, x, y):
        return self._phi_v(np.asarray(x, float), np.asarray(y, float))

    def grad_phi(self, x, y):
        return self._grad_v(np.asarray(x, float), np.asarray(y, float))

    def lap_phi(self, x, y):
        return self._lap_v(np.asarray(x, float), np.asarray(y, float))

    def phi_grad(self, x, y):
        f, gx, gy = self._scalar(x, y)
        return float(f), float(gx), float(gy)

    def describe(self):
        d = super().describe()
        d["phi"] = self.phi_expr if self._grid is None else "grid"
        return d


class FlatUnitDisk(ConformalDisk):
    """The Euclidean unit disk: ``K = 0``, ``kappa = 1``, ``|boundary| = 2 pi``."""

    kind = ChartKind.FLAT
    rotationally_symmetric = True

    def __init__(self, *, name: str = "", resolution: int = 64):
        MetricChart.__init__(self, name=name, resolution=resolution)
        self._grid = None
        self.phi_expr = "0"

    def _compile(self):
        pass

    def phi(self, x, y):
        return _bcast(0.0, x)

    def grad_phi(self, x, y):
        return _bcast(0.0, x), _bcast(0.0, x)

    def lap_phi(self, x, y):
        return _bcast(0.0, x)

    def phi_grad(self, x, y):
        return 0.0, 0.0, 0.0

    @property
    def boundary_length(self):
        return TWO_PI

    def boundary_arclength(self, t0, t1):
        return ccw_delta(t0, t1)


class RevolutionDisk(MetricChart):
    """Disk of revolution ``(u, r(u) cos t, r(u) sin t)``, ``u in [s, 1]``.

    The chart point for ``(u, t)`` is ``z(u) (cos t, sin t)`` where ``z`` is the
    isothermal radius, normalized to ``z(1) = 1``. ``profile`` is any object
    with the radial-profile protocol (``radial``, ``radial_scalar``, ``r``,
    ``dr``, ``d2r``, ``z_of_u``, ``u_of_z``, ``s``, ``breaks``).
    """

    kind = ChartKind.REVOLUTION
    rotationally_symmetric = True

    def __init__(self, profile, *, name: str = "", resolution: int = 64):
        super().__init__(name=name, resolution=resolution)
        self.profile = profile
        self.radial_breaks = tuple(b for b in profile.breaks if 0.0 < b < 1.0)

    def phi(self, x, y):
        z = np.hypot(x, y)
        return self.profile.radial(z)[0]

    def grad_phi(self, x, y):
        x = np.asarray(x, float)
        y = np.asarray(y, float)
        z = np.hypot(x, y)
        _, d1, _ = self.profile.radial(z)
        with np.errstate(invalid="ignore", divide="ignore"):
            fac = np.where(z > 0, d1 / np.where(z > 0, z, 1.0), 0.0)
        return fac * x, fac * y

    def lap_phi(self, x, y):
        z = np.hypot(x, y)
        _, d1, d2 = self.profile.radial(z)
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(z > 0, d2 + d1 / np.where(z > 0, z, 1.0), 2.0 * d2)

    def phi_grad(self, x, y):
        z = math.sqrt(x * x + y * y)
        f, d1 = self.profile.radial_scalar(z)
        if z == 0.0:
            return f, 0.0, 0.0
        return f, d1 * x / z, d1 * y / z

    @property
    def boundary_length(self):
        return TWO_PI * float(self.profile.r(1.0))

    def boundary_arclength(self, t0, t1):
        return float(self.profile.r(1.0)) * ccw_delta(t0, t1)

    def from_ut(self, u, t) -> np.ndarray:
        z = self.profile.z_of_u(np.asarray(u, float))
        t = np.asarray(t, float)
        return np.stack([z * np.cos(t), z * np.sin(t)], axis=-1)

    def to_ut(self, p) -> np.ndarray:
        p = np.asarray(p, float)
        z = np.hypot(p[..., 0], p[..., 1])
        t = np.mod(np.arctan2(p[..., 1], p[..., 0]), TWO_PI)
        return np.stack([self.profile.u_of_z(z), t], axis=-1)

    def curvature_at_u(self, u):
        """Profile form of the Gaussian curvature, ``-r'' / (r (1 + r'^2)^2)``."""
        u = np.asarray(u, float)
        r, dr, d2r = self.profile.r(u), self.profile.dr(u), self.profile.d2r(u)
        return -d2r / (r * (1.0 + dr**2) ** 2)

    def boundary_curvature_from_profile(self) -> float:
        r1, dr1 = float(self.profile.r(1.0)), float(self.profile.dr(1.0))
        return dr1 / (r1 * math.sqrt(1.0 + dr1 * dr1))

    def describe(self):
        d = super().describe()
        d.update(self.profile.describe() if hasattr(self.profile, "describe") else {})
        return d


class NumericProfile:
    """Radial profile built from an arbitrary ``r(u)`` on ``[s, 1]``.

    The isothermal radius is obtained from
    ``log z(u) = log(r(u)/r(1)) - int_u^1 du / (r (sqrt(1 + r'^2) + r'))``
    whose integrand stays bounded at the tip, and inverted with a cubic
    spline in ``log z``.
    """

    def __init__(self, r: Callable, dr: Callable, d2r: Callable, s: float,
                 n_table: int = 4001, expr: str = ""):
        self._r, self._dr, self._d2r = r, dr, d2r
        self.s = float(s)
        self.expr = expr
        self.breaks = ()
        xi = np.linspace(0.0, 1.0, n_table)
        u = self.s + (1.0 - self.s) * xi**2
        u[0] = self.s + (1.0 - self.s) * 1e-14
        reg = lambda v: 1.0 / (self._r(v) * (math.sqrt(1.0 + self._dr(v) ** 2) + self._dr(v)))
        pieces = np.zeros(u.size)
        for i in range(u.size - 1):
            pieces[i], _ = integrate.quad(reg, u[i], u[i + 1], epsabs=1e-14, epsrel=1e-12)
        tail = np.concatenate([np.cumsum(pieces[::-1])[::-1][:-1], [0.0]])
        r1 = self._r(1.0)
        logz = np.array([math.log(self._r(v) / r1) for v in u]) - tail
        self._logz_tab, self._u_tab = logz, u
        self._u_of_logz = interpolate.CubicSpline(logz, u)
        self._logz_of_u = interpolate.CubicSpline(u, logz)
        self.z_min = math.exp(logz[0])

    def r(self, u):
        return np.vectorize(self._r, otypes=[float])(u) if np.ndim(u) else float(self._r(float(u)))

    def dr(self, u):
        return np.vectorize(self._dr, otypes=[float])(u) if np.ndim(u) else float(self._dr(float(u)))

    def d2r(self, u):
        return np.vectorize(self._d2r, otypes=[float])(u) if np.ndim(u) else float(self._d2r(float(u)))

    def z_of_u(self, u):
        return np.exp(self._logz_of_u(u))

    def u_of_z(self, z):
        z = np.maximum(np.asarray(z, float), self.z_min)
        return self._u_of_logz(np.log(z))

    def _radial_one(self, z: float):
        zc = max(z, self.z_min)
        u = float(self._u_of_logz(math.log(zc)))
        r, dr, d2r = self._r(u), self._dr(u), self._d2r(u)
        w = 1.0 + dr * dr
        rs = dr / math.sqrt(w)
        f = math.log(r / zc)
        d1 = (rs - 1.0) / zc
        d2 = (r * d2r / (w * w) - rs + 1.0) / (zc * zc)
        if z < self.z_min:
            d1 *= z / zc
        return f, d1, d2

    def radial(self, z):
        z = np.asarray(z, float)
        out = np.array([self._radial_one(float(v)) for v in z.ravel()]).reshape(z.shape + (3,))
        return out[..., 0], out[..., 1], out[..., 2]

    def radial_scalar(self, z):
        f, d1, _ = self._radial_one(z)
        return f, d1

    def describe(self):
        return {"profile": self.expr, "s": self.s}


def profile_from_expression(expr: str, s: float) -> NumericProfile:
    import sympy as sp

    u = sp.symbols("u", real=True)
    try:
        e = sp.sympify(expr, locals={"u": u})
    except (sp.SympifyError, TypeError) as exc:
        raise ConfigError(f"cannot parse profile {expr!r}: {exc}") from exc
    if e.free_symbols - {u}:
        raise ConfigError("profile may only depend on u")
    r = sp.lambdify(u, e, "math")
    dr = sp.lambdify(u, sp.diff(e, u), "math")
    d2r = sp.lambdify(u, sp.diff(e, u, 2), "math")
    if abs(r(s)) > 1e-9:
        raise ConfigError(f"profile must vanish at s={s}")
    return NumericProfile(r, dr, d2r, s, expr=expr)


# ---------------------------------------------------------------------------
# curvature
# ---------------------------------------------------------------------------

def _as_point(p):
    x, y = float(p[0]), float(p[1])
    if math.hypot(x, y) > 1.0 + 1e-12:
        raise DomainError(f"point ({x:.6g}, {y:.6g}) lies outside the closed disk")
    return x, y


def gaussian_curvature(chart: MetricChart, p) -> float:
    """``K = -exp(-2 phi) Laplacian(phi)`` at a chart point."""
    x, y = _as_point(p)
    if chart.kind is ChartKind.REVOLUTION and math.hypot(x, y) < 1e-12:
        raise TipSingularity("curvature requested at the axis point of a disk of revolution")
    xa, ya = np.asarray(x), np.asarray(y)
    k = float(-np.exp(-2.0 * chart.phi(xa, ya)) * chart.lap_phi(xa, ya))
    if not math.isfinite(k):
        raise NonFiniteCurvature(f"non-finite curvature at ({x:.6g}, {y:.6g})")
    return k


def gaussian_curvature_stencil(chart: MetricChart, p, h: float = 1e-3) -> float:
    """Five-point-stencil Laplacian variant of :func:`gaussian_curvature`."""
    x, y = _as_point(p)
    xs = np.array([x, x + h, x - h, x, x])
    ys = np.array([y, y, y, y + h, y - h])
    f = chart.phi(xs, ys)
    lap = (f[1] + f[2] + f[3] + f[4] - 4.0 * f[0]) / (h * h)
    k = float(-math.exp(-2.0 * f[0]) * lap)
    if not math.isfinite(k):
        raise NonFiniteCurvature(f"non-finite stencil curvature at ({x:.6g}, {y:.6g})")
    return k


def boundary_geodesic_curvature(chart: MetricChart, p) -> float:
    """Geodesic curvature of the boundary circle w.r.t. the inward normal.

    ``p`` is either a boundary parameter (float) or a chart point on the
    unit circle.
    """
    if np.ndim(p) == 0:
        t = float(p)
        x, y = math.cos(t), math.sin(t)
    else:
        x, y = float(p[0]), float(p[1])
        if abs(math.hypot(x, y) - 1.0) > BOUNDARY_TOL:
            raise NotOnBoundary(f"point ({x:.6g}, {y:.6g}) is not on the boundary")
    f, gx, gy = chart.phi_grad(x, y)
    return math.exp(-f) * (1.0 + x * gx + y * gy)


def boundary_curvature_samples(chart: MetricChart, n: int = 512):
    t = np.arange(n) * (TWO_PI / n)
    c, s = np.cos(t), np.sin(t)
    gx, gy = chart.grad_phi(c, s)
    return t, np.exp(-chart.phi(c, s)) * (1.0 + c * gx + s * gy)


def min_boundary_curvature(chart: MetricChart, n: int = 512) -> float:
    return float(np.min(boundary_curvature_samples(chart, n)[1]))


def curvature_samples(chart: MetricChart, n_r: int = 64, n_t: int = 64):
    """Gaussian curvature on a polar grid (axis point excluded)."""
    r = (np.arange(1, n_r + 1) / n_r) ** 2
    for b in chart.radial_breaks:
        r = np.concatenate([r, b * np.array([0.5, 0.999, 1.001, 2.0])])
    r = np.unique(np.clip(r, 1e-6, 1.0))
    t = np.arange(n_t) * (TWO_PI / n_t)
    R, T = np.meshgrid(r, t, indexing="ij")
    X, Y = R * np.cos(T), R * np.sin(T)
    return X, Y, -np.exp(-2.0 * chart.phi(X, Y)) * chart.lap_phi(X, Y)


def min_gaussian_curvature(chart: MetricChart, n_r: int = 64, n_t: int = 64) -> float:
    return float(np.min(curvature_samples(chart, n_r, n_t)[2]))


# ---------------------------------------------------------------------------
# geodesic tracing
# ---------------------------------------------------------------------------

class HitType(str, enum.Enum):
    BOUNDARY = "BoundaryHit"
    LENGTH = "LengthExceeded"
    SELF_INTERSECTION = "SelfIntersection"


@dataclass
class Trajectory:
    """Arclength-sampled geodesic trace.

    ``start_tangent`` and ``end_tangent`` are g-unit chart vectors.
    ``crossed_segment`` is the index of the earlier segment hit on a
    self-intersection.
    """

    points: np.ndarray
    arclength: np.ndarray
    hit: HitType
    start_tangent: np.ndarray
    end_tangent: np.ndarray
    crossed_segment: Optional[int] = None
    arrival_param: Optional[float] = None
    arrival_angle: Optional[float] = None

    @property
    def length(self) -> float:
        return float(self.arclength[-1])

    @property
    def start_point(self) -> np.ndarray:
        return self.points[0]

    @property
    def end_point(self) -> np.ndarray:
        return self.points[-1]

    @property
    def self_intersects(self) -> bool:
        return self.hit is HitType.SELF_INTERSECTION


class _SegmentHash:
    """Uniform-grid bucket index of polyline segments for incremental
    self-intersection queries."""

    def __init__(self, cell: float = 0.01):
        self.cell = cell
        self.buckets: dict = {}
        self.segs: list = []

    def _cells(self, a, b):
        c = self.cell
        i0, i1 = sorted((math.floor(a[0] / c), math.floor(b[0] / c)))
        j0, j1 = sorted((math.floor(a[1] / c), math.floor(b[1] / c)))
        for i in range(i0, i1 + 1):
            for j in range(j0, j1 + 1):
                yield (i, j)

    def add(self, a, b):
        idx = len(self.segs)
        self.segs.append((a, b))
        for key in self._cells(a, b):
            self.buckets.setdefault(key, []).append(idx)

    def query(self, a, b, exclude_last: int = 1):
        """Earliest (by index) stored segment properly crossed by ``a -> b``."""
        limit = len(self.segs) - exclude_last
        found = None
        seen = set()
        for key in self._cells(a, b):
            for idx in self.buckets.get(key, ()):
                if idx >= limit or idx in seen:
                    continue
                seen.add(idx)
                c, d = self.segs[idx]
                if segments_cross(a, b, c, d):
                    if found is None or idx < found:
                        found = idx
        return found


def _orient(a, b, c):
    return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])


def segments_cross(a, b, c, d, tol: float = 1e-14) -> bool:
    """True if closed segments ``ab`` and ``cd`` meet; ``tol`` is a distance."""
    ta = tol * math.hypot(b[0] - a[0], b[1] - a[1])
    tc = tol * math.hypot(d[0] - c[0], d[1] - c[1])
    o1, o2 = _orient(a, b, c), _orient(a, b, d)
    o3, o4 = _orient(c, d, a), _orient(c, d, b)
    if ((o1 > ta and o2 < -ta) or (o1 < -ta and o2 > ta)) and (
        (o3 > tc and o4 < -tc) or (o3 < -tc and o4 > tc)
    ):
        return True

    def on_seg(p, q, r):
        return (min(p[0], q[0]) - tol <= r[0] <= max(p[0], q[0]) + tol
                and min(p[1], q[1]) - tol <= r[1] <= max(p[1], q[1]) + tol)

    # touching and collinear configurations
    return ((abs(o1) <= ta and on_seg(a, b, c)) or (abs(o2) <= ta and on_seg(a, b, d))
            or (abs(o3) <= tc and on_seg(c, d, a)) or (abs(o4) <= tc and on_seg(c, d, b)))


def _rhs(chart, x, y, psi):
    f, gx, gy = chart.phi_grad(x, y)
    e = math.exp(-f)
    c, s = math.cos(psi), math.sin(psi)
    return e * c, e * s, e * (gy * c - gx * s)


def _rk4(chart, x, y, psi, h):
    k1 = _rhs(chart, x, y, psi)
    k2 = _rhs(chart, x + 0.5 * h * k1[0], y + 0.5 * h * k1[1], psi + 0.5 * h * k1[2])
    k3 = _rhs(chart, x + 0.5 * h * k2[0], y + 0.5 * h * k2[1], psi + 0.5 * h * k2[2])
    k4 = _rhs(chart, x + h * k3[0], y + h * k3[1], psi + h * k3[2])
    h6 = h / 6.0
    return (
        x + h6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0]),
        y + h6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1]),
        psi + h6 * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2]),
    )


def _bisect_step(chart, state, h, outside, tol=1e-13):
    """Smallest sub-step in ``(0, h]`` after which ``outside`` holds."""
    lo, hi = 0.0, h
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if outside(_rk4(chart, *state, mid)):
            hi = mid
        else:
            lo = mid
    return hi


def geodesic_trace(chart: MetricChart, p, v, max_len: float, h: float = 1e-3,
                   self_intersection: bool = True) -> Trajectory:
    """Integrate the geodesic from chart point ``p`` with g-unit velocity ``v``.

    The state is ``(x, y, psi)`` with ``psi`` the chart direction angle; in a
    conformal chart the unit-speed geodesic equations reduce to
    ``x' = e^-phi cos psi``, ``y' = e^-phi sin psi``,
    ``psi' = e^-phi (phi_y cos psi - phi_x sin psi)``, which keeps the speed
    exactly one. Fixed-step RK4; boundary exit and self-crossing are located
    by bisection on the final step.
    """
    if not max_len > 0:
        raise DomainError("max_len must be positive")
    if not 0 < h <= 1e-3 or h < 1e-12:
        raise StepUnderflow(f"step {h} outside (1e-12, 1e-3]")
    x, y = float(p[0]), float(p[1])
    if x * x + y * y > 1.0 + 1e-12:
        raise DomainError("start point outside the disk")
    f0, _, _ = chart.phi_grad(x, y)
    speed = math.exp(f0) * math.hypot(float(v[0]), float(v[1]))
    if abs(speed - 1.0) > 1e-12:
        raise DomainError(f"|v|_g = {speed!r}, expected 1")
    psi = math.atan2(float(v[1]), float(v[0]))
    start_tangent = np.array([float(v[0]), float(v[1])])

    pts = [(x, y)]
    arc = [0.0]
    index = _SegmentHash() if self_intersection else None
    s = 0.0
    hit = HitType.LENGTH
    crossed = None
    state = (x, y, psi)
    nsteps = 0
    while True:
        step = min(h, max_len - s)
        if step <= 0.0:
            break
        new = _rk4(chart, *state, step)
        nsteps += 1
        if not all(map(math.isfinite, new)) or new[0] ** 2 + new[1] ** 2 > 4.0:
            raise LeftChart(f"integration left the chart at arclength {s:.6g}")
        event = None
        if new[0] ** 2 + new[1] ** 2 > 1.0:
            ds = _bisect_step(chart, state, step, lambda st: st[0] ** 2 + st[1] ** 2 > 1.0)
            new = _rk4(chart, *state, ds)
            rr = math.hypot(new[0], new[1])
            new = (new[0] / rr, new[1] / rr, new[2])
            step = ds
            event = HitType.BOUNDARY
        if index is not None:
            a = (state[0], state[1])
            idx = index.query(a, (new[0], new[1]))
            if idx is not None:
                c, d = index.segs[idx]

                def crossed_side(st, c=c, d=d, sa=_orient(c, d, a)):
                    o = _orient(c, d, (st[0], st[1]))
                    return o == 0.0 or (o > 0) != (sa > 0)

                ds = _bisect_step(chart, state, step, crossed_side)
                new = _rk4(chart, *state, ds)
                step = ds
                event = HitType.SELF_INTERSECTION
                crossed = idx
            else:
                index.add(a, (new[0], new[1]))
        s += step
        pts.append((new[0], new[1]))
        arc.append(s)
        state = new
        if event is not None:
            hit = event
            break
        if s >= max_len:
            break
    f1, _, _ = chart.phi_grad(state[0], state[1])
    e = math.exp(-f1)
    end_tangent = np.array([e * math.cos(state[2]), e * math.sin(state[2])])
    return Trajectory(
        points=np.array(pts), arclength=np.array(arc), hit=hit,
        start_tangent=start_tangent, end_tangent=end_tangent, crossed_segment=crossed,
    )


# ---------------------------------------------------------------------------
# Gauss-Bonnet audit
# ---------------------------------------------------------------------------

@dataclass
class GaussBonnetReport:
    total_K: float
    total_kappa: float
    residual: float
    tip_mass: float
    tip_mass_recovered: float
    error_estimate: float
    levels: int
    min_K: float
    min_kappa: float

    def as_dict(self):
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def _radial_panels(chart: MetricChart):
    edges = {0.0, TIP_RADIUS, 1.0}
    edges.update(b for b in chart.radial_breaks if 0 < b < 1)
    # geometric annuli toward the axis so the tip region is resolved
    for j in range(1, 6):
        edges.add(TIP_RADIUS * 10.0 ** (-j))
    for b in list(edges):
        if 0 < b < 1:
            for f in (0.5, 2.0, 4.0):
                if b * f < 1.0:
                    edges.add(b * f)
    return np.array(sorted(edges))


def _integrate_K(chart, n_r: int, n_t: int, r_max: float = 1.0, r_min: float = 0.0):
    xg, wg = np.polynomial.legendre.leggauss(n_r)
    edges = _radial_panels(chart)
    edges = edges[(edges >= r_min) & (edges <= r_max)]
    edges = np.unique(np.concatenate([[r_min, r_max], edges]))
    t = np.arange(n_t) * (TWO_PI / n_t)
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        r = 0.5 * (b - a) * xg + 0.5 * (a + b)
        w = 0.5 * (b - a) * wg
        R, T = np.meshgrid(r, t, indexing="ij")
        integrand = -chart.lap_phi(R * np.cos(T), R * np.sin(T)) * R
        total += float(np.sum(w[:, None] * integrand) * (TWO_PI / n_t))
    return total


def _integrate_kappa(chart, n_t: int):
    t = np.arange(n_t) * (TWO_PI / n_t)
    c, s = np.cos(t), np.sin(t)
    gx, gy = chart.grad_phi(c, s)
    return float(np.sum(1.0 + c * gx + s * gy) * (TWO_PI / n_t))


def gauss_bonnet_audit(chart: MetricChart, n_r: int = 8, n_t: int = 32,
                       max_levels: int = 7, tol: float = 1e-11) -> GaussBonnetReport:
    """Quadrature of ``int K dA`` and ``int kappa ds``; residual against ``2 pi``.

    ``K dA = -Laplacian(phi) dx dy`` and ``kappa ds = (1 + d_r phi) dt`` in a
    conformal chart. Gauss-Legendre panels in the radius (split at the
    chart's curvature breaks and refined geometrically toward the axis) times
    the trapezoidal rule in angle; both are doubled until successive totals
    agree to ``tol``.
    """
    prev = None
    history = []
    for level in range(max_levels):
        nr, nt = n_r * 2**level, n_t * 2**level
        tk = _integrate_K(chart, nr, nt)
        tb = _integrate_kappa(chart, nt)
        if not (math.isfinite(tk) and math.isfinite(tb)):
            raise QuadratureFailure("non-finite quadrature value")
        if prev is not None:
            err = abs(tk - prev[0]) + abs(tb - prev[1])
            history.append(err)
            if err < tol:
                break
            if len(history) >= 3 and history[-1] >= history[-3] and err > 1e-6:
                raise QuadratureFailure(f"refinement stalled, change {err:.3g}")
        prev = (tk, tb)
    else:
        if history and history[-1] > 1e-6:
            raise QuadratureFailure(f"no convergence, last change {history[-1]:.3g}")
    tip = _integrate_K(chart, nr, nt, r_max=TIP_RADIUS)
    outside = _integrate_K(chart, nr, nt, r_min=TIP_RADIUS)
    _, kap = boundary_curvature_samples(chart, 512)
    return GaussBonnetReport(
        total_K=tk,
        total_kappa=tb,
        residual=abs(tk + tb - TWO_PI),
        tip_mass=tip,
        tip_mass_recovered=TWO_PI - tb - outside,
        error_estimate=history[-1] if history else float("nan"),
        levels=level + 1,
        min_K=min_gaussian_curvature(chart),
        min_kappa=float(kap.min()),
    )


# ---------------------------------------------------------------------------
# metric definition files
# ---------------------------------------------------------------------------

METRIC_KEYS = ("kind", "phi", "profile", "s", "k", "resolution", "name")


def parse_metric_text(text: str) -> dict:
    """Parse the ``key=value`` metric format into a dict of strings."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {raw!r}")
        key, val = (part.strip() for part in line.split("=", 1))
        key = key.lower()
        if key not in METRIC_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if len(val) >= 2 and val[0] == val[-1] and val[0] in "\"'":
            val = val[1:-1]
        out[key] = val
    if "kind" not in out:
        raise ConfigError("metric definition needs kind=")
    return out


def chart_from_mapping(entry: dict) -> MetricChart:
    kind = entry["kind"].strip().lower()
    resolution = int(entry.get("resolution", 64))
    name = entry.get("name", "")
    try:
        if kind in ("flat", "flatunitdisk"):
            return FlatUnitDisk(name=name, resolution=resolution)
        if kind in ("conformal", "conformaldisk"):
            return ConformalDisk(entry.get("phi", "0"), name=name, resolution=resolution)
        if kind in ("revolution", "revolutiondisk", "sharpness"):
            if "k" in entry:
                from .cone import build_sharpness_disk

                return build_sharpness_disk(float(entry["k"])).chart
            if "profile" not in entry or "s" not in entry:
                raise ConfigError("revolution metric needs k= or profile= and s=")
            prof = profile_from_expression(entry["profile"], float(entry["s"]))
            return RevolutionDisk(prof, name=name, resolution=resolution)
    except ValueError as exc:
        if isinstance(exc, DomainError):
            raise
        raise ConfigError(str(exc)) from exc
    raise ConfigError(f"unknown metric kind {entry['kind']!r}")


def load_metric(path) -> MetricChart:
    with open(path, "r", encoding="utf-8") as fh:
        return chart_from_mapping(parse_metric_text(fh.read()))
