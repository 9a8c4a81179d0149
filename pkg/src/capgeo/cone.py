"""Disk of revolution made of a spherical cap glued to a Euclidean cone, and
the exact cone-development oracle for its geodesics.

For ``k in (0, pi)`` the profile is ``r(u) = c u`` for ``u >= u0`` with
``c = k / sqrt(4 pi^2 - k^2)``, rounded off near the axis by a circle in the
``(u, r)`` plane that is tangent to the axis and C^1-matched to the cone at
``u0 = cos(k/2) / 2``. The boundary ``u = 1`` has total geodesic curvature
``k`` and the curvature is nonnegative everywhere.

Isothermal radius: on the cone ``z = u^(1/beta)`` with ``beta = k/(2 pi)``;
on the cap ``z = tan(sigma / (2 Rc)) / lambda`` with ``sigma`` the arclength
from the tip.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import BlendFailure, DomainError, LeavesConeRegion
from .geom import TWO_PI, HitType, RevolutionDisk, Trajectory


class SphereConeProfile:
    """Closed-form radial data of the cap-and-cone profile."""

    def __init__(self, k: float):
        self.k = k = float(k)
        self.c = c = k / math.sqrt(4.0 * math.pi**2 - k * k)
        self.ell1 = ell = math.sqrt(1.0 + c * c)
        self.beta = beta = k / TWO_PI
        self.u0 = u0 = 0.5 * math.cos(0.5 * k)
        self.psi = psi = 0.5 * math.pi - math.atan(c)
        self.Rc = Rc = c * u0 * ell
        self.a = a = u0 * ell * ell
        self.s = a - Rc
        self.z0 = z0 = u0 ** (1.0 / beta)
        self.lam = lam = math.tan(0.5 * psi) / z0
        self.A = math.log(2.0 * Rc * lam)
        self.logc = math.log(c)
        self.breaks = (z0,)

    # profile in u
    def r(self, u):
        u = np.asarray(u, float)
        cap = np.sqrt(np.maximum(self.Rc**2 - (u - self.a) ** 2, 0.0))
        out = np.where(u >= self.u0, self.c * u, cap)
        return float(out) if out.ndim == 0 else out

    def dr(self, u):
        u = np.asarray(u, float)
        with np.errstate(divide="ignore", invalid="ignore"):
            rc = np.sqrt(np.maximum(self.Rc**2 - (u - self.a) ** 2, 0.0))
            cap = np.where(rc > 0, -(u - self.a) / np.where(rc > 0, rc, 1.0), np.inf)
        out = np.where(u >= self.u0, self.c, cap)
        return float(out) if out.ndim == 0 else out

    def d2r(self, u):
        u = np.asarray(u, float)
        with np.errstate(divide="ignore", invalid="ignore"):
            rc = np.sqrt(np.maximum(self.Rc**2 - (u - self.a) ** 2, 0.0))
            cap = np.where(rc > 0, -self.Rc**2 / np.where(rc > 0, rc, 1.0) ** 3, -np.inf)
        out = np.where(u >= self.u0, 0.0, cap)
        return float(out) if out.ndim == 0 else out

    # isothermal radius
    def z_of_u(self, u):
        u = np.asarray(u, float)
        cone = np.power(np.maximum(u, 1e-300), 1.0 / self.beta)
        ratio = np.clip((self.a - u) / self.Rc, -1.0, 1.0)
        sigma = self.Rc * np.arccos(ratio)
        cap = np.tan(0.5 * sigma / self.Rc) / self.lam
        out = np.where(u >= self.u0, cone, cap)
        return float(out) if out.ndim == 0 else out

    def u_of_z(self, z):
        z = np.asarray(z, float)
        sigma = 2.0 * self.Rc * np.arctan(self.lam * z)
        cap = self.a - self.Rc * np.cos(sigma / self.Rc)
        out = np.where(z >= self.z0, np.power(z, self.beta), cap)
        return float(out) if out.ndim == 0 else out

    def radial(self, z):
        z = np.asarray(z, float)
        b = self.beta
        zs = np.maximum(z, 1e-300)
        lz2 = (self.lam * z) ** 2
        cone = (self.logc + (b - 1.0) * np.log(zs), (b - 1.0) / zs, -(b - 1.0) / zs**2)
        cap = (
            self.A - np.log1p(lz2),
            -2.0 * self.lam**2 * z / (1.0 + lz2),
            -2.0 * self.lam**2 * (1.0 - lz2) / (1.0 + lz2) ** 2,
        )
        on_cone = z >= self.z0
        return tuple(np.where(on_cone, a, b_) for a, b_ in zip(cone, cap))

    def radial_scalar(self, z: float):
        if z >= self.z0:
            return self.logc + (self.beta - 1.0) * math.log(z), (self.beta - 1.0) / z
        lz = self.lam * z
        return self.A - math.log1p(lz * lz), -2.0 * self.lam**2 * z / (1.0 + lz * lz)

    def describe(self):
        return {"profile": "sphere-cone", "k": self.k, "s": self.s}


@dataclass
class SharpnessDisk:
    """Cap-and-cone disk of revolution with boundary turning ``k``."""

    k: float
    profile: SphereConeProfile
    chart: RevolutionDisk

    @property
    def c(self) -> float:
        return self.profile.c

    @property
    def u0(self) -> float:
        return self.profile.u0

    @property
    def s(self) -> float:
        return self.profile.s

    @property
    def ell1(self) -> float:
        """Slant length from the virtual apex to the boundary circle."""
        return self.profile.ell1

    @property
    def beta(self) -> float:
        return self.profile.beta

    def sector_angle(self) -> float:
        return TWO_PI * self.c / math.sqrt(1.0 + self.c**2)

    def lasso_length(self) -> float:
        return 2.0 * self.ell1 * math.sin(0.5 * self.k)

    def total_turning(self) -> float:
        from .geom import boundary_geodesic_curvature

        return boundary_geodesic_curvature(self.chart, 0.0) * self.chart.boundary_length

    def profile_checks(self, n: int = 1000) -> dict:
        u = np.linspace(self.s, 1.0, n + 1)[1:]
        return {
            "min_r": float(np.min(self.profile.r(u))),
            "min_dr": float(np.min(self.profile.dr(u))),
            "max_d2r": float(np.max(self.profile.d2r(u))),
            "r_at_s": float(self.profile.r(self.s)),
        }


def build_sharpness_disk(k: float, resolution: int = 64) -> SharpnessDisk:
    k = float(k)
    if not 0.0 < k < math.pi:
        raise DomainError(f"k={k!r} outside (0, pi)")
    prof = SphereConeProfile(k)
    # the cap circle: tangent to the axis at s, slope c at u0
    if not (0.0 < prof.s < prof.u0 and prof.Rc > 0):
        raise BlendFailure(f"no tangent circle blend for k={k!r}")
    mismatch = abs(prof.r(prof.u0 - 1e-12) - prof.c * prof.u0) + abs(
        -(prof.u0 - prof.a) / math.sqrt(prof.Rc**2 - (prof.u0 - prof.a) ** 2) - prof.c
    )
    if mismatch > 1e-9:
        raise BlendFailure(f"cap and cone do not match to first order ({mismatch:.3g})")
    chart = RevolutionDisk(prof, name=f"sharpness(k={k:.10g})", resolution=resolution)
    return SharpnessDisk(k, prof, chart)


# ---------------------------------------------------------------------------
# development oracle
# ---------------------------------------------------------------------------

@dataclass
class DevelopedShot:
    """Straight segment in the developed plane and where it stops."""

    start: complex
    direction: complex
    length: float
    hit: HitType
    closest_radius: float


def develop_shot(disk: SharpnessDisk, p: float, alpha: float) -> DevelopedShot:
    """Exact straight-line picture of the boundary shot from ``p`` at ``alpha``.

    The cone region unrolls through ``W = ell1 * w^beta``; the boundary circle
    goes to the arc of radius ``ell1`` and a full turn to the angle ``k``.
    The segment from ``W_p`` sweeps a polar angle ``2 min(alpha, pi - alpha)``,
    so it meets a rotated copy of itself (a self-intersection on the cone)
    iff that sweep exceeds ``k``.
    """
    if not 0.0 < alpha < math.pi:
        raise DomainError("launch angle must lie in (0, pi)")
    ell, beta, k = disk.ell1, disk.beta, disk.k
    om = beta * p
    e = complex(math.cos(om), math.sin(om))
    start = ell * e
    d = math.cos(alpha) * 1j * e - math.sin(alpha) * e
    s_mid = ell * math.sin(alpha)
    d0 = ell * abs(math.cos(alpha))
    if min(alpha, math.pi - alpha) > 0.5 * k:
        length = s_mid + d0 * math.tan(0.5 * k)
        hit = HitType.SELF_INTERSECTION
    else:
        length = 2.0 * s_mid
        hit = HitType.BOUNDARY
    closest = d0 if length >= s_mid else abs(start + length * d)
    return DevelopedShot(start, d, length, hit, closest)


def unroll_geodesic_oracle(disk: SharpnessDisk, p: float, alpha: float, step: float = 1e-3) -> Trajectory:
    """Exact geodesic from boundary parameter ``p`` at interior angle
    ``alpha`` via the cone development, mapped back to the chart.

    Raises :class:`LeavesConeRegion` if the segment dips into the cap.
    """
    shot = develop_shot(disk, p, alpha)
    if shot.closest_radius < disk.ell1 * disk.u0:
        raise LeavesConeRegion(
            f"shot reaches slant radius {shot.closest_radius:.6g} < {disk.ell1 * disk.u0:.6g}"
        )
    n = max(int(math.ceil(shot.length / step)), 2)
    s = np.linspace(0.0, shot.length, n + 1)
    W = shot.start + s * shot.direction
    # continuous polar angle along the segment (never passes through 0)
    ang = math.atan2(shot.start.imag, shot.start.real) + np.unwrap(np.angle(W / shot.start))
    t = ang / disk.beta
    z = (np.abs(W) / disk.ell1) ** (1.0 / disk.beta)
    pts = np.column_stack([z * np.cos(t), z * np.sin(t)])
    if shot.hit is HitType.BOUNDARY:
        pts[-1] /= math.hypot(*pts[-1])
    dir_arg = math.atan2(shot.direction.imag, shot.direction.real)

    def chart_tangent(i):
        psi = dir_arg - (disk.beta - 1.0) * t[i]
        f, _ = disk.profile.radial_scalar(float(z[i]))
        e = math.exp(-f)
        return np.array([e * math.cos(psi), e * math.sin(psi)])

    return Trajectory(
        points=pts, arclength=s, hit=shot.hit,
        start_tangent=chart_tangent(0), end_tangent=chart_tangent(-1),
    )


def oracle_lasso(disk: SharpnessDisk, p: float = 0.0):
    """The critical lasso launched at ``k/2``; exact by construction."""
    from .capillary import LassoRecord

    a = 0.5 * disk.k
    return LassoRecord(
        basepoint=p % TWO_PI, launch_angle=a, length=disk.lasso_length(),
        eq4_residual=0.0, alpha0=a, alphaL=a, closure_gap=0.0, source="development",
    )


@dataclass
class SharpnessReport:
    k: float
    epsilon: float
    theta: float
    lasso: object
    ode_lasso: Optional[object]
    all_shots_self_intersect: bool
    basepoints: list
    hits: list
    arrivals: list
    symmetry_spread: float
    oracle_ode_gap: float
    total_turning: float

    def as_dict(self) -> dict:
        def rec(r):
            return None if r is None else r.as_dict()

        return {
            "k": self.k,
            "epsilon": self.epsilon,
            "theta": self.theta,
            "lasso": rec(self.lasso),
            "ode_lasso": rec(self.ode_lasso),
            "all_shots_self_intersect": self.all_shots_self_intersect,
            "n_shots": len(self.basepoints),
            "hit_counts": {h: self.hits.count(h) for h in sorted(set(self.hits))},
            "symmetry_spread": self.symmetry_spread,
            "oracle_ode_gap": self.oracle_ode_gap,
            "total_turning": self.total_turning,
        }


def verify_sharpness(disk: SharpnessDisk, epsilon: float, n_basepoints: int = 64,
                     workers: int = 1) -> SharpnessReport:
    """Reproduce the non-existence mechanism at ``theta = k/2 + epsilon``.

    The critical lasso at ``k/2`` is taken from the development and located
    again by ODE shooting; then every basepoint is shot at ``theta``.
    """
    from .capillary import find_critical_lassos, shoot_many

    theta = 0.5 * disk.k + epsilon
    if not 0.0 < theta < 0.5 * math.pi:
        raise DomainError(f"theta={theta!r} outside (0, pi/2)")
    lasso = oracle_lasso(disk)
    window = np.linspace(0.5 * disk.k - 0.04, 0.5 * disk.k + 0.04, 9)
    found = find_critical_lassos(disk.chart, 2.0 * disk.lasso_length(), basepoints=[0.0], angles=window)
    ode_lasso = min(found, key=lambda r: abs(r.launch_angle - 0.5 * disk.k)) if found else None
    gap = float("nan") if ode_lasso is None else abs(ode_lasso.launch_angle - lasso.launch_angle)

    ps = [TWO_PI * i / n_basepoints for i in range(n_basepoints)]
    shots = shoot_many(disk.chart, [(p, theta) for p in ps], max_len=4.0 * disk.ell1, workers=workers)
    hits = [tr.hit.value for tr in shots]
    arrivals = [tr.arrival_param if tr.hit is HitType.BOUNDARY else None for tr in shots]
    lengths = np.array([tr.length for tr in shots])
    return SharpnessReport(
        k=disk.k, epsilon=epsilon, theta=theta, lasso=lasso, ode_lasso=ode_lasso,
        all_shots_self_intersect=all(h == HitType.SELF_INTERSECTION.value for h in hits),
        basepoints=ps, hits=hits, arrivals=arrivals,
        symmetry_spread=float(lengths.max() - lengths.min()),
        oracle_ode_gap=gap, total_turning=disk.total_turning(),
    )


def epsilon_scan(disk: SharpnessDisk, epsilons: Sequence[float] = (0.01, 0.05, 0.1)) -> dict:
    """Whether the single (by symmetry) shot at ``k/2 + eps`` self-intersects."""
    from .capillary import shoot_from_boundary

    out = {}
    for eps in epsilons:
        theta = 0.5 * disk.k + eps
        if not 0.0 < theta < 0.5 * math.pi:
            continue
        tr = shoot_from_boundary(disk.chart, 0.0, theta, max_len=4.0 * disk.ell1)
        out[float(eps)] = tr.hit is HitType.SELF_INTERSECTION
    return out
