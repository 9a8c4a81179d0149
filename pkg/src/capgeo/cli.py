"""Command-line front end.

Every subcommand writes ``<command>.json`` (sorted keys, no timestamps) plus
CSV tables into ``--out`` and optionally SVG figures with ``--plot``.
Exit status: 0 success, 1 configuration error, 2 domain error, 3 numerical
failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ConfigError, DomainError, NumericalError

log = logging.getLogger("capgeo")

ANCHORS = {
    "audit": "Gauss-Bonnet balance of curvature and boundary turning",
    "flow": "curve shortening flow with fixed endpoints",
    "shoot": "boundary geodesic shooting",
    "find": "stationary points of the capillary functional and their second variation",
    "lassos": "critical geodesic lassos and the Gauss-Bonnet exclusion criterion",
    "width": "min-max widths of line sweepouts and the cos(theta)|boundary| lower bound",
    "sharpness": "critical lasso and self-intersecting shots on a cone-tipped disk",
}

MIN_GRID = {"find": 16, "width": 32, "lassos": 8}


@dataclass
class RunConfig:
    command: str
    metric_file: Optional[str] = None
    theta: Optional[float] = None
    grid_n: Optional[int] = None
    tol: float = 1e-6
    output_dir: str = "."
    seed: int = 0
    workers: int = 1
    k: Optional[float] = None
    eps: float = 0.05
    bound: Optional[float] = None
    curve: Optional[str] = None
    p: float = 0.0
    alpha: float = math.pi / 2
    max_len: Optional[float] = None
    plot: bool = False

    def as_dict(self):
        return {k: v for k, v in self.__dict__.items() if k not in ("output_dir", "workers")}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--metric", dest="metric_file", help="metric definition file (key=value)")
    common.add_argument("--theta", type=float, help="contact angle in radians, (0, pi/2)")
    common.add_argument("--grid", dest="grid_n", type=int, help="grid resolution")
    common.add_argument("--tol", type=float, default=1e-6)
    common.add_argument("--out", dest="output_dir", default=".")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--workers", type=int, default=1)
    common.add_argument("--plot", action="store_true", help="also write SVG figures")

    parser = _Parser(prog="capgeo", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("audit", parents=[common], help="Gauss-Bonnet audit and convexity scan")
    p = sub.add_parser("flow", parents=[common], help="curve shortening flow on a curve CSV")
    p.add_argument("--curve", help="x,y CSV; a seeded random curve is used when omitted")
    p = sub.add_parser("shoot", parents=[common], help="trace one boundary shot")
    p.add_argument("--p", type=float, default=0.0, help="boundary parameter")
    p.add_argument("--alpha", type=float, default=math.pi / 2, help="interior launch angle")
    p.add_argument("--max-len", dest="max_len", type=float)
    sub.add_parser("find", parents=[common], help="capillary geodesics and Morse index")
    p = sub.add_parser("lassos", parents=[common], help="critical lasso scan and hypothesis check")
    p.add_argument("--bound", type=float, help="length bound (default: twice the 2-width estimate)")
    sub.add_parser("width", parents=[common], help="width estimates from line sweepouts")
    p = sub.add_parser("sharpness", parents=[common], help="cone-tipped disk reproduction")
    p.add_argument("--k", type=float, required=True, help="boundary turning in (0, pi)")
    p.add_argument("--eps", type=float, default=0.05)
    return parser


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------

def _clean(obj):
    """Make results JSON-safe: numpy scalars to Python, NaN to None."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def write_summary(cfg: RunConfig, result: dict) -> str:
    path = os.path.join(cfg.output_dir, f"{cfg.command}.json")
    doc = {"command": cfg.command, "anchor": ANCHORS[cfg.command], "config": cfg.as_dict(), "result": result}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_clean(doc), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def _chart(cfg: RunConfig):
    from .geom import FlatUnitDisk, load_metric

    if cfg.metric_file is None:
        return FlatUnitDisk()
    if not os.path.exists(cfg.metric_file):
        raise ConfigError(f"metric file {cfg.metric_file!r} not found")
    return load_metric(cfg.metric_file)


def _theta(cfg: RunConfig, default: Optional[float] = None) -> float:
    theta = cfg.theta if cfg.theta is not None else default
    if theta is None:
        raise ConfigError("--theta is required")
    if not 0.0 < theta < math.pi / 2:
        raise ConfigError(f"--theta {theta:.10g} outside (0, pi/2)")
    return theta


def _grid(cfg: RunConfig, default: int) -> int:
    g = cfg.grid_n if cfg.grid_n is not None else default
    if g < MIN_GRID.get(cfg.command, 1):
        raise ConfigError(f"--grid must be at least {MIN_GRID[cfg.command]} for {cfg.command}")
    return g


def _write_xy(path, pts):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x", "y"])
        for x, y in pts:
            w.writerow([repr(float(x)), repr(float(y))])


def random_embedded_curve(rng: np.random.Generator, n: int = 200) -> np.ndarray:
    """Chord between two random boundary points plus a small smooth bump."""
    from .curve import polyline_self_intersects

    while True:
        t1 = rng.uniform(0, 2 * math.pi)
        t2 = t1 + rng.uniform(0.6, 2 * math.pi - 0.6)
        a = np.array([math.cos(t1), math.sin(t1)])
        b = np.array([math.cos(t2), math.sin(t2)])
        u = np.linspace(0.0, 1.0, n)
        nrm = np.array([-(b - a)[1], (b - a)[0]])
        nrm /= np.linalg.norm(nrm)
        amp = rng.uniform(-0.25, 0.25) * np.linalg.norm(b - a)
        modes = rng.integers(1, 4)
        bump = amp * np.sin(math.pi * u) ** 2 * np.sin(modes * math.pi * u + rng.uniform(0, math.pi))
        pts = a + u[:, None] * (b - a) + bump[:, None] * nrm
        if np.all(np.hypot(pts[1:-1, 0], pts[1:-1, 1]) < 0.999) and not polyline_self_intersects(pts):
            return pts


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_audit(cfg: RunConfig) -> dict:
    from .geom import gauss_bonnet_audit, min_boundary_curvature

    chart = _chart(cfg)
    rep = gauss_bonnet_audit(chart)
    out = {"chart": chart.describe(), "gauss_bonnet": rep.as_dict(),
           "convexity": {"min_boundary_curvature": min_boundary_curvature(chart, 1024)}}
    prof = getattr(chart, "profile", None)
    if prof is not None and hasattr(prof, "d2r"):
        u = np.linspace(prof.s, 1.0, 1001)[1:]
        out["profile"] = {
            "min_r": float(np.min(prof.r(u))),
            "min_dr": float(np.min(prof.dr(u))),
            "max_d2r": float(np.max(prof.d2r(u))),
        }
    return out


def cmd_flow(cfg: RunConfig) -> dict:
    from .curve import hausdorff, read_curve_csv
    from .flow import csf_run

    chart = _chart(cfg)
    if cfg.curve:
        if not os.path.exists(cfg.curve):
            raise ConfigError(f"curve file {cfg.curve!r} not found")
        pts = read_curve_csv(cfg.curve)
    else:
        pts = random_embedded_curve(np.random.default_rng(cfg.seed))
    st = csf_run(chart, pts, tol=cfg.tol, trace_path=os.path.join(cfg.output_dir, "flow_trace.csv"))
    _write_xy(os.path.join(cfg.output_dir, "flow_initial.csv"), pts)
    _write_xy(os.path.join(cfg.output_dir, "flow_final.csv"), st.curve)
    if cfg.plot:
        from .plots import curves_svg

        curves_svg([(pts, "initial"), (st.curve, "final")], os.path.join(cfg.output_dir, "flow.svg"), "flow")
    return {
        "converged": st.converged,
        "steps": st.step_count,
        "time": st.time,
        "initial_length": st.length_history[0],
        "final_length": st.length,
        "max_curvature": st.max_curvature,
        "monotone": bool(np.all(np.diff(st.length_history) <= 1e-9)),
        "distance_to_chord": hausdorff(st.curve, np.array([pts[0], pts[-1]])),
    }


def cmd_shoot(cfg: RunConfig) -> dict:
    from .capillary import shoot_from_boundary

    chart = _chart(cfg)
    tr = shoot_from_boundary(chart, cfg.p, cfg.alpha, cfg.max_len)
    _write_xy(os.path.join(cfg.output_dir, "trajectory.csv"), tr.points)
    if cfg.plot:
        from .plots import curves_svg

        curves_svg([(tr.points, tr.hit.value)], os.path.join(cfg.output_dir, "shoot.svg"), "shot")
    return {
        "hit": tr.hit.value,
        "length": tr.length,
        "end_point": tr.end_point.tolist(),
        "arrival_param": tr.arrival_param,
        "arrival_angle": tr.arrival_angle,
    }


def cmd_find(cfg: RunConfig) -> dict:
    from .capillary import find_capillary_geodesics, morse_index, write_geodesics_csv, write_spectrum_csv

    chart = _chart(cfg)
    theta = _theta(cfg)
    res = find_capillary_geodesics(chart, theta, grid_n=_grid(cfg, 32), workers=cfg.workers)
    write_geodesics_csv(os.path.join(cfg.output_dir, "geodesics.csv"), res.geodesics)
    spectra = []
    for i, g in enumerate(res.geodesics):
        rep = morse_index(chart, g)
        spectra.append({"basepoint": g.basepoint, **rep.as_dict()})
        if i == 0:
            write_spectrum_csv(os.path.join(cfg.output_dir, "spectrum.csv"), rep)
    if cfg.plot and res.geodesics:
        from .plots import curves_svg

        curves_svg([(g.domain.points, "") for g in res.geodesics[:8]], os.path.join(cfg.output_dir, "find.svg"),
                   f"capillary geodesics, theta={theta:.10g}")
    indices = sorted({s["index"] for s in spectra})
    nullities = sorted({s["nullity"] for s in spectra})
    return {
        "status": res.status.value,
        "s1_family": res.s1_family,
        "theta": f"{theta:.10g}",
        "count": len(res.geodesics),
        "index": indices[0] if len(indices) == 1 else indices,
        "nullity": nullities[0] if len(nullities) == 1 else nullities,
        "geodesics": [g.as_dict() for g in res.geodesics],
        "spectra": spectra,
        "diagnostics": res.diagnostics,
    }


def cmd_lassos(cfg: RunConfig) -> dict:
    from .capillary import star_hypothesis_check, write_lassos_csv

    chart = _chart(cfg)
    theta = _theta(cfg, default=math.pi / 3)
    rep = star_hypothesis_check(chart, theta, length_bound=cfg.bound, angles=_grid(cfg, 48),
                                workers=cfg.workers)
    write_lassos_csv(os.path.join(cfg.output_dir, "lassos.csv"), rep.lassos)
    return rep.as_dict()


def cmd_width(cfg: RunConfig) -> dict:
    from .minmax import estimate_widths

    chart = _chart(cfg)
    theta = _theta(cfg)
    rep = estimate_widths(chart, theta, grid_n=_grid(cfg, 64), workers=cfg.workers)
    if cfg.plot:
        from .minmax import build_line_sweepout, sweepout_values
        from .plots import heatmap_svg

        sw = build_line_sweepout(chart, 2, _grid(cfg, 64), verify=False)
        heatmap_svg(sweepout_values(chart, sw, theta), os.path.join(cfg.output_dir, "width.svg"),
                    "capillary functional over the line sweepout")
    return rep.as_dict()


def cmd_sharpness(cfg: RunConfig) -> dict:
    from .cone import build_sharpness_disk, epsilon_scan, verify_sharpness
    from .geom import gauss_bonnet_audit

    if not 0.0 < cfg.k < math.pi:
        raise ConfigError(f"--k {cfg.k:.10g} outside (0, pi)")
    disk = build_sharpness_disk(cfg.k)
    rep = verify_sharpness(disk, cfg.eps, workers=cfg.workers)
    out = rep.as_dict()
    out["lasso_angle"] = f"{rep.lasso.launch_angle:.10g}"
    out["profile_checks"] = disk.profile_checks()
    out["epsilon_scan"] = {f"{e:.10g}": v for e, v in epsilon_scan(disk).items()}
    out["gauss_bonnet"] = gauss_bonnet_audit(disk.chart).as_dict()
    if cfg.plot:
        from .plots import developed_sector_svg

        developed_sector_svg(disk, os.path.join(cfg.output_dir, "sharpness.svg"),
                             [(0.0, 0.5 * disk.k, "critical lasso"),
                              (0.0, rep.theta, f"theta = k/2 + {cfg.eps:g}")])
    return out


COMMANDS = {
    "audit": cmd_audit,
    "flow": cmd_flow,
    "shoot": cmd_shoot,
    "find": cmd_find,
    "lassos": cmd_lassos,
    "width": cmd_width,
    "sharpness": cmd_sharpness,
}


def run(cfg: RunConfig) -> int:
    os.makedirs(cfg.output_dir, exist_ok=True)
    result = COMMANDS[cfg.command](cfg)
    path = write_summary(cfg, result)
    log.info("wrote %s", path)
    return 0


def main(argv=None) -> int:
    try:
        ns = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.INFO if ns.verbose else logging.WARNING,
                            format="%(levelname)s %(message)s")
        fields = RunConfig.__dataclass_fields__
        cfg = RunConfig(**{k: v for k, v in vars(ns).items() if k in fields})
        np.random.seed(cfg.seed)
        return run(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except DomainError as exc:
        print(f"domain error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
