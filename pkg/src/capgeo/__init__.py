"""Numerics for capillary geodesics on Riemannian disks."""

from .errors import CapgeoError, ConfigError, DomainError, NumericalError
from .geom import (
    ConformalDisk,
    FlatUnitDisk,
    RevolutionDisk,
    gauss_bonnet_audit,
    geodesic_trace,
    load_metric,
)
from .curve import SimpleDomain, hausdorff, l_theta
from .flow import csf_run
from .capillary import (
    find_capillary_geodesics,
    find_critical_lassos,
    morse_index,
    shoot_from_boundary,
    star_hypothesis_check,
)
from .minmax import build_line_sweepout, estimate_widths
from .cone import build_sharpness_disk, verify_sharpness

__version__ = "0.1.0"

__all__ = [
    "CapgeoError", "ConfigError", "DomainError", "NumericalError",
    "ConformalDisk", "FlatUnitDisk", "RevolutionDisk", "gauss_bonnet_audit", "geodesic_trace", "load_metric",
    "SimpleDomain", "hausdorff", "l_theta", "csf_run",
    "find_capillary_geodesics", "find_critical_lassos", "morse_index", "shoot_from_boundary",
    "star_hypothesis_check", "build_line_sweepout", "estimate_widths",
    "build_sharpness_disk", "verify_sharpness",
]
