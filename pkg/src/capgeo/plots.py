"""Deterministic SVG figures (matplotlib is imported lazily)."""

from __future__ import annotations

import math

import numpy as np


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    matplotlib.rcParams["svg.hashsalt"] = "capgeo"
    matplotlib.rcParams["svg.fonttype"] = "none"
    import matplotlib.pyplot as plt

    return plt


def _save(fig, path):
    fig.savefig(path, format="svg", metadata={"Date": None, "Creator": None})


def developed_sector_svg(disk, path, shots):
    """Draw the developed cone sector with straight shots ``[(p, alpha, label)]``."""
    from .cone import develop_shot

    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(5, 5))
    ell = disk.ell1
    w = np.linspace(0.0, disk.k, 200)
    ax.plot(ell * np.cos(w), ell * np.sin(w), color="0.3", lw=1)
    ax.plot(disk.u0 * ell * np.cos(w), disk.u0 * ell * np.sin(w), color="0.6", lw=0.8, ls=":")
    for edge in (0.0, disk.k):
        ax.plot([0, ell * math.cos(edge)], [0, ell * math.sin(edge)], color="0.5", lw=0.8, ls="--")
    for p, alpha, label in shots:
        s = develop_shot(disk, p, alpha)
        seg = np.array([s.start, s.start + s.length * s.direction])
        ax.plot(seg.real, seg.imag, lw=1.5, label=label)
    ax.set_aspect("equal")
    ax.legend(loc="upper right", fontsize=8)
    ax.set_title(f"developed cone, sector angle k = {disk.k:.6g}")
    _save(fig, path)
    plt.close(fig)


def heatmap_svg(values, path, title=""):
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(5, 4))
    im = ax.imshow(np.asarray(values).T, origin="lower", aspect="auto", extent=(0, 1, 0, 1))
    ax.set_xlabel("s")
    ax.set_ylabel("t")
    ax.set_title(title)
    fig.colorbar(im, ax=ax)
    _save(fig, path)
    plt.close(fig)


def curves_svg(curves, path, title=""):
    """Curves in the chart disk, each ``(points, label)``."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(5, 5))
    t = np.linspace(0, 2 * math.pi, 400)
    ax.plot(np.cos(t), np.sin(t), color="0.3", lw=1)
    for pts, label in curves:
        pts = np.asarray(pts)
        ax.plot(pts[:, 0], pts[:, 1], lw=1.2, label=label)
    ax.set_aspect("equal")
    if any(label for _, label in curves):
        ax.legend(loc="upper right", fontsize=8)
    ax.set_title(title)
    _save(fig, path)
    plt.close(fig)
