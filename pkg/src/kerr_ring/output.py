"""CSV and SVG writers shared by the CLI.

Floats are written with ``repr`` so that identical inputs give byte-identical
files; SVGs carry no timestamp and a fixed id salt.
"""
from __future__ import annotations

import csv
from pathlib import Path
from typing import Iterable, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

plt.rcParams["svg.hashsalt"] = "kerr-ring"
plt.rcParams["svg.fonttype"] = "none"


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])
    return path


def save_svg(fig, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def plot_lines(path: Path, series, xlabel: str, ylabel: str, title: str = "", markers=None) -> Path:
    """``series`` is a list of ``(label, x, y)``; ``markers`` the same, drawn as points."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for label, x, y in series:
        ax.plot(x, y, label=label)
    for label, x, y in markers or []:
        ax.plot(x, y, ".", ms=3, label=label)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    if series or markers:
        ax.legend(fontsize=7)
    fig.tight_layout()
    return save_svg(fig, path)


def plot_branches(path: Path, rows, xlabel: str) -> Path:
    """Branch diagram from :func:`kerr_ring.semiclassical.branch_rows` output."""
    fig, ax = plt.subplots(figsize=(6, 4))
    if rows:
        arr = np.array([(r[0], r[5], r[6], r[7] == "stable") for r in rows], dtype=float)
        x, na, nb, st = arr.T
        st = st.astype(bool)
        for y, colour, name in ((na, "tab:blue", "n_alpha"), (nb, "tab:red", "n_beta")):
            ax.plot(x[st], y[st], ".", color=colour, ms=3, label=f"{name} stable")
            ax.plot(x[~st], y[~st], "x", color=colour, ms=2, alpha=0.4, label=f"{name} unstable")
        ax.legend(fontsize=7)
    ax.set_xlabel(xlabel)
    ax.set_ylabel("population")
    fig.tight_layout()
    return save_svg(fig, path)


def plot_heatmap(path: Path, x, y, grid, xlabel: str, ylabel: str, label: str) -> Path:
    """``grid`` indexed ``[i_x, i_y]``."""
    fig, ax = plt.subplots(figsize=(6, 4.5))
    mesh = ax.pcolormesh(x, y, np.asarray(grid, dtype=float).T, shading="nearest")
    fig.colorbar(mesh, ax=ax, label=label)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    fig.tight_layout()
    return save_svg(fig, path)


def plot_contour(path: Path, x, y, grid, xlabel: str, ylabel: str, label: str, level: float | None = None) -> Path:
    fig, ax = plt.subplots(figsize=(6, 4.5))
    z = np.asarray(grid, dtype=float).T
    finite = np.isfinite(z)
    if finite.sum() >= 4 and len(x) > 1 and len(y) > 1 and np.ptp(z[finite]) > 0:
        cs = ax.contourf(x, y, z, levels=12)
        fig.colorbar(cs, ax=ax, label=label)
        if level is not None and z[finite].min() < level < z[finite].max():
            ax.contour(x, y, z, levels=[level], colors="w", linewidths=1.2)
    else:
        mesh = ax.pcolormesh(x, y, z, shading="nearest")
        fig.colorbar(mesh, ax=ax, label=label)
    ax.set_xscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    fig.tight_layout()
    return save_svg(fig, path)
