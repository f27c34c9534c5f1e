"""Render cavsim CSV artifacts as figures.

Four figure kinds cover the simulation outputs:

line   1D sweep: squeezing (dB) against the first axis, one curve per
       second-axis value when present.
map    2D sweep: color map of the minimum quadrature variance in dB with
       a color scale symmetric about 0 dB (red = anti-squeezed, blue =
       squeezed).
trace  time trace: the phase-optimized quadrature variance overlaid with
       the variance of the orthogonal phase, reconstructed from the
       moment columns at the phase of deepest squeezing.
psd    spectral density versus frequency on a log power axis.

Rendering is read-only and idempotent; SVG output is byte-stable
(fixed hash salt, no embedded date).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Tuple

import matplotlib
matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "figplots"

import matplotlib.pyplot as plt
import numpy as np

__all__ = ["PlotSpec", "RenderError", "MissingColumnError", "render", "read_columns"]

KINDS = ("line", "map", "trace", "psd")

# colormap and dB clipping defaults: diverging map centered on the shot
# noise level; the clip range adapts to the data unless db_range is given
DEFAULT_CMAP = "RdBu_r"


class RenderError(ValueError):
    """Input CSV cannot be rendered as requested."""


class MissingColumnError(RenderError):
    """A required column is absent; the message names it."""

    def __init__(self, column, path):
        super().__init__(f"column {column!r} missing from {path}")
        self.column = column


@dataclass(frozen=True)
class PlotSpec:
    """What to render: input CSVs, figure kind, axes, and output path."""

    csv_paths: Tuple[str, ...]
    kind: str
    output: str
    x_label: str = ""
    y_label: str = ""
    x_scale: str = "linear"      # linear | log
    y_scale: str = "linear"
    db_range: Optional[float] = None   # symmetric color range for maps
    title: str = ""

    def __post_init__(self):
        if self.kind not in KINDS:
            raise RenderError(f"unknown figure kind {self.kind!r}; known: {KINDS}")
        if not self.csv_paths:
            raise RenderError("at least one input CSV is required")


def read_columns(path):
    """CSV -> dict of column name to float array (NaN for blanks and
    non-numeric entries such as classification labels)."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise RenderError(f"{path} is empty") from None
        rows = [row for row in reader if row]
    if not rows:
        raise RenderError(f"{path} has a header but no data rows")
    columns = {}
    for j, name in enumerate(header):
        values = []
        for row in rows:
            token = row[j] if j < len(row) else ""
            try:
                values.append(float(token))
            except ValueError:
                values.append(math.nan)
        columns[name] = np.array(values)
    return columns


def _require(columns, names, path):
    for name in names:
        if name not in columns:
            raise MissingColumnError(name, path)


def _finish(fig, spec: PlotSpec):
    if spec.title:
        fig.axes[0].set_title(spec.title)
    fig.tight_layout()
    out = Path(spec.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out, metadata={"Date": None} if out.suffix == ".svg" else None)
    plt.close(fig)
    return out


def _render_line(spec: PlotSpec):
    fig, ax = plt.subplots(figsize=(5.0, 3.4))
    for path in spec.csv_paths:
        cols = read_columns(path)
        _require(cols, ("axis1", "var_min_db"), path)
        x = cols["axis1"]
        y = cols["var_min_db"]
        axis2 = cols.get("axis2")
        if axis2 is not None and np.any(np.isfinite(axis2)):
            for value in dict.fromkeys(axis2[np.isfinite(axis2)]):
                sel = axis2 == value
                ax.plot(x[sel], y[sel], lw=1.2, label=f"{value:g}")
            ax.legend(fontsize=8, title="axis2")
        else:
            ax.plot(x, y, lw=1.4)
    ax.axhline(0.0, color="0.6", lw=0.7, ls="--")
    ax.set_xscale(spec.x_scale)
    ax.set_xlabel(spec.x_label or "axis1")
    ax.set_ylabel(spec.y_label or "minimum quadrature variance (dB)")
    return _finish(fig, spec)


def _render_map(spec: PlotSpec):
    path = spec.csv_paths[0]
    cols = read_columns(path)
    _require(cols, ("axis1", "axis2", "var_min_db"), path)
    a1 = cols["axis1"]
    a2 = cols["axis2"]
    if not np.all(np.isfinite(a2)):
        raise RenderError(f"{path} is a one-axis sweep; use kind 'line'")
    x = np.array(list(dict.fromkeys(a1)))
    y = np.array(list(dict.fromkeys(a2)))
    grid = np.full((len(x), len(y)), np.nan)
    index_x = {v: i for i, v in enumerate(x)}
    index_y = {v: i for i, v in enumerate(y)}
    for xi, yi, db in zip(a1, a2, cols["var_min_db"]):
        grid[index_x[xi], index_y[yi]] = db
    limit = spec.db_range
    if limit is None:
        finite = grid[np.isfinite(grid)]
        limit = float(np.max(np.abs(finite))) if finite.size else 1.0
        limit = max(limit, 1e-3)
    fig, ax = plt.subplots(figsize=(5.2, 3.8))
    mesh = ax.pcolormesh(x, y, grid.T, cmap=DEFAULT_CMAP, vmin=-limit,
                         vmax=limit, shading="nearest")
    fig.colorbar(mesh, ax=ax, label="minimum quadrature variance (dB)")
    ax.set_xscale(spec.x_scale)
    ax.set_yscale(spec.y_scale)
    ax.set_xlabel(spec.x_label or "axis1")
    ax.set_ylabel(spec.y_label or "axis2")
    return _finish(fig, spec)


def _render_trace(spec: PlotSpec):
    path = spec.csv_paths[0]
    cols = read_columns(path)
    needed = ("t", "re_m_a", "im_m_a", "re_m_aa", "im_m_aa", "re_m_ada",
              "var_min", "theta_min")
    _require(cols, needed, path)
    t = cols["t"]
    m_a = cols["re_m_a"] + 1j * cols["im_m_a"]
    m_aa = cols["re_m_aa"] + 1j * cols["im_m_aa"]
    n_c = cols["re_m_ada"] - np.abs(m_a) ** 2
    c = m_aa - m_a ** 2
    # phase of deepest squeezing over the whole record, and its orthogonal
    i_min = int(np.argmin(cols["var_min"]))
    theta = cols["theta_min"][i_min]
    var_a = 2 * (n_c + np.real(np.exp(-2j * theta) * c)) + 1
    var_b = 2 * (n_c + np.real(np.exp(-2j * (theta + np.pi / 2)) * c)) + 1
    fig, ax = plt.subplots(figsize=(5.6, 3.2))
    ax.plot(t, var_a, lw=0.9, label=f"theta = {theta:.3f}")
    ax.plot(t, var_b, lw=0.9, label="orthogonal phase")
    ax.axhline(1.0, color="0.6", lw=0.7, ls="--", label="shot noise")
    ax.set_xlabel(spec.x_label or "time (1/kappa)")
    ax.set_ylabel(spec.y_label or "quadrature variance")
    ax.set_yscale(spec.y_scale)
    ax.legend(fontsize=8)
    return _finish(fig, spec)


def _render_psd(spec: PlotSpec):
    fig, ax = plt.subplots(figsize=(5.0, 3.2))
    for path in spec.csv_paths:
        cols = read_columns(path)
        _require(cols, ("frequency", "power"), path)
        sel = cols["frequency"] > 0
        ax.plot(cols["frequency"][sel], cols["power"][sel], lw=0.9,
                label=Path(path).stem)
    ax.set_xscale(spec.x_scale if spec.x_scale != "linear" else "log")
    ax.set_yscale("log")
    ax.set_xlabel(spec.x_label or "frequency (cycles per 1/kappa)")
    ax.set_ylabel(spec.y_label or "spectral density")
    if len(spec.csv_paths) > 1:
        ax.legend(fontsize=7)
    return _finish(fig, spec)


_RENDERERS = {"line": _render_line, "map": _render_map,
              "trace": _render_trace, "psd": _render_psd}


def render(spec: PlotSpec):
    """Render one figure; returns the output path.  Inputs are validated
    (and the error raised) before any file is written."""
    return _RENDERERS[spec.kind](spec)
