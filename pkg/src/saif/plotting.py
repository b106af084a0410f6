"""Deterministic SVG figures from result and trace tables.

Every function takes a list of row dicts (as read from the CSV outputs) and
an output path. Missing columns raise :class:`SchemaError`; an empty table
produces a figure with axes only.
"""
from __future__ import annotations

import csv
import math
from collections import OrderedDict

import matplotlib

matplotlib.use("Agg")
from matplotlib.figure import Figure  # noqa: E402
import numpy as np  # noqa: E402

from .exceptions import SchemaError  # noqa: E402

PLOT_KINDS = ("runtime_bars", "active_size_vs_time", "dual_value_vs_time", "heatmap_pt")
_RC = {"svg.hashsalt": "saif", "svg.fonttype": "path"}


def read_csv_rows(path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        rows = list(reader)
        header = reader.fieldnames or []
    # keep the header even when there are no rows so schemas can be checked
    return _Rows(rows, header)


class _Rows(list):
    def __init__(self, rows, header):
        super().__init__(rows)
        self.header = list(header)


def require_columns(rows, columns, what="table"):
    present = set(getattr(rows, "header", None) or (rows[0].keys() if rows else columns))
    for col in columns:
        if col not in present:
            raise SchemaError(f"{what} is missing column {col!r}")


def _save(fig, path):
    with matplotlib.rc_context(_RC):
        fig.savefig(path, format="svg", metadata={"Date": None})


def _floats(rows, col):
    return np.array([float(r[col]) for r in rows], dtype=float)


def runtime_bars(rows, path, metric: str = "time_s"):
    """Grouped bars of ``metric`` per penalty, one bar per method (log scale)."""
    require_columns(rows, ("method", "lambda", metric), "results")
    fig = Figure(figsize=(6, 4))
    ax = fig.add_subplot()
    ax.set_xlabel("lambda")
    ax.set_ylabel("running time (s)" if metric == "time_s" else metric)
    methods = list(OrderedDict.fromkeys(r["method"] for r in rows))
    lams = sorted({float(r["lambda"]) for r in rows})
    heights = {}
    for r in rows:
        heights[(r["method"], float(r["lambda"]))] = float(r[metric])
    width = 0.8 / max(len(methods), 1)
    x = np.arange(len(lams))
    for k, m in enumerate(methods):
        h = [heights.get((m, lam), 0.0) for lam in lams]
        ax.bar(x + (k - (len(methods) - 1) / 2) * width, h, width, label=m)
    ax.set_xticks(x, [f"{lam:g}" for lam in lams])
    if rows and all(float(r[metric]) > 0 for r in rows):
        ax.set_yscale("log")
    if methods:
        ax.legend()
    _save(fig, path)
    return heights


def _traces_plot(traces, path, column, ylabel):
    fig = Figure(figsize=(6, 4))
    ax = fig.add_subplot()
    ax.set_xlabel("time (s)")
    ax.set_ylabel(ylabel)
    for label, rows in traces.items():
        require_columns(rows, ("t_s", column), f"trace {label!r}")
        if rows:
            ax.step(_floats(rows, "t_s"), _floats(rows, column), where="post", label=label)
    if any(len(r) for r in traces.values()):
        ax.legend()
    _save(fig, path)


def active_size_vs_time(traces: dict, path):
    """Active-set size ``p_t`` against wall-clock time, one line per trace."""
    _traces_plot(traces, path, "p_t", "active features p_t")


def dual_value_vs_time(traces: dict, path):
    """Dual objective against wall-clock time, one line per trace."""
    _traces_plot(traces, path, "dual_value", "dual objective")


def heatmap_grid(rows, n_bins: int = 20):
    """Active fraction on a (penalty x time-bin) grid.

    ``rows`` need ``lambda_ratio`` (``lambda / lambda_max``), ``t_s``
    (seconds since that penalty's solve started) and ``p_frac``. The time
    axis is ``log10(100 t)`` split into ``n_bins`` equal bins; a cell holds
    the fraction in force at the bin center, NaN once that solve finished.

    Returns
    -------
    grid : ndarray of shape (n_lambdas, n_bins)
    ratios : ndarray of shape (n_lambdas,)
    edges : ndarray of shape (n_bins + 1,)
    """
    require_columns(rows, ("lambda_ratio", "t_s", "p_frac"), "path trace")
    groups = OrderedDict()
    for r in rows:
        groups.setdefault(float(r["lambda_ratio"]), []).append((float(r["t_s"]), float(r["p_frac"])))
    ratios = np.array(sorted(groups, reverse=True))
    times = [t for g in groups.values() for t, _ in g if t > 0]
    if times:
        lo, hi = math.log10(100 * min(times)), math.log10(100 * max(times))
        if hi <= lo:
            hi = lo + 1.0
    else:
        lo, hi = 0.0, 1.0
    edges = np.linspace(lo, hi, n_bins + 1)
    centers = 10 ** (0.5 * (edges[:-1] + edges[1:])) / 100.0
    grid = np.full((ratios.size, n_bins), np.nan)
    for i, ratio in enumerate(ratios):
        pts = sorted(groups[ratio])
        t = np.array([q[0] for q in pts])
        v = np.array([q[1] for q in pts])
        for b, c in enumerate(centers):
            if c > t[-1]:
                continue
            k = np.searchsorted(t, c, side="right") - 1
            grid[i, b] = v[max(k, 0)]
    return grid, ratios, edges


def heatmap_pt(rows, path, n_bins: int = 20):
    """Heat map of ``p_t / p`` with ``log10(lambda / lambda_max)`` on x and
    ``log10(100 t)`` on y."""
    grid, ratios, edges = heatmap_grid(rows, n_bins)
    fig = Figure(figsize=(6, 4))
    ax = fig.add_subplot()
    ax.set_xlabel("log10(lambda / lambda_max)")
    ax.set_ylabel("log10(100 t [s])")
    if ratios.size:
        x = np.log10(ratios)
        if x.size > 1:
            mid = 0.5 * (x[:-1] + x[1:])
            xe = np.concatenate([[x[0] - (mid[0] - x[0])], mid, [x[-1] + (x[-1] - mid[-1])]])
        else:
            xe = np.array([x[0] - 0.5, x[0] + 0.5])
        mesh = ax.pcolormesh(xe, edges, np.ma.masked_invalid(grid.T), shading="flat", vmin=0.0, vmax=1.0)
        fig.colorbar(mesh, ax=ax, label="p_t / p")
    _save(fig, path)
    return grid
