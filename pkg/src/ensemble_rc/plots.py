"""Static figures rendered from the CSV files of a run directory."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .errors import InvalidArgumentError  # noqa: E402
from .io import read_csv  # noqa: E402


class PlotInputError(InvalidArgumentError):
    """A CSV is empty or lacks the columns a plot needs."""


def _table(path, need):
    header, rows = read_csv(path)
    if not header or not rows:
        raise PlotInputError(f"{path.name} is empty")
    missing = [c for c in need if c not in header]
    if missing:
        raise PlotInputError(f"{path.name} lacks columns {missing}")
    return header, rows


def _col(header, rows, name, skip_total=True):
    i = header.index(name)
    vals = [r[i] for r in rows if not (skip_total and r[0] == "total")]
    return np.array([float(v) if v not in ("", "nan") else np.nan for v in vals])


def memory_curve(path, out):
    header, rows = _table(path, ["tau"])
    taus = _col(header, rows, "tau")
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for name in header[1:]:
        if name.endswith("_raw"):
            continue
        ax.plot(taus, _col(header, rows, name), marker="o", ms=3, label=name)
    ax.set_xlabel("delay tau")
    ax.set_ylabel("M_tau")
    ax.legend()
    fig.tight_layout()
    fig.savefig(out, dpi=120)
    plt.close(fig)


def capacity_report(path, out):
    header, rows = _table(path, ["degree", "ipc", "tipc"])
    par = header[0]
    pv = _col(header, rows, par)
    deg = _col(header, rows, "degree").astype(int)
    ipc = _col(header, rows, "ipc")
    tipc = _col(header, rows, "tipc")
    params = sorted(set(pv))
    fig, ax = plt.subplots(figsize=(5, 3.5))
    bottom = np.zeros(len(params))
    for d in sorted(set(deg)):
        for label, vals in (("IPC", ipc), ("TIPC", tipc)):
            h = np.array([vals[(pv == p) & (deg == d)].sum() for p in params])
            if not h.any():
                continue
            ax.bar(range(len(params)), h, bottom=bottom, label=f"{label} d={d}")
            bottom += h
    rank = _col(header, rows, "rank") if "rank" in header else None
    if rank is not None:
        ax.plot(range(len(params)), [rank[pv == p][0] for p in params], "k_", ms=30, label="rank")
    ax.set_xticks(range(len(params)), [f"{p:g}" for p in params])
    ax.set_xlabel(par)
    ax.set_ylabel("capacity")
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(out, dpi=120)
    plt.close(fig)


def _xy(path, out, x, ys, logx=False, xlabel=None, ylabel=None):
    header, rows = _table(path, [x] + ys)
    fig, ax = plt.subplots(figsize=(5, 3.5))
    xv = _col(header, rows, x)
    for y in ys:
        ax.plot(xv, _col(header, rows, y), marker="o", label=y)
    if logx:
        ax.set_xscale("log")
    ax.set_xlabel(xlabel or x)
    ax.set_ylabel(ylabel or "")
    ax.legend()
    fig.tight_layout()
    fig.savefig(out, dpi=120)
    plt.close(fig)


def scan(path, out):
    header, rows = _table(path, ["lambda"])
    par = header[0]
    pv = _col(header, rows, par)
    lam = _col(header, rows, "lambda")
    fig, ax = plt.subplots(figsize=(5, 3.5))
    xs = [c for c in header if c.startswith("x")]
    for c in xs:
        ax.plot(pv, _col(header, rows, c), "k.", ms=1)
    ax2 = ax.twinx()
    ax2.plot(pv, lam, "r-o", ms=3)
    ax2.axhline(0, color="r", lw=0.5)
    ax.set_xlabel(par)
    ax.set_ylabel("x0 samples")
    ax2.set_ylabel("lambda_top", color="r")
    fig.tight_layout()
    fig.savefig(out, dpi=120)
    plt.close(fig)


def desync(path, out):
    header, rows = _table(path, ["case"])
    mf = [c for c in header if c.startswith("mf_")]
    if not mf:
        raise PlotInputError(f"{path.name} lacks mf_ columns")
    fig, ax = plt.subplots(figsize=(5, 3.5))
    taus = [int(c[3:]) for c in mf]
    for r in rows:
        ax.plot(taus, [float(r[header.index(c)]) for c in mf], marker="o", label=r[0])
    ax.set_xlabel("delay tau")
    ax.set_ylabel("M_tau")
    ax.legend()
    fig.tight_layout()
    fig.savefig(out, dpi=120)
    plt.close(fig)


RENDERERS = {
    "memory_curve.csv": ("mf.png", memory_curve),
    "capacity_report.csv": ("capacity.png", capacity_report),
    "mc_vs_L.csv": ("mc_vs_L.png",
                    lambda p, o: _xy(p, o, "L", ["mc", "mc_noise_free_single"], True, ylabel="MC")),
    "narma.csv": ("narma.png",
                  lambda p, o: _xy(p, o, "rho", ["nmse_noise_free", "nmse_noisy", "nmse_erc"],
                                   ylabel="NMSE")),
    "lyapunov_scan_input.csv": ("lyapunov_scan_input.png", scan),
    "lyapunov_scan_free.csv": ("lyapunov_scan_free.png", scan),
    "desync.csv": ("desync.png", desync),
}


def emit_plots(directory):
    """Render every known CSV in ``directory``; returns the written image paths."""
    directory = Path(directory)
    if not directory.is_dir():
        raise FileNotFoundError(f"no such directory: {directory}")
    written = []
    for name, (img, fn) in RENDERERS.items():
        path = directory / name
        if path.exists():
            fn(path, directory / img)
            written.append(directory / img)
    if not written:
        raise PlotInputError(f"no plottable CSV files in {directory}")
    return written
