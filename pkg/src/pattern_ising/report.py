"""Delimited result files, run manifests and matplotlib figures."""

from __future__ import annotations

import csv
import json
import os
import platform

import numpy as np

from . import __version__

CSV_COLUMNS = ("beta", "d", "u", "v", "value", "method")


def write_csv(path, rows) -> None:
    """Rows are dicts with the CSV_COLUMNS keys; floats use repr precision."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in rows:
            w.writerow([repr(float(r["beta"])), int(r["d"]), int(r["u"]), int(r["v"]),
                        "" if r["value"] is None else repr(float(r["value"])), r["method"]])


def write_json(path, payload) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=1, sort_keys=True)
        fh.write("\n")


def manifest(command: str, config: dict, fingerprint: str | None, outputs) -> dict:
    return {"command": command, "config": config, "pattern_fingerprint": fingerprint,
            "version": __version__, "numpy": np.__version__,
            "python": platform.python_version(),
            "outputs": sorted(os.path.basename(str(o)) for o in outputs)}


def _pyplot():
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    plt.rcParams.update({"svg.hashsalt": "pattern-ising", "font.size": 9,
                         "axes.labelsize": 10, "legend.fontsize": 8,
                         "lines.linewidth": 1.2, "lines.markersize": 4,
                         "figure.figsize": [4.5, 3.2]})
    return plt


def _save(fig, path) -> None:
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})


def plot_correlation_decay(path, rows, title: str | None = None) -> None:
    """Semilog plot of the largest correlation at each distance, one curve per beta."""
    plt = _pyplot()
    fig, ax = plt.subplots()
    betas = sorted({float(r["beta"]) for r in rows})
    for beta in betas:
        best = {}
        for r in rows:
            if float(r["beta"]) == beta and r["value"] is not None and r["d"] > 0 and r["value"] > 0:
                best[r["d"]] = max(best.get(r["d"], 0.0), r["value"])
        if best:
            ds = sorted(best)
            ax.semilogy(ds, [best[d] for d in ds], "o-", label=rf"$\beta={beta:g}$")
    ax.set_xlabel("graph distance")
    ax.set_ylabel(r"$\langle\sigma_u\sigma_v\rangle$")
    if title:
        ax.set_title(title)
    ax.legend(frameon=False)
    _save(fig, path)
    plt.close(fig)


def plot_correlation_vs_beta(path, rows, title: str | None = None) -> None:
    """Correlation against beta, one curve per (u, v) pair."""
    plt = _pyplot()
    fig, ax = plt.subplots()
    pairs = sorted({(int(r["u"]), int(r["v"])) for r in rows})
    for u, v in pairs:
        pts = sorted((float(r["beta"]), r["value"]) for r in rows
                     if int(r["u"]) == u and int(r["v"]) == v and r["value"] is not None)
        if pts:
            b, val = zip(*pts)
            ax.plot(b, val, "o-", label=f"({u}, {v})")
    ax.axvline(1.0, color="0.6", lw=0.8, ls="--")
    ax.set_xlabel(r"$\beta$")
    ax.set_ylabel(r"$\langle\sigma_u\sigma_v\rangle$")
    if title:
        ax.set_title(title)
    if len(pairs) <= 8:
        ax.legend(frameon=False)
    _save(fig, path)
    plt.close(fig)
