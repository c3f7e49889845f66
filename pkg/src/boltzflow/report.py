"""Render diagnostic figures from a finished run directory.

Reads the delimited outputs (train_records.csv, metrics.csv, the latest
samples dump) and writes PNGs next to them under ``<run_dir>/figures/``.
"""

from __future__ import annotations

import logging
import re
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .tables import read_matrix

logger = logging.getLogger(__name__)


def _latest_samples(run_dir: Path) -> Path | None:
    best, best_step = None, -1
    for p in run_dir.glob("samples_step*.csv"):
        m = re.match(r"samples_step(\d+)\.csv", p.name)
        if m and int(m.group(1)) > best_step:
            best, best_step = p, int(m.group(1))
    return best


def _plot_records(records: np.ndarray, fig_dir: Path) -> list[Path]:
    outer, loss, ess, maxw = records[:, 0], records[:, 2], records[:, 3], records[:, 4]
    paths = []

    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(np.arange(len(loss)), loss, lw=0.7)
    ax.set_yscale("log")
    ax.set_xlabel("inner step")
    ax.set_ylabel("batch loss")
    ax.set_title("training loss")
    paths.append(fig_dir / "loss.png")
    fig.tight_layout()
    fig.savefig(paths[-1], dpi=150)
    plt.close(fig)

    fig, axes = plt.subplots(1, 2, figsize=(9, 3.5))
    axes[0].plot(outer, ess, ".", ms=2)
    axes[0].set_xlabel("outer step")
    axes[0].set_ylabel("mean ESS")
    axes[1].plot(outer, maxw, ".", ms=2)
    axes[1].set_xlabel("outer step")
    axes[1].set_ylabel("mean max weight")
    fig.suptitle("importance diagnostics")
    paths.append(fig_dir / "diagnostics.png")
    fig.tight_layout()
    fig.savefig(paths[-1], dpi=150)
    plt.close(fig)
    return paths


def _plot_metrics(metrics: np.ndarray, fig_dir: Path) -> list[Path]:
    step, nll, w2 = metrics[:, 0], metrics[:, 1], metrics[:, 2]
    fig, axes = plt.subplots(1, 2, figsize=(9, 3.5))
    axes[0].plot(step, nll, "o-")
    axes[0].set_xlabel("outer step")
    axes[0].set_ylabel("NLL")
    axes[1].plot(step, w2, "o-")
    axes[1].set_xlabel("outer step")
    axes[1].set_ylabel("W2")
    fig.suptitle("evaluation metrics")
    fig.tight_layout()
    out = fig_dir / "metrics.png"
    fig.savefig(out, dpi=150)
    plt.close(fig)
    return [out]


def _plot_samples(samples: np.ndarray, fig_dir: Path) -> list[Path]:
    fig, ax = plt.subplots(figsize=(5, 5))
    if samples.shape[1] == 2:
        ax.scatter(samples[:, 0], samples[:, 1], s=4, alpha=0.5)
        ax.set_xlabel("x_0")
        ax.set_ylabel("x_1")
        ax.set_title("generated samples")
        ax.set_aspect("equal")
    else:
        # particle systems: pairwise-distance histogram says more than coordinates
        parts = samples.reshape(samples.shape[0], -1, 2)
        iu = np.triu_indices(parts.shape[1], k=1)
        diff = parts[:, :, None, :] - parts[:, None, :, :]
        dists = np.sqrt(np.sum(diff * diff, axis=3))[:, iu[0], iu[1]].ravel()
        ax.hist(dists, bins=80, density=True)
        ax.set_xlabel("pair distance")
        ax.set_ylabel("density")
        ax.set_title("generated pair distances")
    fig.tight_layout()
    out = fig_dir / "samples.png"
    fig.savefig(out, dpi=150)
    plt.close(fig)
    return [out]


def render_run_report(run_dir) -> list[Path]:
    """Write every figure the run's CSVs support; returns the paths."""
    run_dir = Path(run_dir)
    if not run_dir.is_dir():
        raise FileNotFoundError(f"run directory {run_dir} does not exist")
    fig_dir = run_dir / "figures"
    fig_dir.mkdir(exist_ok=True)
    written: list[Path] = []

    records_path = run_dir / "train_records.csv"
    if records_path.exists():
        records = read_matrix(records_path)
        if records.shape[0]:
            written += _plot_records(records, fig_dir)
    metrics_path = run_dir / "metrics.csv"
    if metrics_path.exists():
        metrics = read_matrix(metrics_path)
        if metrics.shape[0]:
            written += _plot_metrics(metrics, fig_dir)
    samples_path = _latest_samples(run_dir)
    if samples_path is None and (run_dir / "samples.csv").exists():
        samples_path = run_dir / "samples.csv"
    if samples_path is not None:
        samples = read_matrix(samples_path)
        if samples.shape[0]:
            written += _plot_samples(samples, fig_dir)
    for p in written:
        logger.info("wrote %s", p)
    return written
