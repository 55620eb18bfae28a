"""`plot <kind> <in.csv> <out.png>`: figures from the solver's CSV artifacts.

Kinds and their expected inputs:
  heatmap      solution.csv  (header x1,...,xn,u1,...,uN; n in {2, 3})
  slice        solution.csv  (same header; profile along the x1 axis)
  convergence  history.csv   (header iter,delta_norm2,ratio)
  region       sweep.csv     (header R,gamma,delta,eta,verdict,binding_constraint)

The CSV headers are the whole contract with the solver; anything that does
not match exactly exits 1 naming the offending header.
"""

from __future__ import annotations

import argparse
import csv
import re
import sys
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)
import numpy as np  # noqa: E402

KINDS = ("heatmap", "slice", "convergence", "region")

HISTORY_HEADER = ["iter", "delta_norm2", "ratio"]
SWEEP_HEADER = ["R", "gamma", "delta", "eta", "verdict", "binding_constraint"]

_SOLUTION_RE = re.compile(r"^x(\d+)$|^u(\d+)$")


class SchemaError(ValueError):
    """An input CSV whose header does not match the documented contract."""


@dataclass(frozen=True)
class PlotJob:
    kind: str
    input_path: Path
    output_path: Path


def _read_csv(path: Path):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise SchemaError(f"{path}: empty file, no header")
    return rows[0], rows[1:]


def _check_exact_header(header, want, path):
    if header != want:
        raise SchemaError(
            f"{path}: bad header {','.join(header)!r} "
            f"(expected {','.join(want)!r})")


def _solution_shape(header, path):
    """Validate a solution header and return (n, N)."""
    n = 0
    while n < len(header) and header[n] == f"x{n + 1}":
        n += 1
    N = 0
    while n + N < len(header) and header[n + N] == f"u{N + 1}":
        N += 1
    if n + N != len(header) or n not in (2, 3) or N < 1:
        raise SchemaError(
            f"{path}: bad header {','.join(header)!r} "
            f"(expected x1,...,xn,u1,...,uN with n in {{2, 3}})")
    return n, N


def _floats(rows, path):
    try:
        return np.array([[float(v) for v in row] for row in rows])
    except ValueError as exc:
        raise SchemaError(f"{path}: non-numeric data row ({exc})")


def _load_solution(path: Path):
    header, rows = _read_csv(path)
    n, N = _solution_shape(header, path)
    data = _floats(rows, path)
    if data.ndim != 2 or data.shape[1] != n + N:
        raise SchemaError(f"{path}: row width does not match the header")
    return n, N, data[:, :n], data[:, n:]


def _plot_heatmap(job: PlotJob):
    n, N, x, u = _load_solution(job.input_path)
    if n == 3:
        # z = 0 slice: keep the nodes of the plane closest to z = 0
        z = np.abs(x[:, 2])
        keep = z <= z.min() + 1e-12
        x, u = x[keep, :2], u[keep]
    fig, axes = plt.subplots(1, N, figsize=(4.8 * N, 4.2), squeeze=False)
    for j in range(N):
        ax = axes[0, j]
        sc = ax.scatter(x[:, 0], x[:, 1], c=u[:, j], s=14, cmap="viridis")
        ax.set_aspect("equal")
        ax.set_xlabel("x1")
        ax.set_ylabel("x2")
        ax.set_title(f"u{j + 1}" + (" (z = 0 slice)" if n == 3 else ""))
        fig.colorbar(sc, ax=ax)
    return fig


def _plot_slice(job: PlotJob):
    n, N, x, u = _load_solution(job.input_path)
    off_axis = np.max(np.abs(x[:, 1:]), axis=1)
    keep = off_axis <= off_axis.min() + 1e-12
    order = np.argsort(x[keep, 0])
    x1 = x[keep, 0][order]
    fig, ax = plt.subplots(figsize=(5.6, 4.2))
    for j in range(N):
        ax.plot(x1, u[keep][order, j], marker="o", label=f"u{j + 1}")
    ax.set_xlabel("x1")
    ax.set_ylabel("u")
    ax.set_title("profile along the x1 axis")
    ax.legend()
    return fig


def _plot_convergence(job: PlotJob):
    header, rows = _read_csv(job.input_path)
    _check_exact_header(header, HISTORY_HEADER, job.input_path)
    data = _floats(rows, job.input_path)
    if data.ndim != 2 or data.shape[1] != 3:
        raise SchemaError(f"{job.input_path}: row width does not match the header")
    fig, ax = plt.subplots(figsize=(5.6, 4.2))
    ax.semilogy(data[:, 0], data[:, 1], marker="o")
    ax.set_xlabel("iteration")
    ax.set_ylabel("increment norm")
    ax.set_title("Picard increment per iteration")
    ax.grid(True, which="both", alpha=0.3)
    return fig


def _plot_region(job: PlotJob):
    header, rows = _read_csv(job.input_path)
    _check_exact_header(header, SWEEP_HEADER, job.input_path)
    if not rows:
        raise SchemaError(f"{job.input_path}: no sweep rows")
    try:
        R = np.array([float(r[0]) for r in rows])
        gamma = np.array([float(r[1]) for r in rows])
    except (ValueError, IndexError) as exc:
        raise SchemaError(f"{job.input_path}: non-numeric data row ({exc})")
    ok = np.array([r[4] == "admissible" for r in rows])
    fig, ax = plt.subplots(figsize=(5.6, 4.2))
    ax.scatter(R[~ok], gamma[~ok], marker="x", color="tab:red",
               label="not admissible")
    ax.scatter(R[ok], gamma[ok], marker="o", color="tab:green",
               label="admissible")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("R")
    ax.set_ylabel("gamma")
    ax.set_title("admissible (R, gamma) region")
    ax.legend()
    return fig


_RENDERERS = {
    "heatmap": _plot_heatmap,
    "slice": _plot_slice,
    "convergence": _plot_convergence,
    "region": _plot_region,
}


def render(job: PlotJob) -> None:
    fig = _RENDERERS[job.kind](job)
    fig.tight_layout()
    job.output_path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(job.output_path, dpi=120)
    plt.close(fig)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise SchemaError(message)


def main(argv=None) -> int:
    ap = _Parser(prog="plot",
                 description="Render a figure from a solver CSV artifact.")
    ap.add_argument("kind", choices=KINDS)
    ap.add_argument("input", help="input CSV path")
    ap.add_argument("output", help="output image path")
    try:
        args = ap.parse_args(argv)
        job = PlotJob(args.kind, Path(args.input), Path(args.output))
        render(job)
        return 0
    except (SchemaError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
