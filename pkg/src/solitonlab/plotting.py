"""Line plots of report CSVs as standalone, byte-reproducible SVG files."""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .errors import InputError  # noqa: E402

_RC = {
    "svg.hashsalt": "solitonlab",
    "svg.fonttype": "none",
    "font.size": 10,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "lines.linewidth": 1.4,
}


def read_columns(path) -> tuple[list[str], np.ndarray]:
    """Header and float data of a report CSV; ``#`` lines are skipped."""
    path = Path(path)
    if not path.is_file():
        raise InputError(f"no such file: {path}")
    with open(path, newline="") as fh:
        rows = [row for row in csv.reader(line for line in fh if not line.startswith("#")) if row]
    if not rows:
        raise InputError(f"{path} is empty")
    header, body = rows[0], rows[1:]
    try:
        data = np.array([[float(x) for x in row] for row in body], dtype=float)
    except ValueError as exc:
        raise InputError(f"{path}: non-numeric data ({exc})") from exc
    return header, data.reshape(len(body), len(header))


def emit_plot(csv_path, columns, svg_path, x: str | None = None, title: str | None = None) -> Path:
    """Plot ``columns`` against ``x`` (default: the first column) into ``svg_path``."""
    header, data = read_columns(csv_path)
    if data.shape[0] == 0:
        raise InputError(f"{csv_path} has no data rows")
    x = header[0] if x is None else x
    columns = list(columns)
    missing = [c for c in [x] + columns if c not in header]
    if missing:
        raise InputError(f"{csv_path} has no column(s) {missing}; available: {header}")
    xs = data[:, header.index(x)]
    svg_path = Path(svg_path)
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(6.4, 4.0))
        for col in columns:
            ax.plot(xs, data[:, header.index(col)], label=col)
        ax.set_xlabel(x)
        if len(columns) == 1:
            ax.set_ylabel(columns[0])
        ax.legend(frameon=False)
        if title:
            ax.set_title(title)
        fig.tight_layout()
        fig.savefig(svg_path, format="svg", metadata={"Date": None})
        plt.close(fig)
    return svg_path
