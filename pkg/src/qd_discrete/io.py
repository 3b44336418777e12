"""Deterministic output serialization: metrics/repertoire CSVs, config echo,
and a minimal QD-score curve as a standalone SVG polyline.

Column orders are frozen.  Floats are written with 17 significant digits so
values round-trip losslessly; missing values are empty fields.  Identical
inputs always produce byte-identical files.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .problems import genotype_to_text
from .repertoire import Repertoire
from .scheduler import RunMetrics

SVG_WIDTH = 640
SVG_HEIGHT = 400
SVG_MARGIN = 50


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    value = float(value)
    if np.isnan(value):
        return ""
    return format(value, ".17g")


def write_metrics_csv(metrics: RunMetrics, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(metrics.columns) + "\n")
        for row in metrics.rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def repertoire_csv_header(d: int) -> str:
    cols = ["cell_id"]
    cols += [f"centroid_{j}" for j in range(d)]
    cols += ["occupied", "fitness"]
    cols += [f"descriptor_{j}" for j in range(d)]
    cols += ["genotype"]
    return ",".join(cols)


def write_repertoire_csv(repertoire: Repertoire, path) -> None:
    """One row per cell; empty cells leave fitness/descriptor/genotype blank."""
    tess = repertoire.tessellation
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(repertoire_csv_header(tess.d) + "\n")
        for cell in range(tess.n_cells):
            parts = [str(cell)]
            parts += [_fmt(v) for v in tess.centroids[cell]]
            if repertoire.occupied[cell]:
                parts.append("1")
                parts.append(_fmt(repertoire.fitness[cell]))
                parts += [_fmt(v) for v in repertoire.descriptors[cell]]
                parts.append('"' + genotype_to_text(repertoire.genotypes[cell]) + '"')
            else:
                parts.append("0")
                parts += [""] * (2 + tess.d)
            fh.write(",".join(parts) + "\n")


def write_qd_curve_svg(metrics: RunMetrics, path) -> None:
    """QD-score vs evaluations as a single polyline with a plain frame."""
    xs = [row for row in metrics.column("evaluations")] if metrics.rows else []
    ys = [row for row in metrics.column("qd_score")] if metrics.rows else []
    x0, y0 = SVG_MARGIN, SVG_HEIGHT - SVG_MARGIN
    x1, y1 = SVG_WIDTH - SVG_MARGIN, SVG_MARGIN
    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{SVG_WIDTH}" '
        f'height="{SVG_HEIGHT}" viewBox="0 0 {SVG_WIDTH} {SVG_HEIGHT}">',
        f'<rect x="{x0}" y="{y1}" width="{x1 - x0}" height="{y0 - y1}" '
        f'fill="none" stroke="black"/>',
        f'<text x="{(x0 + x1) // 2}" y="{SVG_HEIGHT - 12}" text-anchor="middle" '
        f'font-size="14">evaluations</text>',
        f'<text x="16" y="{(y0 + y1) // 2}" text-anchor="middle" font-size="14" '
        f'transform="rotate(-90 16 {(y0 + y1) // 2})">qd_score</text>',
    ]
    if xs:
        x_lo, x_hi = min(xs), max(xs)
        y_lo, y_hi = min(ys), max(ys)
        x_span = (x_hi - x_lo) or 1.0
        y_span = (y_hi - y_lo) or 1.0
        points = " ".join(
            f"{x0 + (x - x_lo) / x_span * (x1 - x0):.2f},"
            f"{y0 - (y - y_lo) / y_span * (y0 - y1):.2f}"
            for x, y in zip(xs, ys)
        )
        lines.append(
            f'<polyline points="{points}" fill="none" stroke="steelblue" stroke-width="1.5"/>'
        )
        lines.append(
            f'<text x="{x0}" y="{y0 + 16}" font-size="11">{_fmt(x_lo)}</text>'
        )
        lines.append(
            f'<text x="{x1}" y="{y0 + 16}" text-anchor="end" font-size="11">{_fmt(x_hi)}</text>'
        )
        lines.append(
            f'<text x="{x0 - 4}" y="{y0}" text-anchor="end" font-size="11">{_fmt(y_lo)}</text>'
        )
        lines.append(
            f'<text x="{x0 - 4}" y="{y1 + 4}" text-anchor="end" font-size="11">{_fmt(y_hi)}</text>'
        )
    lines.append("</svg>")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


def emit_outputs(repertoire: Repertoire, metrics: RunMetrics, resolved, out_dir) -> dict[str, Path]:
    """Write metrics.csv, repertoire.csv, config-echo.json, and qd_score.svg."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "metrics": out / "metrics.csv",
        "repertoire": out / "repertoire.csv",
        "config_echo": out / "config-echo.json",
        "qd_curve": out / "qd_score.svg",
    }
    write_metrics_csv(metrics, paths["metrics"])
    write_repertoire_csv(repertoire, paths["repertoire"])
    resolved.to_json_file(paths["config_echo"])
    write_qd_curve_svg(metrics, paths["qd_curve"])
    return paths


def read_metrics_csv(path) -> tuple[list[str], list[list[str]]]:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        return header, [row for row in reader]


def read_final_metric(path, metric: str) -> float:
    """Last value of a metrics.csv column; raises if absent or empty."""
    header, rows = read_metrics_csv(path)
    if metric not in header:
        raise ValueError(f"{path}: no column named {metric!r}")
    if not rows:
        raise ValueError(f"{path}: metrics file has no data rows")
    value = rows[-1][header.index(metric)]
    if value == "":
        raise ValueError(f"{path}: final value of {metric!r} is empty")
    return float(value)
