#!/usr/bin/env python3

"""
Log-log SVG plots of study tables.
Plots are drawn from CSV rows only, so they can be regenerated offline.

Part of the ConvexLab project.
"""

import logging
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from convexlab.core.textio import read_csv_columns  # noqa: E402

# Configure logging
logger = logging.getLogger('plots')

# Stable element ids and no timestamp, so reruns produce identical files
matplotlib.rcParams['svg.hashsalt'] = 'convexlab'
matplotlib.rcParams['svg.fonttype'] = 'none'

Series = Dict[str, Tuple[Sequence[float], Sequence[float]]]


def loglog_svg(path: Union[str, Path], series: Series, title: str, xlabel: str, ylabel: str,
               reference_slopes: Sequence[float] = ()) -> Optional[Path]:
    """
    Draw one or more positive series on log-log axes.

    Non-positive values are skipped. Returns None when nothing is plottable.
    """
    path = Path(path)
    cleaned = {}
    for label, (xs, ys) in series.items():
        pairs = [(float(x), abs(float(y))) for x, y in zip(xs, ys) if float(x) > 0.0 and abs(float(y)) > 0.0]
        if pairs:
            cleaned[label] = pairs
    if not cleaned:
        logger.warning(f"No positive data for {path.name}, plot skipped")
        return None

    fig, ax = plt.subplots(figsize=(6.0, 4.5))
    try:
        for label, pairs in cleaned.items():
            ax.loglog([p[0] for p in pairs], [p[1] for p in pairs], marker="o", label=label)

        # Slope guides anchored at the first point of the first series
        x0, y0 = next(iter(cleaned.values()))[0]
        all_x = sorted({p[0] for pairs in cleaned.values() for p in pairs})
        for slope in reference_slopes:
            ax.loglog(all_x, [y0 * (x / x0) ** slope for x in all_x], linestyle="--", color="gray",
                      linewidth=0.8, label=f"slope {slope:g}")

        ax.set_title(title)
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        ax.grid(True, which="both", linewidth=0.3)
        ax.legend(fontsize="small")
        path.parent.mkdir(parents=True, exist_ok=True)
        fig.savefig(path, format="svg", metadata={"Date": None})
    finally:
        plt.close(fig)
    logger.debug(f"Wrote plot {path}")
    return path


def plot_from_csv(csv_path: Union[str, Path], svg_path: Union[str, Path], x: str, y: str,
                  group_by: Optional[str] = None, title: str = "", reference_slopes: Sequence[float] = ()) -> Optional[Path]:
    """Plot column ``y`` against ``x`` of a study CSV, one series per ``group_by`` value."""
    columns = read_csv_columns(csv_path)
    missing = [c for c in (x, y, group_by) if c is not None and c not in columns]
    if missing:
        raise KeyError(f"Columns {missing} not in {csv_path}")

    series: Dict[str, Tuple[List[float], List[float]]] = {}
    groups = columns[group_by] if group_by else [y] * len(columns[x])
    for key, xv, yv in zip(groups, columns[x], columns[y]):
        if not isinstance(xv, (int, float)) or not isinstance(yv, (int, float)):
            continue
        xs, ys = series.setdefault(str(key), ([], []))
        xs.append(float(xv))
        ys.append(float(yv))
    return loglog_svg(svg_path, series, title or Path(csv_path).stem, x, y, reference_slopes)
