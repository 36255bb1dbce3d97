"""PNG figures for corpus statistics, written next to the CSV tables."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .corpus import CorpusStats  # noqa: E402
from .exceptions import ReportIOError  # noqa: E402

STYLE = {
    "figure.figsize": (6.0, 3.6),
    "figure.dpi": 100,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "font.size": 9,
}


def _save(fig, path: Path) -> Path:
    try:
        fig.savefig(path, bbox_inches="tight")
    except OSError as exc:
        raise ReportIOError(path, exc) from exc
    finally:
        plt.close(fig)
    return path


def _empty(ax, message="no data"):
    ax.text(0.5, 0.5, message, ha="center", va="center", transform=ax.transAxes)


def plot_ip_cdf(stats: CorpusStats, path: Path) -> Path:
    fig, ax = plt.subplots()
    if stats.cdf_points:
        xs = [max(v, 1) for v, _ in stats.cdf_points]
        ys = [f for _, f in stats.cdf_points]
        ax.step(xs, ys, where="post")
        ax.set_xscale("log", base=2)
    else:
        _empty(ax)
    ax.set_ylim(0, 1.02)
    ax.set_xlabel("authorized IPv4 addresses")
    ax.set_ylabel("fraction of domains")
    return _save(fig, path)


def _bars(histogram: dict, xlabel: str, ylabel: str, path: Path) -> Path:
    fig, ax = plt.subplots()
    if histogram:
        keys = sorted(histogram)
        ax.bar([str(k) for k in keys], [histogram[k] for k in keys])
    else:
        _empty(ax)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    return _save(fig, path)


def plot_errors(stats: CorpusStats, path: Path) -> Path:
    fig, ax = plt.subplots()
    if stats.error_histogram:
        names = list(stats.error_histogram)
        ax.barh(names, [stats.error_histogram[n] for n in names])
        ax.invert_yaxis()
    else:
        _empty(ax, "no errors")
    ax.set_xlabel("domains")
    return _save(fig, path)


def render_figures(stats: CorpusStats, out_dir) -> list[Path]:
    """Render every figure into ``out_dir``; returns the PNG paths."""
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ReportIOError(out_dir, exc) from exc
    with plt.rc_context(STYLE):
        return [
            plot_ip_cdf(stats, out_dir / "ip_count_cdf.png"),
            _bars(stats.top_level_include_histogram, "includes in top-level record", "domains",
                  out_dir / "top_level_includes.png"),
            _bars(stats.subnet_size_histogram, "prefix length of included ranges", "count",
                  out_dir / "subnet_sizes.png"),
            plot_errors(stats, out_dir / "errors.png"),
        ]
