"""Report emission: flat key/value metrics, delimited smoothness series, and
per-joint line plots with the transition window marked."""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .metrics import SmoothnessSeries

METRIC_KEY_ORDER = ("fid", "cov", "gdiv", "ldiv", "inter_div", "intra_div")


def format_metrics(metrics: dict[str, float]) -> str:
    """Flat `key = value` lines, canonical metric columns first."""
    keys = [k for k in METRIC_KEY_ORDER if k in metrics]
    keys += sorted(k for k in metrics if k not in METRIC_KEY_ORDER)
    lines = []
    for key in keys:
        value = metrics[key]
        lines.append(f"{key} = {value!r}" if not isinstance(value, str) else f"{key} = {value}")
    return "\n".join(lines) + "\n"


def _write_series_csv(path: Path, joint_names: list[str], series) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["frame"] + joint_names)
        for t, row in enumerate(series):
            writer.writerow([t] + [repr(float(v)) for v in row])


def plot_smoothness(series: SmoothnessSeries, path: Path) -> None:
    """Fig-style per-joint line plots: speed change on top, acceleration
    change below, dotted vertical lines marking the transition window."""
    fig, axes = plt.subplots(2, 1, figsize=(9, 6), sharex=True)
    panels = (
        ("L2 velocity change", series.velocity_change),
        ("L2 acceleration change", series.acceleration_change),
    )
    for ax, (title, data) in zip(axes, panels):
        for p, name in enumerate(series.joint_names):
            ax.plot(range(data.shape[0]), data[:, p], linewidth=1.0, label=name)
        if series.transition_window is not None:
            for x in series.transition_window:
                ax.axvline(x, color="black", linestyle=":", linewidth=1.0)
        ax.set_ylabel(title)
        ax.grid(True, alpha=0.3)
    axes[0].legend(loc="upper right", fontsize=8)
    axes[1].set_xlabel("frame")
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata={"Software": None})
    plt.close(fig)


def emit_report(
    metrics: dict[str, float],
    out_dir: str | Path,
    smoothness_series: SmoothnessSeries | None = None,
) -> list[Path]:
    """Write report.txt (+ smoothness CSVs and figure) under ``out_dir``.

    Validates everything up front so a failure leaves no partial files.
    """
    if not metrics:
        raise ValueError("empty metric set; nothing to report")
    out_dir = Path(out_dir)
    text = format_metrics(metrics)

    out_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    report_path = out_dir / "report.txt"
    report_path.write_text(text)
    written.append(report_path)

    if smoothness_series is not None:
        dv_path = out_dir / "velocity_change.csv"
        ddv_path = out_dir / "acceleration_change.csv"
        _write_series_csv(dv_path, smoothness_series.joint_names, smoothness_series.velocity_change)
        _write_series_csv(
            ddv_path, smoothness_series.joint_names, smoothness_series.acceleration_change
        )
        fig_path = out_dir / "smoothness.png"
        plot_smoothness(smoothness_series, fig_path)
        written.extend([dv_path, ddv_path, fig_path])
    return written
