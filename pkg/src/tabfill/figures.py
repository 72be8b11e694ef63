"""Render evaluation reports as bar-chart figures.

Used by the CLI report path; the evaluation module itself only produces data.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .evaluate import EvalReport

__all__ = ["render_report_figures"]

_METHOD_LABELS = {"constraint": "constraint engine", "mean_mode": "mean/mode baseline"}
_BAR_COLORS = {"constraint": "#2b6cb0", "mean_mode": "#a0aec0"}


def _grouped_bars(ax, percs, series: dict[str, list[float | None]], ylabel: str) -> None:
    width = 0.8 / max(len(series), 1)
    for offset, (method, values) in enumerate(series.items()):
        xs = [i + offset * width for i in range(len(percs))]
        heights = [0.0 if v is None else v for v in values]
        ax.bar(
            xs,
            heights,
            width=width,
            label=_METHOD_LABELS.get(method, method),
            color=_BAR_COLORS.get(method),
        )
    ax.set_xticks([i + 0.4 - width / 2 for i in range(len(percs))])
    ax.set_xticklabels([f"{p:g}%" for p in percs])
    ax.set_xlabel("missing cells")
    ax.set_ylabel(ylabel)
    ax.grid(axis="y", alpha=0.3)
    ax.legend()


def render_report_figures(report: EvalReport, out_dir: str | Path) -> list[Path]:
    """Write one figure per available metric; returns the paths created."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    created: list[Path] = []
    percs = [entry.perc for entry in report.percs]
    methods = list(report.percs[0].methods) if report.percs else []

    nrmse_series = {
        m: [entry.methods[m].nrmse for entry in report.percs] for m in methods
    }
    if any(v is not None for vs in nrmse_series.values() for v in vs):
        fig, ax = plt.subplots(figsize=(6, 4))
        _grouped_bars(ax, percs, nrmse_series, "NRMSE")
        ax.set_title(f"{report.bench}: imputation error")
        fig.tight_layout()
        path = out_dir / "nrmse.png"
        fig.savefig(path, dpi=150)
        plt.close(fig)
        created.append(path)

    f1_series = {
        m: [entry.methods[m].f1_macro for entry in report.percs] for m in methods
    }
    if any(v is not None for vs in f1_series.values() for v in vs):
        fig, ax = plt.subplots(figsize=(6, 4))
        _grouped_bars(ax, percs, f1_series, "macro F1")
        ax.set_title(f"{report.bench}: categorical imputation")
        fig.tight_layout()
        path = out_dir / "f1.png"
        fig.savefig(path, dpi=150)
        plt.close(fig)
        created.append(path)

    return created
