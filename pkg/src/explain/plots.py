"""
SVG charts for importance scores, ALE curves and root-to-leaf paths, plus
the CSV tables of the plotted values.
"""
import logging
from typing import Optional

import numpy as np
import pandas as pd

from src.explain.ale import AleCurve
from src.explain.importance import ImportanceReport
from src.explain.local import LocalExplanation
from src.explain.render import path_conditions
from src.explain.svg import new_figure, svg_document

logger = logging.getLogger(__name__)

PLOT_STYLES = ("basic", "signed", "none")
_SIGN_COLORS = {"+": "#2b8cbe", "-": "#e34a33", "0": "#999999"}


def importance_plot_frame(report: ImportanceReport) -> pd.DataFrame:
    """Plotted values: one row per feature, sorted by debiased score, largest first."""
    frame = report.to_frame()
    frame["tau_sign"] = [f.tau_sign for f in report.features]
    return frame.sort_values(["debiased", "feature"], ascending=[False, True], kind="mergesort").reset_index(drop=True)


def importance_plot(report: ImportanceReport, style: str = "basic") -> Optional[str]:
    """
    Horizontal bars of debiased ghost scores with the null quantile of the
    report's level as a marker. ``signed`` colors each bar by the sign of the
    feature's Kendall tau; ``none`` returns None.
    """
    if style not in PLOT_STYLES:
        raise ValueError(f"Unknown plot style {style!r}; choose from {PLOT_STYLES}")
    if style == "none":
        return None
    frame = importance_plot_frame(report).iloc[::-1]
    positions = np.arange(len(frame))
    fig, ax = new_figure(6.4, max(2.0, 0.35 * len(frame) + 1.0))
    if style == "signed":
        colors = [_SIGN_COLORS[sign] for sign in frame["tau_sign"]]
    else:
        colors = ["#2b8cbe" if significant else "#9ecae1" for significant in frame["significant"]]
    ax.barh(positions, frame["debiased"], color=colors)
    band = frame[{0.90: "q90", 0.95: "q95", 0.99: "q99"}[report.level]].to_numpy(dtype=float)
    if np.isfinite(band).any():
        ax.plot(band, positions, linestyle="none", marker="|", markersize=14, color="black",
                label=f"null q{int(round(report.level * 100))}")
        ax.legend(loc="lower right", fontsize=8)
    ax.axvline(1.0, color="0.6", linewidth=0.8, linestyle="--")
    ax.set_yticks(positions)
    ax.set_yticklabels(frame["feature"])
    ax.set_xlabel("debiased ghost score")
    return svg_document(fig)


def ale_plot(curve: AleCurve) -> str:
    fig, ax = new_figure()
    ax.plot(curve.bin_edges, curve.accumulated_effects, marker="o", markersize=3, color="#2b8cbe")
    ax.axhline(0.0, color="0.6", linewidth=0.8)
    ax.set_xlabel(curve.name)
    ax.set_ylabel("accumulated local effect")
    return svg_document(fig)


def path_plot(expl: LocalExplanation) -> str:
    """Root-to-leaf conditions as a vertical chain of boxes ending in the leaf prediction."""
    labels = ["root"] + path_conditions(expl.path)
    labels.append(f"leaf {expl.leaf_id}\nprediction {expl.prediction:.6g}")
    fig, ax = new_figure(5.0, max(2.0, 0.9 * len(labels)))
    for k, label in enumerate(labels):
        y = -float(k)
        if k:
            ax.annotate("", xy=(0.0, y + 0.25), xytext=(0.0, y + 0.75),
                        arrowprops={"arrowstyle": "->", "color": "0.4"})
        face = "#e8f1fa" if k == len(labels) - 1 else "#f4f4f4"
        ax.text(0.0, y, label, fontsize=9, ha="center", va="center",
                bbox={"boxstyle": "round,pad=0.4", "fc": face, "ec": "0.3"})
    ax.set_xlim(-1.0, 1.0)
    ax.set_ylim(-len(labels) + 0.4, 0.6)
    ax.set_axis_off()
    return svg_document(fig)
