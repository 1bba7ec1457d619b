"""
Matplotlib figure helpers for reproducible SVG output.

Figures are built on the Agg canvas without pyplot, the SVG hash salt is
fixed and the date metadata is dropped, so identical inputs give identical
documents.
"""
import io

import matplotlib

matplotlib.use("Agg")

from matplotlib.backends.backend_agg import FigureCanvasAgg  # noqa: E402
from matplotlib.figure import Figure  # noqa: E402

HASH_SALT = "trust"


def new_figure(width: float = 6.4, height: float = 4.8):
    fig = Figure(figsize=(width, height))
    FigureCanvasAgg(fig)
    return fig, fig.add_subplot(111)


def svg_document(fig: Figure) -> str:
    buffer = io.StringIO()
    with matplotlib.rc_context({"svg.hashsalt": HASH_SALT, "svg.fonttype": "none"}):
        fig.savefig(buffer, format="svg", bbox_inches="tight", metadata={"Date": None})
    return buffer.getvalue()
