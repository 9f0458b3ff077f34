"""SVG exporter - static payoff-region figures.

Buyer payoff runs along the horizontal axis and seller payoff up the vertical
one. Regions are drawn back to front so nested triangles stay visible. Each
region polygon carries its kind as the SVG element id and each corner label
is written as real ``<text>``.
"""

import io
from pathlib import Path
from typing import Dict, Sequence, Union

import matplotlib
from matplotlib.figure import Figure
from matplotlib.patches import Polygon

from ..models import PayoffRegion

# 72 points per inch, so the SVG viewBox is 600 by 600
VIEWBOX = 600
FIGSIZE = (VIEWBOX / 72, VIEWBOX / 72)

FILLS: Dict[str, str] = {
    "triangle_all": "#d9e7f5",
    "triangle_us": "#9fc5e8",
    "triangle_fb": "#4a86c5",
    "negative_envelope": "#e8a39f",
}

SVG_STYLE = {"svg.fonttype": "none", "svg.hashsalt": "trade-design"}


class SVGExporter:
    """Render payoff regions on a 600 by 600 SVG canvas."""

    def __init__(self, title: str = ""):
        self.title = title

    def export_regions(self, regions: Sequence[PayoffRegion]) -> str:
        """Draw the regions with their corner labels.

        Args:
            regions: Regions in drawing order, largest first.

        Returns:
            An SVG document as a string.
        """
        if not regions:
            raise ValueError("nothing to draw")
        points = [v.as_tuple() for r in regions for v in r.vertices]
        x_max = max(max(x for x, _ in points), 1e-12)
        y_lo = min(0.0, min(y for _, y in points))
        y_hi = max(max(y for _, y in points), y_lo + 1e-12)

        with matplotlib.rc_context(SVG_STYLE):
            fig = Figure(figsize=FIGSIZE)
            ax = fig.add_subplot(1, 1, 1)
            pad_x = 0.08 * x_max
            pad_y = 0.08 * (y_hi - y_lo)
            ax.set_xlim(-pad_x, x_max + pad_x)
            ax.set_ylim(y_lo - pad_y, y_hi + pad_y)
            ax.set_xlabel(r"$\pi_b$")
            ax.set_ylabel(r"$\pi_s$")
            ax.axhline(0.0, color="black", linewidth=0.8)
            ax.axvline(0.0, color="black", linewidth=0.8)
            if self.title:
                ax.set_title(self.title)

            drawn_labels = set()
            for region in regions:
                coords = [v.as_tuple() for v in region.vertices]
                ax.add_patch(
                    Polygon(
                        coords,
                        closed=True,
                        facecolor=FILLS.get(region.kind, "#cccccc"),
                        edgecolor="black",
                        linewidth=1.0,
                        gid=region.kind,
                    )
                )
                for letter, index in sorted(region.labels.items()):
                    if letter in drawn_labels:
                        continue
                    drawn_labels.add(letter)
                    x, y = coords[index]
                    ax.annotate(
                        letter,
                        (x, y),
                        xytext=(4, 4),
                        textcoords="offset points",
                        gid=f"corner-{letter}",
                    )

            buffer = io.BytesIO()
            fig.savefig(buffer, format="svg", metadata={"Date": None})
        return buffer.getvalue().decode("utf-8")

    def export_to_file(self, document: str, output_path: Union[str, Path]):
        with open(output_path, "w") as f:
            f.write(document)
