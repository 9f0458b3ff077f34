"""CSV exporter for region vertices and CDF tables."""

import csv
import io
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

from ..models import PayoffRegion

Row = Dict[str, Union[float, str]]


class CSVExporter:
    """Export polygon vertices and distribution tables as CSV text."""

    def __init__(self, precision: Optional[int] = None):
        self.precision = precision

    def export_region(self, region: PayoffRegion) -> str:
        """One ``pi_b,pi_s`` row per vertex, in polygon order."""
        rows = [self._row(pi_b=v.pi_b, pi_s=v.pi_s) for v in region.vertices]
        return self._to_csv(["pi_b", "pi_s"], rows)

    def export_cdf_table(self, table: Sequence[Tuple[float, float]]) -> str:
        """One ``v,G`` row per tabulated point of a CDF."""
        rows = [self._row(v=v, G=g) for v, g in table]
        return self._to_csv(["v", "G"], rows)

    def export_to_file(self, document: str, output_path: Union[str, Path]):
        with open(output_path, "w", newline="") as f:
            f.write(document)

    def _row(self, **fields: float) -> Row:
        if self.precision is None:
            return {k: repr(float(v)) for k, v in fields.items()}
        return {k: f"{float(v):.{self.precision}g}" for k, v in fields.items()}

    def _to_csv(self, fieldnames: List[str], rows: List[Row]) -> str:
        buffer = io.StringIO()
        writer = csv.DictWriter(buffer, fieldnames=fieldnames, lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
        return buffer.getvalue()
