"""Exporters for trade design."""

from .csv_exporter import CSVExporter
from .json_exporter import JSONExporter
from .svg_exporter import SVGExporter

__all__ = ["CSVExporter", "JSONExporter", "SVGExporter"]
