"""Batch figure generation from configadapt CSV outputs.

Every figure is a pure rendering of one input CSV: values pass through
unchanged (reordering only), and each render writes a sidecar JSON with the
exact plotted numbers so tests can assert against the source data.
"""

from .errors import SchemaError
from .render import KINDS, MODULE_ORDER, FigureSpec, render

__all__ = ["FigureSpec", "KINDS", "MODULE_ORDER", "SchemaError", "render"]
