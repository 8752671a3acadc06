"""Batch figure renderer for the backhaul simulator's CSV output."""

__version__ = "0.1.0"

from .render import ALIASES, FIGURES, SchemaError, render

__all__ = ["ALIASES", "FIGURES", "SchemaError", "render"]
