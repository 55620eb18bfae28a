"""Render figures from the solver CLI's CSV artifacts.

A pure file-to-file step: it validates the documented CSV headers, draws
the requested figure, and never recomputes any of the mathematics.
"""

from .cli import PlotJob, SchemaError, main, render

__all__ = ["PlotJob", "SchemaError", "main", "render"]
