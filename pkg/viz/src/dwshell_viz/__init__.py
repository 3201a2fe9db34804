"""Render dwshell's CSV outputs into figures.

This package knows nothing about the analysis internals; it consumes
the documented on-disk formats only (see docs/formats.md in the main
package) and turns them into PNG/PDF figures.
"""

from .io import VizInputError, read_table
from .render import KINDS, PlotJob, build_figure, render

__all__ = ["KINDS", "PlotJob", "VizInputError", "build_figure",
           "read_table", "render"]
