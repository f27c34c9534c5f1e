"""figplots: figures from cavsim CSV artifacts."""

from .render import MissingColumnError, PlotSpec, RenderError, read_columns, render

__version__ = "0.1.0"
