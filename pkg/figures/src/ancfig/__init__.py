"""Figure rendering for ANC simulation output files."""

from .render import (FigureSpec, RenderResult, SchemaError, load_spec,
                     preset_specs, render)

__version__ = "0.1.0"

__all__ = ["FigureSpec", "RenderResult", "SchemaError", "load_spec",
           "preset_specs", "render"]
