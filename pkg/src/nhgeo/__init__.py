"""nhgeo: symbolic-numeric toolkit for generic off-diagonal exact solutions
of the Einstein and Ricci-flow equations built from generating functions."""

from . import expr, numerics, geometry, generators, ricci_flow, geroch

__version__ = "0.1.0"

__all__ = ["expr", "numerics", "geometry", "generators", "ricci_flow",
           "geroch", "__version__"]
