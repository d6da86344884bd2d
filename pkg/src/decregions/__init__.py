"""Exact geometry of decision regions of small piecewise-linear networks."""

from decregions.certify import certify
from decregions.connectivity import analyze, find_path
from decregions.geometry import Polyhedron
from decregions.netmodel import Network, builtin, classify, load_network
from decregions.preimage import decision_region_backward
from decregions.regions import enumerate_cells

__all__ = ["Network", "Polyhedron", "analyze", "builtin", "certify", "classify",
           "decision_region_backward", "enumerate_cells", "find_path", "load_network"]
__version__ = "0.1.0"
