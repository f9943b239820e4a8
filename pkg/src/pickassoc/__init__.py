"""Grid-free seismic phase association.

A recurrent pick linker trained purely on synthetic arrival-time sequences
from a 1D layered velocity model, the aggregation scheme that turns its
per-window link predictions into an event catalog, a classical grid
back-projection baseline, and a Jaccard-overlap evaluation harness.
"""

__version__ = "0.1.0"
