"""Site percolation on the triangular lattice: sampling, crossings, interface
loops, correlation lengths, near-critical sweeps and curve distances."""

__version__ = "0.1.0"
