"""Device-physics oracle, graph encoding, and GNN emulators for 2D devices."""

__version__ = "0.1.0"
