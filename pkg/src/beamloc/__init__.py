"""Beam-RSRP fingerprint positioning on a synthetic urban mmWave deployment.

Pipeline: build a street-grid scenario with a grid-of-beams per sector,
compute per-beam received power over a location lattice, turn the RSRP maps
into labeled fingerprint datasets, train neural-network and decision-tree
regressors on them, and report Euclidean positioning error statistics.
"""

__version__ = "0.1.0"
