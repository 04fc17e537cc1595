"""Benchmarking stopping criteria for evolutionary multi-objective optimization.

Optimizer runs are stored once as compact traces and replayed offline
through any number of stopping criteria, which are then scored by how far
their stop lies from the last best-so-far hypervolume improvement.
"""

__version__ = "0.1.0"
