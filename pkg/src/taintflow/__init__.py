"""Demand-driven backward IFDS taint analysis over k-limited access paths."""

__version__ = "0.1.0"
DEFAULT_K = 5
