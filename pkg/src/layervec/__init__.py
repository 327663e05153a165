"""Hierarchical image vectorization and vector-conditioned generation toolkit."""

__version__ = "0.1.0"
