"""Exact linear-region analysis of randomly initialized 1-D ReLU networks."""

__version__ = "0.1.0"
