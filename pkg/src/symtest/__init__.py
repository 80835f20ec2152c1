"""Hypothesis testing of symmetry in few-query quantum dynamics."""

__version__ = "0.1.0"
