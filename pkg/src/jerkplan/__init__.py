"""Minimum-time speed planning along a path under acceleration and jerk limits."""

__version__ = "0.1.0"
