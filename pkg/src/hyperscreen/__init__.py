"""Hyperscreen - hyperbolic metric learning for virtual screening and affinity ranking."""

__version__ = "0.1.0"
