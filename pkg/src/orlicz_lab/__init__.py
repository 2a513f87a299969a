"""Convex oracles, subgradient selections, Young functions and Orlicz norms."""

__version__ = "0.1.0"
