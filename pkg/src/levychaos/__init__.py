"""Iterated stochastic integrals and chaos expansions driven by Levy processes."""
__version__ = "0.1.0"
