"""Numerical laboratory for the CLWE-to-ReLU-network learning reduction."""

__version__ = "0.1.0"
