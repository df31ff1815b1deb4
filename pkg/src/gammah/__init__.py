"""Discrete reduced minimum modulus diagnostics for discretized operators."""
__version__ = "0.1.0"
