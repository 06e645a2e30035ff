"""Thermodynamic formalism numerics for countable Markov shifts and skew products."""
__version__ = "0.1.0"
