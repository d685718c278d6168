"""Event-driven simulation of percolation-type models on G x R."""

__version__ = "0.1.0"
