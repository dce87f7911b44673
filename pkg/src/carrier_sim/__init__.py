"""Simulation of reusable entangled carriers for quantum state sharing under noise."""

__version__ = "0.1.0"
