"""Simulation, design and fitting tools for three-wave-mixing Josephson TWPAs."""

__version__ = "0.1.0"
