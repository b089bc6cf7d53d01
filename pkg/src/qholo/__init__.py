"""Quantum ghost holography of a concealed chamber: simulation, oracles and reconstruction."""

__version__ = "0.1.0"
