"""Finite element laboratory for parabolic problems in the energy norm."""

__version__ = "0.1.0"
