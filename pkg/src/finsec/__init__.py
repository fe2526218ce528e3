"""Finite section method laboratory for convolution-type operators on the line."""

__version__ = "0.1.0"
