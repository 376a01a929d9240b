"""Stokes phenomenon toolkit for level-one linear differential systems."""

__version__ = "0.1.0"
