"""Dependency-parsing experiment lab: biaffine parser, MST decoding and resource-scaling analysis."""

__version__ = "0.1.0"
