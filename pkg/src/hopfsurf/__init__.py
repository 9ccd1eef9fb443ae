"""Minimal surfaces in the 3-sphere built from lifted quadrilaterals of the Hopf fibration."""

__version__ = "0.1.0"
