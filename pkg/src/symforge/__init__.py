"""Discrete symmetry discovery: selection matrices, an invariant network and
linear Thompson sampling over candidate subgroups."""

__version__ = "0.1.0"
