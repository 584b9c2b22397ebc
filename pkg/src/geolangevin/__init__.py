"""Langevin-type SDEs on regular submanifolds: geometry, models, integrators, analysis."""

__version__ = "0.1.0"
