"""Manifolds, folds and chaos in the unsteady double-gyre flow."""

__version__ = "0.1.0"

from .flow import FlowParams, PhasePoint, velocity  # noqa: E402

__all__ = ["FlowParams", "PhasePoint", "velocity", "__version__"]
