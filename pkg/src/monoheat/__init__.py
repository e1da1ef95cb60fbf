"""Implicit FEM solver for doubly nonlinear heat flow with monotone-graph
Robin boundaries, plus verification tools for the associated energy and
continuous-dependence estimates."""

from . import errors
from .graphs import (
    CompositeSum,
    GraphConstants,
    Linear,
    PhysicalBeta,
    Power,
    SaturatingBiLipschitz,
    ScalarGraph,
    Sign,
    audit_constants,
    builtin_graphs,
    conjugate_potential,
    graph_property_suite,
    minimal_section,
    moreau_envelope,
    potential,
    resolvent,
    truncated_yosida,
    yosida,
)

__all__ = [
    "errors",
    "ScalarGraph",
    "GraphConstants",
    "Linear",
    "SaturatingBiLipschitz",
    "PhysicalBeta",
    "Power",
    "Sign",
    "CompositeSum",
    "resolvent",
    "yosida",
    "minimal_section",
    "potential",
    "moreau_envelope",
    "conjugate_potential",
    "truncated_yosida",
    "graph_property_suite",
    "audit_constants",
    "builtin_graphs",
]

__version__ = "0.1.0"
