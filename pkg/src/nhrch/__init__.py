"""Nonholonomic controlled Hamiltonian systems on cotangent bundles.

Constrained (distributional) dynamics, vertical-lift forces and controls,
Abelian symmetry reduction, momentum-level reduction, fixed-step
integration with drift monitors, and residual-based verification of the
Type I / Type II Hamilton-Jacobi equations for the base and reduced
systems.
"""

__version__ = "0.1.0"
