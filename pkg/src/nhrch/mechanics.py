"""Simple mechanical systems: kinetic-minus-potential Lagrangians, the
fiberwise-linear Legendre transform, the Hamiltonian, and the unconstrained
Hamiltonian vector field.

Restricting to L = (1/2) qdot' M(q) qdot - V(q) keeps the Legendre
transform a global diffeomorphism (p = M(q) qdot) and makes the kinetic
Hessian positive-definite on every velocity subspace, so every constraint
distribution is automatically regular for these Lagrangians.
"""

from dataclasses import dataclass

import numpy as np

from .errors import SingularMatrixError
from .geometry import (
    FD_DEFAULT,
    ChartSpec,
    PhasePoint,
    TangentVec,
    fd_gradient,
    svd_solve_core,
)


@dataclass(frozen=True)
class LagrangianSpec:
    """Mass matrix M(q) (symmetric positive-definite) and potential V(q)."""

    mass_matrix: object
    potential: object

    def validate_at(self, q):
        """Check the SPD invariant at one sample point."""
        M = np.asarray(self.mass_matrix(np.asarray(q, float)), dtype=float)
        sym_defect = float(np.max(np.abs(M - M.T)))
        eigs = np.linalg.eigvalsh(0.5 * (M + M.T))
        if sym_defect > 1e-12:
            raise ValueError(f"mass matrix asymmetric by {sym_defect:.2e}")
        if eigs.min() <= 0:
            raise ValueError(f"mass matrix not positive-definite (min eig {eigs.min():.2e})")
        return {"symmetry_defect": sym_defect, "min_eigenvalue": float(eigs.min())}


@dataclass(frozen=True)
class HamiltonianSystemSpec:
    chart: ChartSpec
    lagrangian: LagrangianSpec


def mass_at(spec, q):
    return np.asarray(spec.lagrangian.mass_matrix(np.asarray(q, float)), dtype=float)


def legendre(spec, q, v):
    """Fiberwise Legendre transform: (q, v) -> (q, M(q) v)."""
    q = np.asarray(getattr(q, "q", q), dtype=float)
    v = np.asarray(v, dtype=float)
    if q.size != spec.chart.dim or v.size != spec.chart.dim:
        raise ValueError("dimension mismatch in legendre transform")
    return PhasePoint(q, mass_at(spec, q) @ v)


def inverse_legendre(spec, z):
    """Velocity of a phase point: v = M(q)^{-1} p."""
    x, cond, rank = svd_solve_core(mass_at(spec, z.q), z.p)
    if rank < z.dim:
        raise SingularMatrixError("mass matrix singular at this configuration")
    return x


def hamiltonian(spec, z):
    """H(q, p) = (1/2) p' M(q)^{-1} p + V(q)."""
    v = inverse_legendre(spec, z)
    return 0.5 * float(z.p @ v) + float(spec.lagrangian.potential(z.q))


def hamiltonian_vector_field(spec, z, cfg=FD_DEFAULT):
    """X_H = (dH/dp, -dH/dq), partial derivatives by central differences.

    Satisfies omega(X_H, w) = dH(w) for every test vector w up to the
    finite-difference tolerance.
    """
    n = z.dim

    def H_of(arr):
        return hamiltonian(spec, PhasePoint(arr[:n], arr[n:]))

    grad = fd_gradient(H_of, z.as_array(), cfg)
    return TangentVec(grad[n:], -grad[:n])
