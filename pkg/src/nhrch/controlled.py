"""External force and control as vertical lifts, and the full dynamical
vector field X_tilde = X_K + F_K + u_K.

A generalized force enters phase space as the fiber-direction vector
(0, f(z)); restricting it to the admissible directions goes through the
same symplectic projection as the constrained solve.  The projected lifts
are guaranteed vertical only in the unconstrained case, so the base
component they acquire under a proper constraint is measured and reported
rather than assumed away.
"""

from dataclasses import dataclass

import numpy as np

from .constraints import as_system
from .geometry import PhasePoint, TangentVec


@dataclass(frozen=True)
class VerticalFieldSpec:
    """A covector field on phase space (generalized force or control effort).

    ``components`` maps a PhasePoint to its n covector components; ``pair``
    is an optional (q, p) -> (n,) fast path that, when numba-compiled,
    lets the constrained pipeline compile around it.
    """

    components: object = None
    pair: object = None

    def __post_init__(self):
        if self.components is None and self.pair is None:
            raise ValueError("a vertical field needs components or a pair callable")

    def at(self, z):
        if self.pair is not None:
            return np.asarray(self.pair(z.q, z.p), dtype=float)
        return np.asarray(self.components(z), dtype=float)


def vertical_lift(field, z):
    """Lift a covector field to the vertical tangent vector (dq = 0, dp = f(z))."""
    f = field.at(z) if isinstance(field, VerticalFieldSpec) else np.asarray(field(z), float)
    if f.size != z.dim:
        raise ValueError("vertical field has the wrong number of components")
    return TangentVec(np.zeros(z.dim), f)


def f_k_and_u_k(spec, z):
    """Projections of the lifted force and control onto the admissible
    directions at a feasible point."""
    system = as_system(spec)
    system.require_on_manifold(z)
    n = system.n
    zero = TangentVec(np.zeros(n), np.zeros(n))
    fk = TangentVec.from_array(system.F_K(z)) if spec.force is not None else zero
    uk = TangentVec.from_array(system.U_K(z)) if spec.control is not None else zero
    return fk, uk


def x_tilde(spec, z):
    """Full dynamical vector field X_K + F_K + u_K at a feasible point."""
    system = as_system(spec)
    return TangentVec.from_array(system.X_tilde(z))


def base_shift_report(spec, z):
    """Measured base components of the projected lifts.

    The proofs of the Hamilton-Jacobi theorems use that these vanish; that
    holds exactly for the unconstrained case and is surfaced (not asserted)
    otherwise.
    """
    system = as_system(spec)
    n = system.n
    report = {}
    if spec.force is not None:
        report["force_base_norm"] = float(np.linalg.norm(system.F_K(z)[:n]))
    if spec.control is not None:
        report["control_base_norm"] = float(np.linalg.norm(system.U_K(z)[:n]))
    return report


def energy_rate(spec, z):
    """dH(X_tilde) at z: zero without force/control, the power injected by
    them otherwise."""
    system = as_system(spec)
    q, p = system.split(z)
    X = system.X_tilde(z)
    return float(system.kernels.dh_dir(q, p, X[: system.n], X[system.n :]))
