"""Built-in example systems, one-forms, symplectic maps, and field families.

Each system builder memoizes on its parameters so the compiled kernels are
shared across calls.  All callables go through the acceleration switch, so
the catalog runs compiled when numba is on and as plain numpy otherwise.
"""

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .accel import maybe_njit
from .constraints import DistributionSpec, NonholonomicRCHSpec, full_distribution
from .controlled import VerticalFieldSpec
from .errors import ConfigError
from .geometry import ChartSpec, PhasePoint
from .mechanics import HamiltonianSystemSpec, LagrangianSpec


@dataclass(frozen=True)
class CatalogEntry:
    name: str
    description: str
    spec: NonholonomicRCHSpec
    default_state: PhasePoint
    cyclic: tuple = ()
    default_mu: tuple = ()
    symmetry_group: str = "translation"
    params: dict = field(default_factory=dict)


def _feasible_state(spec, q, coeffs):
    """Legendre image of an admissible velocity: p = M(q) E(q)' coeffs."""
    q = np.asarray(q, dtype=float)
    E = spec.distribution.span_at(q)
    v = np.asarray(coeffs, dtype=float) @ E
    M = np.asarray(spec.mechanics.lagrangian.mass_matrix(q), dtype=float)
    return PhasePoint(q, M @ v)


def _diag_mass(values):
    d = np.asarray(values, dtype=float)

    def mass(q):
        return np.diag(d)

    return maybe_njit(mass)


def _zero_potential():
    def potential(q):
        return 0.0

    return maybe_njit(potential)


def _linear_potential(coeffs):
    c = np.asarray(coeffs, dtype=float)

    def potential(q):
        return q @ c

    return maybe_njit(potential)


def _quadratic_potential(coeffs):
    c = np.asarray(coeffs, dtype=float)

    def potential(q):
        return 0.5 * np.sum(c * q * q)

    return maybe_njit(potential)


def make_potential(kind, coeffs=None, dim=None):
    if kind == "zero":
        return _zero_potential()
    if kind == "linear":
        return _linear_potential(coeffs)
    if kind == "quadratic":
        return _quadratic_potential(coeffs)
    raise ConfigError(f"unknown potential '{kind}'")


def make_force(kind, params, n):
    """Named covector-field families for forces and controls."""
    if kind in (None, "zero"):
        return None
    if kind == "constant":
        c = np.asarray(params.get("components"), dtype=float)
        if c.size != n:
            raise ConfigError("constant field needs one component per coordinate")

        def pair(q, p):
            return c.copy()

        return VerticalFieldSpec(pair=maybe_njit(pair))
    if kind == "viscous":
        coef = float(params.get("coefficient", 0.1))

        def pair(q, p):
            return -coef * p

        return VerticalFieldSpec(pair=maybe_njit(pair))
    raise ConfigError(f"unknown force/control '{kind}'")


# -- systems -----------------------------------------------------------------


@lru_cache(maxsize=None)
def free_particle_2d(mass=1.0):
    """Unconstrained particle in the plane; straight-line flow."""
    chart = ChartSpec(2, ("x", "y"), (False, False))
    lag = LagrangianSpec(_diag_mass((mass, mass)), _zero_potential())
    spec = NonholonomicRCHSpec(
        mechanics=HamiltonianSystemSpec(chart, lag),
        distribution=full_distribution(2),
    )
    return CatalogEntry(
        name="free_particle_2d",
        description="free particle in the plane, no constraint",
        spec=spec,
        default_state=PhasePoint(np.zeros(2), np.array([1.0, 2.0])),
        cyclic=("x", "y"),
        default_mu=(1.0, 2.0),
        params={"mass": mass},
    )


@lru_cache(maxsize=None)
def knife_edge(mass=1.0, inertia=1.0, potential=("zero", ())):
    """Blade constrained to slide along its heading.

    Chart (x, y, theta); the admissible velocities are spanned by the
    heading direction (cos theta, sin theta, 0) and the steering direction
    d/dtheta, with annihilator sin theta dx - cos theta dy.  With unit
    parameters the free motion from p = (1, 0, 0.5) is the circle
    x = 2 sin(t/2), y = 2(1 - cos(t/2)), theta = t/2.
    """

    def span(q):
        out = np.empty((2, 3))
        out[0, 0] = np.cos(q[2])
        out[0, 1] = np.sin(q[2])
        out[0, 2] = 0.0
        out[1, 0] = 0.0
        out[1, 1] = 0.0
        out[1, 2] = 1.0
        return out

    def ann(q):
        out = np.empty((1, 3))
        out[0, 0] = np.sin(q[2])
        out[0, 1] = -np.cos(q[2])
        out[0, 2] = 0.0
        return out

    chart = ChartSpec(3, ("x", "y", "theta"), (False, False, True))
    pot_kind, pot_coeffs = potential
    lag = LagrangianSpec(
        _diag_mass((mass, mass, inertia)),
        make_potential(pot_kind, pot_coeffs or None, 3),
    )
    spec = NonholonomicRCHSpec(
        mechanics=HamiltonianSystemSpec(chart, lag),
        distribution=DistributionSpec.from_matrices(2, maybe_njit(span), maybe_njit(ann)),
    )
    return CatalogEntry(
        name="knife_edge",
        description="knife edge / unicycle: slide along the heading only",
        spec=spec,
        default_state=PhasePoint(np.zeros(3), np.array([1.0, 0.0, 0.5])),
        cyclic=("x", "y"),
        default_mu=(1.0, 0.0),
        params={"mass": mass, "inertia": inertia},
    )


@lru_cache(maxsize=None)
def vertical_rolling_disk(mass=1.0, spin_inertia=1.0, roll_inertia=1.0, radius=1.0):
    """Upright disk rolling without slipping.

    Chart (x, y, theta, phi): contact point, heading, rolling angle, with
    xdot = R cos(theta) phidot and ydot = R sin(theta) phidot.  Heading and
    rolling rates are first integrals of the free motion.
    """
    R = float(radius)

    def span(q):
        out = np.empty((2, 4))
        out[0, 0] = R * np.cos(q[2])
        out[0, 1] = R * np.sin(q[2])
        out[0, 2] = 0.0
        out[0, 3] = 1.0
        out[1, 0] = 0.0
        out[1, 1] = 0.0
        out[1, 2] = 1.0
        out[1, 3] = 0.0
        return out

    def ann(q):
        out = np.zeros((2, 4))
        out[0, 0] = 1.0
        out[0, 3] = -R * np.cos(q[2])
        out[1, 1] = 1.0
        out[1, 3] = -R * np.sin(q[2])
        return out

    chart = ChartSpec(4, ("x", "y", "theta", "phi"), (False, False, True, True))
    lag = LagrangianSpec(
        _diag_mass((mass, mass, spin_inertia, roll_inertia)), _zero_potential()
    )
    spec = NonholonomicRCHSpec(
        mechanics=HamiltonianSystemSpec(chart, lag),
        distribution=DistributionSpec.from_matrices(2, maybe_njit(span), maybe_njit(ann)),
    )
    z0 = _feasible_state(spec, np.zeros(4), (0.5, 0.3))
    return CatalogEntry(
        name="vertical_rolling_disk",
        description="vertical rolling disk: no slip at the contact point",
        spec=spec,
        default_state=z0,
        cyclic=("x", "y", "phi"),
        default_mu=(float(z0.p[0]), float(z0.p[1]), float(z0.p[3])),
        params={
            "mass": mass,
            "spin_inertia": spin_inertia,
            "roll_inertia": roll_inertia,
            "radius": radius,
        },
    )


@lru_cache(maxsize=None)
def chaplygin_sleigh(mass=1.0, offset=0.5, inertia=1.0):
    """Sleigh with a knife-edge contact behind its center of mass.

    Chart (x, y, theta) at the contact point; the blade blocks sideways
    sliding: -sin(theta) xdot + cos(theta) ydot = 0.  The mass matrix is
    configuration-dependent through the center-of-mass offset.  Its full
    symmetry group is the planar motion group, which is not Abelian, so
    reduction requests are rejected; simulation works like any other entry.
    """
    m = float(mass)
    a = float(offset)
    Ic = float(inertia)

    def mass_matrix(q):
        s = np.sin(q[2])
        c = np.cos(q[2])
        out = np.empty((3, 3))
        out[0, 0] = m
        out[0, 1] = 0.0
        out[0, 2] = -m * a * s
        out[1, 0] = 0.0
        out[1, 1] = m
        out[1, 2] = m * a * c
        out[2, 0] = -m * a * s
        out[2, 1] = m * a * c
        out[2, 2] = Ic + m * a * a
        return out

    def span(q):
        out = np.empty((2, 3))
        out[0, 0] = np.cos(q[2])
        out[0, 1] = np.sin(q[2])
        out[0, 2] = 0.0
        out[1, 0] = 0.0
        out[1, 1] = 0.0
        out[1, 2] = 1.0
        return out

    def ann(q):
        out = np.empty((1, 3))
        out[0, 0] = -np.sin(q[2])
        out[0, 1] = np.cos(q[2])
        out[0, 2] = 0.0
        return out

    chart = ChartSpec(3, ("x", "y", "theta"), (False, False, True))
    lag = LagrangianSpec(maybe_njit(mass_matrix), _zero_potential())
    spec = NonholonomicRCHSpec(
        mechanics=HamiltonianSystemSpec(chart, lag),
        distribution=DistributionSpec.from_matrices(2, maybe_njit(span), maybe_njit(ann)),
    )
    entry = CatalogEntry(
        name="chaplygin_sleigh",
        description="Chaplygin sleigh: blade contact off the center of mass (simulation only)",
        spec=spec,
        default_state=_feasible_state(spec, np.zeros(3), (1.0, 0.4)),
        cyclic=(),
        symmetry_group="SE(2)",
        params={"mass": mass, "offset": offset, "inertia": inertia},
    )
    return entry


_BUILDERS = {
    "free_particle_2d": free_particle_2d,
    "knife_edge": knife_edge,
    "vertical_rolling_disk": vertical_rolling_disk,
    "chaplygin_sleigh": chaplygin_sleigh,
}


def catalog():
    """Names and descriptions of the built-in systems."""
    return {
        name: builder().description for name, builder in sorted(_BUILDERS.items())
    }


def get_entry(name, **params):
    if name not in _BUILDERS:
        raise ConfigError(f"unknown catalog system '{name}'")
    builder = _BUILDERS[name]
    if not params:
        return builder()
    try:
        return builder(**{k: (tuple(v) if isinstance(v, list) else v) for k, v in params.items()})
    except TypeError as exc:
        raise ConfigError(f"bad parameters for '{name}': {exc}") from None


# -- one-form families --------------------------------------------------------


def make_gamma(name, params, entry=None):
    """Named candidate one-forms gamma: Q -> T*Q."""
    params = dict(params or {})
    if name == "exact_linear":
        a = np.asarray(params["coefficients"], dtype=float)

        def gamma(q):
            return a.copy()

        return maybe_njit(gamma)
    if name == "exact_quadratic":
        Q = np.asarray(params["matrix"], dtype=float)
        a = np.asarray(params.get("offset", np.zeros(Q.shape[0])), dtype=float)

        def gamma(q):
            return Q @ q + a

        return maybe_njit(gamma)
    if name == "heading":
        c = float(params.get("c", 1.0))
        c_theta = float(params.get("c_theta", 0.5))

        def gamma(q):
            out = np.empty(3)
            out[0] = c * np.cos(q[2])
            out[1] = c * np.sin(q[2])
            out[2] = c_theta
            return out

        return maybe_njit(gamma)
    if name == "heading_perturbed":
        c = float(params.get("c", 1.0))
        c_theta = float(params.get("c_theta", 0.5))
        eps = float(params.get("eps", 0.1))

        def gamma(q):
            out = np.empty(3)
            out[0] = c * np.cos(q[2])
            out[1] = c * np.sin(q[2])
            out[2] = c_theta + eps * q[0]
            return out

        return maybe_njit(gamma)
    if name == "disk_rolling":
        if entry is None:
            raise ConfigError("disk_rolling gamma needs its catalog entry")
        p = entry.params
        m, I, J, R = p["mass"], p["spin_inertia"], p["roll_inertia"], p["radius"]
        c = float(params.get("c", 0.5))
        c_theta = float(params.get("c_theta", 0.3))

        def gamma(q):
            out = np.empty(4)
            out[0] = m * R * c * np.cos(q[2])
            out[1] = m * R * c * np.sin(q[2])
            out[2] = I * c_theta
            out[3] = J * c
            return out

        return maybe_njit(gamma)
    raise ConfigError(f"unknown gamma family '{name}'")


# -- symplectic map families ---------------------------------------------------


def make_epsilon(name, params, n):
    """Named phase-space maps used as Type II candidates."""
    params = dict(params or {})
    if name == "identity":
        def eps(z):
            return z.copy()

        return maybe_njit(eps)
    if name == "translate":
        shift = np.asarray(params["shift"], dtype=float)
        if shift.size != n:
            raise ConfigError("translate shift needs one entry per coordinate")

        def eps(z):
            out = z.copy()
            out[:n] = out[:n] + shift
            return out

        return maybe_njit(eps)
    if name == "momentum_shift":
        shift = np.asarray(params["shift"], dtype=float)
        if shift.size != n:
            raise ConfigError("momentum shift needs one entry per coordinate")

        def eps(z):
            out = z.copy()
            out[n:] = out[n:] + shift
            return out

        return maybe_njit(eps)
    raise ConfigError(f"unknown epsilon family '{name}'")
