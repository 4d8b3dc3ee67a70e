"""Residual-based verification of the Type I and Type II Hamilton-Jacobi
equations for constrained controlled systems, generic over the base system
and every reduction.

A candidate one-form gamma solves the Type I equation when transporting
the projected dynamics back through gamma reproduces the constrained
vector field along its image; a phase-space map epsilon solves the Type II
equation when the analogous identity holds through epsilon.  Both are
checked as pointwise residuals, together with the hypotheses that the
theorems place on gamma and epsilon (image inside the constraint set,
tangent image inside the admissible directions, closedness on the
distribution, symplecticity, invariance).  Failed hypotheses are reported
with their measured size, never assumed.
"""

from dataclasses import dataclass, field

import numpy as np

from .constraints import DistributionalSystem, as_system
from .errors import PreconditionError
from .geometry import (
    FD_DEFAULT,
    PhasePoint,
    exterior_d_oneform,
    fd_gradient,
    fd_jacobian,
)
from .reduction import ReducedSystem, check_invariance

DEFAULT_TOL = 1e-6


@dataclass(frozen=True)
class OneFormField:
    """A candidate solution gamma: Q -> T*Q, given by its components."""

    components: object
    name: str = "gamma"

    def __call__(self, q):
        return np.asarray(self.components(np.asarray(q, dtype=float)), dtype=float)


@dataclass(frozen=True)
class SymplecticMapSpec:
    """A phase-space map together with a pointwise symplecticity check."""

    map: object
    name: str = "epsilon"

    def __call__(self, z):
        return np.asarray(self.map(np.asarray(z, dtype=float)), dtype=float)

    def symplectic_defect(self, z, cfg=FD_DEFAULT):
        """|| (De)' J (De) - J || at z for the canonical symplectic matrix J."""
        z = np.asarray(z, dtype=float)
        n = z.size // 2
        D = fd_jacobian(self.map, z, cfg)
        J = np.zeros((2 * n, 2 * n))
        J[:n, n:] = np.eye(n)
        J[n:, :n] = -np.eye(n)
        return float(np.max(np.abs(D.T @ J @ D - J)))


@dataclass
class HJReport:
    """Residuals of one Hamilton-Jacobi check over a point set."""

    kind: str
    tolerance: float
    points: list = field(default_factory=list)
    residuals: list = field(default_factory=list)
    extra_residuals: list = field(default_factory=list)  # second residual family
    preconditions: dict = field(default_factory=dict)
    precondition_ok: bool = True
    equivalence_ok: bool = True
    note: str = ""

    @property
    def max_residual(self):
        vals = [r for r in self.residuals if np.isfinite(r)]
        return max(vals) if vals else float("nan")

    @property
    def mean_residual(self):
        vals = [r for r in self.residuals if np.isfinite(r)]
        return float(np.mean(vals)) if vals else float("nan")

    @property
    def verdict(self):
        finite = [r for r in self.residuals if np.isfinite(r)]
        return (
            bool(finite)
            and self.precondition_ok
            and self.equivalence_ok
            and self.max_residual < self.tolerance
        )

    def summary(self):
        return {
            "kind": self.kind,
            "tolerance": self.tolerance,
            "points": len(self.residuals),
            "max_residual": self.max_residual,
            "mean_residual": self.mean_residual,
            "preconditions": self.preconditions,
            "precondition_ok": self.precondition_ok,
            "equivalence_ok": self.equivalence_ok,
            "verdict": self.verdict,
            "note": self.note,
        }


def default_grid(chart, periodic_points=8, linear_points=5, linear_range=(-2.0, 2.0)):
    """Product grid: evenly spaced angles, evenly spaced box for the rest."""
    axes = []
    for i in range(chart.dim):
        if chart.periodic[i]:
            axes.append(np.linspace(0.0, 2.0 * np.pi, periodic_points, endpoint=False))
        else:
            axes.append(np.linspace(linear_range[0], linear_range[1], linear_points))
    mesh = np.meshgrid(*axes, indexing="ij")
    return [np.array(pt) for pt in zip(*(m.ravel() for m in mesh))]


# -- closedness ----------------------------------------------------------------


def closedness_on_d_residual(gamma, distribution, q, cfg=FD_DEFAULT):
    """max |d(gamma)(E_a, E_b)| over the spanning pairs at q; zero iff the
    form is closed on the distribution there."""
    E = distribution.span_at(q)
    worst = 0.0
    for a in range(E.shape[0]):
        for b in range(a + 1, E.shape[0]):
            worst = max(worst, abs(exterior_d_oneform(gamma, q, E[a], E[b], cfg)))
    return worst


def closedness_full_residual(gamma, q, cfg=FD_DEFAULT):
    """max |d(gamma)(e_i, e_j)| over coordinate pairs; zero iff gamma is
    closed at q."""
    q = np.asarray(getattr(q, "q", q), dtype=float)
    n = q.size
    worst = 0.0
    for i in range(n):
        ei = np.zeros(n)
        ei[i] = 1.0
        for j in range(i + 1, n):
            ej = np.zeros(n)
            ej[j] = 1.0
            worst = max(worst, abs(exterior_d_oneform(gamma, q, ei, ej, cfg)))
    return worst


# -- pullback identities --------------------------------------------------------


def _lambda_map(gamma, n):
    """lambda = gamma o pi_Q as a phase-space self-map."""

    def lam(z):
        return np.concatenate([z[:n], gamma(z[:n])])

    return lam


def _omega(v, w):
    n = v.size // 2
    return float(v[:n] @ w[n:] - w[:n] @ v[n:])


def lemma33_checks(spec, gamma, z, v, w, cfg=FD_DEFAULT):
    """Three pullback identities tying gamma, the canonical form, and the
    projected Hamiltonian flow together; returns their residuals.

    (i)   pulling the canonical form back through gamma o pi_Q equals
          minus the exterior derivative of gamma on projected arguments;
    (ii)  the rearranged pairing identity used throughout the Type I/II
          proofs;
    (iii) for gamma with image in the constraint set, the projected
          Hamiltonian field along gamma stays inside the distribution.
    """
    system = as_system(spec)
    n = system.n
    z = z.as_array() if isinstance(z, PhasePoint) else np.asarray(z, float)
    v = np.asarray(v, dtype=float)
    w = np.asarray(w, dtype=float)
    lam = _lambda_map(gamma, n)
    Tlam = fd_jacobian(lam, z, cfg)
    dg = exterior_d_oneform(gamma, z[:n], v[:n], w[:n], cfg)

    pullback = _omega(Tlam @ v, Tlam @ w)
    r1 = abs(pullback + dg)

    r2 = abs(_omega(Tlam @ v, w) - _omega(v, w - Tlam @ w) + dg)

    q = z[:n]
    zg = np.concatenate([q, gamma(q)])
    xh = system.X_H(zg)
    A = system.spec.distribution.ann_at(q)
    r3 = float(np.max(np.abs(A @ xh[:n]))) if A.shape[0] else 0.0
    return r1, r2, r3


# -- hypothesis measurements ----------------------------------------------------


def gamma_preconditions(system, gamma, q, cfg=FD_DEFAULT):
    """Measured hypotheses at one configuration: the image of gamma on the
    constraint set, its tangent image inside the admissible directions on
    distribution arguments, and closedness on the distribution."""
    base = _base_of(system)
    n = base.n
    q = np.asarray(getattr(q, "q", q), dtype=float)
    zg = np.concatenate([q, gamma(q)])
    out = {"membership": float(base.membership_residual(zg))}

    tangent_resid = 0.0
    if out["membership"] < 1e-6:
        try:
            B = base.K_basis(zg, check=False)
        except Exception:
            B = None
        if B is not None and B.shape[0]:
            Dg = fd_jacobian(gamma, q, cfg)
            E = base.spec.distribution.span_at(q)
            for a in range(E.shape[0]):
                vec = np.concatenate([E[a], Dg @ E[a]])
                proj = B.T @ (B @ vec)
                tangent_resid = max(tangent_resid, float(np.max(np.abs(vec - proj))))
    out["tangent_image"] = tangent_resid
    out["closedness_on_d"] = closedness_on_d_residual(
        gamma, base.spec.distribution, q, cfg
    )
    return out


def _base_of(system):
    if isinstance(system, ReducedSystem):
        return system.base
    return system


def _require(ok, residuals, what):
    if not ok:
        raise PreconditionError(f"hypotheses of the {what} check failed", residuals)


# -- Type I ----------------------------------------------------------------------


def type1_residual(system, gamma, q, cfg=FD_DEFAULT, check=True, tol=1e-6):
    """|| Tgamma . projected-dynamics - constrained-field o gamma || at q."""
    system = as_system(system)
    q = np.asarray(getattr(q, "q", q), dtype=float)
    if check:
        pre = gamma_preconditions(system, gamma, q, cfg)
        _require(max(pre.values()) < tol, pre, "Type I")
    n = system.n
    zg = np.concatenate([q, gamma(q)])
    xt = system.X_tilde(zg)
    flow = xt[:n]
    Dg = fd_jacobian(gamma, q, cfg)
    lhs = np.concatenate([flow, Dg @ flow])
    rhs = system.X_K(zg)
    return float(np.linalg.norm(lhs - rhs))


def type1_report(system, gamma, grid, tol=DEFAULT_TOL, cfg=FD_DEFAULT):
    """Type I residuals over a configuration grid, hypotheses included."""
    system = as_system(system)
    report = HJReport(kind="type1", tolerance=tol)
    worst_pre = {"membership": 0.0, "tangent_image": 0.0, "closedness_on_d": 0.0}
    for q in grid:
        pre = gamma_preconditions(system, gamma, q, cfg)
        for key in worst_pre:
            worst_pre[key] = max(worst_pre[key], pre[key])
        try:
            res = type1_residual(system, gamma, q, cfg, check=False)
        except Exception:
            res = float("nan")
        report.points.append(np.asarray(q, float))
        report.residuals.append(res)
    report.preconditions = worst_pre
    report.precondition_ok = max(worst_pre.values()) < tol
    return report


# -- Type II ---------------------------------------------------------------------


def type2_preconditions(system, gamma, eps, z, cfg=FD_DEFAULT):
    """Measured hypotheses for the Type II check at one phase point."""
    base = _base_of(system)
    z = z.as_array() if isinstance(z, PhasePoint) else np.asarray(z, float)
    n = base.n
    out = {
        "state_membership": float(base.membership_residual(z)),
        "eps_preserves_M": float(base.membership_residual(eps(z))),
        "symplectic_defect": eps.symplectic_defect(z, cfg)
        if isinstance(eps, SymplecticMapSpec)
        else SymplecticMapSpec(eps).symplectic_defect(z, cfg),
        "gamma_membership": float(
            base.membership_residual(np.concatenate([z[:n], gamma(z[:n])]))
        ),
    }
    return out


def type2_residuals(system, gamma, eps, z, cfg=FD_DEFAULT, check=True, tol=1e-6):
    """The two Type II residuals at z.

    r1 transports the projected dynamics through gamma and compares with
    the constrained field at eps(z); r2 compares the restricted push of
    the Hamiltonian field of H o eps with the transport of the dynamics
    through gamma o pi_Q.  The theorem asserts r1 and r2 vanish together.
    """
    system = as_system(system)
    z = z.as_array() if isinstance(z, PhasePoint) else np.asarray(z, float)
    if check:
        pre = type2_preconditions(system, gamma, eps, z, cfg)
        _require(max(pre.values()) < max(tol, 1e-5), pre, "Type II")
    n = system.n
    ez = eps(z)
    qe = ez[:n]

    xt_e = system.X_tilde(ez)
    Dg = fd_jacobian(gamma, qe, cfg)
    lhs1 = np.concatenate([xt_e[:n], Dg @ xt_e[:n]])
    rhs1 = system.X_K(ez)
    r1 = float(np.linalg.norm(lhs1 - rhs1))

    def h_eps(zz):
        return system.hamiltonian(eps(zz))

    g = fd_gradient(h_eps, z, cfg)
    x_heps = np.concatenate([g[n:], -g[:n]])
    Teps = fd_jacobian(eps, z, cfg)
    candidate = Teps @ x_heps
    lhs2 = system.tau_K(ez, candidate)
    lam = _lambda_map(gamma, n)
    Tlam = fd_jacobian(lam, ez, cfg)
    rhs2 = Tlam @ xt_e
    r2 = float(np.linalg.norm(lhs2 - rhs2))
    return r1, r2


def type2_report(system, gamma, eps, points, tol=DEFAULT_TOL, cfg=FD_DEFAULT):
    """Type II residual pairs over phase points, with the equivalence
    verdict (r1 and r2 pass or fail together at every point)."""
    system = as_system(system)
    report = HJReport(kind="type2", tolerance=tol)
    worst_pre = {}
    agree = True
    for z in points:
        pre = type2_preconditions(system, gamma, eps, z, cfg)
        for key, val in pre.items():
            worst_pre[key] = max(worst_pre.get(key, 0.0), val)
        try:
            r1, r2 = type2_residuals(system, gamma, eps, z, cfg, check=False)
        except Exception:
            r1, r2 = float("nan"), float("nan")
        report.points.append(np.asarray(getattr(z, "q", z), float))
        report.residuals.append(r1)
        report.extra_residuals.append(r2)
        if np.isfinite(r1) and np.isfinite(r2):
            agree = agree and ((r1 < tol) == (r2 < tol))
        else:
            agree = False
    report.preconditions = worst_pre
    report.precondition_ok = max(worst_pre.values()) < max(tol, 1e-5) if worst_pre else True
    report.equivalence_ok = agree
    report.note = "residuals: r1; extra_residuals: r2"
    return report


# -- reduced variants ------------------------------------------------------------


def _check_gamma_invariance(reduced, gamma, samples=None):
    from .constraints import random_on_m_points

    samples = samples or random_on_m_points(reduced.base.spec, 6, seed=77)
    rep = check_invariance(
        reduced.base.spec, reduced.symmetry, samples, gamma=gamma
    )
    if rep.gamma > 1e-8:
        from .errors import InvarianceError

        raise InvarianceError(
            f"one-form is not invariant under the group action ({rep.gamma:.3e})", rep
        )


def reduced_gamma_map(reduced, gamma):
    """gamma pushed to the quotient: q -> pi(gamma(q))."""
    nb = reduced.base.n

    def gbar(q):
        q = np.asarray(q, dtype=float)
        return reduced.project_point(np.concatenate([q, gamma(q)]))

    return gbar


def type1_reduced_residual(reduced, gamma, q, cfg=FD_DEFAULT, check=True, tol=1e-6):
    """Type I residual for the quotient system: the pushed-down form
    against the reduced constrained field."""
    q = np.asarray(getattr(q, "q", q), dtype=float)
    if check:
        _check_gamma_invariance(reduced, gamma)
        pre = gamma_preconditions(reduced, gamma, q, cfg)
        _require(max(pre.values()) < tol, pre, "reduced Type I")
    base = reduced.base
    n = base.n
    zg = np.concatenate([q, gamma(q)])
    if reduced.level:
        lev = reduced.level_residual(zg)
        if check:
            _require(lev < 1e-8, {"level": lev}, "reduced Type I (momentum level)")
    xt = base.X_tilde(zg)
    flow = xt[:n]
    gbar = reduced_gamma_map(reduced, gamma)
    Dgbar = fd_jacobian(gbar, q, cfg)
    lhs = Dgbar @ flow
    rhs = reduced.X_K(gbar(q))
    return float(np.linalg.norm(lhs - rhs))


def type1_reduced_report(reduced, gamma, grid, tol=DEFAULT_TOL, cfg=FD_DEFAULT, check_invariant=True):
    """Reduced Type I residuals over the feasible part of a grid.

    For momentum-level systems only configurations whose gamma-image sits
    on the requested level enter; the report counts the points skipped."""
    if check_invariant:
        _check_gamma_invariance(reduced, gamma)
    report = HJReport(kind="type1_reduced", tolerance=tol)
    base = reduced.base
    n = base.n
    worst_pre = {"membership": 0.0, "tangent_image": 0.0, "closedness_on_d": 0.0}
    skipped = 0
    for q in grid:
        q = np.asarray(getattr(q, "q", q), dtype=float)
        zg = np.concatenate([q, gamma(q)])
        if reduced.level and reduced.level_residual(zg) > 1e-8:
            skipped += 1
            continue
        pre = gamma_preconditions(reduced, gamma, q, cfg)
        for key in worst_pre:
            worst_pre[key] = max(worst_pre[key], pre[key])
        try:
            res = type1_reduced_residual(reduced, gamma, q, cfg, check=False)
        except Exception:
            res = float("nan")
        report.points.append(q)
        report.residuals.append(res)
    report.preconditions = worst_pre
    report.precondition_ok = max(worst_pre.values()) < tol
    report.note = f"skipped {skipped} off-level grid points"
    return report


def type2_reduced_residuals(reduced, gamma, eps, z, cfg=FD_DEFAULT, check=True, tol=1e-6):
    """Reduced Type II residual pair at a feasible phase point.

    All candidate vectors are computed upstairs in the ambient chart and
    pushed down; the restriction to the reduced distribution pairs the
    ambient representative against lifts of the reduced frame, which is
    exactly where the pushed-down two-form is well-defined.
    """
    base = reduced.base
    z = z.as_array() if isinstance(z, PhasePoint) else np.asarray(z, float)
    n = base.n
    if check:
        _check_gamma_invariance(reduced, gamma)
        from .constraints import random_on_m_points

        samples = random_on_m_points(base.spec, 6, seed=78)
        rep = check_invariance(base.spec, reduced.symmetry, samples,
                               epsilon=eps.map if isinstance(eps, SymplecticMapSpec) else eps)
        if rep.epsilon > 1e-8:
            from .errors import InvarianceError

            raise InvarianceError(
                f"phase-space map is not equivariant ({rep.epsilon:.3e})", rep
            )
        pre = type2_preconditions(reduced, gamma, eps, z, cfg)
        _require(max(pre.values()) < max(tol, 1e-5), pre, "reduced Type II")
        if reduced.level:
            lev = max(reduced.level_residual(z), reduced.level_residual(eps(z)))
            _require(lev < 1e-8, {"level": lev}, "reduced Type II (momentum level)")

    ez = eps(z)
    ybar_e = reduced.project_point(ez)

    xt_e = base.X_tilde(ez)
    gbar = reduced_gamma_map(reduced, gamma)
    Dgbar = fd_jacobian(gbar, ez[:n], cfg)
    lhs1 = Dgbar @ xt_e[:n]
    rhs1 = reduced.X_K(ybar_e)
    r1 = float(np.linalg.norm(lhs1 - rhs1))

    def h_eps_bar(zz):
        return reduced.hamiltonian(reduced.project_point(eps(zz)))

    g = fd_gradient(h_eps_bar, z, cfg)
    x_heps = np.concatenate([g[n:], -g[:n]])
    Teps = fd_jacobian(eps, z, cfg)
    candidate = Teps @ x_heps
    lhs2 = reduced.tau_ambient(ybar_e, candidate)

    def lam_bar(zz):
        return reduced.project_point(np.concatenate([zz[:n], gamma(zz[:n])]))

    Tlam_bar = fd_jacobian(lam_bar, ez, cfg)
    rhs2 = Tlam_bar @ xt_e
    r2 = float(np.linalg.norm(lhs2 - rhs2))
    return r1, r2


def type2_reduced_report(reduced, gamma, eps, points, tol=DEFAULT_TOL, cfg=FD_DEFAULT,
                         check_invariant=True):
    """Reduced Type II residuals with the equivalence verdict and the
    base-to-reduced correspondence verdict at every point."""
    if check_invariant:
        _check_gamma_invariance(reduced, gamma)
    base = reduced.base
    report = HJReport(kind="type2_reduced", tolerance=tol)
    agree = True
    correspond = True
    worst_pre = {}
    skipped = 0
    for z in points:
        arr = z.as_array() if isinstance(z, PhasePoint) else np.asarray(z, float)
        if reduced.level and (
            reduced.level_residual(arr) > 1e-8
            or reduced.level_residual(eps(arr)) > 1e-8
        ):
            skipped += 1
            continue
        pre = type2_preconditions(reduced, gamma, eps, arr, cfg)
        for key, val in pre.items():
            worst_pre[key] = max(worst_pre.get(key, 0.0), val)
        try:
            r1, r2 = type2_reduced_residuals(reduced, gamma, eps, arr, cfg, check=False)
            rb1, rb2 = type2_residuals(base, gamma, eps, arr, cfg, check=False)
        except Exception:
            r1 = r2 = rb1 = rb2 = float("nan")
        report.points.append(arr)
        report.residuals.append(r1)
        report.extra_residuals.append(r2)
        if all(np.isfinite(v) for v in (r1, r2, rb1, rb2)):
            agree = agree and ((r1 < tol) == (r2 < tol))
            correspond = correspond and ((rb1 < tol) == (r1 < tol))
        else:
            agree = correspond = False
    report.preconditions = worst_pre
    report.precondition_ok = max(worst_pre.values()) < max(tol, 1e-5) if worst_pre else True
    report.equivalence_ok = agree and correspond
    report.note = (
        f"equivalence within the reduced system and correspondence with the base "
        f"system both required; skipped {skipped} off-level points"
    )
    return report


def closedness_hierarchy(gamma, distribution, grid, cfg=FD_DEFAULT):
    """(max full-closedness residual, max on-distribution residual) over a
    grid; closedness implies closedness on the distribution but not back."""
    full = 0.0
    on_d = 0.0
    for q in grid:
        full = max(full, closedness_full_residual(gamma, q, cfg))
        on_d = max(on_d, closedness_on_d_residual(gamma, distribution, q, cfg))
    return full, on_d
