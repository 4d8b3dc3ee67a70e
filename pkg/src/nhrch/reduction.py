"""Symmetry reduction for Abelian translation actions on cyclic coordinates.

Quotients are realized by canonical sections: representatives zero the
cyclic base coordinates (translation cotangent lifts fix all momenta, so
this is exact for the implemented group class).  The reduced distribution
is the push-down of the sub-bundle U of admissible directions that are
symplectically orthogonal to the vertical symmetries inside K; the reduced
two-form is evaluated on lifts into U, where it is independent of the lift
choice.

Momentum-level (point) reduction additionally pins the cyclic momenta to
the level value and drops them from the state; for Abelian groups the
coadjoint orbit through any level is the single point containing it, so
orbit reduction runs the same construction plus an orbit-form correction
that is identically zero (the structure constants vanish) and the two
pipelines must agree to machine precision.
"""

from dataclasses import dataclass

import numpy as np

from . import kernels
from .constraints import DistributionalSystem, NonholonomicSystem, as_system
from .errors import (
    EmptyLevelSetError,
    InvarianceError,
    RankError,
    SingularMatrixError,
    UnsupportedGroupError,
)
from .geometry import FD_DEFAULT, PhasePoint, subspace_gap, svd_solve_core

INVARIANCE_TOL = 1e-8

# deterministic group shifts used by the invariance checks
_SHIFTS = (0.7, -1.3, 2.1)


@dataclass(frozen=True)
class SymmetrySpec:
    """An Abelian translation action along the listed coordinate indices.

    Periodic coordinates contribute circle factors, the others line
    factors.  Non-translation groups are recorded by name only and are
    rejected by every reduction entry point.
    """

    cyclic_indices: tuple
    group: str = "translation"

    def __post_init__(self):
        idx = tuple(int(i) for i in self.cyclic_indices)
        object.__setattr__(self, "cyclic_indices", idx)
        if len(set(idx)) != len(idx):
            raise ValueError("cyclic indices must be distinct")

    @property
    def dim(self):
        return len(self.cyclic_indices)

    @staticmethod
    def from_names(chart, names, group="translation"):
        indices = tuple(chart.coord_names.index(nm) for nm in names)
        return SymmetrySpec(indices, group)

    def require_translation(self):
        if self.group != "translation":
            raise UnsupportedGroupError(
                f"group '{self.group}' needs coadjoint-orbit machinery beyond the "
                "Abelian translation class implemented here"
            )


@dataclass(frozen=True)
class MomentumValue:
    mu: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mu", np.asarray(self.mu, dtype=float))


def momentum_map(z, G):
    """Translation momentum: the cyclic components of p."""
    arr = z.as_array() if isinstance(z, PhasePoint) else np.asarray(z, float)
    n = arr.size // 2
    return MomentumValue(np.array([arr[n + i] for i in G.cyclic_indices]))


def _shifted(q, idx, amount):
    out = np.array(q, dtype=float)
    out[idx] += amount
    return out


@dataclass
class InvarianceReport:
    hamiltonian: float
    distribution: float
    force: float
    control: float
    gamma: float
    epsilon: float
    passed: bool

    def worst(self):
        return max(
            self.hamiltonian, self.distribution, self.force, self.control,
            self.gamma, self.epsilon,
        )


def check_invariance(spec, G, samples, gamma=None, epsilon=None, tol=INVARIANCE_TOL):
    """Residuals of the system data under sampled group translations.

    The distribution is compared through the spectral gap between its
    spans, everything else through direct component differences (the
    lifted translation action leaves tangent/cotangent components alone).
    """
    system = as_system(spec)
    n = system.n
    res_h = res_d = res_f = res_u = res_g = res_e = 0.0
    for z in samples:
        arr = z.as_array() if isinstance(z, PhasePoint) else np.asarray(z, float)
        q, p = arr[:n], arr[n:]
        for idx in G.cyclic_indices:
            for amount in _SHIFTS:
                qs = _shifted(q, idx, amount)
                res_h = max(res_h, abs(system.hamiltonian(np.concatenate([qs, p]))
                                       - system.hamiltonian(arr)))
                res_d = max(res_d, subspace_gap(
                    spec.distribution.span_at(q), spec.distribution.span_at(qs)))
                if spec.force is not None:
                    f0 = spec.force.at(PhasePoint(q, p))
                    f1 = spec.force.at(PhasePoint(qs, p))
                    res_f = max(res_f, float(np.max(np.abs(f1 - f0))))
                if spec.control is not None:
                    u0 = spec.control.at(PhasePoint(q, p))
                    u1 = spec.control.at(PhasePoint(qs, p))
                    res_u = max(res_u, float(np.max(np.abs(u1 - u0))))
                if gamma is not None:
                    res_g = max(res_g, float(np.max(np.abs(
                        np.asarray(gamma(qs), float) - np.asarray(gamma(q), float)))))
                if epsilon is not None:
                    shifted_in = np.concatenate([qs, p])
                    lhs = np.asarray(epsilon(shifted_in), float)
                    rhs = np.asarray(epsilon(arr), float).copy()
                    rhs[idx] += amount
                    res_e = max(res_e, float(np.max(np.abs(lhs - rhs))))
    report = InvarianceReport(
        hamiltonian=res_h, distribution=res_d, force=res_f, control=res_u,
        gamma=res_g, epsilon=res_e,
        passed=max(res_h, res_d, res_f, res_u, res_g, res_e) <= tol,
    )
    return report


def _reduced_kernels_for(system, cyclic_indices, mu=None, fd_step=FD_DEFAULT.step):
    """Memoize reduced kernels on the base system: compiled closures are
    expensive to rebuild."""
    cache = getattr(system, "_reduced_kernel_cache", None)
    if cache is None:
        cache = {}
        system._reduced_kernel_cache = cache
    key = (tuple(cyclic_indices), None if mu is None else tuple(np.asarray(mu, float)), fd_step)
    if key not in cache:
        cache[key] = kernels.build_reduced_kernels(
            system.kernels, cyclic_indices, mu=mu, fd_step=fd_step
        )
    return cache[key]


class ReducedSystem(DistributionalSystem):
    """Quotient system over canonical sections (shared by the cyclic and
    the momentum-level pipelines)."""

    def __init__(self, base, G, mu=None, fd=FD_DEFAULT):
        G.require_translation()
        self.base = base
        self.symmetry = G
        self.mu = None if mu is None else np.asarray(mu, dtype=float)
        self.fd = fd
        self.reduced_kernels = _reduced_kernels_for(
            base, G.cyclic_indices, mu=self.mu, fd_step=fd.step
        )
        n = base.n
        names = base.spec.chart.coord_names
        noncyc = [i for i in range(n) if i not in G.cyclic_indices]
        q_names = [f"q_{names[i]}" for i in noncyc]
        if self.level:
            p_names = [f"p_{names[i]}" for i in noncyc]
        else:
            p_names = [f"p_{names[i]}" for i in range(n)]
        self.state_names = tuple(q_names + p_names)

    # -- structure ---------------------------------------------------------

    @property
    def level(self):
        return self.mu is not None

    @property
    def ambient_dim(self):
        return self.reduced_kernels.dim_red

    @property
    def n(self):
        # length of the reduced configuration block
        return self.reduced_kernels.n_red_q

    def project_point(self, z):
        arr = z.as_array() if isinstance(z, PhasePoint) else np.asarray(z, float)
        nb = self.base.n
        return self.reduced_kernels.project_state(arr[:nb], arr[nb:])

    def section_point(self, y):
        q, p = self.reduced_kernels.section(np.asarray(y, dtype=float))
        return np.concatenate([q, p])

    def project_tangent(self, v):
        return self.reduced_kernels.project_tangent(np.asarray(v, dtype=float))

    def level_residual(self, z):
        if not self.level:
            return 0.0
        arr = z.as_array() if isinstance(z, PhasePoint) else np.asarray(z, float)
        nb = self.base.n
        vals = np.array([arr[nb + i] for i in self.symmetry.cyclic_indices])
        return float(np.max(np.abs(vals - self.mu)))

    def frame_and_lifts(self, y):
        q, p = self.reduced_kernels.section(np.asarray(y, dtype=float))
        frame, lifts, U = self.reduced_kernels.reduced_frame(q, p)
        return frame, lifts, U

    def orbit_form_correction(self, lifts):
        """Contribution of the coadjoint-orbit symplectic structure.

        Identically zero here: translation groups have vanishing structure
        constants, so the orbit pairing <nu, [xi, eta]> is zero for every
        pair of generators.
        """
        r = lifts.shape[0]
        return np.zeros((r, r))

    # -- DistributionalSystem interface -------------------------------------

    def membership_residual(self, y):
        return float(self.reduced_kernels.constraint_norm_bar(np.asarray(y, float)))

    def K_basis(self, y):
        frame, lifts, U = self.frame_and_lifts(y)
        return frame

    def omega_eval(self, y, v, w):
        """Pushed-down two-form, evaluated through lifts into U."""
        frame, lifts, U = self.frame_and_lifts(y)
        if frame.shape[0] == 0:
            return 0.0
        cv, *_ = np.linalg.lstsq(frame.T, np.asarray(v, float), rcond=None)
        cw, *_ = np.linalg.lstsq(frame.T, np.asarray(w, float), rcond=None)
        G = self.reduced_kernels.gram_bar(lifts) - self.orbit_form_correction(lifts)
        return float(cv @ G @ cw)

    def _unwrap(self, result, what):
        vec, status = result
        if status == kernels.BAD_RANK:
            raise RankError(f"{what}: reduced frame has unexpected dimension")
        if status == kernels.SINGULAR:
            raise SingularMatrixError(f"{what}: reduced two-form is degenerate")
        return vec

    def X_K(self, y, check=True):
        y = np.asarray(y, dtype=float)
        if check:
            self.require_on_manifold(y)
        return self._unwrap(self.reduced_kernels.x_k_bar(y), "reduced solve")

    def X_tilde(self, y, check=True):
        y = np.asarray(y, dtype=float)
        if check:
            self.require_on_manifold(y)
        return self._unwrap(self.reduced_kernels.x_tilde_bar(y), "reduced dynamics")

    def tau_ambient(self, y, a):
        """Restrict an ambient candidate vector (given upstairs) to the
        reduced distribution."""
        return self._unwrap(
            self.reduced_kernels.tau_bar(np.asarray(y, float), np.asarray(a, float)),
            "reduced restriction",
        )

    def hamiltonian(self, y):
        return float(self.reduced_kernels.h_bar(np.asarray(y, dtype=float)))

    # -- diagnostics ---------------------------------------------------------

    def structure_report(self, y):
        """Rank data and two-form conditioning at one reduced point."""
        frame, lifts, U = self.frame_and_lifts(y)
        G = self.reduced_kernels.gram_bar(lifts) - self.orbit_form_correction(lifts)
        r = frame.shape[0]
        if r:
            svals = np.linalg.svd(G)[1]
            nondeg = svals[-1] > 1e-10 * max(svals[0], 1.0)
        else:
            nondeg = True
        q, p = self.reduced_kernels.section(np.asarray(y, float))
        return {
            "frame_rank": int(r),
            "u_dim": int(U.shape[0]),
            "vk_dim": int(self.reduced_kernels.vk_basis(q, p).shape[0]),
            "even": r % 2 == 0,
            "nondegenerate": bool(nondeg),
        }


def _default_invariance_samples(spec, seed=123):
    from .constraints import random_on_m_points

    return random_on_m_points(spec, 8, seed=seed)


def v_cap_k_basis(spec, G, z):
    """Basis of the vertical symmetries lying inside the admissible directions."""
    system = as_system(spec)
    q, p = system.split(z)
    red = _reduced_kernels_for(system, G.cyclic_indices)
    return red.vk_basis(q, p)


def u_basis(spec, G, z):
    """Basis of the push-down-compatible sub-bundle U inside K."""
    system = as_system(spec)
    q, p = system.split(z)
    red = _reduced_kernels_for(system, G.cyclic_indices)
    U = red.u_basis(q, p)
    VK = red.vk_basis(q, p)
    expected = system.kernels.k * 2 - VK.shape[0]
    if U.shape[0] != expected:
        raise RankError(
            f"U has dimension {U.shape[0]}, expected {expected} (2k - dim V∩K)"
        )
    return U


def _construction_checks(system, probe_points):
    """Nondegeneracy gate run on reduced data before the system is used."""
    for y in probe_points:
        rep = system.structure_report(y)
        if not rep["even"]:
            raise RankError(f"reduced frame rank {rep['frame_rank']} is odd at a probe point")
        if not rep["nondegenerate"]:
            raise SingularMatrixError("reduced two-form degenerate at a probe point")
    return system


def reduced_system(spec, G, fd=FD_DEFAULT, invariance_samples=None, check=True):
    """Quotient by the translation action; all momenta stay dynamic."""
    G.require_translation()
    system = as_system(spec)
    if check:
        samples = invariance_samples or _default_invariance_samples(spec)
        report = check_invariance(spec, G, samples)
        if not report.passed:
            raise InvarianceError(
                f"system data not invariant (worst residual {report.worst():.3e})", report
            )
    reduced = ReducedSystem(system, G, mu=None, fd=fd)
    if check:
        probes = [reduced.project_point(z) for z in _default_invariance_samples(spec, seed=321)]
        _construction_checks(reduced, probes)
    return reduced


def _level_feasible_point(system, G, mu, starts=16, seed=11):
    """Search the section for a feasible representative of the level set.

    On the section the cyclic momenta are pinned, so at a fixed
    configuration the best free momenta solve a linear least-squares
    problem; the remaining residual is minimized over the non-cyclic
    configuration by multistart coordinate descent (feasible
    configurations can be a measure-zero set, e.g. isolated headings).
    """
    rng = np.random.default_rng(seed)
    n = system.n
    chart = system.spec.chart
    cyc = list(G.cyclic_indices)
    noncyc = [i for i in range(n) if i not in cyc]
    mu = np.asarray(mu, dtype=float)

    def assemble(qfree):
        q = np.zeros(n)
        for j, i in enumerate(noncyc):
            q[i] = qfree[j]
        A = spec_ann(system, q)
        Minv = np.linalg.solve(
            np.asarray(system.spec.mechanics.lagrangian.mass_matrix(q), float), np.eye(n)
        )
        B = A @ Minv  # residual c = B p, linear in p
        p = np.zeros(n)
        for a, i in enumerate(cyc):
            p[i] = mu[a]
        if noncyc and B.shape[0]:
            rhs = -B @ p
            sol, *_ = np.linalg.lstsq(B[:, noncyc], rhs, rcond=None)
            for j, i in enumerate(noncyc):
                p[i] = sol[j]
        resid = float(np.max(np.abs(B @ p))) if B.shape[0] else 0.0
        return np.concatenate([q, p]), resid

    def residual_of(qfree):
        return assemble(qfree)[1]

    best, best_resid = assemble(np.zeros(len(noncyc)))
    if best_resid < 1e-10 or not noncyc:
        return best, best_resid
    for _ in range(starts):
        qfree = np.array(
            [
                rng.uniform(0.0, 2 * np.pi) if chart.periodic[i] else rng.uniform(-2.0, 2.0)
                for i in noncyc
            ]
        )
        f = residual_of(qfree)
        scale = 1.0
        while scale > 1e-12 and f > 1e-12:
            improved = False
            for j in range(qfree.size):
                for s in (scale, -scale):
                    trial = qfree.copy()
                    trial[j] += s
                    ft = residual_of(trial)
                    if ft < f:
                        qfree, f = trial, ft
                        improved = True
            if not improved:
                scale *= 0.5
        if f < best_resid:
            best, best_resid = assemble(qfree)
        if best_resid < 1e-10:
            break
    return best, best_resid


def spec_ann(system, q):
    return system.spec.distribution.ann_at(q)


def rp_reduced_system(spec, G, mu, fd=FD_DEFAULT, invariance_samples=None, check=True):
    """Momentum-level (point) reduction at mu.

    The section pins the cyclic momenta to mu and zeroes the cyclic base
    coordinates; construction fails with EmptyLevelSetError when no
    feasible representative exists on the level.
    """
    G.require_translation()
    if len(G.cyclic_indices) != np.asarray(mu, float).size:
        raise ValueError("momentum value length must match the group dimension")
    system = as_system(spec)
    if check:
        samples = invariance_samples or _default_invariance_samples(spec)
        report = check_invariance(spec, G, samples)
        if not report.passed:
            raise InvarianceError(
                f"system data not invariant (worst residual {report.worst():.3e})", report
            )
    probe, resid = _level_feasible_point(system, G, mu)
    if resid > 1e-8:
        raise EmptyLevelSetError(
            f"constraint set misses the momentum level (best residual {resid:.3e})"
        )
    reduced = ReducedSystem(system, G, mu=mu, fd=fd)
    if check and reduced.ambient_dim > 0:
        _construction_checks(reduced, [reduced.project_point(probe)])
    return reduced


class OrbitReducedSystem(ReducedSystem):
    """Orbit-quotient pipeline, valid for Abelian groups only.

    The coadjoint orbit through the level is the single point containing
    it, the orbit symplectic structure vanishes with the structure
    constants, and the result must match the point-reduced system to
    machine precision; the correction term is kept explicit so that the
    agreement is a genuine cross-check of the wiring.
    """


def ro_reduced_system(spec, G, mu, fd=FD_DEFAULT, invariance_samples=None, check=True):
    G.require_translation()
    system = as_system(spec)
    if check:
        samples = invariance_samples or _default_invariance_samples(spec)
        report = check_invariance(spec, G, samples)
        if not report.passed:
            raise InvarianceError(
                f"system data not invariant (worst residual {report.worst():.3e})", report
            )
    probe, resid = _level_feasible_point(system, G, mu)
    if resid > 1e-8:
        raise EmptyLevelSetError(
            f"constraint set misses the momentum orbit (best residual {resid:.3e})"
        )
    reduced = OrbitReducedSystem(system, G, mu=mu, fd=fd)
    if check and reduced.ambient_dim > 0:
        _construction_checks(reduced, [reduced.project_point(probe)])
    return reduced


def pi_relatedness_residual(base, reduced, z):
    """|| Tpi(X_tilde(z)) - X_hat(pi(z)) || in reduced coordinates."""
    base = as_system(base) if not isinstance(base, DistributionalSystem) else base
    arr = z.as_array() if isinstance(z, PhasePoint) else np.asarray(z, float)
    down = reduced.project_tangent(base.X_tilde(arr))
    up = reduced.X_tilde(reduced.project_point(arr))
    return float(np.linalg.norm(down - up))


def momentum_drift(spec, G, trajectory):
    """Per-component momentum drift over an integrated trajectory.

    Momentum along non-horizontal generators is not conserved by
    constrained dynamics; this measures it rather than asserting it.
    """
    n = as_system(spec).n
    cols = [n + i for i in G.cyclic_indices]
    series = trajectory.states[:, cols]
    return np.max(np.abs(series - series[0]), axis=0)
