"""Nonholonomic constraint distributions and the induced constrained dynamics.

The constraint set inside phase space is carried implicitly by the residual
c(q, p) = A(q) M(q)^{-1} p, whose vanishing says the velocity of (q, p)
satisfies the constraint.  All pointwise objects (admissible directions,
restricted two-form, constrained vector field) come out of kernel/rank
computations in ambient chart coordinates.
"""

import weakref
from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np

from . import accel, kernels
from .errors import OffManifoldError, RankError, SingularMatrixError
from .geometry import (
    FD_DEFAULT,
    RANK_RTOL,
    FDConfig,
    PhasePoint,
    TangentVec,
    lie_bracket,
    matrix_rank,
    nullspace,
    nullspace_core,
    row_span_basis,
    subspace_intersection,
)
from .mechanics import HamiltonianSystemSpec, hamiltonian_vector_field

# membership tolerance for "the point sits on the constraint set"
ON_M_TOL = 1e-8


@dataclass(frozen=True)
class DistributionSpec:
    """A constant-rank velocity distribution, given by spanning fields and
    (optionally) annihilator one-forms.

    ``spanning_fields`` holds k callables q -> (n,); ``annihilators`` holds
    n - k callables q -> (n,) or None, in which case annihilators are
    derived pointwise as the kernel of the span.  The fused ``*_matrix``
    callables (q -> stacked rows) are optional fast paths; when they are
    numba dispatchers the whole constrained pipeline compiles.
    """

    rank: int
    spanning_fields: tuple
    annihilators: tuple = None
    span_matrix: object = None
    annihilator_matrix: object = None

    def __post_init__(self):
        object.__setattr__(self, "spanning_fields", tuple(self.spanning_fields))
        if self.annihilators is not None:
            object.__setattr__(self, "annihilators", tuple(self.annihilators))
        if len(self.spanning_fields) != self.rank:
            raise ValueError("number of spanning fields must equal the rank")

    @staticmethod
    def from_matrices(rank, span_matrix, annihilator_matrix=None):
        fields = tuple(
            (lambda q, _i=i, _m=span_matrix: np.asarray(_m(q), float)[_i])
            for i in range(rank)
        )
        return DistributionSpec(
            rank=rank,
            spanning_fields=fields,
            annihilators=None,
            span_matrix=span_matrix,
            annihilator_matrix=annihilator_matrix,
        )

    def span_at(self, q):
        q = np.asarray(getattr(q, "q", q), dtype=float)
        if self.span_matrix is not None:
            return np.asarray(self.span_matrix(q), dtype=float)
        return np.stack([np.asarray(f(q), float) for f in self.spanning_fields])

    def ann_at(self, q):
        q = np.asarray(getattr(q, "q", q), dtype=float)
        if self.annihilator_matrix is not None:
            return np.asarray(self.annihilator_matrix(q), dtype=float)
        if self.annihilators is not None:
            if len(self.annihilators) == 0:
                return np.zeros((0, q.size))
            return np.stack([np.asarray(a(q), float) for a in self.annihilators])
        return nullspace(self.span_at(q))

    def validate_at(self, q, n):
        E = self.span_at(q)
        A = self.ann_at(q)
        if E.shape != (self.rank, n):
            raise ValueError("spanning fields have the wrong shape")
        if A.shape != (n - self.rank, n):
            raise ValueError("annihilators have the wrong shape")
        if matrix_rank(E) != self.rank:
            raise ValueError("spanning fields are not pointwise independent")
        if A.shape[0] and matrix_rank(A) != n - self.rank:
            raise ValueError("annihilators are not pointwise independent")
        pairing = float(np.max(np.abs(A @ E.T))) if A.shape[0] else 0.0
        if pairing > 1e-10:
            raise ValueError(f"annihilators do not annihilate the span ({pairing:.2e})")
        return {"pairing_defect": pairing}


def full_distribution(n):
    """The unconstrained case: the distribution is the whole tangent bundle."""

    def span(q):
        return np.eye(n)

    def ann(q):
        return np.zeros((0, n))

    span_c = accel.maybe_njit(span)
    ann_c = accel.maybe_njit(ann)
    return DistributionSpec.from_matrices(n, span_c, ann_c)


@dataclass(frozen=True)
class NonholonomicRCHSpec:
    """A controlled Hamiltonian system subject to a velocity constraint.

    ``force`` and ``control`` are generalized covector fields on phase
    space entering the dynamics through vertical lifts; either may be None.
    """

    mechanics: HamiltonianSystemSpec
    distribution: DistributionSpec
    force: object = None
    control: object = None

    @property
    def chart(self):
        return self.mechanics.chart

    @property
    def n(self):
        return self.mechanics.chart.dim

    @property
    def k(self):
        return self.distribution.rank


def _pair_callable(field, n):
    """Extract a (q, p) -> (n,) callable from a vertical-field object."""
    if field is None:
        return None
    pair = getattr(field, "pair", None)
    if pair is not None:
        return pair
    comp = getattr(field, "components", field)

    def wrapped(q, p):
        return np.asarray(comp(PhasePoint(q, p)), dtype=float)

    return wrapped


class DistributionalSystem(ABC):
    """Pointwise interface shared by the base system and every reduction.

    States are flat arrays; the base system uses (q, p) concatenated, a
    reduced system uses its own section coordinates.  ``membership_residual``
    measures distance to the constraint set, ``K_basis`` spans the
    admissible directions, ``omega_eval`` is the induced two-form on them,
    and ``X_K`` / ``X_tilde`` solve the distributional equation without and
    with the external force and control terms.
    """

    @property
    @abstractmethod
    def ambient_dim(self):
        """Length of the flat state vector."""

    @abstractmethod
    def membership_residual(self, z):
        pass

    @abstractmethod
    def K_basis(self, z):
        pass

    @abstractmethod
    def omega_eval(self, z, v, w):
        pass

    @abstractmethod
    def X_K(self, z):
        pass

    @abstractmethod
    def X_tilde(self, z):
        pass

    @abstractmethod
    def hamiltonian(self, z):
        pass

    def require_on_manifold(self, z, tol=ON_M_TOL):
        resid = self.membership_residual(z)
        if resid > tol:
            raise OffManifoldError(
                f"state violates the constraint set: residual {resid:.3e} > {tol:.1e}"
            )
        return resid


def _state_array(z):
    if isinstance(z, PhasePoint):
        return z.as_array()
    return np.asarray(z, dtype=float)


class NonholonomicSystem(DistributionalSystem):
    """The base constrained system in its ambient chart."""

    def __init__(self, spec, fd=FD_DEFAULT, use_numba=None):
        self.spec = spec
        self.fd = fd
        n = spec.n
        self._n = n
        dist = spec.distribution
        mass = spec.mechanics.lagrangian.mass_matrix
        potential = spec.mechanics.lagrangian.potential

        ann = dist.annihilator_matrix
        if ann is None:
            if dist.annihilators is not None:
                anns = dist.annihilators

                def ann(q, _anns=anns, _n=n):
                    if len(_anns) == 0:
                        return np.zeros((0, _n))
                    return np.stack([np.asarray(a(q), float) for a in _anns])

            else:
                span = dist.span_matrix
                if span is not None and accel.is_compiled(span):
                    def _derived(q, _span=span):
                        return nullspace_core(_span(q), RANK_RTOL)

                    ann = accel.maybe_njit(_derived)
                else:
                    def ann(q, _dist=dist):
                        return _dist.ann_at(q)

        force = _pair_callable(spec.force, n)
        control = _pair_callable(spec.control, n)

        self.kernels = kernels.build_base_kernels(
            n=n,
            n_con=n - dist.rank,
            mass=mass,
            potential=potential,
            ann=ann,
            force=force,
            control=control,
            fd_step=fd.step,
            use_numba=use_numba,
        )

    # -- interface ---------------------------------------------------------

    @property
    def ambient_dim(self):
        return 2 * self._n

    @property
    def n(self):
        return self._n

    def split(self, z):
        arr = _state_array(z)
        return arr[: self._n], arr[self._n :]

    def membership_residual(self, z):
        q, p = self.split(z)
        if self.kernels.n_con == 0:
            return 0.0
        return float(np.max(np.abs(self.kernels.constraint(q, p))))

    def m_residual(self, z):
        q, p = self.split(z)
        return self.kernels.constraint(q, p)

    def K_basis(self, z, check=True):
        q, p = self.split(z)
        if check:
            self.require_on_manifold(z)
        B = self.kernels.k_basis(q, p)
        if B.shape[0] != 2 * self.kernels.k:
            raise RankError(
                f"admissible directions have dimension {B.shape[0]}, expected {2 * self.kernels.k}"
            )
        return B

    def omega_eval(self, z, v, w):
        v = np.asarray(v, dtype=float)
        w = np.asarray(w, dtype=float)
        n = self._n
        return float(v[:n] @ w[n:] - w[:n] @ v[n:])

    def _unwrap(self, result, what):
        vec, status = result
        if status == kernels.BAD_RANK:
            raise RankError(f"{what}: admissible directions have unexpected dimension")
        if status == kernels.SINGULAR:
            raise SingularMatrixError(f"{what}: induced two-form is degenerate")
        return vec

    def X_K(self, z, check=True):
        q, p = self.split(z)
        if check:
            self.require_on_manifold(z)
        return self._unwrap(self.kernels.x_k(q, p), "distributional solve")

    def X_tilde(self, z, check=True):
        q, p = self.split(z)
        if check:
            self.require_on_manifold(z)
        return self._unwrap(self.kernels.x_tilde(q, p), "dynamical vector field")

    def tau_K(self, z, v):
        q, p = self.split(z)
        return self._unwrap(self.kernels.tau_k(q, p, np.asarray(v, float)), "restriction")

    def F_K(self, z):
        q, p = self.split(z)
        return self._unwrap(self.kernels.f_k(q, p), "projected force")

    def U_K(self, z):
        q, p = self.split(z)
        return self._unwrap(self.kernels.u_k(q, p), "projected control")

    def hamiltonian(self, z):
        q, p = self.split(z)
        return float(self.kernels.hamiltonian(q, p))

    def X_H(self, z):
        """Unconstrained Hamiltonian vector field (independent route)."""
        arr = _state_array(z)
        X = hamiltonian_vector_field(self.spec.mechanics, PhasePoint.from_array(arr), self.fd)
        return X.as_array()

    def xk_residual(self, z):
        """max_i |omega(X_K, e_i) - dH(e_i)| over the admissible frame."""
        q, p = self.split(z)
        B = self.K_basis(z)
        X = self.X_K(z)
        worst = 0.0
        for i in range(B.shape[0]):
            lhs = self.omega_eval(z, X, B[i])
            rhs = self.kernels.dh_dir(q, p, B[i, : self._n], B[i, self._n :])
            worst = max(worst, abs(lhs - rhs))
        return worst


_SYSTEM_CACHE = weakref.WeakKeyDictionary()


def as_system(spec, fd=FD_DEFAULT):
    """Memoized system for a spec (kernels compile once per spec)."""
    if isinstance(spec, DistributionalSystem):
        return spec
    sys_ = _SYSTEM_CACHE.get(spec)
    if sys_ is None or sys_.fd != fd:
        sys_ = NonholonomicSystem(spec, fd)
        _SYSTEM_CACHE[spec] = sys_
    return sys_


# -- module-level operations ------------------------------------------------


def m_residual(spec, z):
    """Constraint residual c(z) = A(q) M(q)^{-1} p; zero iff z is feasible."""
    return as_system(spec).m_residual(z)


def k_basis(spec, z):
    """Orthonormal frame of the admissible directions at a feasible point."""
    system = as_system(spec)
    B = system.K_basis(z)
    n = system.n
    return [TangentVec(row[:n], row[n:]) for row in B]


def solve_x_k(spec, z):
    """Constrained vector field from the induced-two-form solve."""
    system = as_system(spec)
    return TangentVec.from_array(system.X_K(z))


def tau_k_project(spec, z, v):
    """Project a tangent vector onto the admissible directions along their
    symplectic orthogonal."""
    system = as_system(spec)
    arr = v.as_array() if isinstance(v, TangentVec) else np.asarray(v, float)
    return TangentVec.from_array(system.tau_K(z, arr))


@dataclass
class CompletenessSample:
    q: np.ndarray
    achieved_rank: int
    depth: int
    bracket_generating: bool


def check_completeness(distribution, q_samples, max_depth=2, n=None, cfg=None):
    """Iterated-bracket span test at each sample configuration.

    Augments the span with pairwise brackets, depth by depth, reporting the
    achieved rank and whether it reaches the chart dimension.
    """
    if max_depth < 1:
        raise ValueError("max_depth must be at least 1")
    cfg = cfg or FDConfig(step=1e-5)
    reports = []
    for q in q_samples:
        q = np.asarray(getattr(q, "q", q), dtype=float)
        dim = n or q.size
        generators = [(f, 0) for f in distribution.spanning_fields]
        vectors = [np.asarray(f(q), float) for f, _ in generators]
        rank = matrix_rank(np.stack(vectors)) if vectors else 0
        depth_used = 0
        depth = 0
        while rank < dim and depth < max_depth:
            depth += 1
            new_fields = []
            for i in range(len(generators)):
                for j in range(i + 1, len(generators)):
                    fi, di = generators[i]
                    fj, dj = generators[j]
                    if max(di, dj) != depth - 1:
                        continue  # only brackets that can reach this depth

                    def bracket(qq, _a=fi, _b=fj):
                        return lie_bracket(_a, _b, qq, cfg)

                    new_fields.append((bracket, depth))
                    vectors.append(bracket(q))
            generators.extend(new_fields)
            new_rank = matrix_rank(np.stack(vectors))
            if new_rank > rank:
                depth_used = depth
            rank = new_rank
        reports.append(
            CompletenessSample(
                q=q, achieved_rank=int(rank), depth=depth_used, bracket_generating=rank == dim
            )
        )
    return reports


def check_d_regularity(spec, q):
    """Nondegeneracy of the kinetic form restricted to the distribution.

    Returns (is_regular, condition_estimate); for kinetic-minus-potential
    Lagrangians the restricted form is positive-definite whenever the
    spanning fields are independent.
    """
    q = np.asarray(getattr(q, "q", q), dtype=float)
    E = spec.distribution.span_at(q)
    M = np.asarray(spec.mechanics.lagrangian.mass_matrix(q), dtype=float)
    restricted = E @ M @ E.T
    eigs = np.linalg.eigvalsh(0.5 * (restricted + restricted.T))
    if eigs.min() <= RANK_RTOL * max(eigs.max(), 1.0):
        return False, np.inf
    return True, float(eigs.max() / eigs.min())


@dataclass
class AdmissibilityReport:
    rank_F: int
    dim_TM: int
    admissible: bool
    intersection_dim: int
    compatible: bool


def check_admissibility_compatibility(spec, z):
    """Numerical check of rank F = dim TM and TM cap F-perp = 0 at z."""
    system = as_system(spec)
    n = system.n
    q, p = system.split(z)
    system.require_on_manifold(z)

    E = spec.distribution.span_at(q)
    k = spec.distribution.rank
    F_rows = np.zeros((k + n, 2 * n))
    F_rows[:k, :n] = E
    F_rows[k:, n:] = np.eye(n)
    rank_F = matrix_rank(row_span_basis(F_rows))

    Dc = system.kernels.constraint_jac(q, p)
    TM = nullspace(Dc)

    # omega-orthogonal complement of F: vectors whose pairing with every
    # F-row vanishes; pairing rows are (w.dp, -w.dq)
    pairing = np.hstack([F_rows[:, n:], -F_rows[:, :n]])
    F_perp = nullspace(pairing)

    inter = subspace_intersection(TM, F_perp)
    return AdmissibilityReport(
        rank_F=int(rank_F),
        dim_TM=int(TM.shape[0]),
        admissible=rank_F == TM.shape[0],
        intersection_dim=int(inter.shape[0]),
        compatible=inter.shape[0] == 0,
    )


def random_on_m_points(spec, count, seed=0, q_scale=2.0, v_scale=1.5):
    """Deterministic feasible sample points: random configurations with
    velocities drawn inside the distribution, pushed through the Legendre
    transform."""
    rng = np.random.default_rng(seed)
    chart = spec.chart
    n = chart.dim
    points = []
    for _ in range(count):
        q = np.empty(n)
        for i in range(n):
            if chart.periodic[i]:
                q[i] = rng.uniform(0.0, 2.0 * np.pi)
            else:
                q[i] = rng.uniform(-q_scale, q_scale)
        E = spec.distribution.span_at(q)
        coeffs = rng.uniform(-v_scale, v_scale, size=spec.distribution.rank)
        v = coeffs @ E
        M = np.asarray(spec.mechanics.lagrangian.mass_matrix(q), dtype=float)
        points.append(PhasePoint(q, M @ v))
    return points
