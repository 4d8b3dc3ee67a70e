"""Charts, phase-space vectors, finite-difference calculus, and small dense
linear algebra.

Every pointwise construction in the package funnels through the routines
here: central-difference Jacobians realize all tangent maps, and a single
rank-reporting SVD solve backs every linear system so that degeneracy
surfaces as a structured error instead of noise.
"""

from dataclasses import dataclass, field

import numpy as np

from .accel import maybe_njit
from .errors import SingularMatrixError

TWO_PI = 2.0 * np.pi

# Relative singular-value cutoff for every rank decision.
RANK_RTOL = 1e-10


@dataclass(frozen=True)
class ChartSpec:
    """A single global coordinate chart on the configuration manifold.

    Angle coordinates are flagged periodic; their canonical representative
    lives in [0, 2*pi), but finite-difference stencils never wrap, so
    differentiating across the branch cut is safe for 2*pi-periodic data.
    """

    dim: int
    coord_names: tuple
    periodic: tuple

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("chart dimension must be >= 1")
        object.__setattr__(self, "coord_names", tuple(self.coord_names))
        object.__setattr__(self, "periodic", tuple(bool(b) for b in self.periodic))
        if len(self.coord_names) != self.dim or len(self.periodic) != self.dim:
            raise ValueError("coordinate names/periodic flags must match dim")

    def wrap(self, q):
        """Canonical representative: periodic components reduced mod 2*pi."""
        q = np.array(q, dtype=float)
        for i, per in enumerate(self.periodic):
            if per:
                q[i] = np.mod(q[i], TWO_PI)
        return q


@dataclass(frozen=True)
class FDConfig:
    """Central-difference step; optionally scaled by the coordinate size."""

    step: float = 1e-5
    scale_relative: bool = False

    def __post_init__(self):
        if self.step <= 0:
            raise ValueError("finite-difference step must be positive")


FD_DEFAULT = FDConfig()


def _freeze(arr):
    a = np.array(arr, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class BasePoint:
    """A configuration-space point in chart coordinates."""

    q: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "q", _freeze(self.q))


@dataclass(frozen=True)
class PhasePoint:
    """A cotangent-bundle point (q, p) in canonical coordinates."""

    q: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "q", _freeze(self.q))
        object.__setattr__(self, "p", _freeze(self.p))
        if self.q.shape != self.p.shape or self.q.ndim != 1:
            raise ValueError("q and p must be 1-d vectors of equal length")

    @property
    def dim(self):
        return self.q.size

    def as_array(self):
        return np.concatenate([self.q, self.p])

    @staticmethod
    def from_array(z):
        z = np.asarray(z, dtype=float)
        n = z.size // 2
        return PhasePoint(z[:n], z[n:])


@dataclass(frozen=True)
class TangentVec:
    """An element of T(T*Q): base displacement dq and fiber displacement dp."""

    dq: np.ndarray
    dp: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "dq", _freeze(self.dq))
        object.__setattr__(self, "dp", _freeze(self.dp))
        if self.dq.shape != self.dp.shape or self.dq.ndim != 1:
            raise ValueError("dq and dp must be 1-d vectors of equal length")

    @property
    def dim(self):
        return self.dq.size

    def as_array(self):
        return np.concatenate([self.dq, self.dp])

    @staticmethod
    def from_array(v):
        v = np.asarray(v, dtype=float)
        n = v.size // 2
        return TangentVec(v[:n], v[n:])


@dataclass(frozen=True)
class LinearSolve:
    """Solution of a square system together with its conditioning report."""

    x: np.ndarray = field(repr=False)
    cond: float
    rank: int


def canonical_omega(v, w):
    """Canonical symplectic pairing sum_i (v.dq_i w.dp_i - w.dq_i v.dp_i)."""
    if v.dim != w.dim:
        raise ValueError("symplectic pairing needs vectors from the same chart")
    return float(v.dq @ w.dp - w.dq @ v.dp)


@maybe_njit
def omega_arrays(v, w):
    # v, w are length-2n arrays (dq then dp)
    n = v.size // 2
    return v[:n] @ w[n:] - w[:n] @ v[n:]


def fd_jacobian(f, x, cfg=FD_DEFAULT):
    """Central-difference Jacobian of a vector map, entry (i, j) =
    (f_i(x + h e_j) - f_i(x - h e_j)) / 2h."""
    x = np.asarray(x, dtype=float)
    f0 = np.atleast_1d(np.asarray(f(x), dtype=float))
    jac = np.empty((f0.size, x.size))
    for j in range(x.size):
        h = cfg.step * max(1.0, abs(x[j])) if cfg.scale_relative else cfg.step
        xp = x.copy()
        xm = x.copy()
        xp[j] += h
        xm[j] -= h
        fp = np.atleast_1d(np.asarray(f(xp), dtype=float))
        fm = np.atleast_1d(np.asarray(f(xm), dtype=float))
        jac[:, j] = (fp - fm) / (2.0 * h)
    return jac


def fd_gradient(f, x, cfg=FD_DEFAULT):
    """Central-difference gradient of a scalar function."""
    x = np.asarray(x, dtype=float)
    g = np.empty(x.size)
    for j in range(x.size):
        h = cfg.step * max(1.0, abs(x[j])) if cfg.scale_relative else cfg.step
        xp = x.copy()
        xm = x.copy()
        xp[j] += h
        xm[j] -= h
        g[j] = (float(f(xp)) - float(f(xm))) / (2.0 * h)
    return g


def _components(one_form):
    """Accept either a bare callable q -> covector or an object carrying one."""
    return getattr(one_form, "components", one_form)


def exterior_d_oneform(gamma, q, X, Y, cfg=FD_DEFAULT):
    """d(gamma) evaluated on two constant base vectors at q.

    Equals sum_{i<j} (d_i gamma_j - d_j gamma_i)(X^i Y^j - X^j Y^i).
    """
    comp = _components(gamma)
    q = np.asarray(getattr(q, "q", q), dtype=float)
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if X.size != q.size or Y.size != q.size:
        raise ValueError("base vectors must match the chart dimension")
    jac = fd_jacobian(comp, q, cfg)
    return float(Y @ jac @ X - X @ jac @ Y)


def lie_bracket(X, Y, q, cfg=FD_DEFAULT):
    """[X, Y](q) = (DY)(q) X(q) - (DX)(q) Y(q), Jacobians by central differences."""
    q = np.asarray(getattr(q, "q", q), dtype=float)
    Xq = np.asarray(X(q), dtype=float)
    Yq = np.asarray(Y(q), dtype=float)
    if Xq.size != q.size or Yq.size != q.size:
        raise ValueError("vector fields must match the chart dimension")
    return fd_jacobian(Y, q, cfg) @ Xq - fd_jacobian(X, q, cfg) @ Yq


@maybe_njit
def svd_solve_core(A, b):
    """SVD solve returning (x, cond, rank); rank at RANK_RTOL relative cutoff."""
    m = A.shape[0]
    if m == 0:
        return np.zeros(A.shape[1]), np.inf, 0
    U, s, Vt = np.linalg.svd(A)
    if s[0] == 0.0:
        return np.zeros(A.shape[1]), np.inf, 0
    tol = 1e-10 * s[0]
    rank = 0
    for i in range(s.size):
        if s[i] > tol:
            rank += 1
    cond = s[0] / s[s.size - 1] if s[s.size - 1] > 0.0 else np.inf
    if rank < min(A.shape):
        return np.zeros(A.shape[1]), cond, rank
    x = Vt.T @ ((U.T @ b) / s)
    return x, cond, rank


def solve_linear(A, b):
    """Solve a square system, reporting conditioning; refuse rank deficiency.

    Raises SingularMatrixError when the numerical rank at 1e-10 * ||A||
    falls short of the matrix size.
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("solve_linear expects a square matrix")
    if b.shape != (A.shape[0],):
        raise ValueError("right-hand side length must match the matrix")
    x, cond, rank = svd_solve_core(A, b)
    if rank < A.shape[0]:
        raise SingularMatrixError(
            f"matrix numerically singular: rank {rank} < {A.shape[0]}"
        )
    return LinearSolve(x=x, cond=float(cond), rank=int(rank))


@maybe_njit
def pivoted_basis_from_projector(P, rank):
    """Deterministic orthonormal basis of a projector's range.

    Greedy pivoting on the largest remaining column norm, re-orthogonalized
    and sign-fixed (largest-magnitude entry positive), so the basis depends
    only on the projector, never on upstream SVD sign or order conventions.
    """
    n = P.shape[0]
    R = P.copy()
    basis = np.zeros((rank, n))
    for i in range(rank):
        norms = np.sqrt(np.sum(R * R, axis=0))
        j = int(np.argmax(norms))
        if norms[j] <= 0.0:
            return basis[:i]
        v = R[:, j] / norms[j]
        for t in range(i):
            v = v - basis[t] * (basis[t] @ v)
        nv = np.sqrt(v @ v)
        if nv <= 1e-14:
            return basis[:i]
        v = v / nv
        kmax = int(np.argmax(np.abs(v)))
        if v[kmax] < 0.0:
            v = -v
        basis[i] = v
        R = R - np.outer(v, v @ R)
    return basis


@maybe_njit
def nullspace_core(A, rtol):
    """Orthonormal basis (rows) of ker A with deterministic ordering."""
    n = A.shape[1]
    if A.shape[0] == 0:
        return np.eye(n)
    U, s, Vt = np.linalg.svd(A)
    rank = 0
    if s.size > 0 and s[0] > 0.0:
        tol = rtol * s[0]
        for i in range(s.size):
            if s[i] > tol:
                rank += 1
    null_dim = n - rank
    if null_dim == 0:
        return np.zeros((0, n))
    Vn = np.ascontiguousarray(Vt[rank:].T)
    P = Vn @ Vn.T
    return pivoted_basis_from_projector(P, null_dim)


def nullspace(A, rtol=RANK_RTOL):
    """Public wrapper over the nullspace kernel."""
    return nullspace_core(np.asarray(A, dtype=float), rtol)


@maybe_njit
def matrix_rank_core(A, rtol):
    if A.shape[0] == 0 or A.shape[1] == 0:
        return 0
    U, s, Vt = np.linalg.svd(A)
    if s.size == 0 or s[0] == 0.0:
        return 0
    tol = rtol * s[0]
    rank = 0
    for i in range(s.size):
        if s[i] > tol:
            rank += 1
    return rank


def matrix_rank(A, rtol=RANK_RTOL):
    return int(matrix_rank_core(np.asarray(A, dtype=float), rtol))


@maybe_njit
def row_span_basis_core(B, rtol):
    """Deterministic orthonormal basis of the row span of B."""
    n = B.shape[1]
    if B.shape[0] == 0:
        return np.zeros((0, n))
    U, s, Vt = np.linalg.svd(B)
    rank = 0
    if s.size > 0 and s[0] > 0.0:
        tol = rtol * s[0]
        for i in range(s.size):
            if s[i] > tol:
                rank += 1
    if rank == 0:
        return np.zeros((0, n))
    Vr = np.ascontiguousarray(Vt[:rank].T)
    P = Vr @ Vr.T
    return pivoted_basis_from_projector(P, rank)


def row_span_basis(B, rtol=RANK_RTOL):
    return row_span_basis_core(np.asarray(B, dtype=float), rtol)


INTERSECT_RTOL = 1e-8


def subspace_intersection(B1, B2, rtol=INTERSECT_RTOL):
    """Orthonormal basis of span(B1 rows) ∩ span(B2 rows).

    A vector lies in both spans iff it is annihilated by both complement
    projectors, so the intersection is the kernel of the stacked
    complements.  The default cutoff is looser than RANK_RTOL because the
    input bases typically carry finite-difference noise.
    """
    B1 = row_span_basis(B1)
    B2 = row_span_basis(B2)
    n = B1.shape[1] if B1.size else B2.shape[1]
    P1 = np.eye(n) - B1.T @ B1
    P2 = np.eye(n) - B2.T @ B2
    return nullspace(np.vstack([P1, P2]), rtol)


def subspace_gap(B1, B2):
    """Spectral gap between two row spans: || P1 - P2 ||_2.

    Zero iff the spans coincide; 1 when some direction of one span is
    orthogonal to all of the other.
    """
    B1 = row_span_basis(B1)
    B2 = row_span_basis(B2)
    P1 = B1.T @ B1
    P2 = B2.T @ B2
    return float(np.linalg.norm(P1 - P2, 2))
