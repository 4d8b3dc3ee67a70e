"""Hot pointwise kernels for constrained dynamics.

Everything here is built by factories that close over the system's data
callables (mass matrix, potential, distribution span/annihilator, force,
control).  When acceleration is on and all captured callables are numba
dispatchers, the closures compile with ``njit``; otherwise the identical
source runs as plain numpy.  Compiled code cannot raise rich exceptions,
so fallible kernels return ``(value, status)`` pairs with the codes below
and the wrapping modules translate statuses into typed errors.

State conventions: a phase point is the pair of 1-d arrays ``(q, p)``;
tangent vectors are length-2n arrays ``(dq, dp)`` concatenated.
"""

from dataclasses import dataclass

import numpy as np

from . import accel
from .accel import maybe_njit
from .geometry import (
    RANK_RTOL,
    nullspace_core,
    row_span_basis_core,
    svd_solve_core,
)

# status codes shared by all fallible kernels
OK = 0
BAD_RANK = 1
SINGULAR = 2

# looser cutoff for subspaces inferred from finite-difference data
FD_RANK_RTOL = 1e-8


@maybe_njit
def gram_skew(B):
    """G[i, j] = omega(B_i, B_j) for rows of B (length-2n tangent vectors)."""
    n = B.shape[1] // 2
    Bq = np.ascontiguousarray(B[:, :n])
    Bp = np.ascontiguousarray(B[:, n:])
    return Bq @ Bp.T - Bp @ Bq.T


@maybe_njit
def omega_pair(v, w):
    n = v.size // 2
    return v[:n] @ w[n:] - w[:n] @ v[n:]


@maybe_njit
def intersect_orthonormal_rows(B1, B2, rtol):
    """Intersection of two row spans given orthonormal rows."""
    n = B1.shape[1]
    P1c = np.eye(n) - np.ascontiguousarray(B1.T) @ B1
    P2c = np.eye(n) - np.ascontiguousarray(B2.T) @ B2
    return nullspace_core(np.vstack((P1c, P2c)), rtol)


def _decorator(use_numba):
    if use_numba:
        import numba

        return lambda f: numba.njit(f, cache=False, fastmath=False)
    return lambda f: f


@dataclass
class BaseKernels:
    """Pointwise operations of one nonholonomic system in one chart."""

    n: int
    n_con: int
    k: int
    use_numba: bool
    has_force: bool
    has_control: bool
    mass_inv_p: object
    hamiltonian: object
    constraint: object
    constraint_norm: object
    constraint_jac: object
    k_basis: object
    dh_dir: object
    x_k: object
    tau_k: object
    f_k: object
    u_k: object
    x_tilde: object
    project_fiber: object
    base_velocity: object


def _zero_pair_factory(n, jit):
    def zero_pair(q, p):
        return np.zeros(n)

    return jit(zero_pair)


def build_base_kernels(
    n,
    n_con,
    mass,
    potential,
    ann,
    force=None,
    control=None,
    fd_step=1e-5,
    use_numba=None,
):
    """Assemble the constrained-dynamics pipeline for one system.

    ``mass(q) -> (n, n)``, ``potential(q) -> float``, ``ann(q) -> (n_con, n)``
    rows spanning the constraint annihilator, ``force(q, p) -> (n,)`` and
    ``control(q, p) -> (n,)`` generalized covector fields (or None).
    """
    if use_numba is None:
        use_numba = accel.NUMBA_ENABLED and accel.all_compiled(
            mass, potential, ann, force, control
        )
    if use_numba and not accel.NUMBA_ENABLED:
        raise ValueError("numba kernels requested but acceleration is disabled")
    jit = _decorator(use_numba)

    k = n - n_con
    two_k = 2 * k
    h = float(fd_step)

    has_force = force is not None
    has_control = control is not None
    if force is None:
        force = _zero_pair_factory(n, jit)
    if control is None:
        control = _zero_pair_factory(n, jit)

    def mass_inv_p(q, p):
        return np.linalg.solve(mass(q), p)

    mass_inv_p = jit(mass_inv_p)

    def hamiltonian_fn(q, p):
        return 0.5 * (p @ mass_inv_p(q, p)) + potential(q)

    hamiltonian_fn = jit(hamiltonian_fn)

    def constraint_fn(q, p):
        if n_con == 0:
            return np.zeros(0)
        return ann(q) @ mass_inv_p(q, p)

    constraint_fn = jit(constraint_fn)

    def constraint_norm(q, p):
        c = constraint_fn(q, p)
        return np.sqrt(np.sum(c * c))

    constraint_norm = jit(constraint_norm)

    def constraint_jac(q, p):
        # central differences over all 2n phase coordinates, no wrapping
        J = np.empty((n_con, 2 * n))
        for j in range(n):
            qp = q.copy()
            qm = q.copy()
            qp[j] += h
            qm[j] -= h
            J[:, j] = (constraint_fn(qp, p) - constraint_fn(qm, p)) / (2.0 * h)
        for j in range(n):
            pp = p.copy()
            pm = p.copy()
            pp[j] += h
            pm[j] -= h
            J[:, n + j] = (constraint_fn(q, pp) - constraint_fn(q, pm)) / (2.0 * h)
        return J

    constraint_jac = jit(constraint_jac)

    def k_basis(q, p):
        # admissible directions: base part in the distribution, tangent to
        # the constraint set; the kernel of [annihilator-on-dq ; Dc]
        if n_con == 0:
            return np.eye(2 * n)
        S = np.zeros((2 * n_con, 2 * n))
        S[:n_con, :n] = ann(q)
        S[n_con:, :] = constraint_jac(q, p)
        return nullspace_core(S, RANK_RTOL)

    k_basis = jit(k_basis)

    def dh_dir(q, p, dq, dp):
        hp = hamiltonian_fn(q + h * dq, p + h * dp)
        hm = hamiltonian_fn(q - h * dq, p - h * dp)
        return (hp - hm) / (2.0 * h)

    dh_dir = jit(dh_dir)

    def x_k(q, p):
        B = k_basis(q, p)
        r = B.shape[0]
        if r != two_k:
            return np.zeros(2 * n), BAD_RANK
        G = gram_skew(B).T.copy()  # G[i, j] = omega(e_j, e_i)
        b = np.empty(r)
        for i in range(r):
            b[i] = dh_dir(q, p, B[i, :n], B[i, n:])
        a, cond, rank = svd_solve_core(G, b)
        if rank < r:
            return np.zeros(2 * n), SINGULAR
        return a @ B, OK

    x_k = jit(x_k)

    def tau_k(q, p, v):
        # projection onto K along its omega-orthogonal complement
        B = k_basis(q, p)
        r = B.shape[0]
        if r != two_k:
            return np.zeros(2 * n), BAD_RANK
        G = gram_skew(B).T.copy()
        b = np.empty(r)
        for i in range(r):
            b[i] = omega_pair(v, B[i])
        a, cond, rank = svd_solve_core(G, b)
        if rank < r:
            return np.zeros(2 * n), SINGULAR
        return a @ B, OK

    tau_k = jit(tau_k)

    def f_k(q, p):
        v = np.zeros(2 * n)
        v[n:] = force(q, p)
        return tau_k(q, p, v)

    f_k = jit(f_k)

    def u_k(q, p):
        v = np.zeros(2 * n)
        v[n:] = control(q, p)
        return tau_k(q, p, v)

    u_k = jit(u_k)

    def x_tilde(q, p):
        # one solve with summed right-hand side: linearity makes
        # X_K + tau(vlift F) + tau(vlift u) identical to solving
        # omega(X, e_i) = dH(e_i) + omega(vlift F, e_i) + omega(vlift u, e_i)
        B = k_basis(q, p)
        r = B.shape[0]
        if r != two_k:
            return np.zeros(2 * n), BAD_RANK
        G = gram_skew(B).T.copy()
        b = np.empty(r)
        for i in range(r):
            b[i] = dh_dir(q, p, B[i, :n], B[i, n:])
        if has_force:
            fv = force(q, p)
            for i in range(r):
                b[i] += -(B[i, :n] @ fv)
        if has_control:
            uv = control(q, p)
            for i in range(r):
                b[i] += -(B[i, :n] @ uv)
        a, cond, rank = svd_solve_core(G, b)
        if rank < r:
            return np.zeros(2 * n), SINGULAR
        return a @ B, OK

    x_tilde = jit(x_tilde)

    def project_fiber(q, p):
        # minimal Euclidean correction of p back onto ker(A(q) M(q)^{-1} .)
        if n_con == 0:
            return p
        B = np.linalg.solve(mass(q), ann(q).T).T  # rows: A M^{-1}
        resid = B @ p
        BBt = np.ascontiguousarray(B) @ np.ascontiguousarray(B.T)
        lam, cond, rank = svd_solve_core(BBt, resid)
        if rank < n_con:
            return p
        return p - B.T @ lam

    project_fiber = jit(project_fiber)

    def base_velocity(q, p):
        return mass_inv_p(q, p)

    base_velocity = jit(base_velocity)

    return BaseKernels(
        n=n,
        n_con=n_con,
        k=k,
        use_numba=use_numba,
        has_force=has_force,
        has_control=has_control,
        mass_inv_p=mass_inv_p,
        hamiltonian=hamiltonian_fn,
        constraint=constraint_fn,
        constraint_norm=constraint_norm,
        constraint_jac=constraint_jac,
        k_basis=k_basis,
        dh_dir=dh_dir,
        x_k=x_k,
        tau_k=tau_k,
        f_k=f_k,
        u_k=u_k,
        x_tilde=x_tilde,
        project_fiber=project_fiber,
        base_velocity=base_velocity,
    )


@dataclass
class ReducedKernels:
    """Pointwise operations of a quotient system over canonical sections."""

    dim_red: int
    n_red_q: int
    level: bool
    use_numba: bool
    section: object
    project_state: object
    project_tangent: object
    vk_basis: object
    u_basis: object
    reduced_frame: object
    h_bar: object
    constraint_norm_bar: object
    x_k_bar: object
    x_tilde_bar: object
    tau_bar: object
    gram_bar: object


def build_reduced_kernels(base, cyclic_idx, mu=None, fd_step=1e-5):
    """Quotient pipeline over a translation group on the cyclic coordinates.

    Representatives zero the cyclic base coordinates; when ``mu`` is given
    the cyclic momenta are additionally pinned to the level value and
    dropped from the reduced state (momentum-level reduction), otherwise
    all momenta stay dynamic.
    """
    n = base.n
    jit = _decorator(base.use_numba)
    cyc = np.asarray(cyclic_idx, dtype=np.int64)
    m = cyc.size
    noncyc = np.array([i for i in range(n) if i not in set(cyclic_idx)], dtype=np.int64)
    n_nc = noncyc.size
    level = mu is not None
    mu_arr = np.asarray(mu, dtype=float) if level else np.zeros(0)
    h = float(fd_step)

    if level:
        keep = np.concatenate([noncyc, n + noncyc]).astype(np.int64)
    else:
        keep = np.concatenate([noncyc, n + np.arange(n)]).astype(np.int64)
    dim_red = keep.size

    # infinitesimal generators of the lifted translations: base directions
    # along the cyclic coordinates, zero fiber part
    v_rows = np.zeros((m, 2 * n))
    for a in range(m):
        v_rows[a, cyc[a]] = 1.0

    base_k_basis = base.k_basis
    base_ham = base.hamiltonian
    base_constraint_norm = base.constraint_norm
    base_f_k = base.f_k
    base_u_k = base.u_k
    has_force = base.has_force
    has_control = base.has_control

    def section(y):
        q = np.zeros(n)
        p = np.empty(n)
        for i in range(n_nc):
            q[noncyc[i]] = y[i]
        if level:
            for a in range(m):
                p[cyc[a]] = mu_arr[a]
            for i in range(n_nc):
                p[noncyc[i]] = y[n_nc + i]
        else:
            for i in range(n):
                p[i] = y[n_nc + i]
        return q, p

    section = jit(section)

    def project_state(q, p):
        y = np.empty(dim_red)
        for i in range(n_nc):
            y[i] = q[noncyc[i]]
        if level:
            for i in range(n_nc):
                y[n_nc + i] = p[noncyc[i]]
        else:
            for i in range(n):
                y[n_nc + i] = p[i]
        return y

    project_state = jit(project_state)

    def project_tangent(v):
        out = np.empty(dim_red)
        for i in range(dim_red):
            out[i] = v[keep[i]]
        return out

    project_tangent = jit(project_tangent)

    def vk_basis(q, p):
        K = base_k_basis(q, p)
        return intersect_orthonormal_rows(v_rows, K, FD_RANK_RTOL)

    vk_basis = jit(vk_basis)

    def u_basis(q, p):
        # largest sub-bundle of K on which the two-form still pushes down:
        # directions omega-orthogonal to every vertical symmetry inside K
        K = base_k_basis(q, p)
        VK = vk_basis(q, p)
        if VK.shape[0] == 0:
            return K
        W = np.empty((VK.shape[0], K.shape[0]))
        for j in range(VK.shape[0]):
            for i in range(K.shape[0]):
                W[j, i] = omega_pair(K[i], VK[j])
        N = nullspace_core(W, FD_RANK_RTOL)
        return N @ K

    u_basis = jit(u_basis)

    def reduced_frame(q, p):
        # orthonormal frame of the reduced distribution plus lifts into U
        U = u_basis(q, p)
        if U.shape[0] == 0 or dim_red == 0:
            return np.zeros((0, dim_red)), np.zeros((0, 2 * n)), U
        Uproj = np.empty((U.shape[0], dim_red))
        for r in range(U.shape[0]):
            for i in range(dim_red):
                Uproj[r, i] = U[r, keep[i]]
        frame = row_span_basis_core(Uproj, FD_RANK_RTOL)
        if frame.shape[0] == 0:
            return np.zeros((0, dim_red)), np.zeros((0, 2 * n)), U
        lifts = (frame @ np.linalg.pinv(Uproj)) @ U
        return frame, lifts, U

    reduced_frame = jit(reduced_frame)

    def h_bar(y):
        q, p = section(y)
        return base_ham(q, p)

    h_bar = jit(h_bar)

    def constraint_norm_bar(y):
        q, p = section(y)
        return base_constraint_norm(q, p)

    constraint_norm_bar = jit(constraint_norm_bar)

    def gram_bar(lifts):
        r = lifts.shape[0]
        G = np.empty((r, r))
        for i in range(r):
            for j in range(r):
                G[i, j] = omega_pair(lifts[i], lifts[j])
        return G

    gram_bar = jit(gram_bar)

    def x_k_bar(y):
        q, p = section(y)
        frame, lifts, U = reduced_frame(q, p)
        r = frame.shape[0]
        if r == 0:
            # nothing to solve: the reduced distribution is trivial here
            return np.zeros(dim_red), OK
        if (r % 2) != 0:
            return np.zeros(dim_red), BAD_RANK
        G = gram_bar(lifts).T.copy()
        b = np.empty(r)
        for i in range(r):
            b[i] = (h_bar(y + h * frame[i]) - h_bar(y - h * frame[i])) / (2.0 * h)
        a, cond, rank = svd_solve_core(G, b)
        if rank < r:
            return np.zeros(dim_red), SINGULAR
        return a @ frame, OK

    x_k_bar = jit(x_k_bar)

    def x_tilde_bar(y):
        v, st = x_k_bar(y)
        if st != OK:
            return v, st
        if has_force:
            q, p = section(y)
            F, st2 = base_f_k(q, p)
            if st2 != OK:
                return v, st2
            v = v + project_tangent(F)
        if has_control:
            q, p = section(y)
            U2, st3 = base_u_k(q, p)
            if st3 != OK:
                return v, st3
            v = v + project_tangent(U2)
        return v, OK

    x_tilde_bar = jit(x_tilde_bar)

    def tau_bar(y, a_ambient):
        # restrict an ambient tangent vector (canonical representative
        # upstairs) to the reduced distribution via the pushed-down form
        q, p = section(y)
        frame, lifts, U = reduced_frame(q, p)
        r = frame.shape[0]
        if r == 0:
            return np.zeros(dim_red), OK
        G = gram_bar(lifts).T.copy()
        b = np.empty(r)
        for i in range(r):
            b[i] = omega_pair(a_ambient, lifts[i])
        a, cond, rank = svd_solve_core(G, b)
        if rank < r:
            return np.zeros(dim_red), SINGULAR
        return a @ frame, OK

    tau_bar = jit(tau_bar)

    return ReducedKernels(
        dim_red=dim_red,
        n_red_q=n_nc,
        level=level,
        use_numba=base.use_numba,
        section=section,
        project_state=project_state,
        project_tangent=project_tangent,
        vk_basis=vk_basis,
        u_basis=u_basis,
        reduced_frame=reduced_frame,
        h_bar=h_bar,
        constraint_norm_bar=constraint_norm_bar,
        x_k_bar=x_k_bar,
        x_tilde_bar=x_tilde_bar,
        tau_bar=tau_bar,
        gram_bar=gram_bar,
    )
