import numpy as np
import pytest

from nhrch import catalog
from nhrch.constraints import (
    as_system,
    check_admissibility_compatibility,
    check_completeness,
    check_d_regularity,
    full_distribution,
    k_basis,
    m_residual,
    random_on_m_points,
    solve_x_k,
    tau_k_project,
    DistributionSpec,
    NonholonomicRCHSpec,
)
from nhrch.errors import OffManifoldError, RankError
from nhrch.geometry import ChartSpec, PhasePoint, TangentVec
from nhrch.mechanics import HamiltonianSystemSpec, LagrangianSpec

RNG = np.random.default_rng(99)

KNIFE = catalog.knife_edge()
FREE = catalog.free_particle_2d()
DISK = catalog.vertical_rolling_disk()
KNIFE_Z = KNIFE.default_state


def planar_spec(n=3, fields=None):
    chart = ChartSpec(n, tuple(f"q{i}" for i in range(n)), (False,) * n)
    lag = LagrangianSpec(lambda q: np.eye(n), lambda q: 0.0)
    dist = DistributionSpec(rank=len(fields), spanning_fields=tuple(fields))
    return NonholonomicRCHSpec(HamiltonianSystemSpec(chart, lag), dist)


class TestCompleteness:
    def test_full_distribution_immediate(self):
        reports = check_completeness(FREE.spec.distribution, [np.zeros(2)], max_depth=2)
        assert reports[0].bracket_generating and reports[0].depth == 0

    def test_knife_edge_depth_one(self):
        qs = [np.array([0.0, 0.0, th]) for th in (0.0, 0.7, 2.0)]
        reports = check_completeness(KNIFE.spec.distribution, qs, max_depth=2)
        for rep in reports:
            assert rep.bracket_generating
            assert rep.achieved_rank == 3
            assert rep.depth == 1

    def test_involutive_distribution_stalls(self):
        fields = [lambda q: np.array([1.0, 0.0, 0.0]), lambda q: np.array([0.0, 1.0, 0.0])]
        spec = planar_spec(fields=fields)
        reports = check_completeness(spec.distribution, [np.zeros(3)], max_depth=3)
        assert not reports[0].bracket_generating
        assert reports[0].achieved_rank == 2


class TestDRegularity:
    def test_identity_mass(self):
        ok, cond = check_d_regularity(KNIFE.spec, np.zeros(3))
        assert ok and cond == pytest.approx(1.0)

    def test_scaled_mass_condition(self):
        entry = catalog.knife_edge(mass=2.0, inertia=1.0)
        # restricted form at theta = 0 is diag(2, 1)
        ok, cond = check_d_regularity(entry.spec, np.zeros(3))
        assert ok and cond == pytest.approx(2.0, rel=1e-12)

    def test_rank_deficient_span(self):
        fields = [lambda q: np.array([1.0, 0.0, 0.0]), lambda q: np.array([2.0, 0.0, 0.0])]
        spec = planar_spec(fields=fields)
        ok, cond = check_d_regularity(spec, np.zeros(3))
        assert not ok and cond == np.inf


class TestMResidual:
    def test_on_constraint(self):
        assert np.allclose(m_residual(KNIFE.spec, KNIFE_Z), 0.0, atol=1e-14)

    def test_sideways_momentum(self):
        z = PhasePoint(np.zeros(3), np.array([0.0, 1.0, 0.0]))
        assert m_residual(KNIFE.spec, z) == pytest.approx(-1.0)

    def test_unconstrained_empty(self):
        z = PhasePoint(np.zeros(2), np.array([5.0, -3.0]))
        assert m_residual(FREE.spec, z).size == 0
        assert as_system(FREE.spec).membership_residual(z) == 0.0


class TestKBasis:
    def test_full_distribution_whole_tangent(self):
        z = PhasePoint(np.zeros(2), np.array([1.0, 2.0]))
        vecs = k_basis(FREE.spec, z)
        assert len(vecs) == 4

    def test_knife_edge_structure(self):
        vecs = k_basis(KNIFE.spec, KNIFE_Z)
        assert len(vecs) == 4
        for v in vecs:
            # base part confined to span{(1,0,0),(0,0,1)} at theta = 0
            assert abs(v.dq[1]) < 1e-9
            # tangency to the constraint set: d(theta) - d(p_y) = 0 here
            assert abs(v.dq[2] - v.dp[1]) < 1e-9

    def test_off_manifold_rejected(self):
        z = PhasePoint(np.zeros(3), np.array([0.0, 1.0, 0.0]))
        with pytest.raises(OffManifoldError):
            k_basis(KNIFE.spec, z)

    def test_gram_skew_and_nondegenerate(self):
        for entry in (KNIFE, DISK):
            for z in random_on_m_points(entry.spec, 10, seed=5):
                system = as_system(entry.spec)
                B = system.K_basis(z)
                G = np.array([[system.omega_eval(z, B[i], B[j]) for j in range(B.shape[0])]
                              for i in range(B.shape[0])])
                assert np.max(np.abs(G + G.T)) < 1e-12
                svals = np.linalg.svd(G)[1]
                assert svals[-1] > 1e-8


class TestAdmissibility:
    def test_knife_edge(self):
        rep = check_admissibility_compatibility(KNIFE.spec, KNIFE_Z)
        assert rep.admissible and rep.compatible
        assert rep.rank_F == 5 and rep.dim_TM == 5 and rep.intersection_dim == 0

    def test_unconstrained_trivial(self):
        z = PhasePoint(np.zeros(2), np.array([1.0, 2.0]))
        rep = check_admissibility_compatibility(FREE.spec, z)
        assert rep.admissible and rep.compatible

    def test_rolling_disk(self):
        for z in random_on_m_points(DISK.spec, 3, seed=2):
            rep = check_admissibility_compatibility(DISK.spec, z)
            assert rep.admissible and rep.compatible


class TestSolveXK:
    def test_unconstrained_equals_hamiltonian_field(self):
        system = as_system(FREE.spec)
        for z in random_on_m_points(FREE.spec, 100, seed=1):
            xk = system.X_K(z)
            xh = system.X_H(z)
            assert np.max(np.abs(xk - xh)) < 1e-8

    def test_knife_edge_closed_form(self):
        X = solve_x_k(KNIFE.spec, KNIFE_Z)
        assert np.max(np.abs(X.dq - np.array([1.0, 0.0, 0.5]))) < 1e-7
        assert np.max(np.abs(X.dp - np.array([0.0, 0.5, 0.0]))) < 1e-7

    def test_constrained_equilibrium(self):
        entry = catalog.knife_edge(potential=("linear", (0.0, 0.3, 0.0)))
        z = PhasePoint(np.zeros(3), np.zeros(3))
        X = solve_x_k(entry.spec, z)
        assert np.max(np.abs(X.as_array())) < 1e-9

    def test_hamilton_residual_invariant(self):
        for entry in (KNIFE, DISK):
            system = as_system(entry.spec)
            for z in random_on_m_points(entry.spec, 20, seed=3):
                assert system.xk_residual(z) < 1e-8

    def test_tangency_and_direction_and_energy(self):
        for entry in (KNIFE, DISK):
            system = as_system(entry.spec)
            n = system.n
            for z in random_on_m_points(entry.spec, 25, seed=4):
                X = system.X_K(z)
                q, p = system.split(z)
                # tangent to the constraint set
                Dc = system.kernels.constraint_jac(q, p)
                assert np.max(np.abs(Dc @ X)) < 1e-7
                # base velocity inside the distribution
                A = entry.spec.distribution.ann_at(q)
                assert np.max(np.abs(A @ X[:n])) < 1e-8
                # constraint forces do no work
                assert abs(system.kernels.dh_dir(q, p, X[:n], X[n:])) < 1e-7


class TestTauK:
    def test_identity_on_admissible_directions(self):
        system = as_system(KNIFE.spec)
        B = system.K_basis(KNIFE_Z)
        coeffs = RNG.normal(size=B.shape[0])
        v = coeffs @ B
        assert np.max(np.abs(system.tau_K(KNIFE_Z, v) - v)) < 1e-10

    def test_idempotent(self):
        system = as_system(KNIFE.spec)
        for z in random_on_m_points(KNIFE.spec, 10, seed=6):
            v = RNG.normal(size=6)
            once = system.tau_K(z, v)
            twice = system.tau_K(z, once)
            assert np.max(np.abs(twice - once)) < 1e-10

    def test_cross_oracle_with_solve(self):
        # two independent constructions of the constrained field
        for entry in (KNIFE, DISK):
            system = as_system(entry.spec)
            for z in random_on_m_points(entry.spec, 100, seed=7):
                via_projection = system.tau_K(z, system.X_H(z))
                via_solve = system.X_K(z)
                assert np.max(np.abs(via_projection - via_solve)) < 1e-8


class TestDistributionSpec:
    def test_derived_annihilators(self):
        # drop the explicit annihilator and let the kernel derive it
        fields = [
            lambda q: np.array([np.cos(q[2]), np.sin(q[2]), 0.0]),
            lambda q: np.array([0.0, 0.0, 1.0]),
        ]
        dist = DistributionSpec(rank=2, spanning_fields=tuple(fields))
        q = np.array([0.1, -0.4, 0.8])
        A = dist.ann_at(q)
        E = dist.span_at(q)
        assert A.shape == (1, 3)
        assert np.max(np.abs(A @ E.T)) < 1e-12
        dist.validate_at(q, 3)

    def test_validation_catches_bad_annihilator(self):
        fields = [lambda q: np.array([1.0, 0.0])]
        anns = [lambda q: np.array([1.0, 0.0])]  # fails to annihilate
        dist = DistributionSpec(rank=1, spanning_fields=tuple(fields), annihilators=tuple(anns))
        with pytest.raises(ValueError):
            dist.validate_at(np.zeros(2), 2)

    def test_solve_with_derived_annihilators_matches(self):
        fields = [
            lambda q: np.array([np.cos(q[2]), np.sin(q[2]), 0.0]),
            lambda q: np.array([0.0, 0.0, 1.0]),
        ]
        dist = DistributionSpec(rank=2, spanning_fields=tuple(fields))
        chart = KNIFE.spec.chart
        lag = KNIFE.spec.mechanics.lagrangian
        spec = NonholonomicRCHSpec(HamiltonianSystemSpec(chart, lag), dist)
        X = solve_x_k(spec, KNIFE_Z)
        ref = solve_x_k(KNIFE.spec, KNIFE_Z)
        assert np.max(np.abs(X.as_array() - ref.as_array())) < 1e-9
