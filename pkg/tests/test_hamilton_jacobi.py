import numpy as np
import pytest

from nhrch import catalog
from nhrch import hamilton_jacobi as hj
from nhrch.constraints import as_system, random_on_m_points
from nhrch.errors import InvarianceError, PreconditionError
from nhrch.geometry import PhasePoint
from nhrch.reduction import SymmetrySpec, reduced_system, rp_reduced_system

RNG = np.random.default_rng(314)

KNIFE = catalog.knife_edge()
FREE = catalog.free_particle_2d()
DISK = catalog.vertical_rolling_disk()

GAMMA = catalog.make_gamma("heading", {"c": 1.0, "c_theta": 0.5})
GAMMA_P = catalog.make_gamma("heading_perturbed", {"c": 1.0, "c_theta": 0.5, "eps": 0.1})
EPS_ID = hj.SymplecticMapSpec(catalog.make_epsilon("identity", {}, 3), "identity")


def knife_grid(limit=None):
    grid = hj.default_grid(KNIFE.spec.chart)
    return grid if limit is None else grid[:limit]


def on_image_points(count=8):
    pts = []
    for theta in np.linspace(0, 2 * np.pi, count, endpoint=False):
        q = np.array([RNG.uniform(-1, 1), RNG.uniform(-1, 1), theta])
        pts.append(np.concatenate([q, GAMMA(q)]))
    return pts


class TestClosedness:
    def test_exact_form_closed_on_distribution(self):
        gamma = catalog.make_gamma("exact_quadratic", {"matrix": np.eye(3).tolist()})
        for q in knife_grid(20):
            assert hj.closedness_on_d_residual(gamma, KNIFE.spec.distribution, q) < 1e-7

    def test_heading_form_closed_on_distribution_only(self):
        grid = hj.default_grid(KNIFE.spec.chart)
        assert len(grid) == 200  # 5 x 5 x 8
        full, on_d = hj.closedness_hierarchy(GAMMA, KNIFE.spec.distribution, grid)
        assert on_d < 1e-7
        assert 0.9 < full < 1.1

    def test_perturbed_form_fails_on_distribution(self):
        q = np.array([0.0, 0.0, 0.0])
        res = hj.closedness_on_d_residual(GAMMA_P, KNIFE.spec.distribution, q)
        assert res == pytest.approx(0.1, abs=1e-6)

    def test_full_closedness_implies_distribution_closedness(self):
        grid = knife_grid(40)
        candidates = [
            GAMMA,
            GAMMA_P,
            catalog.make_gamma("exact_linear", {"coefficients": [1.0, -2.0, 0.3]}),
            catalog.make_gamma("exact_quadratic", {"matrix": [[1, 0, 0], [0, 2, 1], [0, 1, 0]]}),
        ]
        tol = 1e-6
        for gamma in candidates:
            for q in grid:
                if hj.closedness_full_residual(gamma, q) < tol:
                    assert hj.closedness_on_d_residual(gamma, KNIFE.spec.distribution, q) < tol


class TestLemmaIdentities:
    def test_constant_form_pullback_vanishes(self):
        gamma = catalog.make_gamma("exact_linear", {"coefficients": [0.5, 1.0, -0.2]})
        z = PhasePoint(np.array([0.2, 0.1, 0.4]), np.array([1.0, 0.0, 0.2]))
        v, w = RNG.normal(size=(2, 6))
        r1, r2, r3 = hj.lemma33_checks(KNIFE.spec, gamma, z, v, w)
        assert r1 < 1e-7

    def test_heading_form_identities(self):
        for z in random_on_m_points(KNIFE.spec, 10, seed=21):
            v, w = RNG.normal(size=(2, 6))
            r1, r2, r3 = hj.lemma33_checks(KNIFE.spec, GAMMA, z, v, w)
            assert r1 < 1e-6
            assert r2 < 1e-6

    def test_projected_flow_stays_in_distribution(self):
        # image of the heading form lies in the constraint set by
        # construction, so the projected Hamiltonian flow is admissible
        for theta in np.linspace(0, 2 * np.pi, 8, endpoint=False):
            z = PhasePoint(np.array([0.3, -0.2, theta]), np.zeros(3))
            v, w = RNG.normal(size=(2, 6))
            _, _, r3 = hj.lemma33_checks(KNIFE.spec, GAMMA, z, v, w)
            assert r3 < 1e-8

    def test_pullback_equals_minus_exterior_derivative(self):
        # the (i) identity on base vectors for every candidate form
        for gamma in (GAMMA, GAMMA_P):
            for _ in range(10):
                z = PhasePoint(RNG.uniform(-1, 1, 3), RNG.uniform(-1, 1, 3))
                v, w = RNG.normal(size=(2, 6))
                r1, _, _ = hj.lemma33_checks(KNIFE.spec, gamma, z, v, w)
                assert r1 < 1e-6


class TestGammaPreconditions:
    def test_heading_form_passes(self):
        system = as_system(KNIFE.spec)
        for q in knife_grid(30):
            pre = hj.gamma_preconditions(system, GAMMA, q)
            assert max(pre.values()) < 1e-7

    def test_off_constraint_image_reported(self):
        system = as_system(KNIFE.spec)
        gamma = catalog.make_gamma("exact_linear", {"coefficients": [0.0, 1.0, 0.0]})
        pre = hj.gamma_preconditions(system, gamma, np.zeros(3))
        assert pre["membership"] > 0.1  # reported, not raised

    def test_unconstrained_closed_form_passes(self):
        system = as_system(FREE.spec)
        gamma = catalog.make_gamma("exact_linear", {"coefficients": [0.7, -0.3]})
        pre = hj.gamma_preconditions(system, gamma, np.array([0.5, 0.5]))
        assert max(pre.values()) < 1e-8


class TestTypeI:
    def test_classical_case_free_particle(self):
        system = as_system(FREE.spec)
        gamma = catalog.make_gamma("exact_linear", {"coefficients": [0.8, -0.4]})
        grid = hj.default_grid(FREE.spec.chart)
        rep = hj.type1_report(system, gamma, grid)
        assert rep.verdict
        assert rep.max_residual < 1e-7

    def test_knife_edge_solution(self):
        system = as_system(KNIFE.spec)
        rep = hj.type1_report(system, GAMMA, knife_grid())
        assert rep.verdict
        assert rep.max_residual < 1e-6

    def test_rolling_disk_solution(self):
        system = as_system(DISK.spec)
        gamma = catalog.make_gamma("disk_rolling", {"c": 0.5, "c_theta": 0.3}, DISK)
        grid = hj.default_grid(DISK.spec.chart, periodic_points=4, linear_points=3)
        rep = hj.type1_report(system, gamma, grid)
        assert rep.verdict
        assert rep.max_residual < 1e-6

    def test_perturbed_form_fails(self):
        system = as_system(KNIFE.spec)
        rep = hj.type1_report(system, GAMMA_P, knife_grid())
        assert not rep.verdict
        assert rep.preconditions["closedness_on_d"] >= 0.05
        assert rep.max_residual >= 1e-3

    def test_precondition_error_carries_residuals(self):
        system = as_system(KNIFE.spec)
        with pytest.raises(PreconditionError) as err:
            hj.type1_residual(system, GAMMA_P, np.zeros(3))
        assert err.value.residuals["closedness_on_d"] > 0.05


class TestTypeII:
    def test_identity_on_classical_solution(self):
        system = as_system(FREE.spec)
        gamma = catalog.make_gamma("exact_linear", {"coefficients": [0.8, -0.4]})
        eps = hj.SymplecticMapSpec(catalog.make_epsilon("identity", {}, 2), "identity")
        for _ in range(10):
            z = PhasePoint(RNG.uniform(-1, 1, 2), RNG.uniform(-1, 1, 2))
            r1, r2 = hj.type2_residuals(system, gamma, eps, z)
            assert r1 < 1e-6 and r2 < 1e-6

    def test_equivalence_on_knife_edge(self):
        system = as_system(KNIFE.spec)
        pts = random_on_m_points(KNIFE.spec, 20, seed=30) + [
            PhasePoint.from_array(z) for z in on_image_points(6)
        ]
        rep = hj.type2_report(system, GAMMA, EPS_ID, pts)
        assert rep.equivalence_ok
        # the sample must exercise both outcomes
        passing = [r for r in rep.residuals if r < 1e-6]
        failing = [r for r in rep.residuals if r >= 1e-6]
        assert passing and failing

    def test_translation_map_passes_on_image(self):
        system = as_system(KNIFE.spec)
        eps = hj.SymplecticMapSpec(
            catalog.make_epsilon("translate", {"shift": [0.4, -0.2, 0.0]}, 3), "translate"
        )
        for z in on_image_points(6):
            defect = eps.symplectic_defect(z)
            assert defect < 1e-6
            r1, r2 = hj.type2_residuals(system, GAMMA, eps, z)
            assert r1 < 1e-6 and r2 < 1e-6

    def test_momentum_shift_leaves_constraint_set(self):
        system = as_system(KNIFE.spec)
        eps = hj.SymplecticMapSpec(
            catalog.make_epsilon("momentum_shift", {"shift": [0.0, 0.5, 0.0]}, 3), "shift"
        )
        z = PhasePoint.from_array(on_image_points(1)[0])
        with pytest.raises(PreconditionError) as err:
            hj.type2_residuals(system, GAMMA, eps, z)
        assert err.value.residuals["eps_preserves_M"] > 0.1


class TestReducedTypeI:
    def test_knife_edge_cyclic_reduction(self):
        G = SymmetrySpec.from_names(KNIFE.spec.chart, ("x", "y"))
        red = reduced_system(KNIFE.spec, G)
        rep = hj.type1_reduced_report(red, GAMMA, knife_grid())
        assert rep.verdict
        assert rep.max_residual < 1e-6

    def test_noninvariant_form_rejected(self):
        G = SymmetrySpec.from_names(KNIFE.spec.chart, ("x", "y"))
        red = reduced_system(KNIFE.spec, G)
        with pytest.raises(InvarianceError):
            hj.type1_reduced_residual(red, GAMMA_P, np.zeros(3))

    def test_free_particle_full_translation(self):
        G = SymmetrySpec.from_names(FREE.spec.chart, ("x", "y"))
        red = reduced_system(FREE.spec, G)
        gamma = catalog.make_gamma("exact_linear", {"coefficients": [0.8, -0.4]})
        for q in hj.default_grid(FREE.spec.chart)[:10]:
            res = hj.type1_reduced_residual(red, gamma, q)
            assert res < 1e-8

    def test_momentum_level_reduction(self):
        G = SymmetrySpec.from_names(KNIFE.spec.chart, ("x", "y"))
        rp = rp_reduced_system(KNIFE.spec, G, (1.0, 0.0))
        rep = hj.type1_reduced_report(rp, GAMMA, knife_grid())
        assert rep.verdict
        assert len(rep.residuals) == 25  # the level-feasible slice of the grid
        assert rep.max_residual < 1e-6


class TestReducedTypeII:
    def test_correspondence_cyclic(self):
        G = SymmetrySpec.from_names(KNIFE.spec.chart, ("x", "y"))
        red = reduced_system(KNIFE.spec, G)
        pts = random_on_m_points(KNIFE.spec, 12, seed=31) + [
            PhasePoint.from_array(z) for z in on_image_points(4)
        ]
        rep = hj.type2_reduced_report(red, GAMMA, EPS_ID, pts)
        assert rep.equivalence_ok  # includes base-to-reduced correspondence
        passing = [r for r in rep.residuals if r < 1e-6]
        failing = [r for r in rep.residuals if r >= 1e-6]
        assert passing and failing

    def test_correspondence_momentum_level(self):
        G = SymmetrySpec.from_names(KNIFE.spec.chart, ("x", "y"))
        rp = rp_reduced_system(KNIFE.spec, G, (1.0, 0.0))
        pts = []
        for p_theta in (0.5, -0.3, 1.1, 0.0):
            for xy in ((0.0, 0.0), (1.2, -0.7)):
                pts.append(np.array([xy[0], xy[1], 0.0, 1.0, 0.0, p_theta]))
        rep = hj.type2_reduced_report(rp, GAMMA, EPS_ID, pts)
        assert rep.equivalence_ok
        assert len(rep.residuals) == len(pts)

    def test_nonequivariant_map_rejected(self):
        G = SymmetrySpec.from_names(KNIFE.spec.chart, ("x", "y"))
        red = reduced_system(KNIFE.spec, G)

        def skew(z):
            out = np.array(z, dtype=float)
            out[3] += 0.1 * z[0]  # momentum shift depending on x
            return out

        eps = hj.SymplecticMapSpec(skew, "skew")
        z = PhasePoint.from_array(on_image_points(1)[0])
        with pytest.raises(InvarianceError):
            hj.type2_reduced_residuals(red, GAMMA, eps, z)
