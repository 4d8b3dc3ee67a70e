import numpy as np
import pytest

from nhrch import accel, catalog, kernels
from nhrch.constraints import NonholonomicSystem, random_on_m_points

pytestmark = pytest.mark.skipif(
    not accel.NUMBA_ENABLED, reason="acceleration disabled in this environment"
)


class TestModeAgreement:
    def test_base_kernels_match(self):
        entry = catalog.knife_edge()
        fast = NonholonomicSystem(entry.spec, use_numba=True)
        slow = NonholonomicSystem(entry.spec, use_numba=False)
        assert fast.kernels.use_numba and not slow.kernels.use_numba
        for z in random_on_m_points(entry.spec, 10, seed=55):
            q, p = fast.split(z)
            xf, sf = fast.kernels.x_tilde(q, p)
            xs, ss = slow.kernels.x_tilde(q, p)
            assert sf == ss == kernels.OK
            assert np.max(np.abs(xf - xs)) < 5e-11
            bf = fast.kernels.k_basis(q, p)
            bs = slow.kernels.k_basis(q, p)
            assert np.max(np.abs(bf - bs)) < 5e-11

    def test_reduced_kernels_match(self):
        entry = catalog.knife_edge()
        fast = NonholonomicSystem(entry.spec, use_numba=True)
        slow = NonholonomicSystem(entry.spec, use_numba=False)
        rk_fast = kernels.build_reduced_kernels(fast.kernels, (0, 1))
        rk_slow = kernels.build_reduced_kernels(slow.kernels, (0, 1))
        rng = np.random.default_rng(56)
        for _ in range(10):
            y = np.array([rng.uniform(0, 2 * np.pi), 0.0, 0.0, rng.uniform(-1, 1)])
            q, p = rk_fast.section(y)
            # build a feasible reduced state: heading-aligned momentum
            p = np.array([np.cos(y[0]), np.sin(y[0]), y[3]])
            y_feas = rk_fast.project_state(q, p)
            vf, sf = rk_fast.x_tilde_bar(y_feas)
            vs, ss = rk_slow.x_tilde_bar(y_feas)
            assert sf == ss == kernels.OK
            assert np.max(np.abs(vf - vs)) < 5e-11

    def test_requesting_numba_without_support_fails(self, monkeypatch):
        monkeypatch.setattr(accel, "NUMBA_ENABLED", False)
        entry = catalog.knife_edge()
        with pytest.raises(ValueError):
            kernels.build_base_kernels(
                n=3, n_con=1,
                mass=entry.spec.mechanics.lagrangian.mass_matrix,
                potential=entry.spec.mechanics.lagrangian.potential,
                ann=entry.spec.distribution.annihilator_matrix,
                use_numba=True,
            )


class TestFlagParsing:
    def test_env_flag_values(self, monkeypatch):
        for val, expect in (
            ("1", True), ("true", True), ("", True),
            ("0", False), ("false", False), ("off", False), ("NO", False),
        ):
            monkeypatch.setenv("NHRCH_NUMBA", val)
            assert accel._env_enabled() is expect

    def test_plain_python_callables_fall_back(self):
        # user-supplied plain closures cannot compile: the pipeline must
        # quietly run the interpreted path instead
        from nhrch.constraints import DistributionSpec, NonholonomicRCHSpec
        from nhrch.geometry import ChartSpec
        from nhrch.mechanics import HamiltonianSystemSpec, LagrangianSpec

        fields = [
            lambda q: np.array([np.cos(q[2]), np.sin(q[2]), 0.0]),
            lambda q: np.array([0.0, 0.0, 1.0]),
        ]
        chart = ChartSpec(3, ("x", "y", "theta"), (False, False, True))
        spec = NonholonomicRCHSpec(
            HamiltonianSystemSpec(chart, LagrangianSpec(lambda q: np.eye(3), lambda q: 0.0)),
            DistributionSpec(rank=2, spanning_fields=tuple(fields)),
        )
        system = NonholonomicSystem(spec)
        assert not system.kernels.use_numba
        z = catalog.knife_edge().default_state
        ref = NonholonomicSystem(catalog.knife_edge().spec).X_K(z)
        assert np.max(np.abs(system.X_K(z) - ref)) < 1e-9
