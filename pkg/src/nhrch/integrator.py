"""Fixed-step time integration with constraint and energy monitors.

Classical fourth-order Runge-Kutta on the dynamical vector field of any
distributional system.  The step is adjusted downward so an integer number
of uniform steps lands exactly on t_end, keeping endpoint comparisons
honest.  Drift beyond the abort threshold raises instead of silently
projecting harder; drift signals a modeling error upstream.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import RankError, SingularMatrixError, StepOffManifoldError
from .geometry import PhasePoint

DRIFT_ABORT = 1e-4


@dataclass(frozen=True)
class IntegrationConfig:
    step: float = 1e-3
    t_end: float = 1.0
    projection: str = "none"  # or "per_step"
    monitors: tuple = ("energy", "constraint")
    momentum_indices: tuple = ()
    drift_abort: float = DRIFT_ABORT

    def __post_init__(self):
        if self.step <= 0 or self.t_end <= 0:
            raise ValueError("step and t_end must be positive")
        if self.projection not in ("none", "per_step"):
            raise ValueError("projection must be 'none' or 'per_step'")


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray  # (len(times), state_dim)
    monitors: dict = field(default_factory=dict)
    step: float = 0.0

    @property
    def final_state(self):
        return self.states[-1]

    def phase_points(self):
        return [PhasePoint.from_array(s) for s in self.states]


def _rhs_callable(system):
    """Raw (state) -> (derivative, status) callable of a system."""
    kern = getattr(system, "kernels", None)
    if kern is not None and hasattr(kern, "x_tilde"):
        n = system.n

        def rhs(y):
            return kern.x_tilde(y[:n], y[n:])

        return rhs
    rk = getattr(system, "reduced_kernels", None)
    if rk is not None:
        return rk.x_tilde_bar

    def rhs(y):
        return system.X_tilde(y, check=False), kernels.OK

    return rhs


def integrate(system, z0, cfg):
    """Integrate z' = X_tilde(z) from a feasible initial state.

    Returns the trajectory with the requested monitor series; raises
    StepOffManifoldError (carrying the partial trajectory) when constraint
    drift exceeds the abort threshold.
    """
    y = z0.as_array() if isinstance(z0, PhasePoint) else np.array(z0, dtype=float)
    resid0 = system.membership_residual(y)
    if resid0 > 1e-8:
        raise StepOffManifoldError(
            f"initial state off the constraint set: residual {resid0:.3e}"
        )

    n_steps = max(1, int(math.ceil(cfg.t_end / cfg.step - 1e-12)))
    h = cfg.t_end / n_steps
    rhs = _rhs_callable(system)
    project = getattr(getattr(system, "kernels", None), "project_fiber", None)
    n = getattr(system, "n", None)

    states = np.empty((n_steps + 1, y.size))
    states[0] = y
    times = np.linspace(0.0, cfg.t_end, n_steps + 1)

    def step_fail(i, status):
        traj = _finalize(system, times[: i + 1], states[: i + 1], cfg, h)
        kind = "rank" if status == kernels.BAD_RANK else "degenerate two-form"
        return StepOffManifoldError(
            f"vector-field evaluation failed ({kind}) at t={times[i]:.6g}", traj
        )

    for i in range(n_steps):
        k1, s1 = rhs(y)
        if s1 != kernels.OK:
            raise step_fail(i, s1)
        k2, s2 = rhs(y + 0.5 * h * k1)
        if s2 != kernels.OK:
            raise step_fail(i, s2)
        k3, s3 = rhs(y + 0.5 * h * k2)
        if s3 != kernels.OK:
            raise step_fail(i, s3)
        k4, s4 = rhs(y + h * k3)
        if s4 != kernels.OK:
            raise step_fail(i, s4)
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if cfg.projection == "per_step" and project is not None:
            y = np.concatenate([y[:n], project(y[:n], y[n:])])
        states[i + 1] = y
        drift = system.membership_residual(y)
        if drift > cfg.drift_abort:
            traj = _finalize(system, times[: i + 2], states[: i + 2], cfg, h)
            raise StepOffManifoldError(
                f"constraint drift {drift:.3e} exceeded {cfg.drift_abort:.1e} at t={times[i + 1]:.6g}",
                traj,
            )

    return _finalize(system, times, states, cfg, h)


def _finalize(system, times, states, cfg, h):
    monitors = {}
    if "energy" in cfg.monitors:
        monitors["energy"] = np.array([system.hamiltonian(s) for s in states])
    if "constraint" in cfg.monitors:
        monitors["constraint"] = np.array(
            [system.membership_residual(s) for s in states]
        )
    if "momentum" in cfg.monitors and cfg.momentum_indices:
        n = getattr(system, "n", states.shape[1] // 2)
        cols = [n + idx for idx in cfg.momentum_indices]
        monitors["momentum"] = states[:, cols].copy()
    return Trajectory(times=times.copy(), states=states.copy(), monitors=monitors, step=h)


def endpoint_error(trajectory, reference):
    """Max-norm distance between the final state and a reference state."""
    ref = reference.as_array() if isinstance(reference, PhasePoint) else np.asarray(reference, float)
    return float(np.max(np.abs(trajectory.final_state - ref)))
