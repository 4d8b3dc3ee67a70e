"""Command-line interface: scenario configs in, reports and trajectories out.

Commands
    check      structural checks (bracket generation, regularity,
               admissibility/compatibility)
    simulate   fixed-step integration with monitors, trajectory to CSV
    hj-verify  Type I / Type II residual suites, base and reduced
    reduce     reduction construction, relatedness statistics, drift

Exit code 0 when every verdict passes, 1 on verification failure (the
failing residual is named on stderr), 2 on configuration errors.  Reports
are deterministic for a fixed config and seed; wall-clock timings go to a
separate sidecar file so the main report stays byte-reproducible.
"""

import argparse
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import catalog
from . import hamilton_jacobi as hj
from . import reduction
from .constraints import (
    DistributionSpec,
    NonholonomicRCHSpec,
    as_system,
    check_admissibility_compatibility,
    check_completeness,
    check_d_regularity,
    full_distribution,
    random_on_m_points,
)
from .errors import (
    ConfigError,
    NHRCHError,
    StepOffManifoldError,
    UnsupportedGroupError,
)
from .geometry import ChartSpec, PhasePoint
from .integrator import IntegrationConfig, integrate
from .mechanics import HamiltonianSystemSpec, LagrangianSpec


@dataclass
class Scenario:
    name: str
    entry: object  # CatalogEntry or None for inline systems
    spec: NonholonomicRCHSpec
    gamma: object
    epsilon: object
    symmetry: object
    mu: object
    initial_state: PhasePoint
    integration: IntegrationConfig
    grid_cfg: dict
    tolerance: float
    samples: int
    seed: int


def _inline_system(cfg):
    try:
        chart_cfg = cfg["chart"]
        chart = ChartSpec(
            len(chart_cfg["names"]), tuple(chart_cfg["names"]),
            tuple(chart_cfg.get("periodic", [False] * len(chart_cfg["names"]))),
        )
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"bad inline chart: {exc}") from None
    n = chart.dim
    mass_cfg = cfg.get("mass", {"kind": "identity"})
    kind = mass_cfg.get("kind", "identity")
    if kind == "identity":
        mass = lambda q: np.eye(n)
    elif kind == "diag":
        vals = np.asarray(mass_cfg["values"], dtype=float)
        if vals.size != n:
            raise ConfigError("diag mass needs one value per coordinate")
        mass = lambda q: np.diag(vals)
    else:
        raise ConfigError(f"unknown mass kind '{kind}'")
    pot_cfg = cfg.get("potential", {"kind": "zero"})
    potential = catalog.make_potential(
        pot_cfg.get("kind", "zero"), pot_cfg.get("coeffs"), n
    )
    dist_cfg = cfg.get("distribution", {"kind": "full"})
    dkind = dist_cfg.get("kind", "full")
    if dkind == "full":
        dist = full_distribution(n)
    elif dkind == "constant":
        rows = np.asarray(dist_cfg["fields"], dtype=float)
        if rows.ndim != 2 or rows.shape[1] != n:
            raise ConfigError("constant distribution fields must be rows of length n")
        fields = tuple((lambda q, _r=r: _r.copy()) for r in rows)
        dist = DistributionSpec(rank=rows.shape[0], spanning_fields=fields)
    else:
        raise ConfigError(f"unknown distribution kind '{dkind}'")
    force = _field_from(cfg.get("force"), n)
    control = _field_from(cfg.get("control"), n)
    spec = NonholonomicRCHSpec(
        HamiltonianSystemSpec(chart, LagrangianSpec(mass, potential)),
        dist,
        force=force,
        control=control,
    )
    return spec


def _field_from(cfg, n):
    if cfg is None:
        return None
    return catalog.make_force(cfg.get("kind"), cfg, n)


def build_scenario(cfg, index=0, tol_override=None, seed=0):
    if not isinstance(cfg, dict):
        raise ConfigError("each scenario must be a JSON object")
    system_cfg = cfg.get("system")
    entry = None
    if isinstance(system_cfg, str):
        entry = catalog.get_entry(system_cfg, **cfg.get("system_params", {}))
        spec = entry.spec
    elif isinstance(system_cfg, dict):
        spec = _inline_system(system_cfg)
    else:
        raise ConfigError("'system' must be a catalog name or an inline object")
    chart = spec.chart

    name = cfg.get("name") or (entry.name if entry else f"scenario_{index}")

    gamma = None
    if cfg.get("gamma"):
        gcfg = cfg["gamma"]
        gamma = catalog.make_gamma(gcfg.get("name"), gcfg.get("params", {}), entry)
    epsilon = None
    if cfg.get("epsilon"):
        ecfg = cfg["epsilon"]
        epsilon = hj.SymplecticMapSpec(
            catalog.make_epsilon(ecfg.get("name"), ecfg.get("params", {}), chart.dim),
            ecfg.get("name"),
        )

    symmetry = None
    sym_cfg = cfg.get("symmetry")
    if sym_cfg:
        try:
            symmetry = reduction.SymmetrySpec.from_names(chart, tuple(sym_cfg))
        except ValueError as exc:
            raise ConfigError(f"bad symmetry coordinates: {exc}") from None
        if entry is not None and entry.symmetry_group != "translation":
            symmetry = reduction.SymmetrySpec(
                symmetry.cyclic_indices, group=entry.symmetry_group
            )
    mu = np.asarray(cfg["mu"], dtype=float) if cfg.get("mu") is not None else None

    if cfg.get("initial_state"):
        z0 = PhasePoint(
            np.asarray(cfg["initial_state"]["q"], dtype=float),
            np.asarray(cfg["initial_state"]["p"], dtype=float),
        )
        if z0.dim != chart.dim:
            raise ConfigError("initial state has the wrong dimension")
    elif entry is not None:
        z0 = entry.default_state
    else:
        z0 = PhasePoint(np.zeros(chart.dim), np.zeros(chart.dim))

    icfg = cfg.get("integration", {})
    try:
        integration = IntegrationConfig(
            step=float(icfg.get("step", 1e-3)),
            t_end=float(icfg.get("t_end", 1.0)),
            projection=icfg.get("projection", "none"),
            monitors=tuple(icfg.get("monitors", ("energy", "constraint", "momentum"))),
            momentum_indices=tuple(symmetry.cyclic_indices) if symmetry else (),
        )
    except ValueError as exc:
        raise ConfigError(f"bad integration config: {exc}") from None

    return Scenario(
        name=name,
        entry=entry,
        spec=spec,
        gamma=gamma,
        epsilon=epsilon,
        symmetry=symmetry,
        mu=mu,
        initial_state=z0,
        integration=integration,
        grid_cfg=cfg.get("grid", {}),
        tolerance=float(tol_override or cfg.get("tolerance", hj.DEFAULT_TOL)),
        samples=int(cfg.get("samples", 50)),
        seed=seed,
    )


def _grid(scn):
    g = scn.grid_cfg
    return hj.default_grid(
        scn.spec.chart,
        periodic_points=int(g.get("periodic_points", 8)),
        linear_points=int(g.get("linear_points", 5)),
        linear_range=tuple(g.get("linear_range", (-2.0, 2.0))),
    )


def _fmt(x):
    if isinstance(x, (np.floating, float)):
        return float(x)
    if isinstance(x, (np.integer, int)):
        return int(x)
    if isinstance(x, np.ndarray):
        return [_fmt(v) for v in x.tolist()]
    if isinstance(x, dict):
        return {k: _fmt(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_fmt(v) for v in x]
    return x


def run_check(scn):
    grid = _grid(scn)
    stride = max(1, len(grid) // 12)
    q_samples = grid[::stride]
    completeness = check_completeness(scn.spec.distribution, q_samples, max_depth=2)
    bracket_ok = all(rep.bracket_generating for rep in completeness)

    reg_ok = True
    worst_cond = 0.0
    for q in q_samples:
        ok, cond = check_d_regularity(scn.spec, q)
        reg_ok = reg_ok and ok
        if np.isfinite(cond):
            worst_cond = max(worst_cond, cond)

    adm_ok = True
    reports = []
    for z in random_on_m_points(scn.spec, 8, seed=scn.seed):
        rep = check_admissibility_compatibility(scn.spec, z)
        adm_ok = adm_ok and rep.admissible and rep.compatible
        reports.append(
            {"rank_F": rep.rank_F, "dim_TM": rep.dim_TM,
             "intersection_dim": rep.intersection_dim}
        )

    report = {
        "completeness": {
            "bracket_generating": bracket_ok,
            "samples": [
                {"q": _fmt(r.q), "rank": r.achieved_rank, "depth": r.depth}
                for r in completeness
            ],
        },
        "d_regularity": {"ok": reg_ok, "worst_condition": worst_cond},
        "admissibility_compatibility": {"ok": adm_ok, "samples": reports},
    }
    failures = []
    if not bracket_ok:
        failures.append("completeness.bracket_generating")
    if not reg_ok:
        failures.append("d_regularity.ok")
    if not adm_ok:
        failures.append("admissibility_compatibility.ok")
    return report, failures


def _csv_float(x):
    return repr(float(x))


def write_trajectory_csv(path, scn, traj):
    names = scn.spec.chart.coord_names
    n = scn.spec.chart.dim
    cols = ["t"]
    cols += [f"q_{nm}" for nm in names]
    cols += [f"p_{nm}" for nm in names]
    cols += ["H", "constraint_resid"]
    mom_idx = list(scn.integration.momentum_indices)
    cols += [f"J_{names[i]}" for i in mom_idx]
    energy = traj.monitors.get("energy")
    constraint = traj.monitors.get("constraint")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(cols) + "\n")
        for i, t in enumerate(traj.times):
            row = [_csv_float(t)]
            row += [_csv_float(v) for v in traj.states[i]]
            row.append(_csv_float(energy[i]) if energy is not None else "")
            row.append(_csv_float(constraint[i]) if constraint is not None else "")
            for idx in mom_idx:
                row.append(_csv_float(traj.states[i][n + idx]))
            fh.write(",".join(row) + "\n")


def run_simulate(scn, outdir):
    system = as_system(scn.spec)
    failures = []
    try:
        traj = integrate(system, scn.initial_state, scn.integration)
        aborted = False
    except StepOffManifoldError as exc:
        traj = exc.trajectory
        aborted = True
        failures.append(f"simulate.drift ({exc})")
    report = {
        "steps": int(len(traj.times) - 1) if traj is not None else 0,
        "step_used": traj.step if traj is not None else None,
        "aborted": aborted,
    }
    if traj is not None:
        path = os.path.join(outdir, f"{scn.name}_trajectory.csv")
        write_trajectory_csv(path, scn, traj)
        report["trajectory_csv"] = path
        if "energy" in traj.monitors:
            e = traj.monitors["energy"]
            report["energy_drift"] = float(np.max(np.abs(e - e[0])))
        if "constraint" in traj.monitors:
            report["max_constraint_residual"] = float(np.max(traj.monitors["constraint"]))
        report["final_state"] = _fmt(traj.final_state)
    return report, failures


def run_hj_verify(scn):
    if scn.gamma is None:
        raise ConfigError("hj-verify needs a 'gamma' entry in the scenario")
    system = as_system(scn.spec)
    grid = _grid(scn)
    tol = scn.tolerance
    report = {}
    failures = []

    t1 = hj.type1_report(system, scn.gamma, grid, tol=tol)
    report["type1"] = _fmt(t1.summary())
    if not t1.verdict:
        failures.append(f"type1.max_residual={t1.max_residual:.3e}")

    eps = scn.epsilon or hj.SymplecticMapSpec(
        catalog.make_epsilon("identity", {}, scn.spec.chart.dim), "identity"
    )
    pts = random_on_m_points(scn.spec, scn.samples, seed=scn.seed)
    image_pts = []
    for q in grid[:: max(1, len(grid) // 8)]:
        image_pts.append(np.concatenate([q, scn.gamma(q)]))
    t2 = hj.type2_report(system, scn.gamma, eps, pts + image_pts, tol=tol)
    report["type2"] = _fmt(t2.summary())
    if not t2.equivalence_ok:
        failures.append("type2.equivalence")

    if scn.symmetry is not None:
        try:
            red = reduction.reduced_system(scn.spec, scn.symmetry)
        except UnsupportedGroupError as exc:
            raise ConfigError(str(exc)) from None
        r1 = hj.type1_reduced_report(red, scn.gamma, grid, tol=tol)
        report["type1_reduced"] = _fmt(r1.summary())
        if not r1.verdict:
            failures.append(f"type1_reduced.max_residual={r1.max_residual:.3e}")
        r2 = hj.type2_reduced_report(red, scn.gamma, eps, pts + image_pts, tol=tol)
        report["type2_reduced"] = _fmt(r2.summary())
        if not r2.equivalence_ok:
            failures.append("type2_reduced.correspondence")

        if scn.mu is not None:
            rp = reduction.rp_reduced_system(scn.spec, scn.symmetry, scn.mu)
            ro = reduction.ro_reduced_system(scn.spec, scn.symmetry, scn.mu)
            rp1 = hj.type1_reduced_report(rp, scn.gamma, grid, tol=tol)
            report["type1_point_reduced"] = _fmt(rp1.summary())
            if not rp1.verdict:
                failures.append(
                    f"type1_point_reduced.max_residual={rp1.max_residual:.3e}"
                )
            level_pts = [z for z in pts + image_pts if rp.level_residual(z) < 1e-8]
            level_pts += _level_section_points(rp, count=max(8, scn.samples // 4))
            rp2 = hj.type2_reduced_report(rp, scn.gamma, eps, level_pts, tol=tol)
            report["type2_point_reduced"] = _fmt(rp2.summary())
            if not rp2.equivalence_ok:
                failures.append("type2_point_reduced.correspondence")
            ro1 = hj.type1_reduced_report(ro, scn.gamma, grid, tol=tol)
            report["type1_orbit_reduced"] = _fmt(ro1.summary())
            if not ro1.verdict:
                failures.append(
                    f"type1_orbit_reduced.max_residual={ro1.max_residual:.3e}"
                )
            agreement = _pipeline_agreement(rp, ro)
            report["orbit_vs_point_agreement"] = agreement
            if agreement > 1e-10:
                failures.append(f"orbit_vs_point_agreement={agreement:.3e}")
    return report, failures


def _level_section_points(rp, count=8):
    """Deterministic feasible phase points on the momentum level: the
    feasible probe with its free momenta varied."""
    if rp.ambient_dim == 0:
        return []
    rng = np.random.default_rng(2)
    probe, resid = reduction._level_feasible_point(rp.base, rp.symmetry, rp.mu)
    if resid > 1e-8:
        return []
    nb = rp.base.n
    out = []
    free = [i for i in range(nb) if i not in rp.symmetry.cyclic_indices]
    for _ in range(count):
        z = probe.copy()
        for i in free:
            z[nb + i] += rng.uniform(-1.0, 1.0)
        # repair the constraint within the free momenta
        z[nb:] = rp.base.kernels.project_fiber(z[:nb], z[nb:])
        if rp.base.membership_residual(z) < 1e-8 and rp.level_residual(z) < 1e-8:
            out.append(z)
    return out


def _pipeline_agreement(rp, ro, count=10):
    if rp.ambient_dim == 0:
        return 0.0
    rng = np.random.default_rng(1)
    worst = 0.0
    probe, _ = reduction._level_feasible_point(rp.base, rp.symmetry, rp.mu)
    y0 = rp.project_point(probe)
    for _ in range(count):
        y = y0 + 0.0
        # vary the free momenta only: stay on the feasible slice
        nq = rp.reduced_kernels.n_red_q
        y[nq:] = y[nq:] + rng.uniform(-1.0, 1.0, size=y.size - nq)
        try:
            worst = max(worst, float(np.max(np.abs(rp.X_tilde(y) - ro.X_tilde(y)))))
        except NHRCHError:
            continue
    return worst


def run_reduce(scn):
    if scn.symmetry is None:
        raise ConfigError("reduce needs a 'symmetry' entry in the scenario")
    report = {}
    failures = []
    try:
        red = reduction.reduced_system(scn.spec, scn.symmetry)
    except UnsupportedGroupError as exc:
        raise ConfigError(str(exc)) from None
    system = as_system(scn.spec)
    pts = random_on_m_points(scn.spec, scn.samples, seed=scn.seed)
    resids = [reduction.pi_relatedness_residual(system, red, z) for z in pts]
    report["cyclic_reduction"] = {
        "state_names": list(red.state_names),
        "pi_relatedness_max": float(np.max(resids)),
        "pi_relatedness_mean": float(np.mean(resids)),
        "structure": red.structure_report(red.project_point(pts[0])),
    }
    if np.max(resids) > scn.tolerance:
        failures.append(f"cyclic_reduction.pi_relatedness={np.max(resids):.3e}")

    traj = integrate(system, scn.initial_state,
                     IntegrationConfig(step=1e-3, t_end=2.0, monitors=("constraint",),
                                       momentum_indices=scn.integration.momentum_indices))
    drift = reduction.momentum_drift(scn.spec, scn.symmetry, traj)
    report["momentum_drift"] = _fmt(drift)

    if scn.mu is not None:
        rp = reduction.rp_reduced_system(scn.spec, scn.symmetry, scn.mu)
        ro = reduction.ro_reduced_system(scn.spec, scn.symmetry, scn.mu)
        probe, _ = reduction._level_feasible_point(system, scn.symmetry, scn.mu)
        rp_resid = reduction.pi_relatedness_residual(system, rp, probe)
        agreement = _pipeline_agreement(rp, ro)
        report["point_reduction"] = {
            "state_names": list(rp.state_names),
            "pi_relatedness_at_probe": rp_resid,
            "orbit_vs_point_agreement": agreement,
        }
        if rp_resid > scn.tolerance:
            failures.append(f"point_reduction.pi_relatedness={rp_resid:.3e}")
        if agreement > 1e-10:
            failures.append(f"point_reduction.orbit_agreement={agreement:.3e}")
    return report, failures


COMMANDS = {
    "check": run_check,
    "simulate": run_simulate,
    "hj-verify": run_hj_verify,
    "reduce": run_reduce,
}


def run_scenario(scn, command, outdir):
    tic = time.perf_counter()
    if command == "simulate":
        report, failures = run_simulate(scn, outdir)
    else:
        report, failures = COMMANDS[command](scn)
    elapsed = time.perf_counter() - tic
    return {
        "scenario": scn.name,
        "command": command,
        "tolerance": scn.tolerance,
        "report": report,
        "failures": failures,
        "passed": not failures,
    }, elapsed


def run(config, command, outdir=".", tol=None, seed=0):
    """Run one scenario or a batch; returns (reports, timings, all_passed)."""
    if isinstance(config, dict) and "scenarios" in config:
        scenarios_cfg = config["scenarios"]
    elif isinstance(config, list):
        scenarios_cfg = config
    else:
        scenarios_cfg = [config]
    scenarios = [
        build_scenario(c, index=i, tol_override=tol, seed=seed)
        for i, c in enumerate(scenarios_cfg)
    ]
    os.makedirs(outdir, exist_ok=True)
    max_workers = int(os.environ.get("NHRCH_THREADS", "0")) or min(4, len(scenarios))
    results = [None] * len(scenarios)
    timings = [None] * len(scenarios)
    if len(scenarios) == 1:
        results[0], timings[0] = run_scenario(scenarios[0], command, outdir)
    else:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            futures = {
                pool.submit(run_scenario, scn, command, outdir): i
                for i, scn in enumerate(scenarios)
            }
            for fut, i in futures.items():
                results[i], timings[i] = fut.result()
    all_passed = all(r["passed"] for r in results)
    return results, timings, all_passed


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="nhrch",
        description="constrained controlled Hamiltonian systems: checks, simulation, "
        "Hamilton-Jacobi verification, symmetry reduction",
    )
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=True, help="scenario JSON file")
    parser.add_argument("--out", default="nhrch_out", help="output directory")
    parser.add_argument("--tol", type=float, default=None, help="tolerance override")
    parser.add_argument("--seed", type=int, default=0, help="sample-point seed")
    args = parser.parse_args(argv)

    try:
        with open(args.config, "r", encoding="utf-8") as fh:
            config = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    try:
        results, timings, all_passed = run(
            config, args.command, outdir=args.out, tol=args.tol, seed=args.seed
        )
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NHRCHError as exc:
        print(f"verification failure: {exc}", file=sys.stderr)
        return 1

    report_path = os.path.join(args.out, "report.json")
    with open(report_path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(results, fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(os.path.join(args.out, "timings.json"), "w", encoding="utf-8") as fh:
        json.dump(
            [{"scenario": r["scenario"], "seconds": t} for r, t in zip(results, timings)],
            fh, indent=2,
        )
        fh.write("\n")

    for r in results:
        status = "pass" if r["passed"] else "FAIL"
        print(f"[{status}] {r['command']} {r['scenario']}")
        for f in r["failures"]:
            print(f"    failing: {f}", file=sys.stderr)
    print(f"report: {report_path}")
    return 0 if all_passed else 1


if __name__ == "__main__":
    sys.exit(main())
