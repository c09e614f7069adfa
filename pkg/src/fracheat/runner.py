"""Configuration-driven experiment orchestration with reproducible reports.

A run executes the full pipeline: spectral refinement series, the monotone
truncated family at every mesh, the inequality certificates at the finest
mesh, and the classifier.  Everything is written to the output directory as
report.json plus CSV files (series, trajectories, curves, and optional state
checkpoints).  With a fixed seed and one worker the report is byte-stable
across runs.
"""

from __future__ import annotations

import hashlib
import json
import math
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .config import ExperimentConfig
from .diagnostics import (
    Certificate,
    ClassifierThresholds,
    classify,
    energy_inequality_certificate,
    exponential_bound_certificate,
    ground_state_comparability,
    log_estimate_certificate,
    shrinking_ball_certificate,
)
from .errors import BallTooSmall, EmptyGrid
from .evolution import duhamel_residual, evolve, initial_state
from .geometry import DomainSpec, build_grid
from .potentials import estimate_boundary_hardy_constant, load_custom_table, truncate
from .spectral import (
    SpectralSeries,
    prepared_levels,
    series_from_prepared,
    spectral_bottom,
)

STEP_MARGIN = 0.45


def _jsonable(value):
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, (np.floating, np.integer)):
        value = value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def _certificate_json(cert: Certificate) -> dict:
    return {
        "name": cert.name,
        "inputs_digest": cert.inputs_digest,
        "lhs": _jsonable(cert.lhs),
        "rhs": _jsonable(cert.rhs),
        "tolerance": _jsonable(cert.tolerance),
        "satisfied": cert.satisfied,
        "slack": _jsonable(cert.slack),
        "details": _jsonable(cert.details),
    }


class _MeshLevel:
    """Everything computed at one spacing: operator, potential, trajectories."""

    def __init__(self, h, op, fld):
        self.h = h
        self.op = op
        self.fld = fld
        self.fields_by_k = {}
        self.lambda_by_k = {}
        self.dt = None
        self.trajectories = {}

    def field_at(self, k):
        if k not in self.fields_by_k:
            self.fields_by_k[k] = self.fld if k is None else truncate(self.fld, k)
        return self.fields_by_k[k]


def _evolve_level(level: _MeshLevel, config: ExperimentConfig):
    """Stepping bottoms, admissible dt, and the truncated family at one mesh."""
    for k in config.k_schedule:
        fld = level.field_at(k)
        level.lambda_by_k[k] = spectral_bottom(level.op, fld.values).lambda0
    dt = config.dt
    worst = min(level.lambda_by_k.values())
    while dt * max(0.0, -worst) >= STEP_MARGIN:
        dt *= 0.5
    level.dt = dt
    u0 = _initial_state(level.op.grid, config)
    for k in config.k_schedule:
        fld = level.field_at(k)
        level.trajectories[k] = evolve(
            level.op, fld, u0, config.t_final, dt, lambda0=level.lambda_by_k[k]
        )
    return level


def _initial_state(grid, config: ExperimentConfig):
    init = config.initial_state
    return initial_state(grid, kind=init.get("kind", "inradius_ball"), radius=init.get("radius"))


def _auto_ball_schedule(config: ExperimentConfig, h: float) -> list:
    radii = []
    r = config.domain.inradius / 2.0
    while True:
        ball = (
            DomainSpec.interval(r)
            if config.domain.dimension == 1
            else DomainSpec.disk(r)
        )
        try:
            grid = build_grid(ball, h)
        except EmptyGrid:
            break
        if grid.n < 8:
            break
        radii.append(r)
        r /= 2.0
    return radii


def run_experiment(
    config: ExperimentConfig,
    out_dir=None,
    threads: int = 1,
    seed: int | None = None,
) -> dict:
    """Execute the full pipeline and write report.json plus CSV files.

    Returns a dict with the output paths and the verdict label.  The exit
    status of the CLI does not depend on the verdict; configuration problems
    raise ConfigError before any computation starts.
    """
    rng = np.random.default_rng(config.seed if seed is None else seed)
    out = Path(out_dir or config.output_dir or "fracheat_run")
    out.mkdir(parents=True, exist_ok=True)

    potential = config.potential
    if potential is None:
        grid0 = build_grid(config.domain, config.h_schedule[0])
        potential = load_custom_table(config.custom_table_path, grid0)

    prepared = prepared_levels(config.domain, config.alpha, potential, config.h_schedule)
    series = series_from_prepared(prepared, potential, config.k_schedule)

    levels = [_MeshLevel(h, op, fld) for h, op, fld in prepared]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            levels = list(pool.map(lambda lv: _evolve_level(lv, config), levels))
    else:
        levels = [_evolve_level(lv, config) for lv in levels]

    probe = config.probe_times[0]
    thresholds = ClassifierThresholds(
        rel_tol=config.thresholds["rel_tol"],
        divergence_ratio=config.thresholds["divergence_ratio"],
        growth_ratio=config.thresholds["growth_ratio"],
        probe_time=probe,
    )
    family = [traj for lv in levels for traj in lv.trajectories.values()]
    verdict = classify(series, family, thresholds)

    finest = levels[-1]
    deepest_k = config.k_schedule[-1]
    certificates = _certificates(config, potential, finest, deepest_k, probe, rng)
    residuals = {
        "duhamel": duhamel_residual(
            finest.trajectories[deepest_k], finest.op, finest.field_at(deepest_k)
        )
    }

    extras = {}
    if potential.kind == "hardy_boundary":
        extras["boundary_hardy_constant"] = estimate_boundary_hardy_constant(
            config.domain, config.alpha, config.h_schedule
        )

    series_path = out / "series.csv"
    series.write_csv(series_path)
    traj_path = out / "trajectories.csv"
    _write_trajectories(traj_path, levels)
    curves_path = out / "curves.csv"
    _write_curves(curves_path, series, verdict)
    checkpoints = config.raw.get("state_checkpoints") or []
    if checkpoints:
        _write_states(out / "states.csv", levels, checkpoints)

    digest = hashlib.sha256(config.canonical_json().encode()).hexdigest()[:16]
    report = {
        "schema_version": 1,
        "config_digest": digest,
        "flags": config.flags,
        "verdict": {
            "label": verdict.label,
            "thresholds": _jsonable(verdict.thresholds.as_dict()),
            "epsilon": _jsonable(verdict.epsilon),
            "evidence": _jsonable(verdict.evidence),
        },
        "certificates": [_certificate_json(c) for c in certificates],
        "residuals": _jsonable(residuals),
        "extras": _jsonable(extras),
        "series_file": series_path.name,
        "trajectories_file": traj_path.name,
        "curves_file": curves_path.name,
    }
    report_path = out / "report.json"
    report_path.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    return {
        "report": report_path,
        "series": series_path,
        "trajectories": traj_path,
        "curves": curves_path,
        "verdict": verdict.label,
    }


def _certificates(config, potential, finest: _MeshLevel, deepest_k, probe, rng) -> list:
    certs = []
    for k in config.k_schedule:
        certs.append(
            exponential_bound_certificate(finest.trajectories[k], finest.lambda_by_k[k])
        )

    n = finest.op.n
    trials = config.sweeps["energy_trials"]
    min_slack = math.inf
    for _ in range(trials):
        u = rng.uniform(0.1, 1.1, size=n)
        phi = rng.standard_normal(n)
        cert = energy_inequality_certificate(finest.op, u, phi)
        min_slack = min(min_slack, cert.slack)
    if trials:
        certs.append(
            Certificate(
                name="energy_inequality_sweep",
                inputs_digest=hashlib.sha256(
                    f"energy_sweep:{trials}:{config.seed}".encode()
                ).hexdigest()[:16],
                lhs=-min_slack,
                rhs=0.0,
                tolerance=1e-12,
                satisfied=bool(-min_slack <= 1e-12),
                slack=min_slack,
                details={"trials": trials, "min_slack": _jsonable(min_slack)},
            )
        )

    traj = finest.trajectories[deepest_k]
    fld = finest.field_at(deepest_k)
    t2 = probe
    t1 = max(finest.dt, math.floor(probe / (2.0 * finest.dt)) * finest.dt)
    phis = config.sweeps["log_phis"]
    worst = None
    for _ in range(phis):
        raw = np.abs(rng.standard_normal(n)) + 0.05
        Phi = raw / math.sqrt(finest.op.cell_volume * np.sum(raw * raw))
        cert = log_estimate_certificate(traj, Phi, fld, t1, t2)
        if worst is None or cert.slack < worst.slack:
            worst = cert
    if worst is not None:
        worst = Certificate(
            name="log_estimate_sweep",
            inputs_digest=worst.inputs_digest,
            lhs=worst.lhs,
            rhs=worst.rhs,
            tolerance=worst.tolerance,
            satisfied=worst.satisfied,
            slack=worst.slack,
            details={**worst.details, "phis": phis},
        )
        certs.append(worst)

    certs.append(
        ground_state_comparability(
            finest.op,
            _initial_state(finest.op.grid, config),
            probe,
            dt=finest.dt,
            ratio_bound=config.thresholds["comparability_ratio_bound"],
        )
    )

    balls = config.ball_schedule or _auto_ball_schedule(config, finest.h)
    if len(balls) >= 3 and potential.kind != "custom":
        try:
            certs.append(
                shrinking_ball_certificate(
                    config.domain, config.alpha, potential, balls, finest.h
                )
            )
        except BallTooSmall:
            pass
    return certs


def _write_trajectories(path, levels) -> None:
    with open(path, "w") as fh:
        fh.write("h,k,t,l2_norm,max_value\n")
        for lv in levels:
            for k, traj in lv.trajectories.items():
                ktxt = "inf" if k is None else repr(float(k))
                for t, nrm, mx in zip(traj.times, traj.l2_norms, traj.max_values):
                    fh.write(f"{lv.h!r},{ktxt},{float(t)!r},{float(nrm)!r},{float(mx)!r}\n")


def _write_states(path, levels, checkpoints) -> None:
    with open(path, "w") as fh:
        fh.write("h,k,t,index,value\n")
        for lv in levels:
            for k, traj in lv.trajectories.items():
                ktxt = "inf" if k is None else repr(float(k))
                for t in checkpoints:
                    state = traj.state_at(t)
                    for i, v in enumerate(state):
                        fh.write(f"{lv.h!r},{ktxt},{float(t)!r},{i},{float(v)!r}\n")


def _write_curves(path, series: SpectralSeries, verdict) -> None:
    with open(path, "w") as fh:
        fh.write("curve,x,y\n")
        for h, k, lam in verdict.evidence["lambda0"]:
            fh.write(f"lambda0_vs_h,{h!r},{lam!r}\n")
        for h, sup in verdict.evidence["sup_norms"]:
            fh.write(f"sup_norm_vs_h,{h!r},{sup!r}\n")
        for e in series.entries:
            k = "inf" if e.k is None else repr(e.k)
            fh.write(f"lambda0_vs_k@h={e.h!r},{k},{e.lambda0!r}\n")
