"""Experiment configuration: a single JSON document, statically validatable.

The schema is versioned so runs stay reproducible across tool versions.  All
quantities that the pipeline consumes (schedules, steps, thresholds, sweep
sizes, seed) live here; nothing is invented at run time.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError
from .geometry import DomainSpec
from .potentials import PotentialSpec, hardy_sharp_constant

SCHEMA_VERSION = 1

_DEFAULT_THRESHOLDS = {
    "rel_tol": 0.02,
    "divergence_ratio": 1.15,
    "growth_ratio": 1.5,
    "comparability_ratio_bound": 25.0,
}
_DEFAULT_SWEEPS = {"energy_trials": 200, "log_phis": 20}


@dataclass
class ExperimentConfig:
    raw: dict
    domain: DomainSpec
    alpha: float
    potential: PotentialSpec
    h_schedule: list
    k_schedule: list
    dt: float
    t_final: float
    probe_times: list
    thresholds: dict
    sweeps: dict
    initial_state: dict
    ball_schedule: list | None
    output_dir: str | None
    seed: int
    custom_table_path: str | None = None
    flags: list = field(default_factory=list)

    def canonical_json(self) -> str:
        return json.dumps(self.raw, sort_keys=True, separators=(",", ":"))


def _domain_from_dict(d: dict, errors: list) -> DomainSpec | None:
    kind = d.get("kind")
    try:
        if kind == "interval":
            return DomainSpec.interval(d["R"])
        if kind == "rectangle":
            return DomainSpec.rectangle(d["a"], d["b"])
        if kind == "disk":
            return DomainSpec.disk(d["R"])
        errors.append(f"domain.kind: unknown kind {kind!r}")
    except KeyError as exc:
        errors.append(f"domain: missing size parameter {exc}")
    except Exception as exc:
        errors.append(f"domain: {exc}")
    return None


def _potential_from_dict(p: dict, d: int, alpha: float, errors: list):
    kind = p.get("kind")
    eps = p.get("epsilon", 0.01)
    try:
        if kind == "hardy_interior":
            has_c = "c" in p
            has_ratio = "c_over_cstar" in p
            if has_c == has_ratio:
                errors.append("potential: give exactly one of 'c' and 'c_over_cstar'")
                return None, None
            c = p["c"] if has_c else p["c_over_cstar"] * hardy_sharp_constant(d, alpha)
            return PotentialSpec.hardy_interior(c, epsilon=eps), None
        if kind == "hardy_boundary":
            return PotentialSpec.hardy_boundary(p["kappa"], epsilon=eps), None
        if kind == "bounded":
            return PotentialSpec.bounded(p["expr"], epsilon=eps), None
        if kind == "custom":
            return None, p["table"]
        errors.append(f"potential.kind: unknown kind {kind!r}")
    except KeyError as exc:
        errors.append(f"potential: missing field {exc}")
    except Exception as exc:
        errors.append(f"potential: {exc}")
    return None, None


def _is_multiple(t: float, dt: float) -> bool:
    q = t / dt
    return abs(q - round(q)) <= 1e-9 * max(1.0, abs(q)) and round(q) >= 1


def validate_dict(doc: dict) -> list:
    """Full static validation; returns a list of 'field: problem' strings."""
    errors: list = []
    if not isinstance(doc, dict):
        return ["document: top level must be a JSON object"]
    if doc.get("schema_version") != SCHEMA_VERSION:
        errors.append(
            f"schema_version: must be {SCHEMA_VERSION}, got {doc.get('schema_version')!r}"
        )
    domain = None
    if "domain" not in doc:
        errors.append("domain: missing")
    else:
        domain = _domain_from_dict(doc["domain"], errors)

    alpha = doc.get("alpha")
    if not isinstance(alpha, (int, float)):
        errors.append("alpha: missing or not a number")
    elif domain is not None:
        d = domain.dimension
        if not (0.0 < alpha < min(2.0, float(d))):
            errors.append(
                f"alpha: {alpha} outside the admissible range (0, {min(2, d)}) for d={d}"
            )

    if "potential" not in doc:
        errors.append("potential: missing")
    elif domain is not None and isinstance(alpha, (int, float)) and 0 < alpha < min(2, domain.dimension):
        pot, table = _potential_from_dict(doc["potential"], domain.dimension, alpha, errors)
        eps = doc["potential"].get("epsilon", 0.01)
        if not (0.0 <= eps < 1.0):
            errors.append(f"potential.epsilon: must lie in [0, 1), got {eps}")
        if table is not None and len(doc.get("h_schedule", [])) != 1:
            errors.append("potential: custom tables require a single-entry h_schedule")

    hs = doc.get("h_schedule")
    if not isinstance(hs, list) or not hs:
        errors.append("h_schedule: missing or empty")
    else:
        if any(not isinstance(h, (int, float)) or h <= 0 for h in hs):
            errors.append("h_schedule: entries must be positive numbers")
        elif any(h2 >= h1 for h1, h2 in zip(hs, hs[1:])):
            errors.append("h_schedule: must be strictly decreasing")
        elif domain is not None:
            if hs[0] >= domain.min_extent:
                errors.append("h_schedule: coarsest spacing is not below the domain extent")
            cells = (2.0 * max(domain.half_widths) / hs[-1]) ** domain.dimension
            if cells > 8192 * 1.3:
                errors.append("h_schedule: finest spacing exceeds the dense-storage cap")

    ks = doc.get("k_schedule")
    if not isinstance(ks, list) or not ks:
        errors.append("k_schedule: missing or empty")
    else:
        order = [math.inf if k is None else k for k in ks]
        if any(not isinstance(k, (int, float)) and k is not None for k in ks):
            errors.append("k_schedule: entries must be numbers or null")
        elif any(k2 <= k1 for k1, k2 in zip(order, order[1:])):
            errors.append("k_schedule: must be strictly increasing (null last)")
        elif any(k is not None and k < 0 for k in ks):
            errors.append("k_schedule: levels must be nonnegative")

    dt = doc.get("dt")
    tf = doc.get("t_final")
    if not isinstance(dt, (int, float)) or dt <= 0:
        errors.append("dt: missing or not positive")
    if not isinstance(tf, (int, float)) or tf <= 0:
        errors.append("t_final: missing or not positive")
    if isinstance(dt, (int, float)) and isinstance(tf, (int, float)) and dt > 0 and tf > 0:
        if not _is_multiple(tf, dt):
            errors.append("t_final: must be a positive integer multiple of dt")
        probes = doc.get("probe_times", [tf])
        if not isinstance(probes, list) or not probes:
            errors.append("probe_times: must be a nonempty list")
        else:
            for t in probes:
                if not isinstance(t, (int, float)) or not (0 < t <= tf) or not _is_multiple(t, dt):
                    errors.append(
                        f"probe_times: {t} must be a multiple of dt inside (0, t_final]"
                    )
                    break
        for t in doc.get("state_checkpoints") or []:
            if not isinstance(t, (int, float)) or not (0 <= t <= tf) or (
                t > 0 and not _is_multiple(t, dt)
            ):
                errors.append(
                    f"state_checkpoints: {t} must be a multiple of dt inside [0, t_final]"
                )
                break

    thresholds = {**_DEFAULT_THRESHOLDS, **doc.get("thresholds", {})}
    if not (0.0 < thresholds["rel_tol"] < 1.0):
        errors.append("thresholds.rel_tol: must lie in (0, 1)")
    if thresholds["divergence_ratio"] <= 1.0:
        errors.append("thresholds.divergence_ratio: must exceed 1")
    if thresholds["growth_ratio"] <= 1.0:
        errors.append("thresholds.growth_ratio: must exceed 1")

    sweeps = {**_DEFAULT_SWEEPS, **doc.get("sweeps", {})}
    for key in ("energy_trials", "log_phis"):
        if not isinstance(sweeps[key], int) or sweeps[key] < 0:
            errors.append(f"sweeps.{key}: must be a nonnegative integer")

    init = doc.get("initial_state", {"kind": "inradius_ball"})
    if init.get("kind") not in ("inradius_ball", "ball", "constant"):
        errors.append(f"initial_state.kind: unknown kind {init.get('kind')!r}")
    elif init.get("kind") == "ball" and not (
        isinstance(init.get("radius"), (int, float)) and init["radius"] > 0
    ):
        errors.append("initial_state.radius: ball initial state needs a positive radius")

    balls = doc.get("ball_schedule")
    if balls is not None:
        if not isinstance(balls, list) or any(
            not isinstance(r, (int, float)) or r <= 0 for r in balls
        ):
            errors.append("ball_schedule: must be a list of positive radii or null")
        elif any(r2 >= r1 for r1, r2 in zip(balls, balls[1:])):
            errors.append("ball_schedule: must be strictly decreasing")

    seed = doc.get("seed", 0)
    if not isinstance(seed, int):
        errors.append("seed: must be an integer")
    return errors


def config_from_dict(doc: dict) -> ExperimentConfig:
    """Parse and validate; raises ConfigError naming the offending field."""
    errors = validate_dict(doc)
    if errors:
        raise ConfigError("; ".join(errors))
    domain = _domain_from_dict(doc["domain"], [])
    alpha = float(doc["alpha"])
    pot, table = _potential_from_dict(doc["potential"], domain.dimension, alpha, [])
    flags = []
    if pot is not None and not pot.boundary_theory_holds(domain.dimension, alpha):
        flags.append(
            "outside_theory: boundary-singular potential is validated only for "
            "d >= 2 with alpha != 1"
        )
    dt = float(doc["dt"])
    tf = float(doc["t_final"])
    return ExperimentConfig(
        raw=doc,
        domain=domain,
        alpha=alpha,
        potential=pot,
        h_schedule=[float(h) for h in doc["h_schedule"]],
        k_schedule=[None if k is None else float(k) for k in doc["k_schedule"]],
        dt=dt,
        t_final=tf,
        probe_times=[float(t) for t in doc.get("probe_times", [tf])],
        thresholds={**_DEFAULT_THRESHOLDS, **doc.get("thresholds", {})},
        sweeps={**_DEFAULT_SWEEPS, **doc.get("sweeps", {})},
        initial_state=doc.get("initial_state", {"kind": "inradius_ball"}),
        ball_schedule=doc.get("ball_schedule"),
        output_dir=doc.get("output_dir"),
        seed=int(doc.get("seed", 0)),
        custom_table_path=table,
        flags=flags,
    )


def load_config(path) -> ExperimentConfig:
    try:
        doc = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"config file: {exc}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file: invalid JSON ({exc})")
    return config_from_dict(doc)


def validate_config(path) -> list:
    """Static validation of a config file; returns the list of violations."""
    try:
        doc = json.loads(Path(path).read_text())
    except OSError as exc:
        return [f"config file: {exc}"]
    except json.JSONDecodeError as exc:
        return [f"config file: invalid JSON ({exc})"]
    return validate_dict(doc)
