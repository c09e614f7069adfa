"""Certificates for the discrete inequalities and the existence/blow-up classifier.

Each certificate packages one checkable inequality: the left and right sides
actually computed, the tolerance used, whether it held, and the slack
rhs - lhs.  The classifier weighs a spectral refinement series against the
growth of the evolved trajectories and returns EXISTS, BLOW_UP or
INCONCLUSIVE; near-critical configurations are expected to land in the
inconclusive band at desk scale.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field

import numpy as np

from .assembly import OperatorMatrix, assemble_operator
from .errors import BallTooSmall, InsufficientEvidence, NonpositiveState
from .geometry import DomainSpec, boundary_distance, build_grid
from .potentials import PotentialField, PotentialSpec, sample_potential
from .spectral import SpectralSeries, form_bilinear, form_energy, spectral_bottom
from .evolution import Trajectory, evolve

EXISTS = "EXISTS"
BLOW_UP = "BLOW_UP"
INCONCLUSIVE = "INCONCLUSIVE"


def _digest(*parts) -> str:
    hasher = hashlib.sha256()
    for p in parts:
        if isinstance(p, np.ndarray):
            hasher.update(np.ascontiguousarray(p).tobytes())
        else:
            hasher.update(repr(p).encode())
    return hasher.hexdigest()[:16]


@dataclass(frozen=True)
class Certificate:
    """One checked inequality: satisfied iff lhs <= rhs + tolerance."""

    name: str
    inputs_digest: str
    lhs: float
    rhs: float
    tolerance: float
    satisfied: bool
    slack: float
    details: dict = field(default_factory=dict)


def _make_certificate(name, digest, lhs, rhs, tolerance, satisfied=None, **details) -> Certificate:
    lhs = float(lhs)
    rhs = float(rhs)
    if satisfied is None:
        satisfied = lhs <= rhs + tolerance
    return Certificate(
        name=name,
        inputs_digest=digest,
        lhs=lhs,
        rhs=rhs,
        tolerance=float(tolerance),
        satisfied=bool(satisfied),
        slack=rhs - lhs,
        details=details,
    )


def energy_inequality_certificate(
    M: OperatorMatrix, u, phi, tolerance: float = 1e-12
) -> Certificate:
    """Form energy of phi dominates the cross form of (u, phi^2 / u).

    The quotient is set to zero off phi's support.  The inequality holds
    term by term in the discrete double sum, so the slack is nonnegative up
    to rounding for every admissible pair: u must be strictly positive on
    the support of phi and nonnegative elsewhere (NonpositiveState if not).
    """
    u = np.asarray(u, dtype=float)
    phi = np.asarray(phi, dtype=float)
    support = phi != 0.0
    if np.any(u[support] <= 0.0):
        raise NonpositiveState("u must be strictly positive on the support of phi")
    if np.any(u < 0.0):
        raise NonpositiveState("u must be nonnegative everywhere")
    quotient = np.zeros_like(u)
    quotient[support] = phi[support] ** 2 / u[support]
    lhs = form_bilinear(M, u, quotient)
    rhs = form_energy(M, phi)
    return _make_certificate(
        "energy_inequality", _digest(M.entries, u, phi), lhs, rhs, tolerance
    )


def log_estimate_certificate(
    traj: Trajectory,
    Phi,
    V: PotentialField,
    t1: float,
    t2: float,
    dt_tolerance_factor: float = 1.0,
) -> Certificate:
    """Potential mass minus form energy of Phi is bounded by the averaged
    log-increment of the solution weighted by Phi^2.

    Phi must be normalized in the discrete L2 norm; the trajectory must be
    strictly positive at t1 and t2 on Phi's support with 0 < t1 < t2.  The
    tolerance combines a rounding floor with a term proportional to dt, the
    time-discretization error scale.
    """
    if not (0.0 < t1 < t2):
        raise ValueError(f"need 0 < t1 < t2, got t1={t1}, t2={t2}")
    M = traj.operator
    Phi = np.asarray(Phi, dtype=float)
    vol = M.cell_volume
    mass = vol * np.sum(Phi * Phi)
    if abs(mass - 1.0) > 1e-8:
        raise ValueError(f"Phi must have unit discrete L2 mass, got {mass}")
    u1 = traj.state_at(t1)
    u2 = traj.state_at(t2)
    support = Phi != 0.0
    if np.any(u1[support] <= 0.0) or np.any(u2[support] <= 0.0):
        raise NonpositiveState("trajectory must be strictly positive on Phi's support")
    vals = np.asarray(getattr(V, "values", V), dtype=float)
    lhs = vol * np.sum(Phi * Phi * vals) - form_energy(M, Phi)
    ratio = np.zeros_like(Phi)
    ratio[support] = np.log(u2[support] / u1[support])
    rhs = vol * np.sum(ratio * Phi * Phi) / (t2 - t1)
    scale = 1.0 + abs(lhs) + abs(rhs)
    tolerance = 1e-9 * scale + dt_tolerance_factor * traj.dt * scale
    return _make_certificate(
        "log_estimate",
        _digest(M.entries, traj.states, Phi, vals, t1, t2),
        lhs,
        rhs,
        tolerance,
        t1=t1,
        t2=t2,
        dt=traj.dt,
    )


def exponential_bound_certificate(
    traj: Trajectory, lambda0: float, solver_tol: float = 1e-7
) -> Certificate:
    """Discrete exponential bound ||u(t_n)|| <= ||u0|| (1 + dt lambda0)^-n.

    lambda0 is the spectral bottom of the operator minus the potential the
    trajectory was evolved with.  lhs is the worst ratio over the stored
    times; rhs allows a multiplicative solver slack of 1 + 10 * solver_tol.
    """
    growth = 1.0 + traj.dt * lambda0
    if growth <= 0.0:
        raise ValueError("1 + dt * lambda0 must be positive under the step restriction")
    norms = traj.l2_norms
    base = norms[0]
    steps = np.arange(len(norms))
    with np.errstate(divide="ignore"):
        logs = np.where(norms > 0, np.log(norms / base) + steps * np.log(growth), -np.inf)
    lhs = float(np.exp(np.max(logs)))
    rhs = 1.0 + 10.0 * solver_tol
    return _make_certificate(
        "exponential_bound",
        _digest(traj.states, traj.dt, lambda0),
        lhs,
        rhs,
        0.0,
        lambda0=lambda0,
    )


def ground_state_comparability(
    M: OperatorMatrix,
    u0,
    t: float,
    dt: float | None = None,
    ratio_bound: float = 25.0,
) -> Certificate:
    """Free evolution at time t is comparable to the ground state.

    Evolves u0 with V = 0 to time t, reports r_min and r_max of the nodewise
    ratio against the L2-normalized ground vector, and checks
    r_max / r_min <= ratio_bound.  Also reports the minimum of
    ground / distance^(alpha/2), whose positivity reflects the boundary decay
    of the ground state; the certificate requires it to be positive.
    """
    if t <= 0:
        raise ValueError(f"comparability time must be positive, got {t}")
    if dt is None:
        dt = t / 64.0
    res = spectral_bottom(M, None)
    vol = M.cell_volume
    phi0 = res.eigvec / math.sqrt(vol)  # unit discrete L2 norm, positive
    traj = evolve(M, None, u0, t, dt, lambda0=res.lambda0)
    h_state = traj.states[-1]
    ratios = h_state / phi0
    r_min = float(np.min(ratios))
    r_max = float(np.max(ratios))
    delta = boundary_distance(M.grid)
    decay = float(np.min(phi0 / delta ** (M.alpha / 2.0)))
    lhs = r_max / r_min if r_min > 0 else math.inf
    return _make_certificate(
        "ground_state_comparability",
        _digest(M.entries, np.asarray(u0, dtype=float), t, dt),
        lhs,
        ratio_bound,
        0.0,
        satisfied=(lhs <= ratio_bound) and decay > 0.0,
        r_min=r_min,
        r_max=r_max,
        ground_over_distance=decay,
        t=t,
        dt=dt,
    )


def shrinking_ball_certificate(
    domain: DomainSpec,
    alpha: float,
    potential: PotentialSpec,
    ball_schedule,
    h: float,
    min_nodes: int = 8,
) -> Certificate:
    """Divergence probe on balls shrinking toward the potential's interior
    singular point (the origin).

    Each ball is resolved at its own scale: the largest radius uses spacing
    h and smaller balls shrink the spacing proportionally, so every ball
    carries the same node count.  A fixed spacing would cap the resolvable
    well depth at the lattice scale and the probe would never diverge, no
    matter the potential.  For each ball the operator is assembled and the
    spectral bottom of the (1 - epsilon)-scaled potential computed.  The
    certificate is satisfied (blow-up certified) when at least three
    consecutive trailing radii give strictly decreasing negative bottoms
    lying below -C |B|^(-alpha/d) for the fitted C > 0; the fitted log-log
    slope against 1/|B| is reported for comparison with alpha/d.  Raises
    BallTooSmall when a ball would hold fewer than min_nodes nodes.
    """
    d = domain.dimension
    radii = [float(r) for r in ball_schedule]
    if any(r2 >= r1 for r1, r2 in zip(radii, radii[1:])):
        raise ValueError("ball radii must be strictly decreasing")
    lambdas = []
    volumes = []
    eps = potential.epsilon
    for r in radii:
        ball = DomainSpec.interval(r) if d == 1 else DomainSpec.disk(r)
        grid = build_grid(ball, h * r / radii[0])
        if grid.n < min_nodes:
            raise BallTooSmall(
                f"ball of radius {r} holds {grid.n} nodes, fewer than {min_nodes}"
            )
        op = assemble_operator(grid, alpha)
        fld = sample_potential(potential, grid, alpha)
        res = spectral_bottom(op, (1.0 - eps) * fld.values)
        lambdas.append(res.lambda0)
        volumes.append(2.0 * r if d == 1 else math.pi * r * r)
    lambdas_arr = np.array(lambdas)
    volumes_arr = np.array(volumes)

    # trailing run of strictly decreasing negative bottoms
    window = 0
    for i in range(len(radii) - 1, -1, -1):
        if lambdas_arr[i] >= 0.0:
            break
        if window >= 1 and not lambdas_arr[i] > lambdas_arr[i + 1]:
            break
        window += 1
    certified = window >= 3
    exponent = math.nan
    fitted_c = 0.0
    if certified:
        sel = slice(len(radii) - window, len(radii))
        logs = np.log(-lambdas_arr[sel])
        logv = np.log(1.0 / volumes_arr[sel])
        exponent = float(np.polyfit(logv, logs, 1)[0])
        fitted_c = float(np.min((-lambdas_arr[sel]) * volumes_arr[sel] ** (alpha / d)))
        certified = fitted_c > 0.0
    # lhs <= rhs encodes "a positive fitted coefficient exists"; when no
    # qualifying window was found there is nothing to fit and lhs = 1 > 0.
    lhs = -fitted_c if certified else 1.0
    return _make_certificate(
        "shrinking_ball",
        _digest(np.array(radii), np.array(lambdas), alpha, h, potential.label()),
        lhs,
        0.0,
        0.0,
        radii=radii,
        volumes=volumes,
        lambda0s=lambdas,
        window=window,
        fitted_exponent=exponent,
        fitted_coefficient=fitted_c,
        epsilon=eps,
    )


@dataclass(frozen=True)
class ClassifierThresholds:
    rel_tol: float = 0.02
    divergence_ratio: float = 1.15
    growth_ratio: float = 1.5
    probe_time: float = 0.5
    atol: float = 1e-8

    def as_dict(self) -> dict:
        return {
            "rel_tol": self.rel_tol,
            "divergence_ratio": self.divergence_ratio,
            "growth_ratio": self.growth_ratio,
            "probe_time": self.probe_time,
            "atol": self.atol,
        }


@dataclass(frozen=True)
class Verdict:
    label: str
    evidence: dict
    thresholds: ClassifierThresholds
    epsilon: float


def _k_sort(k) -> float:
    return math.inf if k is None else float(k)


def classify(
    series: SpectralSeries,
    family,
    thresholds: ClassifierThresholds = ClassifierThresholds(),
) -> Verdict:
    """Label a configuration EXISTS, BLOW_UP or INCONCLUSIVE.

    EXISTS needs the deepest-truncation spectral bottoms to be Cauchy across
    the finest mesh pair and the trajectory sup norms at the probe time to be
    Cauchy as well.  BLOW_UP needs the bottoms to decrease strictly across
    every refinement, end negative, satisfy the ratio test at
    divergence_ratio on every consecutive pair of negative levels (at least
    one such pair), and come with sup norms growing by at least growth_ratio
    per refinement.  Everything else is INCONCLUSIVE.  Raises
    InsufficientEvidence for fewer than three mesh levels or a family that
    does not cover the deepest truncation per mesh.
    """
    deepest = series.deepest_per_mesh()
    if len(deepest) < 3:
        raise InsufficientEvidence(
            f"need at least 3 mesh levels, series has {len(deepest)}"
        )
    by_mesh: dict = {}
    for traj in family:
        key = traj.grid.h
        cur = by_mesh.get(key)
        if cur is None or _k_sort(traj.k) >= _k_sort(cur.k):
            by_mesh[key] = traj
    sups = []
    for entry in deepest:
        traj = by_mesh.get(entry.h)
        if traj is None:
            raise InsufficientEvidence(f"no trajectory for mesh h={entry.h}")
        if _k_sort(traj.k) < _k_sort(entry.k):
            raise InsufficientEvidence(
                f"family at h={entry.h} stops at k={traj.k}, series reaches k={entry.k}"
            )
        try:
            probe_state = traj.state_at(thresholds.probe_time)
        except ValueError as exc:
            raise InsufficientEvidence(str(exc))
        sups.append(float(np.max(probe_state)))

    lambdas = [e.lambda0 for e in deepest]
    atol = thresholds.atol
    rel = thresholds.rel_tol

    lam_cauchy = abs(lambdas[-1] - lambdas[-2]) <= rel * abs(lambdas[-1]) + atol
    sup_cauchy = abs(sups[-1] - sups[-2]) <= rel * abs(sups[-1]) + atol

    decreasing = all(l2 < l1 for l1, l2 in zip(lambdas, lambdas[1:]))
    neg_pairs = [
        l2 / l1
        for l1, l2 in zip(lambdas, lambdas[1:])
        if l1 < 0.0 and l2 < 0.0
    ]
    diverging = (
        decreasing
        and lambdas[-1] < 0.0
        and len(neg_pairs) >= 1
        and all(r >= thresholds.divergence_ratio for r in neg_pairs)
    )
    growing = all(
        s2 >= thresholds.growth_ratio * s1 for s1, s2 in zip(sups, sups[1:])
    )

    if lam_cauchy and sup_cauchy:
        label = EXISTS
    elif diverging and growing:
        label = BLOW_UP
    else:
        label = INCONCLUSIVE
    evidence = {
        "lambda0": [(e.h, e.k, e.lambda0) for e in deepest],
        "sup_norms": list(zip([e.h for e in deepest], sups)),
    }
    epsilon = deepest[0].epsilon
    return Verdict(label=label, evidence=evidence, thresholds=thresholds, epsilon=epsilon)
