"""Positivity-preserving implicit evolution of the truncated heat problems.

One backward-Euler step solves (I + dt (L - diag(V))) w = u.  Under the step
restriction dt * max(0, -lambda0) < 1/2 the system matrix is a Stieltjes
matrix (symmetric positive definite with nonpositive off-diagonals), so its
inverse is entrywise nonnegative and nonnegative states stay nonnegative.
Backward Euler is used instead of a second-order scheme precisely because
blow-up classification leans on this sign structure.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .assembly import OperatorMatrix
from .errors import SolveFailure, StepTooLarge
from .geometry import Grid
from .potentials import PotentialSpec, sample_potential, truncate
from .spectral import _potential_vector, spectral_bottom

STEP_RESTRICTION = 0.5


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Time-indexed states of one truncated problem.

    states has shape (len(times), n); every entry is >= 0.  l2_norms holds
    the discrete L2 norms sqrt(sum u_i^2 h^d) per stored time.
    """

    times: np.ndarray
    states: np.ndarray
    k: float | None
    dt: float
    grid: Grid
    operator: OperatorMatrix
    l2_norms: np.ndarray

    @property
    def max_values(self) -> np.ndarray:
        return self.states.max(axis=1)

    def index_of_time(self, t: float) -> int:
        idx = int(np.argmin(np.abs(self.times - t)))
        if not np.isclose(self.times[idx], t, rtol=1e-9, atol=1e-12):
            raise ValueError(f"time {t} is not on the trajectory's time grid")
        return idx

    def state_at(self, t: float) -> np.ndarray:
        return self.states[self.index_of_time(t)]

    def write_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("t,l2_norm,max_value\n")
            for t, nrm, mx in zip(self.times, self.l2_norms, self.max_values):
                fh.write(f"{float(t)!r},{float(nrm)!r},{float(mx)!r}\n")


class ImplicitStepper:
    """Backward-Euler stepper with the factorization reused across steps.

    The spectral bottom of L - diag(V) is computed once (or taken from the
    caller) to enforce the step restriction; the factored matrix is
    time-independent for a fixed truncation level.
    """

    def __init__(self, M: OperatorMatrix, V, dt: float, lambda0: float | None = None):
        if dt <= 0:
            raise ValueError(f"time step must be positive, got {dt}")
        vals = _potential_vector(M, V)
        if lambda0 is None:
            lambda0 = spectral_bottom(M, vals).lambda0
        if dt * max(0.0, -lambda0) >= STEP_RESTRICTION:
            raise StepTooLarge(
                f"dt={dt} violates dt * max(0, -lambda0) < {STEP_RESTRICTION} "
                f"with lambda0={lambda0:.6g}; need dt < {STEP_RESTRICTION / -lambda0:.6g}"
            )
        self.M = M
        self.dt = float(dt)
        self.lambda0 = float(lambda0)
        system = np.eye(M.n) + dt * (M.entries - np.diag(vals))
        try:
            self._factor = linalg.cho_factor(system)
        except linalg.LinAlgError as exc:
            raise SolveFailure(f"factorization of the implicit system failed: {exc}")

    def step(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if u.shape != (self.M.n,):
            raise ValueError(f"state must have length {self.M.n}")
        if np.any(u < 0):
            raise ValueError("state must be componentwise nonnegative")
        w = linalg.cho_solve(self._factor, u)
        floor = -1e-10 * max(1.0, float(np.max(np.abs(w))))
        if np.min(w) < floor:
            raise SolveFailure(
                f"solver produced a genuinely negative entry {np.min(w):.3e}"
            )
        # inverse positivity holds exactly; clip roundoff-level negatives
        return np.maximum(w, 0.0)


def step(M: OperatorMatrix, V, u, dt: float, lambda0: float | None = None) -> np.ndarray:
    """One backward-Euler step: solve (I + dt (L - diag(V))) w = u."""
    return ImplicitStepper(M, V, dt, lambda0=lambda0).step(u)


def evolve(
    M: OperatorMatrix,
    V,
    u0,
    t_final: float,
    dt: float,
    lambda0: float | None = None,
) -> Trajectory:
    """Evolve u0 to t_final by repeated implicit steps, storing every state.

    t_final must be an integer multiple of dt (to 1e-9 relative).  The k
    recorded on the trajectory is the truncation level of V when V is a
    PotentialField, else None.
    """
    u0 = np.asarray(u0, dtype=float)
    if np.any(u0 < 0):
        raise ValueError("initial state must be componentwise nonnegative")
    if not np.any(u0 > 0):
        raise ValueError("initial state must not be identically zero")
    steps = int(round(t_final / dt))
    if steps < 1 or abs(steps * dt - t_final) > 1e-9 * max(1.0, t_final):
        raise ValueError(f"t_final={t_final} is not a positive multiple of dt={dt}")
    stepper = ImplicitStepper(M, V, dt, lambda0=lambda0)
    states = np.empty((steps + 1, M.n))
    states[0] = u0
    for i in range(steps):
        states[i + 1] = stepper.step(states[i])
    times = dt * np.arange(steps + 1)
    vol = M.cell_volume
    norms = np.sqrt(vol * np.sum(states * states, axis=1))
    k = getattr(V, "truncation_k", None)
    return Trajectory(
        times=times,
        states=states,
        k=k,
        dt=float(dt),
        grid=M.grid,
        operator=M,
        l2_norms=norms,
    )


def monotone_family(
    M: OperatorMatrix,
    potential: PotentialSpec,
    k_schedule,
    u0,
    t_final: float,
    dt: float,
) -> list:
    """Trajectories of the truncated problems for every level in k_schedule,
    on one shared time grid.  Levels must increase; None means untruncated.
    Deeper truncations dominate shallower ones pointwise."""
    fld = sample_potential(potential, M.grid, M.alpha)
    trajectories = []
    for k in k_schedule:
        level = fld if k is None else truncate(fld, k)
        trajectories.append(evolve(M, level, u0, t_final, dt))
    return trajectories


def duhamel_residual(traj: Trajectory, M: OperatorMatrix, V) -> float:
    """Defect of the trajectory against its free-evolution-plus-source
    reconstruction.

    The reconstruction R(t_n) = S^n u0 + dt * sum_{m=1..n} S^(n-m) (V u(t_m))
    applies the same implicit stepper with V = 0 for the free flow S and a
    right-endpoint quadrature for the source integral, so the residual decays
    at the first order of the stepper.  Returns the maximum over stored times
    of ||u(t_n) - R(t_n)|| / ||u(t_n)|| in the discrete L2 norm.
    """
    vals = _potential_vector(M, V)
    free = ImplicitStepper(M, None, traj.dt)
    acc = traj.states[0].copy()
    worst = 0.0
    for n in range(1, len(traj.times)):
        acc = free.step(acc) + traj.dt * vals * traj.states[n]
        diff = np.linalg.norm(traj.states[n] - acc)
        denom = np.linalg.norm(traj.states[n])
        if denom > 0:
            worst = max(worst, float(diff / denom))
    return worst


def variational_residual(traj: Trajectory, M: OperatorMatrix, V, phi, phi_t=None) -> float:
    """Defect of the discrete weak-solution identity against a space-time
    test function.

    phi(t, points) -> (n,) values at the nodes, called once per stored time;
    phi_t is its time derivative, approximated by centered differences on the
    stored time grid when omitted.  The defect gathers the boundary terms,
    the trapezoidal time quadrature of <u, -phi_t + L phi> h^d and of
    <u phi V> h^d, and returns their absolute mismatch.  It vanishes at the
    order of the time discretization.
    """
    vals = _potential_vector(M, V)
    times = traj.times
    nt = len(times)
    phis = np.stack([np.asarray(phi(t, traj.grid.points), dtype=float) for t in times])
    if phi_t is not None:
        dphis = np.stack([np.asarray(phi_t(t, traj.grid.points), dtype=float) for t in times])
    else:
        dphis = np.gradient(phis, traj.dt, axis=0)
    vol = M.cell_volume
    integrand = np.empty(nt)
    source = np.empty(nt)
    for i in range(nt):
        Lphi = M.entries @ phis[i]
        integrand[i] = vol * np.dot(traj.states[i], -dphis[i] + Lphi)
        source[i] = vol * np.dot(traj.states[i] * phis[i], vals)
    boundary = vol * (
        np.dot(traj.states[-1], phis[-1]) - np.dot(traj.states[0], phis[0])
    )
    lhs = boundary + np.trapezoid(integrand, times)
    rhs = np.trapezoid(source, times)
    return float(abs(lhs - rhs))


def initial_state(grid: Grid, kind: str = "inradius_ball", radius: float | None = None) -> np.ndarray:
    """Default nonnegative initial data, normalized to unit discrete L2 norm.

    kinds: "inradius_ball" (indicator of the largest origin-centered ball),
    "ball" (indicator of |x| < radius), "constant".
    """
    if kind == "constant":
        u = np.ones(grid.n)
    elif kind in ("inradius_ball", "ball"):
        r = grid.domain.inradius if kind == "inradius_ball" else radius
        if r is None or r <= 0:
            raise ValueError("ball initial state needs a positive radius")
        u = (np.linalg.norm(grid.points, axis=1) < r).astype(float)
        if not np.any(u > 0):
            raise ValueError(f"no grid node inside the ball of radius {r}")
    else:
        raise ValueError(f"unknown initial state kind {kind!r}")
    return u / np.sqrt(grid.cell_volume * np.sum(u * u))
