"""Discrete form energies and the spectral bottom of the Schroedinger matrix.

The spectral bottom of L - diag(V) is the discrete stand-in for the infimum
of the Rayleigh quotient (form energy minus potential mass over L2 mass);
its behaviour under mesh refinement and truncation deepening is the raw
evidence the classifier consumes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy import linalg

from .assembly import OperatorMatrix, assemble_operator
from .errors import ConvergenceFailure, DimensionMismatch
from .geometry import DomainSpec, build_grid
from .potentials import PotentialSpec, sample_potential, truncate

DENSE_EIG_CUTOFF = 2048


def _as_state(M: OperatorMatrix, f) -> np.ndarray:
    f = np.asarray(f, dtype=float)
    if f.shape != (M.n,):
        raise DimensionMismatch(f"expected a vector of length {M.n}, got shape {f.shape}")
    return f


def form_energy(M: OperatorMatrix, f) -> float:
    """Discrete form energy <L f, f> h^d of a grid function."""
    f = _as_state(M, f)
    return float(M.cell_volume * f @ (M.entries @ f))


def form_bilinear(M: OperatorMatrix, f, g) -> float:
    """Discrete bilinear form <L f, g> h^d; symmetric in (f, g)."""
    f = _as_state(M, f)
    g = _as_state(M, g)
    return float(M.cell_volume * g @ (M.entries @ f))


class SpectralResult(NamedTuple):
    lambda0: float
    eigvec: np.ndarray
    iterations: int


def _potential_vector(M: OperatorMatrix, V) -> np.ndarray:
    if V is None:
        return np.zeros(M.n)
    vals = getattr(V, "values", V)
    vals = np.asarray(vals, dtype=float)
    if vals.shape != (M.n,):
        raise DimensionMismatch(f"potential has shape {vals.shape}, operator size {M.n}")
    if not np.all(np.isfinite(vals)):
        raise ValueError("potential vector must be finite")
    if np.any(vals < 0):
        raise ValueError("potential vector must be nonnegative")
    return vals


def _fix_sign(v: np.ndarray) -> np.ndarray:
    s = v.sum()
    if s < 0 or (s == 0 and v[np.argmax(np.abs(v))] < 0):
        return -v
    return v


def spectral_bottom(
    M: OperatorMatrix,
    V=None,
    *,
    seed_vector: np.ndarray | None = None,
    residual_tol: float = 1e-8,
    dense_cutoff: int = DENSE_EIG_CUTOFF,
    max_iterations: int = 500,
) -> SpectralResult:
    """Smallest eigenvalue and unit ground vector of M - diag(V).

    Dense symmetric solve up to dense_cutoff rows; shifted inverse iteration
    (optionally warm-started by seed_vector) above it.  The returned pair
    always satisfies ||(M - V) v - lambda v|| <= residual_tol; otherwise
    ConvergenceFailure is raised with the iteration count.  The eigenvector
    sign is fixed so its sum is nonnegative.
    """
    vals = _potential_vector(M, V)
    A = M.entries - np.diag(vals)
    if M.n <= dense_cutoff:
        w, vecs = linalg.eigh(A, subset_by_index=[0, 0])
        lam = float(w[0])
        v = _fix_sign(vecs[:, 0])
        iterations = 1
    else:
        lam, v, iterations = _inverse_iteration(
            A, seed_vector, residual_tol, max_iterations
        )
    residual = float(np.linalg.norm(A @ v - lam * v))
    if residual > residual_tol:
        raise ConvergenceFailure(
            f"eigen residual {residual:.3e} above tolerance {residual_tol:.1e}",
            iterations=iterations,
        )
    return SpectralResult(lambda0=lam, eigvec=v, iterations=iterations)


def _inverse_iteration(A, seed, tol, max_iterations):
    n = A.shape[0]
    # Gershgorin lower bound keeps the shifted matrix positive definite
    radius = np.sum(np.abs(A), axis=1) - np.abs(np.diag(A))
    shift = float(np.min(np.diag(A) - radius)) - 1.0
    factor = linalg.cho_factor(A - shift * np.eye(n))
    v = np.full(n, 1.0 / math.sqrt(n)) if seed is None else seed / np.linalg.norm(seed)
    lam = float(v @ (A @ v))
    for it in range(1, max_iterations + 1):
        v = linalg.cho_solve(factor, v)
        v /= np.linalg.norm(v)
        Av = A @ v
        lam = float(v @ Av)
        if np.linalg.norm(Av - lam * v) <= tol:
            return lam, _fix_sign(v), it
    raise ConvergenceFailure(
        f"inverse iteration did not converge in {max_iterations} iterations",
        iterations=max_iterations,
    )


@dataclass(frozen=True)
class SpectralEntry:
    h: float
    k: float | None  # truncation level; None means untruncated
    epsilon: float
    lambda0: float
    iterations: int


@dataclass
class SpectralSeries:
    """Spectral bottoms over a (mesh, truncation) schedule for one potential."""

    entries: list = field(default_factory=list)
    potential_id: str = ""

    def mesh_levels(self) -> list:
        """Distinct spacings in schedule order."""
        seen = []
        for e in self.entries:
            if e.h not in seen:
                seen.append(e.h)
        return seen

    def deepest_per_mesh(self) -> list:
        """One entry per spacing, at the deepest truncation level recorded."""
        out = {}
        for e in self.entries:
            cur = out.get(e.h)
            if cur is None or _k_order(e.k) >= _k_order(cur.k):
                out[e.h] = e
        return [out[h] for h in self.mesh_levels()]

    def write_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("h,k,epsilon,lambda0,iterations\n")
            for e in self.entries:
                k = "inf" if e.k is None else repr(e.k)
                fh.write(f"{e.h!r},{k},{e.epsilon!r},{e.lambda0!r},{e.iterations}\n")


def _k_order(k) -> float:
    return math.inf if k is None else float(k)


def _validate_schedules(h_schedule, k_schedule) -> None:
    if len(h_schedule) == 0 or len(k_schedule) == 0:
        raise ValueError("schedules must be nonempty")
    if any(h2 >= h1 for h1, h2 in zip(h_schedule, h_schedule[1:])):
        raise ValueError("h schedule must be strictly decreasing")
    ks = [_k_order(k) for k in k_schedule]
    if any(k2 <= k1 for k1, k2 in zip(ks, ks[1:])):
        raise ValueError("k schedule must be strictly increasing (None/inf last)")


def prepared_levels(domain: DomainSpec, alpha: float, potential: PotentialSpec, h_schedule):
    """Build (grid, operator, untruncated field) for every spacing."""
    out = []
    for h in h_schedule:
        grid = build_grid(domain, h)
        op = assemble_operator(grid, alpha)
        fld = sample_potential(potential, grid, alpha)
        out.append((h, op, fld))
    return out


def series_from_prepared(prepared, potential: PotentialSpec, k_schedule) -> SpectralSeries:
    """Spectral bottoms of the (1 - epsilon)-scaled truncated potential over
    every prepared mesh and truncation level; warm-starts within a mesh."""
    eps = potential.epsilon
    series = SpectralSeries(potential_id=potential.label())
    for h, op, fld in prepared:
        seed = None
        for k in k_schedule:
            level = fld if k is None else truncate(fld, k)
            res = spectral_bottom(op, (1.0 - eps) * level.values, seed_vector=seed)
            seed = res.eigvec
            series.entries.append(
                SpectralEntry(
                    h=float(h),
                    k=None if k is None else float(k),
                    epsilon=eps,
                    lambda0=res.lambda0,
                    iterations=res.iterations,
                )
            )
    return series


def refinement_series(
    domain: DomainSpec,
    alpha: float,
    potential: PotentialSpec,
    h_schedule,
    k_schedule,
) -> SpectralSeries:
    """Probe the spectral bottom across refining meshes and deepening
    truncations.  Entries are ordered mesh-major, matching the schedules;
    a k of None means the untruncated sampled potential."""
    _validate_schedules(h_schedule, k_schedule)
    prepared = prepared_levels(domain, alpha, potential, h_schedule)
    return series_from_prepared(prepared, potential, k_schedule)
