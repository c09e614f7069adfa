"""Potential families, truncation, and sharp Hardy constants.

A potential is specified analytically (PotentialSpec) and sampled onto a grid
(PotentialField).  Sampling always produces finite nonnegative values because
grid nodes avoid the singular loci by construction.  Truncation at level k
replaces V by min(V, k) pointwise, the approximation that makes the evolved
problems well posed one level at a time.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.special import gamma

from .errors import DomainError, SingularNode
from .geometry import Grid, boundary_distance

_KINDS = ("hardy_interior", "hardy_boundary", "bounded", "custom")


def hardy_sharp_constant(d: int, alpha: float) -> float:
    """Sharp coupling 2^alpha * Gamma^2((d+alpha)/4) / Gamma^2((d-alpha)/4)
    separating existence from blow-up for the interior potential c/|x|^alpha."""
    if d not in (1, 2):
        raise DomainError(f"dimension must be 1 or 2, got {d}")
    if not (0.0 < alpha < min(2.0, float(d))):
        raise DomainError(
            f"order alpha={alpha} outside the admissible range (0, {min(2, d)}) for d={d}"
        )
    return 2.0 ** alpha * gamma((d + alpha) / 4.0) ** 2 / gamma((d - alpha) / 4.0) ** 2


@dataclass(frozen=True, eq=False)
class PotentialSpec:
    """Analytic description of a nonnegative potential.

    kinds:
      hardy_interior -- V(x) = coupling / |x|^alpha, singular at the origin
      hardy_boundary -- V(x) = coupling / dist(x, boundary)^alpha
      bounded        -- V(x) = expr evaluated at x (closed-form descriptor)
      custom         -- V given by a per-node sample table

    epsilon is the scaling reserve used by spectral divergence probes, which
    test the (1 - epsilon)-scaled potential.
    """

    kind: str
    coupling: float = 0.0
    expr: str = ""
    table: np.ndarray | None = None
    epsilon: float = 0.01

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise DomainError(f"unknown potential kind {self.kind!r}")
        if self.coupling < 0:
            raise DomainError("potential coupling must be nonnegative")
        if not (0.0 <= self.epsilon < 1.0):
            raise DomainError(f"epsilon must lie in [0, 1), got {self.epsilon}")

    @staticmethod
    def hardy_interior(coupling: float, epsilon: float = 0.01) -> "PotentialSpec":
        return PotentialSpec("hardy_interior", coupling=float(coupling), epsilon=epsilon)

    @staticmethod
    def hardy_boundary(coupling: float, epsilon: float = 0.01) -> "PotentialSpec":
        return PotentialSpec("hardy_boundary", coupling=float(coupling), epsilon=epsilon)

    @staticmethod
    def bounded(expr: str, epsilon: float = 0.01) -> "PotentialSpec":
        return PotentialSpec("bounded", expr=expr, epsilon=epsilon)

    @staticmethod
    def custom(values, epsilon: float = 0.01) -> "PotentialSpec":
        vals = np.asarray(values, dtype=float)
        return PotentialSpec("custom", table=vals, epsilon=epsilon)

    def label(self) -> str:
        if self.kind == "hardy_interior":
            return f"hardy_interior(c={self.coupling:.6g})"
        if self.kind == "hardy_boundary":
            return f"hardy_boundary(kappa={self.coupling:.6g})"
        if self.kind == "bounded":
            return f"bounded({self.expr})"
        return "custom"

    def boundary_theory_holds(self, d: int, alpha: float) -> bool:
        """Whether the boundary Hardy inequality backing hardy_boundary is
        available: d >= 2 and alpha != 1.  Other kinds are unrestricted."""
        if self.kind != "hardy_boundary":
            return True
        return d >= 2 and alpha != 1.0


@dataclass(frozen=True, eq=False)
class PotentialField:
    """Potential sampled on a grid, optionally truncated at a level."""

    values: np.ndarray
    truncation_k: float | None
    spec: PotentialSpec
    grid: Grid

    @property
    def max_value(self) -> float:
        return float(np.max(self.values)) if self.values.size else 0.0


_EXPR_NAMES = {
    "abs": np.abs,
    "exp": np.exp,
    "log": np.log,
    "sqrt": np.sqrt,
    "sin": np.sin,
    "cos": np.cos,
    "tanh": np.tanh,
    "minimum": np.minimum,
    "maximum": np.maximum,
    "where": np.where,
    "pi": np.pi,
}


def _eval_bounded_expr(expr: str, grid: Grid) -> np.ndarray:
    names = dict(_EXPR_NAMES)
    names["x"] = grid.points[:, 0]
    names["r"] = np.linalg.norm(grid.points, axis=1)
    if grid.dimension == 2:
        names["y"] = grid.points[:, 1]
    try:
        vals = eval(expr, {"__builtins__": {}}, names)  # noqa: S307 - closed-form descriptor
    except Exception as exc:
        raise DomainError(f"cannot evaluate bounded potential expression {expr!r}: {exc}")
    return np.broadcast_to(np.asarray(vals, dtype=float), (grid.n,)).copy()


def sample_potential(spec: PotentialSpec, grid: Grid, alpha: float) -> PotentialField:
    """Evaluate the potential at every node, untruncated.

    The singular families need the form order alpha; bounded/custom ignore it.
    Raises SingularNode if a node coincides with a singularity and DomainError
    when the spec does not fit the grid (origin outside, table length, ...).
    """
    if spec.kind == "hardy_interior":
        if not bool(grid.domain.contains(np.zeros((1, grid.dimension)))[0]):
            raise DomainError("interior Hardy potential needs the origin inside the domain")
        r = np.linalg.norm(grid.points, axis=1)
        if np.any(r == 0.0):
            raise SingularNode("a grid node sits exactly at the origin")
        vals = spec.coupling * r ** -alpha
    elif spec.kind == "hardy_boundary":
        delta = boundary_distance(grid)
        if np.any(delta <= 0.0):
            raise SingularNode("a grid node sits on the boundary")
        vals = spec.coupling * delta ** -alpha
    elif spec.kind == "bounded":
        vals = _eval_bounded_expr(spec.expr, grid)
    else:
        if spec.table is None or spec.table.shape != (grid.n,):
            got = None if spec.table is None else spec.table.shape
            raise DomainError(
                f"custom potential table must have one value per node ({grid.n}), got {got}"
            )
        vals = spec.table.astype(float).copy()
    if not np.all(np.isfinite(vals)):
        raise DomainError("potential evaluated to non-finite values")
    if np.any(vals < 0.0):
        raise DomainError("potential must be nonnegative")
    vals.setflags(write=False)
    return PotentialField(values=vals, truncation_k=None, spec=spec, grid=grid)


def truncate(field: PotentialField, k: float) -> PotentialField:
    """Pointwise truncation min(V, k).  Idempotent and monotone in k; the
    recorded level is the smallest level applied so far."""
    if k < 0:
        raise ValueError(f"truncation level must be nonnegative, got {k}")
    vals = np.minimum(field.values, k)
    vals.setflags(write=False)
    level = float(k) if field.truncation_k is None else min(float(k), field.truncation_k)
    return replace(field, values=vals, truncation_k=level)


def estimate_boundary_hardy_constant(domain, alpha: float, h_schedule) -> dict:
    """Discrete sharp coupling for the boundary-distance potential.

    No closed form is available for the coupling that separates existence
    from blow-up when the potential is coupling / dist(x, boundary)^alpha.
    This estimates it as the infimum of form energy over potential mass,
    i.e. the smallest generalized eigenvalue of (L, diag(delta^-alpha)),
    across a refinement schedule.  Returns {"series": [(h, value), ...],
    "estimate": finest value}; the limit is observed, not certified.
    """
    from scipy.linalg import eigh

    from .assembly import assemble_operator
    from .geometry import build_grid

    series = []
    for h in h_schedule:
        grid = build_grid(domain, h)
        op = assemble_operator(grid, alpha)
        delta = boundary_distance(grid)
        weight = np.diag(delta ** -alpha)
        mu = eigh(op.entries, weight, subset_by_index=[0, 0], eigvals_only=True)[0]
        series.append((float(h), float(mu)))
    return {"series": series, "estimate": series[-1][1]}


def load_custom_table(path, grid: Grid, epsilon: float = 0.01) -> PotentialSpec:
    """Read a custom potential from a CSV table with header ``index,value``."""
    raw = np.genfromtxt(path, delimiter=",", names=True, dtype=float)
    if raw.dtype.names != ("index", "value"):
        raise DomainError("custom potential table must have header 'index,value'")
    idx = np.atleast_1d(raw["index"]).astype(int)
    vals = np.atleast_1d(raw["value"]).astype(float)
    if sorted(idx.tolist()) != list(range(grid.n)):
        raise DomainError(
            f"custom potential table must cover node indices 0..{grid.n - 1} exactly once"
        )
    table = np.empty(grid.n)
    table[idx] = vals
    return PotentialSpec.custom(table, epsilon=epsilon)
