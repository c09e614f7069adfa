"""Bounded domains and the uniform cell-center grids that discretize them.

All supported shapes are open, bounded and symmetric about the origin:
an interval (-R, R), an axis-aligned rectangle (-a, a) x (-b, b), and a
disk of radius R.  Grids place nodes at cell centers (j + 1/2) * h
measured from the corner of the bounding box, so nodes stay away from
the boundary and, whenever the box side is an integer number of cells,
from the origin as well.  Points outside the domain carry an implicit
zero value: they are simply absent from the grid.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, EmptyGrid

_VALID_KINDS = ("interval", "rectangle", "disk")


@dataclass(frozen=True)
class DomainSpec:
    """Analytic description of a bounded open domain.

    kind/params pairs:
      interval  -- params = (R,), the open interval (-R, R) in d = 1
      rectangle -- params = (a, b), the open box (-a, a) x (-b, b) in d = 2
      disk      -- params = (R,), the open disk |x| < R in d = 2
    """

    kind: str
    params: tuple

    def __post_init__(self):
        if self.kind not in _VALID_KINDS:
            raise DomainError(f"unknown domain kind {self.kind!r}")
        expected = 2 if self.kind == "rectangle" else 1
        if len(self.params) != expected:
            raise DomainError(
                f"{self.kind} takes {expected} size parameter(s), got {len(self.params)}"
            )
        if any(not np.isfinite(p) or p <= 0 for p in self.params):
            raise DomainError(f"{self.kind} size parameters must be positive and finite")

    @staticmethod
    def interval(R: float) -> "DomainSpec":
        return DomainSpec("interval", (float(R),))

    @staticmethod
    def rectangle(a: float, b: float) -> "DomainSpec":
        return DomainSpec("rectangle", (float(a), float(b)))

    @staticmethod
    def disk(R: float) -> "DomainSpec":
        return DomainSpec("disk", (float(R),))

    @property
    def dimension(self) -> int:
        return 1 if self.kind == "interval" else 2

    @property
    def half_widths(self) -> tuple:
        """Half-extents of the bounding box along each axis."""
        if self.kind == "rectangle":
            return self.params
        return (self.params[0],) * self.dimension

    @property
    def min_extent(self) -> float:
        return 2.0 * min(self.half_widths)

    @property
    def inradius(self) -> float:
        """Radius of the largest ball centered at the origin inside the domain."""
        return min(self.half_widths)

    def contains(self, points: np.ndarray) -> np.ndarray:
        """Strict-interior membership mask for an (m, d) array of points."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if self.kind == "interval":
            return np.abs(pts[:, 0]) < self.params[0]
        if self.kind == "rectangle":
            a, b = self.params
            return (np.abs(pts[:, 0]) < a) & (np.abs(pts[:, 1]) < b)
        return pts[:, 0] ** 2 + pts[:, 1] ** 2 < self.params[0] ** 2

    def distance_to_complement(self, points: np.ndarray) -> np.ndarray:
        """Exact Euclidean distance from interior points to the complement."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if self.kind == "interval":
            return self.params[0] - np.abs(pts[:, 0])
        if self.kind == "rectangle":
            a, b = self.params
            return np.minimum(a - np.abs(pts[:, 0]), b - np.abs(pts[:, 1]))
        return self.params[0] - np.hypot(pts[:, 0], pts[:, 1])


@dataclass(frozen=True, eq=False)
class Grid:
    """Uniform cell-center grid over the interior of a domain.

    points is an (n, d) array ordered lexicographically by coordinate;
    every point lies strictly inside the domain.
    """

    domain: DomainSpec
    h: float
    points: np.ndarray

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dimension(self) -> int:
        return self.domain.dimension

    @property
    def cell_volume(self) -> float:
        return self.h ** self.dimension


def build_grid(domain: DomainSpec, h: float) -> Grid:
    """Lay a uniform lattice of spacing h over the bounding box and keep the
    cell centers that fall strictly inside the domain.

    Cell centers sit at corner + (j + 1/2) * h along each axis.  Raises
    EmptyGrid when h is not smaller than the domain's smallest extent or
    when no center survives the interior test.
    """
    if not np.isfinite(h) or h <= 0:
        raise ValueError(f"spacing must be positive, got {h}")
    if h >= domain.min_extent:
        raise EmptyGrid(
            f"spacing {h} is not smaller than the domain's smallest extent "
            f"{domain.min_extent}"
        )
    axes = []
    for half in domain.half_widths:
        m = int(np.floor(2.0 * half / h)) + 1
        axes.append(-half + (np.arange(m) + 0.5) * h)
    if domain.dimension == 1:
        pts = axes[0][:, None]
    else:
        xx, yy = np.meshgrid(axes[0], axes[1], indexing="ij")
        pts = np.stack([xx.ravel(), yy.ravel()], axis=1)
    pts = pts[domain.contains(pts)]
    if pts.shape[0] == 0:
        raise EmptyGrid(f"no cell center of spacing {h} lies inside the domain")
    pts = np.ascontiguousarray(pts)
    pts.setflags(write=False)
    return Grid(domain=domain, h=float(h), points=pts)


def boundary_distance(grid: Grid) -> np.ndarray:
    """Distance from every node to the complement, from the analytic shape."""
    return grid.domain.distance_to_complement(grid.points)
