"""Triangular lattice geometry: coordinates, embedding, boxes and annuli.

Sites of the triangular lattice are integer pairs ``(i, j)``.  With spacing
``delta`` the site ``(i, j)`` sits at ``delta * (i*e1 + j*e2)`` where the
lattice axes are ``e1 = (1, 0)`` and ``e2 = (1/2, sqrt(3)/2)``.  Every site is
the centre of a hexagonal face of the dual (hexagonal) lattice.

Boxes are parallelograms with sides along ``e1`` and ``e2``.  Writing a
displacement as ``u*e1 + v*e2`` ("axis coordinates"), the closed box of side
``r`` centred at ``x`` is ``{|u| <= r/2, |v| <= r/2}``, so membership reduces
to the norm ``2*max(|u|, |v|)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, NamedTuple

import numpy as np
from numba import njit

SQRT3 = math.sqrt(3.0)
# relative slack for closed-boundary membership tests
_TOL = 1e-9

# neighbour offsets in counter-clockwise order: 0, 60, ..., 300 degrees
DIRECTIONS = np.array(
    [[1, 0], [0, 1], [-1, 1], [-1, 0], [0, -1], [1, -1]], dtype=np.int64
)


class LatticeCoord(NamedTuple):
    i: int
    j: int


class EmbeddedPoint(NamedTuple):
    x: float
    y: float


def embed(c, delta: float = 1.0) -> EmbeddedPoint:
    """Euclidean position of lattice site ``c`` at spacing ``delta``."""
    if delta <= 0:
        raise ValueError(f"delta must be positive, got {delta}")
    i, j = c
    return EmbeddedPoint(delta * (i + 0.5 * j), delta * j * SQRT3 / 2.0)


def embed_array(ij, delta: float = 1.0) -> np.ndarray:
    """Vectorised :func:`embed` for an ``(N, 2)`` array of (possibly
    fractional) lattice coordinates."""
    ij = np.asarray(ij, dtype=float)
    out = np.empty(ij.shape, dtype=float)
    out[..., 0] = delta * (ij[..., 0] + 0.5 * ij[..., 1])
    out[..., 1] = delta * ij[..., 1] * (SQRT3 / 2.0)
    return out


def to_axis(x: float, y: float) -> tuple[float, float]:
    """Inverse of the embedding at unit spacing: ``(x, y) -> (u, v)``."""
    v = 2.0 * y / SQRT3
    return x - 0.5 * v, v


def neighbors(c) -> set[LatticeCoord]:
    i, j = c
    return {LatticeCoord(i + di, j + dj) for di, dj in DIRECTIONS.tolist()}


def box_norm(dx: float, dy: float) -> float:
    """Side of the smallest centred box containing the displacement."""
    u, v = to_axis(dx, dy)
    return 2.0 * max(abs(u), abs(v))


@dataclass(frozen=True)
class Box:
    center: EmbeddedPoint
    side: float

    def __post_init__(self):
        if not self.side > 0:
            raise ValueError(f"box side must be positive, got {self.side}")

    def contains(self, pt) -> bool:
        n = box_norm(pt[0] - self.center[0], pt[1] - self.center[1])
        return n <= self.side * (1 + _TOL) + _TOL

    def corners(self) -> np.ndarray:
        h = self.side / 2.0
        uv = np.array([[-h, -h], [h, -h], [h, h], [-h, h]])
        xy = embed_array(uv, 1.0)
        return xy + np.asarray(self.center, dtype=float)


@dataclass(frozen=True)
class Annulus:
    """Closed annulus ``B(center; R)`` minus the open box ``B(center; r)``."""

    center: EmbeddedPoint
    r: float
    R: float

    def __post_init__(self):
        if not 0 < self.r < self.R:
            raise ValueError(f"annulus needs 0 < r < R, got r={self.r}, R={self.R}")

    def contains(self, pt) -> bool:
        n = box_norm(pt[0] - self.center[0], pt[1] - self.center[1])
        return self.r * (1 - _TOL) - _TOL <= n <= self.R * (1 + _TOL) + _TOL

    @property
    def inner(self) -> Box:
        return Box(self.center, self.r)

    @property
    def outer(self) -> Box:
        return Box(self.center, self.R)


@dataclass(frozen=True)
class Window:
    """Finite ``L_i x L_j`` block of sites with lower-left site ``origin``.

    Local index ``(a, b)`` refers to the site ``origin + (a, b)``.  The
    window's region is the parallelogram swept by the hexagons' axis extents,
    i.e. ``u`` in ``[(o_i - 1/2) delta, (o_i + L_i - 1/2) delta]`` and likewise
    for ``v``.
    """

    L_i: int
    L_j: int
    delta: float = 1.0
    origin: LatticeCoord = LatticeCoord(0, 0)

    def __post_init__(self):
        if self.L_i < 1 or self.L_j < 1:
            raise ValueError(f"window must be non-empty, got {self.L_i}x{self.L_j}")
        if not self.delta > 0:
            raise ValueError(f"delta must be positive, got {self.delta}")
        object.__setattr__(self, "origin", LatticeCoord(*self.origin))

    @classmethod
    def square(cls, L: int, delta: float = 1.0) -> "Window":
        return cls(L, L, delta)

    @classmethod
    def unit(cls, delta: float, side: float = 1.0) -> "Window":
        """Square window of Euclidean side ``side`` at spacing ``delta``."""
        L = max(1, int(round(side / delta)))
        return cls(L, L, delta)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.L_i, self.L_j)

    @property
    def n_sites(self) -> int:
        return self.L_i * self.L_j

    @property
    def side(self) -> float:
        return min(self.L_i, self.L_j) * self.delta

    def contains(self, c) -> bool:
        a, b = c[0] - self.origin.i, c[1] - self.origin.j
        return 0 <= a < self.L_i and 0 <= b < self.L_j

    def local(self, c) -> tuple[int, int]:
        if not self.contains(c):
            raise IndexError(f"site {tuple(c)} outside window {self}")
        return c[0] - self.origin.i, c[1] - self.origin.j

    def axis_bounds(self) -> tuple[float, float, float, float]:
        d = self.delta
        oi, oj = self.origin
        return ((oi - 0.5) * d, (oi + self.L_i - 0.5) * d,
                (oj - 0.5) * d, (oj + self.L_j - 0.5) * d)

    def center_site(self) -> LatticeCoord:
        return LatticeCoord(self.origin.i + self.L_i // 2, self.origin.j + self.L_j // 2)

    def center(self) -> EmbeddedPoint:
        return embed(self.center_site(), self.delta)

    def site_of(self, pt) -> LatticeCoord:
        """Lattice site whose hexagon contains ``pt`` (nearest site centre)."""
        u, v = to_axis(pt[0] / self.delta, pt[1] / self.delta)
        i0, j0 = math.floor(u), math.floor(v)
        best, best_d = None, math.inf
        for i in (i0, i0 + 1):
            for j in (j0, j0 + 1):
                e = embed((i, j), self.delta)
                d = (e.x - pt[0]) ** 2 + (e.y - pt[1]) ** 2
                if d < best_d:
                    best, best_d = LatticeCoord(i, j), d
        return best

    def boundary_distance(self, pt) -> float:
        """Distance from ``pt`` to the window boundary in axis coordinates."""
        u, v = to_axis(pt[0], pt[1])
        u0, u1, v0, v1 = self.axis_bounds()
        return min(u - u0, u1 - u, v - v0, v1 - v)

    def contains_box(self, b: Box) -> bool:
        u, v = to_axis(b.center[0], b.center[1])
        u0, u1, v0, v1 = self.axis_bounds()
        h = b.side / 2.0
        slack = _TOL * (1 + b.side)
        return (u - h >= u0 - slack and u + h <= u1 + slack
                and v - h >= v0 - slack and v + h <= v1 + slack)

    def check_margin(self, pt, margin: float | None = None) -> None:
        """Raise unless ``pt`` is at least ``margin`` (default side/4) inside."""
        if margin is None:
            margin = self.side / 4.0
        d = self.boundary_distance(pt)
        if d < margin * (1 - _TOL):
            raise ValueError(
                f"point {tuple(pt)} is {d:.4g} from the window boundary; "
                f"margin rule requires {margin:.4g}"
            )


def sites_in_box(b: Box, delta: float = 1.0) -> set[LatticeCoord]:
    """All sites whose embedded centres lie in the closed box ``b``."""
    if delta <= 0:
        raise ValueError(f"delta must be positive, got {delta}")
    u, v = to_axis(b.center[0] / delta, b.center[1] / delta)
    h = b.side / (2.0 * delta)
    slack = _TOL * (1 + h)
    i_lo, i_hi = math.ceil(u - h - slack), math.floor(u + h + slack)
    j_lo, j_hi = math.ceil(v - h - slack), math.floor(v + h + slack)
    return {LatticeCoord(i, j) for i in range(i_lo, i_hi + 1) for j in range(j_lo, j_hi + 1)}


def canonical_box(n: float, delta: float = 1.0, corner=(0, 0)) -> Box:
    """The box of side ``round(n)*delta`` holding exactly the ``L x L`` block
    of sites whose lower-left site is ``corner``."""
    L = int(round(n))
    if L < 1:
        raise ValueError(f"box size must round to >= 1, got {n}")
    c = ((corner[0] + (L - 1) / 2.0), (corner[1] + (L - 1) / 2.0))
    return Box(embed(c, delta), L * delta)


@njit(cache=True)
def _cross(ox, oy, ax, ay, bx, by):
    return (ax - ox) * (by - oy) - (ay - oy) * (bx - ox)


@njit(cache=True)
def hull_diameter(xs, ys):
    """Diameter of a planar point set via its convex hull (monotone chain)."""
    n = xs.shape[0]
    if n < 2:
        return 0.0
    by_y = np.argsort(ys, kind="mergesort")
    order = by_y[np.argsort(xs[by_y], kind="mergesort")]
    hx = np.empty(2 * n, dtype=np.float64)
    hy = np.empty(2 * n, dtype=np.float64)
    k = 0
    for t in range(n):
        idx = order[t]
        while k >= 2 and _cross(hx[k - 2], hy[k - 2], hx[k - 1], hy[k - 1], xs[idx], ys[idx]) <= 0:
            k -= 1
        hx[k] = xs[idx]
        hy[k] = ys[idx]
        k += 1
    lower = k + 1
    for t in range(n - 2, -1, -1):
        idx = order[t]
        while k >= lower and _cross(hx[k - 2], hy[k - 2], hx[k - 1], hy[k - 1], xs[idx], ys[idx]) <= 0:
            k -= 1
        hx[k] = xs[idx]
        hy[k] = ys[idx]
        k += 1
    best = 0.0
    for a in range(k):
        for b in range(a + 1, k):
            d = (hx[a] - hx[b]) ** 2 + (hy[a] - hy[b]) ** 2
            if d > best:
                best = d
    return math.sqrt(best)


def diam(points: Iterable) -> float:
    """Maximum pairwise Euclidean distance of a non-empty point set."""
    pts = np.asarray(list(points) if not isinstance(points, np.ndarray) else points, dtype=float)
    if pts.size == 0:
        raise ValueError("diameter of an empty set is undefined")
    pts = pts.reshape(-1, 2)
    return float(hull_diameter(np.ascontiguousarray(pts[:, 0]), np.ascontiguousarray(pts[:, 1])))
