"""Distances on the compactified plane, between curves and between finite
collections of curves.

Points of the plane are mapped to the unit sphere by inverse stereographic
projection ``sigma(x, y) = (2x, 2y, x^2 + y^2 - 1) / (1 + x^2 + y^2)`` with the
point at infinity sent to the north pole.  The ground metric is half the
great-circle angle between images,

    delta(u, v) = arccos(sigma(u) . sigma(v)) / 2 = arcsin(|sigma(u) - sigma(v)| / 2),

evaluated through the chord form, which stays accurate for nearby points.
Curves are compared with the discrete Frechet distance under this metric
after refining each polyline so that no segment is longer than ``h``.
Collections of curves are compared with the Hausdorff distance built on it.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from numba import njit

DEFAULT_H = 0.01
FULL_SHIFT_LIMIT = 64


# --------------------------------------------------------------------------
# points


@dataclass(frozen=True)
class CPoint:
    """A point of the compactified plane: finite ``(x, y)`` or infinity."""

    x: float = 0.0
    y: float = 0.0
    infinite: bool = False

    @classmethod
    def infinity(cls) -> "CPoint":
        return cls(math.inf, math.inf, True)

    def __post_init__(self):
        if self.infinite:
            object.__setattr__(self, "x", math.inf)
            object.__setattr__(self, "y", math.inf)
        elif not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError("finite CPoint needs finite coordinates; use CPoint.infinity()")

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y], dtype=float)


def _as_xy(p) -> np.ndarray:
    if isinstance(p, CPoint):
        return p.as_array()
    a = np.asarray(p, dtype=float)
    if a.shape != (2,):
        raise ValueError(f"expected a 2-vector or CPoint, got shape {a.shape}")
    return a


def sphere(xy) -> np.ndarray:
    """Inverse stereographic projection of an ``(N, 2)`` array (rows with a
    non-finite coordinate map to the north pole)."""
    xy = np.atleast_2d(np.asarray(xy, dtype=float))
    out = np.empty((len(xy), 3))
    inf = ~np.all(np.isfinite(xy), axis=1)
    x, y = xy[:, 0], xy[:, 1]
    with np.errstate(invalid="ignore", over="ignore"):
        q = x * x + y * y
        den = 1.0 + q
        out[:, 0] = 2.0 * x / den
        out[:, 1] = 2.0 * y / den
        out[:, 2] = (q - 1.0) / den
    out[inf] = (0.0, 0.0, 1.0)
    return out


@njit(cache=True)
def _chord_delta(a, b):
    s = 0.0
    for t in range(3):
        d = a[t] - b[t]
        s += d * d
    c = 0.5 * math.sqrt(s)
    return math.asin(c if c < 1.0 else 1.0)


def delta_dist(u, v) -> float:
    """Metric ``delta`` between two points (``CPoint`` or 2-vectors).

    Examples
    --------
    >>> round(delta_dist(CPoint(0, 0), CPoint.infinity()), 12) == round(math.pi / 2, 12)
    True
    """
    s = sphere(np.vstack([_as_xy(u), _as_xy(v)]))
    return float(_chord_delta(s[0], s[1]))


def delta_length(xy) -> float:
    """Sum of ``delta`` over consecutive vertices of a polyline."""
    s = sphere(xy)
    return float(sum(_chord_delta(s[i], s[i + 1]) for i in range(len(s) - 1)))


# --------------------------------------------------------------------------
# curves


@dataclass
class Curve:
    """Polyline in the compactified plane.

    ``points`` is an ``(N, 2)`` array; a row with non-finite coordinates is
    the point at infinity.  A closed curve stores its first vertex again at
    the end (added on construction when missing).
    """

    points: np.ndarray
    closed: bool = False

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(
            [_as_xy(p) for p in self.points] if not isinstance(self.points, np.ndarray)
            else self.points, dtype=float))
        if pts.size == 0:
            raise ValueError("a curve needs at least one vertex")
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise ValueError(f"curve points must have shape (N, 2), got {pts.shape}")
        pts = np.where(np.all(np.isfinite(pts), axis=1)[:, None], pts, np.inf)
        if self.closed and len(pts) > 1 and not np.array_equal(pts[0], pts[-1]):
            pts = np.vstack([pts, pts[:1]])
        if len(pts) > 1 and np.any(np.all(pts[1:] == pts[:-1], axis=1)):
            raise ValueError("consecutive curve vertices must be distinct")
        self.points = pts

    @classmethod
    def from_points(cls, pts: Iterable, closed: bool = False) -> "Curve":
        return cls(np.array([_as_xy(p) for p in pts], dtype=float), closed)

    def __len__(self) -> int:
        return len(self.points)

    def refined(self, h: float) -> np.ndarray:
        """Sphere images of the vertices after subdivision so that every
        segment has ``delta``-length at most ``h``."""
        return sphere(refine(self.points, h))


def _segment_factor_bound(a: np.ndarray, b: np.ndarray) -> float:
    """Upper bound of the conformal factor ``1/(1+|x|^2)`` on segment ``ab``."""
    d = b - a
    L2 = float(d @ d)
    t = 0.0 if L2 == 0 else min(1.0, max(0.0, -float(a @ d) / L2))
    c = a + t * d
    return 1.0 / (1.0 + float(c @ c))


def _dyadic(x: float) -> int:
    """Smallest power of two ``>= x`` (at least 1), so halving ``h`` nests
    the refined vertex sets."""
    k = 1
    while k < x:
        k *= 2
    return k


def refine(points: np.ndarray, h: float) -> np.ndarray:
    """Insert vertices so that no segment has ``delta``-length above ``h``.

    Every segment is cut into a power-of-two number of pieces, so the
    vertices for ``h/2`` contain those for ``h``.  Finite segments are split
    uniformly in the plane using the bound
    ``length * max factor``.  A segment to infinity follows the ray through
    the finite end point (the sphere geodesic to the pole) and is split
    uniformly in the angle on the sphere.
    """
    if h <= 0:
        raise ValueError(f"refinement length must be positive, got {h}")
    pts = np.asarray(points, dtype=float)
    if len(pts) < 2:
        return pts.copy()
    out = [pts[:1]]
    for a, b in zip(pts[:-1], pts[1:]):
        fa, fb = np.all(np.isfinite(a)), np.all(np.isfinite(b))
        if fa and fb:
            bound = float(np.hypot(*(b - a))) * _segment_factor_bound(a, b)
            k = _dyadic(bound / h)
            t = np.arange(1, k + 1)[:, None] / k
            seg = a + t * (b - a)
            seg[-1] = b
        elif fa or fb:
            f = a if fa else b
            r0 = float(np.hypot(*f))
            u = f / r0 if r0 > 0 else np.array([1.0, 0.0])
            # polar angle from the north pole: theta = 2 arctan(1/r)
            th0 = 2.0 * math.atan2(1.0, r0)
            k = _dyadic(0.5 * th0 / h)
            th = th0 * (1.0 - np.arange(1, k) / k)      # strictly between the ends
            r = 1.0 / np.tan(0.5 * th)
            mid = r[:, None] * u
            if fa:
                seg = np.vstack([mid, b[None, :]])
            else:
                seg = np.vstack([mid[::-1], b[None, :]])
        else:
            seg = b[None, :]
        out.append(seg)
    return np.vstack(out)


@njit(cache=True)
def _pair_matrix(S, T):
    n, m = S.shape[0], T.shape[0]
    D = np.empty((n, m))
    for i in range(n):
        for j in range(m):
            D[i, j] = _chord_delta(S[i], T[j])
    return D


@njit(cache=True)
def _frechet_cols(D, cols):
    """Discrete Frechet value of rows ``0..n-1`` against columns ``cols``."""
    n = D.shape[0]
    m = cols.shape[0]
    prev = np.empty(m)
    cur = np.empty(m)
    prev[0] = D[0, cols[0]]
    for j in range(1, m):
        prev[j] = max(prev[j - 1], D[0, cols[j]])
    for i in range(1, n):
        cur[0] = max(prev[0], D[i, cols[0]])
        for j in range(1, m):
            best = prev[j - 1]
            if prev[j] < best:
                best = prev[j]
            if cur[j - 1] < best:
                best = cur[j - 1]
            d = D[i, cols[j]]
            cur[j] = d if d > best else best
        prev, cur = cur, prev
    return prev[m - 1]


@njit(cache=True)
def _shift_cols(m, s):
    cols = np.empty(m + 1, dtype=np.int64)
    for j in range(m + 1):
        cols[j] = (s + j) % m
    return cols


def _best_shift(D: np.ndarray, full_limit: int) -> float:
    """Minimum over start vertices of the cyclic columns of ``D``."""
    m = D.shape[1]
    cache: dict[int, float] = {}

    def val(s):
        s %= m
        if s not in cache:
            cache[s] = float(_frechet_cols(D, _shift_cols(m, s)))
        return cache[s]

    if m <= full_limit:
        return min(val(s) for s in range(m))
    step = int(math.ceil(m / full_limit))
    best = min(range(0, m, step), key=val)
    while step > 1:
        step = max(1, step // 2)
        improved = True
        while improved:
            improved = False
            for s in (best - step, best + step):
                if val(s) < val(best):
                    best, improved = s % m, True
    return min(cache.values())


def _canonical(a: Curve, b: Curve) -> tuple[Curve, Curve]:
    ka = (a.closed, len(a.points), a.points.tobytes())
    kb = (b.closed, len(b.points), b.points.tobytes())
    return (a, b) if ka <= kb else (b, a)


def curve_dist(g1: Curve, g2: Curve, h: float = DEFAULT_H,
               full_shift_limit: int = FULL_SHIFT_LIMIT) -> float:
    """Discrete Frechet distance under ``delta`` between refined polylines.

    A closed curve may start anywhere: the minimum is taken over cyclic
    shifts of its start vertex (all shifts for up to ``full_shift_limit``
    refined vertices, otherwise a coarse grid followed by a local search).
    Arguments are put in a canonical order first, so the value is exactly
    symmetric.
    """
    a, b = _canonical(g1, g2)
    S, T = a.refined(h), b.refined(h)
    if b.closed and len(T) > 2:
        D = _pair_matrix(S, T[:-1])
        return _best_shift(D, full_shift_limit)
    if a.closed and len(S) > 2:
        D = _pair_matrix(T, S[:-1])
        return _best_shift(D, full_shift_limit)
    D = _pair_matrix(S, T)
    return float(_frechet_cols(D, np.arange(D.shape[1], dtype=np.int64)))


# --------------------------------------------------------------------------
# curve collections


@dataclass
class CurveSet:
    curves: list

    def __post_init__(self):
        self.curves = [c if isinstance(c, Curve) else Curve(c) for c in self.curves]

    def __len__(self) -> int:
        return len(self.curves)


def distance_matrix(F: Sequence[Curve], G: Sequence[Curve] | None = None,
                    h: float = DEFAULT_H) -> np.ndarray:
    """``M[i, j] = curve_dist(F[i], G[j])``; symmetric fill when ``G`` is omitted."""
    F = list(F.curves if isinstance(F, CurveSet) else F)
    if G is None:
        n = len(F)
        M = np.zeros((n, n))
        for i in range(n):
            for j in range(i + 1, n):
                M[i, j] = M[j, i] = curve_dist(F[i], F[j], h)
        return M
    G = list(G.curves if isinstance(G, CurveSet) else G)
    return np.array([[curve_dist(f, g, h) for g in G] for f in F]).reshape(len(F), len(G))


def hausdorff_from_matrix(M: np.ndarray) -> float:
    """Hausdorff distance given the cross-distance matrix of two sets."""
    M = np.asarray(M, dtype=float)
    if M.size == 0:
        raise ValueError("Hausdorff distance needs two nonempty sets")
    return float(max(M.min(axis=1).max(), M.min(axis=0).max()))


def directed_dist(F: CurveSet, G: CurveSet, h: float = DEFAULT_H) -> float:
    """``max over f in F of min over g in G of curve_dist(f, g)``."""
    if len(F) == 0 or len(G) == 0:
        raise ValueError("curve sets must be nonempty")
    return float(distance_matrix(F, G, h).min(axis=1).max())


def set_dist(F: CurveSet, G: CurveSet, h: float = DEFAULT_H) -> float:
    """Hausdorff distance between two nonempty curve collections.

    Raises
    ------
    ValueError
        If either collection is empty; no convention is imposed for that case.
    """
    if len(F) == 0 or len(G) == 0:
        raise ValueError("curve sets must be nonempty")
    return hausdorff_from_matrix(distance_matrix(F, G, h))


# --------------------------------------------------------------------------
# I/O


def curves_from_dump(fh) -> tuple[list[int], CurveSet]:
    """Read a loop vertex dump (``id x0 y0 x1 y1 ...`` per line)."""
    from .loops import read_loop_dump

    ids, curves = [], []
    for lid, xy in read_loop_dump(fh):
        closed = len(xy) > 2 and np.array_equal(xy[0], xy[-1])
        ids.append(lid)
        curves.append(Curve(xy, closed))
    return ids, CurveSet(curves)


def write_distance_matrix(ids: Sequence, M: np.ndarray, fh) -> None:
    """CSV with a header row of ids and one row per id."""
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["id", *ids])
    for i, row in zip(ids, M):
        w.writerow([i, *(repr(float(v)) for v in row)])
