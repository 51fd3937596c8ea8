"""Interface loops: the black/white boundaries drawn on hexagon edges.

Every interface edge separates a White hexagon ``w`` from a Black hexagon
``b = w + DIRECTIONS[k]`` and is walked with White on the left.  Its head
vertex is the triangle ``{w, b, w + DIRECTIONS[k+1]}``; the colour of that
third site decides the unique continuation, so walks never branch and closed
walks are simple.  Hexagon vertices are identified by the integer key
``w + b + c`` (three times the triangle centroid in lattice coordinates).

Edges whose head or tail vertex involves a site outside the window end the
walk; such open walks are kept as fragments.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from numba import njit

from .lattice import (DIRECTIONS, LatticeCoord, Window, embed_array, hull_diameter,
                      to_axis)
from .sampler import PercConfig

DI = DIRECTIONS[:, 0].copy()
DJ = DIRECTIONS[:, 1].copy()

# --------------------------------------------------------------------------
# tracing kernel


@njit(cache=True)
def _inside(L_i, L_j, a, b):
    return 0 <= a < L_i and 0 <= b < L_j


@njit(cache=True)
def _edge_slot(wa, wb, k, L_j):
    """Undirected edge id: (lower site, forward direction 0..2)."""
    if k < 3:
        return (wa * L_j + wb) * 3 + k
    return ((wa + DI[k]) * L_j + wb + DJ[k]) * 3 + (k - 3)


@njit(cache=True, nogil=True)
def _trace(codes):
    L_i, L_j = codes.shape
    n = L_i * L_j
    cap = 3 * n + 1
    used = np.zeros(3 * n, dtype=np.uint8)
    vkeys = np.empty((cap + n, 2), dtype=np.int64)
    ew = np.empty(cap, dtype=np.int64)
    eb = np.empty(cap, dtype=np.int64)
    voff = np.zeros(cap + 1, dtype=np.int64)
    eoff = np.zeros(cap + 1, dtype=np.int64)
    closed = np.zeros(cap, dtype=np.bool_)
    nv = 0
    ne = 0
    nc = 0
    # pass 0: fragments (start where the tail's third site leaves the window);
    # pass 1: everything left is a closed loop
    for stage in range(2):
        for wa in range(L_i):
            for wb in range(L_j):
                if codes[wa, wb] != 1:
                    continue
                for k0 in range(6):
                    ba = wa + DI[k0]
                    bb = wb + DJ[k0]
                    if not _inside(L_i, L_j, ba, bb) or codes[ba, bb] != 0:
                        continue
                    if used[_edge_slot(wa, wb, k0, L_j)]:
                        continue
                    kt = (k0 + 5) % 6
                    ta = wa + DI[kt]
                    tb = wb + DJ[kt]
                    if stage == 0 and _inside(L_i, L_j, ta, tb):
                        continue
                    # walk
                    cwa, cwb, cba, cbb, k = wa, wb, ba, bb, k0
                    vkeys[nv, 0] = cwa + cba + ta
                    vkeys[nv, 1] = cwb + cbb + tb
                    nv += 1
                    is_closed = False
                    while True:
                        used[_edge_slot(cwa, cwb, k, L_j)] = 1
                        ew[ne] = cwa * L_j + cwb
                        eb[ne] = cba * L_j + cbb
                        ne += 1
                        kh = (k + 1) % 6
                        ca = cwa + DI[kh]
                        cb = cwb + DJ[kh]
                        vkeys[nv, 0] = cwa + cba + ca
                        vkeys[nv, 1] = cwb + cbb + cb
                        nv += 1
                        if not _inside(L_i, L_j, ca, cb):
                            break
                        if codes[ca, cb] == 1:
                            cwa, cwb, k = ca, cb, (k + 5) % 6
                        else:
                            cba, cbb, k = ca, cb, kh
                        if cwa == wa and cwb == wb and cba == ba and cbb == bb:
                            is_closed = True
                            break
                    closed[nc] = is_closed
                    nc += 1
                    voff[nc] = nv
                    eoff[nc] = ne
    return vkeys[:nv].copy(), voff[:nc + 1].copy(), ew[:ne].copy(), eb[:ne].copy(), \
        eoff[:nc + 1].copy(), closed[:nc].copy()


# --------------------------------------------------------------------------
# geometry kernels over concatenated polylines


@njit(cache=True)
def _point_in_ring(xs, ys, lo, hi, px, py):
    """Even-odd test of ``(px, py)`` against the closed ring ``xs[lo:hi]``
    (first vertex repeated at the end)."""
    inside = False
    for t in range(lo, hi - 1):
        x1 = xs[t]
        y1 = ys[t]
        x2 = xs[t + 1]
        y2 = ys[t + 1]
        if (y1 > py) != (y2 > py):
            xc = x1 + (py - y1) * (x2 - x1) / (y2 - y1)
            if px < xc:
                inside = not inside
    return inside


@njit(cache=True, nogil=True)
def _surround_flags(xs, ys, voff, closed, px, py):
    nc = closed.shape[0]
    out = np.zeros(nc, dtype=np.bool_)
    for c in range(nc):
        if not closed[c]:
            continue
        lo = voff[c]
        hi = voff[c + 1]
        # bounding-box rejection first
        xmin = xs[lo]
        xmax = xs[lo]
        ymin = ys[lo]
        ymax = ys[lo]
        for t in range(lo, hi):
            if xs[t] < xmin:
                xmin = xs[t]
            if xs[t] > xmax:
                xmax = xs[t]
            if ys[t] < ymin:
                ymin = ys[t]
            if ys[t] > ymax:
                ymax = ys[t]
        if px < xmin or px > xmax or py < ymin or py > ymax:
            continue
        out[c] = _point_in_ring(xs, ys, lo, hi, px, py)
    return out


@njit(cache=True, nogil=True)
def _chord_surround_flags(xs, ys, voff, closed, px, py):
    """For open curves: does the curve closed by its end-to-start chord
    surround the point?"""
    nc = closed.shape[0]
    out = np.zeros(nc, dtype=np.bool_)
    for c in range(nc):
        if closed[c]:
            continue
        lo = voff[c]
        hi = voff[c + 1]
        inside = _point_in_ring(xs, ys, lo, hi, px, py)
        x1 = xs[hi - 1]
        y1 = ys[hi - 1]
        x2 = xs[lo]
        y2 = ys[lo]
        if (y1 > py) != (y2 > py):
            xc = x1 + (py - y1) * (x2 - x1) / (y2 - y1)
            if px < xc:
                inside = not inside
        out[c] = inside
    return out


@njit(cache=True, nogil=True)
def _signed_areas(xs, ys, voff):
    nc = voff.shape[0] - 1
    out = np.zeros(nc)
    for c in range(nc):
        s = 0.0
        for t in range(voff[c], voff[c + 1] - 1):
            s += xs[t] * ys[t + 1] - xs[t + 1] * ys[t]
        out[c] = 0.5 * s
    return out


@njit(cache=True, nogil=True)
def _bboxes(xs, ys, voff):
    nc = voff.shape[0] - 1
    out = np.empty((nc, 4))
    for c in range(nc):
        lo = voff[c]
        hi = voff[c + 1]
        out[c, 0] = xs[lo]
        out[c, 1] = xs[lo]
        out[c, 2] = ys[lo]
        out[c, 3] = ys[lo]
        for t in range(lo, hi):
            out[c, 0] = min(out[c, 0], xs[t])
            out[c, 1] = max(out[c, 1], xs[t])
            out[c, 2] = min(out[c, 2], ys[t])
            out[c, 3] = max(out[c, 3], ys[t])
    return out


@njit(cache=True, nogil=True)
def _diameters(xs, ys, voff, which):
    out = np.full(voff.shape[0] - 1, np.nan)
    for t in range(which.shape[0]):
        c = which[t]
        lo = voff[c]
        hi = voff[c + 1]
        out[c] = hull_diameter(xs[lo:hi], ys[lo:hi])
    return out


@njit(cache=True)
def _segment_hits_open_square(u1, v1, u2, v2, h):
    """Does the segment meet the open square ``|u| < h, |v| < h``?"""
    t0 = 0.0
    t1 = 1.0
    du = u2 - u1
    dv = v2 - v1
    for q in range(4):
        if q == 0:
            pp, qq = -du, u1 + h
        elif q == 1:
            pp, qq = du, h - u1
        elif q == 2:
            pp, qq = -dv, v1 + h
        else:
            pp, qq = dv, h - v1
        if pp == 0.0:
            if qq <= 0.0:
                return False
        else:
            t = qq / pp
            if pp < 0.0:
                if t > t0:
                    t0 = t
            else:
                if t < t1:
                    t1 = t
    return t1 - t0 > 1e-12


@njit(cache=True, nogil=True)
def _annulus_states(us, vs, voff, closed, r, R, tol):
    """Per curve: (inside closed annulus, number of inner<->outer crossings).

    Vertex states: 0 = open inner box, 1 = closed annulus, 2 = outside."""
    nc = voff.shape[0] - 1
    contained = np.zeros(nc, dtype=np.bool_)
    crossings = np.zeros(nc, dtype=np.int64)
    for c in range(nc):
        lo = voff[c]
        hi = voff[c + 1]
        ok = True
        last = -1
        first = -1
        cnt = 0
        end = hi - 1 if closed[c] else hi
        for t in range(lo, end):
            nrm = 2.0 * max(abs(us[t]), abs(vs[t]))
            if nrm < r - tol:
                st = 0
            elif nrm > R + tol:
                st = 2
            else:
                st = 1
            if st != 1:
                ok = False
                if last >= 0 and st != last:
                    cnt += 1
                if first < 0:
                    first = st
                last = st
        if closed[c] and first >= 0 and first != last:
            cnt += 1
        if ok:
            for t in range(lo, hi - 1):
                if _segment_hits_open_square(us[t], vs[t], us[t + 1], vs[t + 1], 0.5 * r - tol):
                    ok = False
                    break
        contained[c] = ok
        crossings[c] = cnt
    return contained, crossings


# --------------------------------------------------------------------------
# data types


@dataclass(frozen=True, eq=False)
class BoundaryLoop:
    """One traced interface curve.

    ``vertices`` is an ``(m+1, 2)`` array; for closed loops the first vertex is
    repeated at the end.  ``white_sites[t]`` / ``black_sites[t]`` are the
    (global) sites left / right of edge ``t``.
    """

    vertices: np.ndarray
    white_sites: np.ndarray
    black_sites: np.ndarray
    closed: bool
    touches_window_boundary: bool
    index: int = -1
    white_on_left: bool = True

    @property
    def n_edges(self) -> int:
        return len(self.vertices) - 1

    @cached_property
    def diameter(self) -> float:
        v = self.vertices
        return float(hull_diameter(np.ascontiguousarray(v[:, 0]), np.ascontiguousarray(v[:, 1])))

    @cached_property
    def signed_area(self) -> float:
        x, y = self.vertices[:, 0], self.vertices[:, 1]
        return 0.5 * float(np.sum(x[:-1] * y[1:] - x[1:] * y[:-1]))

    @property
    def black_inside(self) -> bool:
        """White is on the left, so a clockwise loop has Black inside."""
        return self.closed and self.signed_area < 0

    def distances_to(self, x) -> tuple[float, float]:
        """Min and max Euclidean distance from ``x`` to the loop's vertices."""
        d = np.hypot(self.vertices[:, 0] - x[0], self.vertices[:, 1] - x[1])
        return float(d.min()), float(d.max())


@dataclass(frozen=True, eq=False)
class LoopSet:
    """All interface curves of one configuration in concatenated form.

    Curve ``c`` has vertex keys ``vkeys[voff[c]:voff[c+1]]`` and edges
    ``eoff[c]:eoff[c+1]``; keys and edge sites use local window indices.
    """

    window: Window
    vkeys: np.ndarray
    voff: np.ndarray
    ew: np.ndarray
    eb: np.ndarray
    eoff: np.ndarray
    closed: np.ndarray
    source: tuple = ()
    mode: str = "plane"

    @property
    def n_curves(self) -> int:
        return len(self.closed)

    @cached_property
    def xy(self) -> np.ndarray:
        o = np.asarray(self.window.origin, dtype=float)
        return embed_array(self.vkeys / 3.0 + o, self.window.delta)

    @cached_property
    def _xs(self):
        return np.ascontiguousarray(self.xy[:, 0])

    @cached_property
    def _ys(self):
        return np.ascontiguousarray(self.xy[:, 1])

    @cached_property
    def signed_areas(self) -> np.ndarray:
        return _signed_areas(self._xs, self._ys, self.voff)

    @cached_property
    def bboxes(self) -> np.ndarray:
        return _bboxes(self._xs, self._ys, self.voff)

    @cached_property
    def n_edges(self) -> np.ndarray:
        return np.diff(self.eoff)

    @cached_property
    def touches_boundary(self) -> np.ndarray:
        """Curves with a side site on the window's outer rows/columns."""
        L_i, L_j = self.window.shape
        flags = np.zeros(self.n_curves, dtype=bool)
        if len(self.ew) == 0:
            return flags
        sites = np.concatenate([self.ew, self.eb])
        a, b = np.divmod(sites, L_j)
        edge_touch = (a == 0) | (b == 0) | (a == L_i - 1) | (b == L_j - 1)
        edge_touch = edge_touch[:len(self.ew)] | edge_touch[len(self.ew):]
        owner = np.repeat(np.arange(self.n_curves), self.n_edges)
        np.logical_or.at(flags, owner, edge_touch)
        return flags | ~self.closed

    def diameters(self, which=None) -> np.ndarray:
        """Diameters of the selected curves (all if ``which`` is None); others NaN."""
        if which is None:
            which = np.arange(self.n_curves)
        which = np.asarray(which, dtype=np.int64)
        return _diameters(self._xs, self._ys, self.voff, which)

    @cached_property
    def all_diameters(self) -> np.ndarray:
        return self.diameters()

    def _sites_global(self, flat) -> np.ndarray:
        a, b = np.divmod(flat, self.window.L_j)
        return np.stack([a + self.window.origin.i, b + self.window.origin.j], axis=1)

    def curve(self, c: int) -> BoundaryLoop:
        lo, hi = self.voff[c], self.voff[c + 1]
        elo, ehi = self.eoff[c], self.eoff[c + 1]
        return BoundaryLoop(
            vertices=self.xy[lo:hi],
            white_sites=self._sites_global(self.ew[elo:ehi]),
            black_sites=self._sites_global(self.eb[elo:ehi]),
            closed=bool(self.closed[c]),
            touches_window_boundary=bool(self.touches_boundary[c]),
            index=int(c),
        )

    @cached_property
    def loops(self) -> list[BoundaryLoop]:
        return [self.curve(c) for c in np.flatnonzero(self.closed)]

    @cached_property
    def open_fragments(self) -> list[BoundaryLoop]:
        return [self.curve(c) for c in np.flatnonzero(~self.closed)]

    # queries used by the Monte Carlo drivers -------------------------------

    def surround_flags(self, x) -> np.ndarray:
        return _surround_flags(self._xs, self._ys, self.voff, self.closed,
                               float(x[0]), float(x[1]))

    def fragment_flags(self, x) -> np.ndarray:
        return _chord_surround_flags(self._xs, self._ys, self.voff, self.closed,
                                     float(x[0]), float(x[1]))

    def annulus_states(self, a) -> tuple[np.ndarray, np.ndarray]:
        us, vs = _axis_offsets(self._xs, self._ys, a.center)
        return _annulus_states(us, vs, self.voff, self.closed, float(a.r), float(a.R),
                               1e-9 * (1 + a.R))


def _axis_offsets(xs, ys, center):
    v = 2.0 * (ys - center[1]) / math.sqrt(3.0)
    u = (xs - center[0]) - 0.5 * v
    return np.ascontiguousarray(u), np.ascontiguousarray(v)


# --------------------------------------------------------------------------
# operations


def trace_loops(cfg: PercConfig, mode: str = "plane", pad: int = 0) -> LoopSet:
    """Trace every interface edge of ``cfg`` into loops and window fragments.

    ``mode="closed"`` first surrounds the window by a one-site ring of colour
    ``pad`` (Black by default) so that every interface closes; ring sites
    appear as edge sites just outside the window.
    """
    codes = cfg.codes
    window = cfg.window
    if mode == "closed":
        padded = np.full((window.L_i + 2, window.L_j + 2), int(pad), dtype=np.uint8)
        padded[1:-1, 1:-1] = codes
        codes = padded
        window = Window(window.L_i + 2, window.L_j + 2, window.delta,
                        LatticeCoord(window.origin.i - 1, window.origin.j - 1))
    elif mode != "plane":
        raise ValueError(f"unknown trace mode {mode!r}")
    vkeys, voff, ew, eb, eoff, closed = _trace(np.ascontiguousarray(codes))
    return LoopSet(window, vkeys, voff, ew, eb, eoff, closed,
                   (cfg.p, cfg.window.delta, cfg.seed, cfg.replica_index), mode)


def _check_off_loop(loop: BoundaryLoop, x) -> None:
    v = loop.vertices
    p = np.asarray(x, dtype=float)
    a, b = v[:-1], v[1:]
    ab = b - a
    t = np.clip(np.einsum("ij,ij->i", p - a, ab) / np.einsum("ij,ij->i", ab, ab), 0.0, 1.0)
    d = np.hypot(*(a + t[:, None] * ab - p).T)
    scale = float(np.max(np.hypot(*ab.T))) if len(ab) else 1.0
    if d.size and d.min() <= 1e-12 * max(scale, 1.0):
        raise ValueError(f"point {tuple(x)} lies on the loop")


def surrounds(loop: BoundaryLoop, x) -> bool:
    """Even-odd interior test; raises if ``x`` lies on the loop itself."""
    if not loop.closed:
        return False
    _check_off_loop(loop, x)
    v = loop.vertices
    return bool(_point_in_ring(np.ascontiguousarray(v[:, 0]), np.ascontiguousarray(v[:, 1]),
                               0, len(v), float(x[0]), float(x[1])))


def _surrounding_indices(ls: LoopSet, x) -> np.ndarray:
    """Closed curves around ``x`` ordered inner to outer."""
    idx = np.flatnonzero(ls.surround_flags(x))
    if idx.size == 0:
        return idx
    d = ls.diameters(idx)[idx]
    area = np.abs(ls.signed_areas[idx])
    return idx[np.lexsort((area, d))]


def loops_around(ls: LoopSet, x, margin: float | None = None) -> list[BoundaryLoop]:
    """Closed loops surrounding ``x`` sorted by diameter (inner to outer)."""
    ls.window.check_margin(x, margin)
    return [ls.curve(c) for c in _surrounding_indices(ls, x)]


def _truncated(ls: LoopSet, x) -> bool:
    return bool(ls.fragment_flags(x).any())


def largest_loop_around(ls: LoopSet, x, margin: float | None = None):
    """``(loop, truncated)`` for the outermost closed loop around ``x``, or
    ``None`` if no closed loop surrounds ``x``.

    ``truncated`` is set when some window-clipped fragment, closed by the
    chord between its endpoints, surrounds ``x``; such a fragment could be
    part of a larger loop that the window cuts off.
    """
    ls.window.check_margin(x, margin)
    idx = _surrounding_indices(ls, x)
    if idx.size == 0:
        return None
    return ls.curve(int(idx[-1])), _truncated(ls, x)


def count_in_annulus(ls: LoopSet, a, x=None, margin: float | None = None) -> int:
    """Closed loops surrounding ``x`` (default: the annulus centre) that lie
    entirely in the closed annulus ``a``."""
    x = a.center if x is None else x
    ls.window.check_margin(x, margin)
    if not ls.window.contains_box(a.outer):
        raise ValueError(f"annulus {a} exceeds window")
    contained, _ = ls.annulus_states(a)
    return int(np.count_nonzero(contained & ls.surround_flags(x)))


def interface_crossing_count(ls: LoopSet, a) -> int:
    """Number of maximal curve sub-arcs joining the inner and outer boundary
    of ``a``; loops and fragments both contribute."""
    if not ls.window.contains_box(a.outer):
        raise ValueError(f"annulus {a} exceeds window")
    _, crossings = ls.annulus_states(a)
    return int(crossings.sum())


def fragment_crossings(ls: LoopSet, a) -> int:
    """Crossing sub-arcs contributed by window fragments alone."""
    _, crossings = ls.annulus_states(a)
    return int(crossings[~ls.closed].sum())


def circuit_around(ls: LoopSet, x):
    """``(diameter, touches_edge)`` of the largest black circuit around ``x``.

    ``ls`` must come from ``trace_loops(cfg, "closed", pad=WHITE)``: with the
    outside treated as White, the outer boundary of every black cluster and
    every hole boundary is a closed loop.  A Black-inside loop around ``x``
    yields its inner-side sites as a circuit unless ``x`` is one of them; a
    Black-outside loop yields its outer-side sites.  ``touches_edge`` reports
    whether the chosen circuit uses a site on the window's outer rows, where a
    larger circuit beyond the window cannot be ruled out.  Returns
    ``(None, False)`` when no circuit exists.
    """
    w = ls.window
    xa, xb = w.local(w.site_of(x))
    x_flat = xa * w.L_j + xb
    best, best_sites = None, None
    for c in _surrounding_indices(ls, x)[::-1]:
        sites = ls.eb[ls.eoff[c]:ls.eoff[c + 1]]
        if ls.signed_areas[c] < 0 and np.any(sites == x_flat):
            continue
        sites = np.unique(sites)
        xy = embed_array(ls._sites_global(sites), w.delta)
        d = float(hull_diameter(np.ascontiguousarray(xy[:, 0]), np.ascontiguousarray(xy[:, 1])))
        if best is None or d > best:
            best, best_sites = d, sites
    if best is None:
        return None, False
    a, b = np.divmod(best_sites, w.L_j)
    lo = 1 if ls.mode == "closed" else 0
    edge = bool(np.any((a == lo) | (b == lo) | (a == w.L_i - 1 - lo) | (b == w.L_j - 1 - lo)))
    return best, edge


# --------------------------------------------------------------------------
# export


LOOP_CSV_COLUMNS = ("id", "n_edges", "diameter", "surrounds_origin", "touches_boundary")


def loop_records(ls: LoopSet, origin=None) -> list[list]:
    origin = ls.window.center() if origin is None else origin
    idx = np.flatnonzero(ls.closed)
    if idx.size == 0:
        return []
    dia = ls.diameters(idx)
    sur = ls.surround_flags(origin)
    return [[int(c), int(ls.n_edges[c]), float(dia[c]), int(sur[c]), int(ls.touches_boundary[c])]
            for c in idx]


def write_loop_dump(ls: LoopSet, fh) -> None:
    """One closed loop per line: ``id x0 y0 x1 y1 ...`` (first vertex
    repeated at the end)."""
    for c in np.flatnonzero(ls.closed):
        v = ls.xy[ls.voff[c]:ls.voff[c + 1]]
        fh.write(str(int(c)) + " " + " ".join(repr(float(t)) for t in v.ravel()) + "\n")


def read_loop_dump(fh) -> list[tuple[int, np.ndarray]]:
    out = []
    for line in fh:
        parts = line.split()
        if not parts:
            continue
        vals = np.array([float(t) for t in parts[1:]], dtype=float)
        if vals.size % 2:
            raise ValueError(f"odd coordinate count on loop {parts[0]}")
        out.append((int(parts[0]), vals.reshape(-1, 2)))
    return out
