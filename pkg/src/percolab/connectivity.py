"""Monochromatic connectivity: crossings, clusters, annulus crossings and
maximum families of vertex-disjoint crossings."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numba import njit

from .lattice import (DIRECTIONS, Annulus, EmbeddedPoint, Window, embed, embed_array,
                      hull_diameter, to_axis)
from .sampler import Color, PercConfig, fill_colors, replica_key

DI = DIRECTIONS[:, 0].copy()
DJ = DIRECTIONS[:, 1].copy()


def as_color(c) -> int:
    """Accept ``Color``, 0/1, or 'w'/'white'/'b'/'black'."""
    if isinstance(c, str):
        key = c.strip().lower()
        if key in ("w", "white"):
            return int(Color.WHITE)
        if key in ("b", "black"):
            return int(Color.BLACK)
        raise ValueError(f"unknown colour {c!r}")
    v = int(c)
    if v not in (0, 1):
        raise ValueError(f"unknown colour {c!r}")
    return v


# --------------------------------------------------------------------------
# compiled kernels

@njit(cache=True, nogil=True)
def _box_crossing(codes, color, a0, b0, n1, n2, vertical):
    """Crossing of the ``n1 x n2`` block at local corner ``(a0, b0)``: between
    its first and last ``a``-columns, or its first and last ``b``-rows when
    ``vertical``."""
    seen = np.zeros((n1, n2), dtype=np.uint8)
    stack = np.empty(n1 * n2, dtype=np.int64)
    top = 0
    if vertical:
        for a in range(n1):
            if codes[a0 + a, b0] == color:
                seen[a, 0] = 1
                stack[top] = a * n2
                top += 1
    else:
        for b in range(n2):
            if codes[a0, b0 + b] == color:
                seen[0, b] = 1
                stack[top] = b
                top += 1
    while top > 0:
        top -= 1
        k = stack[top]
        a = k // n2
        b = k - a * n2
        if vertical:
            if b == n2 - 1:
                return True
        elif a == n1 - 1:
            return True
        for d in range(6):
            na = a + DI[d]
            nb = b + DJ[d]
            if 0 <= na < n1 and 0 <= nb < n2 and seen[na, nb] == 0 \
                    and codes[a0 + na, b0 + nb] == color:
                seen[na, nb] = 1
                stack[top] = na * n2 + nb
                top += 1
    return False


@njit(cache=True, nogil=True)
def batch_box_crossing(n1, n2, p, seed, start, count, color, vertical):
    """Hits of the block crossing over replicas ``start .. start+count-1``,
    each sampled on its own ``n1 x n2`` window."""
    buf = np.empty((n1, n2), dtype=np.uint8)
    hits = 0
    for r in range(start, start + count):
        fill_colors(buf, p, replica_key(seed, np.uint64(r)))
        if _box_crossing(buf, color, 0, 0, n1, n2, vertical):
            hits += 1
    return hits


@njit(cache=True)
def _find(parent, x):
    root = x
    while parent[root] != root:
        root = parent[root]
    while parent[x] != root:
        nxt = parent[x]
        parent[x] = root
        x = nxt
    return root


@njit(cache=True, nogil=True)
def _label(codes, color):
    L_i, L_j = codes.shape
    n = L_i * L_j
    parent = np.arange(n)
    for a in range(L_i):
        for b in range(L_j):
            if codes[a, b] != color:
                continue
            s = a * L_j + b
            # already-visited neighbours: (a-1, b), (a, b-1), (a+1, b-1)
            for d in (3, 4, 5):
                na = a + DI[d]
                nb = b + DJ[d]
                if 0 <= na < L_i and 0 <= nb < L_j and codes[na, nb] == color:
                    r1 = _find(parent, s)
                    r2 = _find(parent, na * L_j + nb)
                    if r1 != r2:
                        if r1 < r2:
                            parent[r2] = r1
                        else:
                            parent[r1] = r2
    labels = np.zeros((L_i, L_j), dtype=np.int32)
    remap = np.zeros(n, dtype=np.int32)
    count = 0
    for a in range(L_i):
        for b in range(L_j):
            if codes[a, b] != color:
                continue
            r = _find(parent, a * L_j + b)
            if remap[r] == 0:
                count += 1
                remap[r] = count
            labels[a, b] = remap[r]
    return labels, count


@njit(cache=True, nogil=True)
def flood(codes, color, a0, b0):
    """Sites of the ``color`` cluster containing local site ``(a0, b0)``."""
    L_i, L_j = codes.shape
    out = np.empty(L_i * L_j, dtype=np.int64)
    if codes[a0, b0] != color:
        return out[:0]
    seen = np.zeros((L_i, L_j), dtype=np.uint8)
    seen[a0, b0] = 1
    out[0] = a0 * L_j + b0
    head = 0
    tail = 1
    while head < tail:
        k = out[head]
        head += 1
        a = k // L_j
        b = k - a * L_j
        for d in range(6):
            na = a + DI[d]
            nb = b + DJ[d]
            if 0 <= na < L_i and 0 <= nb < L_j and seen[na, nb] == 0 and codes[na, nb] == color:
                seen[na, nb] = 1
                out[tail] = na * L_j + nb
                tail += 1
    return out[:tail]


@njit(cache=True, nogil=True)
def _region_crossing(allowed, src, snk):
    L_i, L_j = allowed.shape
    seen = np.zeros((L_i, L_j), dtype=np.uint8)
    stack = np.empty(L_i * L_j, dtype=np.int64)
    top = 0
    for a in range(L_i):
        for b in range(L_j):
            if allowed[a, b] and src[a, b]:
                seen[a, b] = 1
                stack[top] = a * L_j + b
                top += 1
    while top > 0:
        top -= 1
        k = stack[top]
        a = k // L_j
        b = k - a * L_j
        if snk[a, b]:
            return True
        for d in range(6):
            na = a + DI[d]
            nb = b + DJ[d]
            if 0 <= na < L_i and 0 <= nb < L_j and seen[na, nb] == 0 and allowed[na, nb]:
                seen[na, nb] = 1
                stack[top] = na * L_j + nb
                top += 1
    return False


@njit(cache=True, nogil=True)
def _max_flow(allowed, src, snk):
    """Unit vertex-capacity max flow from ``src`` sites to ``snk`` sites.

    Nodes: ``2s`` (in) and ``2s+1`` (out) per site, source ``2N``, sink
    ``2N+1``.  Only in->out arcs are capacity 1, so every minimum cut is a set
    of sites.  Returns the flow value, the per-site flags and the residual
    reachability of the final search (which defines the minimum cut).
    """
    L_i, L_j = allowed.shape
    n = L_i * L_j
    S = 2 * n
    T = 2 * n + 1
    f_node = np.zeros(n, dtype=np.int8)
    f_src = np.zeros(n, dtype=np.int8)
    f_snk = np.zeros(n, dtype=np.int8)
    f_edge = np.zeros((n, 6), dtype=np.int8)
    parent = np.empty(2 * n + 2, dtype=np.int64)
    pdir = np.empty(2 * n + 2, dtype=np.int64)
    queue = np.empty(2 * n + 2, dtype=np.int64)
    flow = 0
    while True:
        parent[:] = -1
        parent[S] = S
        head = 0
        tail = 0
        for s in range(n):
            a = s // L_j
            b = s - a * L_j
            if allowed[a, b] and src[a, b] and parent[2 * s] == -1:
                parent[2 * s] = S
                queue[tail] = 2 * s
                tail += 1
        found = False
        while head < tail and not found:
            v = queue[head]
            head += 1
            s = v // 2
            a = s // L_j
            b = s - a * L_j
            if v % 2 == 0:
                # in(s): forward to out(s), backward along used arcs out(t)->in(s)
                if f_node[s] == 0 and parent[v + 1] == -1:
                    parent[v + 1] = v
                    queue[tail] = v + 1
                    tail += 1
                for d in range(6):
                    ta = a + DI[d]
                    tb = b + DJ[d]
                    if 0 <= ta < L_i and 0 <= tb < L_j:
                        t = ta * L_j + tb
                        od = (d + 3) % 6
                        if f_edge[t, od] > 0 and parent[2 * t + 1] == -1:
                            parent[2 * t + 1] = v
                            pdir[2 * t + 1] = od
                            queue[tail] = 2 * t + 1
                            tail += 1
            else:
                if snk[a, b]:
                    parent[T] = v
                    found = True
                    break
                if f_node[s] == 1 and parent[v - 1] == -1:
                    parent[v - 1] = v
                    queue[tail] = v - 1
                    tail += 1
                for d in range(6):
                    ta = a + DI[d]
                    tb = b + DJ[d]
                    if 0 <= ta < L_i and 0 <= tb < L_j and allowed[ta, tb]:
                        t = ta * L_j + tb
                        if parent[2 * t] == -1:
                            parent[2 * t] = v
                            pdir[2 * t] = d
                            queue[tail] = 2 * t
                            tail += 1
        if not found:
            break
        flow += 1
        v = T
        while v != S:
            u = parent[v]
            if v == T:
                f_snk[u // 2] += 1
            elif u == S:
                f_src[v // 2] += 1
            elif u // 2 == v // 2:
                f_node[v // 2] = 1 if v % 2 == 1 else 0
            elif u % 2 == 1:
                f_edge[u // 2, pdir[v]] += 1
            else:
                # v = out(t), undoing flow out(t) -> in(u//2)
                f_edge[v // 2, pdir[v]] -= 1
            v = u
    reach = parent[:2 * n] != -1
    return flow, f_src, f_snk, f_node, f_edge, reach


# --------------------------------------------------------------------------
# cluster labelling

@dataclass(frozen=True)
class ClusterLabeling:
    """Clusters of one colour: ``labels[a, b]`` is 0 for the other colour and
    ``1..count`` otherwise."""

    window: Window
    color: int
    labels: np.ndarray
    count: int
    sizes: np.ndarray
    bbox: np.ndarray  # (count+1, 4): i_min, i_max, j_min, j_max (local)
    extremes: np.ndarray  # (count+1, 4): x_min, x_max, y_min, y_max (embedded)

    def sites(self, label: int) -> np.ndarray:
        """Local ``(a, b)`` indices of the sites carrying ``label``."""
        return np.argwhere(self.labels == label)

    def diameter(self, label: int) -> float:
        ab = self.sites(label) + np.asarray(self.window.origin)
        xy = embed_array(ab, self.window.delta)
        return float(hull_diameter(np.ascontiguousarray(xy[:, 0]), np.ascontiguousarray(xy[:, 1])))

    def touches_boundary(self, label: int) -> bool:
        i0, i1, j0, j1 = self.bbox[label]
        return i0 == 0 or j0 == 0 or i1 == self.window.L_i - 1 or j1 == self.window.L_j - 1


def label_clusters(cfg: PercConfig, color) -> ClusterLabeling:
    col = as_color(color)
    labels, count = _label(cfg.codes, col)
    w = cfg.window
    flat = labels.ravel()
    sizes = np.bincount(flat, minlength=count + 1)
    sizes[0] = 0
    aa, bb = np.indices(w.shape)
    bbox = np.zeros((count + 1, 4), dtype=np.int64)
    ext = np.zeros((count + 1, 4), dtype=float)
    if count:
        sel = flat > 0
        lab = flat[sel]
        a = aa.ravel()[sel]
        b = bb.ravel()[sel]
        xy = embed_array(np.stack([a + w.origin.i, b + w.origin.j], axis=1), w.delta)
        big = np.iinfo(np.int64).max
        bbox[:, 0], bbox[:, 2] = big, big
        bbox[:, 1], bbox[:, 3] = -1, -1
        np.minimum.at(bbox[:, 0], lab, a)
        np.maximum.at(bbox[:, 1], lab, a)
        np.minimum.at(bbox[:, 2], lab, b)
        np.maximum.at(bbox[:, 3], lab, b)
        ext[:, 0], ext[:, 2] = np.inf, np.inf
        ext[:, 1], ext[:, 3] = -np.inf, -np.inf
        np.minimum.at(ext[:, 0], lab, xy[:, 0])
        np.maximum.at(ext[:, 1], lab, xy[:, 0])
        np.minimum.at(ext[:, 2], lab, xy[:, 1])
        np.maximum.at(ext[:, 3], lab, xy[:, 1])
        bbox[0] = 0
        ext[0] = 0.0
    return ClusterLabeling(w, col, labels, int(count), sizes, bbox, ext)


# --------------------------------------------------------------------------
# crossings

def box_crossing(cfg: PercConfig, n1: int, n2: int, color, vertical: bool = False,
                 corner=(0, 0)) -> bool:
    """Crossing of the ``n1 x n2`` site block whose lower-left local site is
    ``corner``: between its ``a``-extreme columns, or ``b``-extreme rows when
    ``vertical``."""
    a0, b0 = corner
    if n1 < 1 or n2 < 1 or a0 < 0 or b0 < 0 or a0 + n1 > cfg.window.L_i \
            or b0 + n2 > cfg.window.L_j:
        raise ValueError(f"{n1}x{n2} block at {corner} exceeds window {cfg.window.shape}")
    return bool(_box_crossing(cfg.codes, as_color(color), a0, b0, n1, n2, vertical))


def horizontal_crossing(cfg: PercConfig, n: float, color, corner=(0, 0)) -> bool:
    """Left-right crossing of the canonical ``L x L`` rhombus, ``L = round(n)``."""
    L = int(round(n))
    return box_crossing(cfg, L, L, color, False, corner)


@dataclass(frozen=True)
class AnnulusSites:
    """Site sets of an annulus inside a window (boolean masks over the window).

    ``inner`` marks annulus sites with a neighbour in the open inner box and
    ``outer`` those with a neighbour outside the closed outer box.
    """

    region: np.ndarray
    inner: np.ndarray
    outer: np.ndarray


def annulus_sites(window: Window, a: Annulus) -> AnnulusSites:
    """Site masks of ``a`` in ``window``; cached, and returned read-only."""
    return _annulus_sites(window, a)


@lru_cache(maxsize=256)
def _annulus_sites(window: Window, a: Annulus) -> AnnulusSites:
    if not window.contains_box(a.outer):
        raise ValueError(f"annulus {a} exceeds window {window}")
    d = window.delta
    cu, cv = to_axis(a.center[0] / d, a.center[1] / d)
    ii = np.arange(window.L_i)[:, None] + window.origin.i
    jj = np.arange(window.L_j)[None, :] + window.origin.j

    def norm(di, dj):
        return 2.0 * d * np.maximum(np.abs(ii + di - cu), np.abs(jj + dj - cv))

    r_lo = a.r * (1 - 1e-9) - 1e-12
    R_hi = a.R * (1 + 1e-9) + 1e-12
    n0 = norm(0, 0)
    region = (n0 >= r_lo) & (n0 <= R_hi)
    inner = np.zeros_like(region)
    outer = np.zeros_like(region)
    for di, dj in DIRECTIONS.tolist():
        nn = norm(di, dj)
        inner |= nn < r_lo
        outer |= nn > R_hi
    masks = (region, inner & region, outer & region)
    for m in masks:
        m.setflags(write=False)
    return AnnulusSites(*masks)


def annulus_crossing(cfg: PercConfig, a: Annulus, color) -> bool:
    """Monochromatic path inside the closed annulus from an inner-boundary
    site to an outer-boundary site."""
    s = annulus_sites(cfg.window, a)
    allowed = s.region & (cfg.codes == as_color(color))
    return bool(_region_crossing(allowed, s.inner, s.outer))


@dataclass(frozen=True)
class FlowCertificate:
    """Witness paths (local ``(a, b)`` site lists) and a blocking site cut."""

    k: int
    paths: list
    cut: list


def max_disjoint_crossings(cfg: PercConfig, a: Annulus, color,
                           certificate: bool = False):
    """Maximum number of vertex-disjoint monochromatic inner-to-outer
    crossings of ``a`` (Menger, via unit vertex-capacity max flow)."""
    s = annulus_sites(cfg.window, a)
    allowed = s.region & (cfg.codes == as_color(color))
    k, f_src, f_snk, f_node, f_edge, reach = _max_flow(allowed, s.inner & allowed,
                                                       s.outer & allowed)
    if not certificate:
        return int(k)
    L_j = cfg.window.L_j
    paths = []
    for start in np.flatnonzero(f_src):
        site = int(start)
        path = [divmod(site, L_j)]
        while not f_snk[site]:
            d = int(np.flatnonzero(f_edge[site] > 0)[0])
            a_, b_ = divmod(site, L_j)
            site = (a_ + int(DI[d])) * L_j + b_ + int(DJ[d])
            path.append(divmod(site, L_j))
        paths.append(path)
    n = allowed.size
    r_in = reach[0:2 * n:2]
    r_out = reach[1:2 * n:2]
    cut = [divmod(int(t), L_j) for t in np.flatnonzero(r_in & ~r_out)]
    return FlowCertificate(int(k), paths, cut)


def region_connected(allowed: np.ndarray, src: np.ndarray, snk: np.ndarray) -> bool:
    """Plain reachability helper, exposed for certificate checks."""
    return bool(_region_crossing(np.ascontiguousarray(allowed), src, snk))


# --------------------------------------------------------------------------
# events around a point

def _site_index(cfg: PercConfig, x, margin):
    w = cfg.window
    w.check_margin(x, margin)
    return w.local(w.site_of(x))


def cluster_at(cfg: PercConfig, x: EmbeddedPoint, color, margin: float | None = None):
    """Local sites of the ``color`` cluster of the hexagon containing ``x``
    and whether it touches the window boundary."""
    a0, b0 = _site_index(cfg, x, margin)
    sites = flood(cfg.codes, as_color(color), a0, b0)
    L_i, L_j = cfg.window.shape
    a, b = np.divmod(sites, L_j)
    touches = bool(sites.size) and bool((a.min() == 0) or (b.min() == 0)
                                        or (a.max() == L_i - 1) or (b.max() == L_j - 1))
    return np.stack([a, b], axis=1), touches


def black_cluster_diam_at(cfg: PercConfig, x: EmbeddedPoint, margin: float | None = None,
                          with_flag: bool = False):
    """Diameter of the black cluster of the hexagon containing ``x`` (``None``
    if that hexagon is White).  With ``with_flag`` also returns whether the
    cluster touches the window boundary."""
    sites, touches = cluster_at(cfg, x, Color.BLACK, margin)
    if len(sites) == 0:
        return (None, False) if with_flag else None
    xy = embed_array(sites + np.asarray(cfg.window.origin), cfg.window.delta)
    dia = float(hull_diameter(np.ascontiguousarray(xy[:, 0]), np.ascontiguousarray(xy[:, 1])))
    return (dia, touches) if with_flag else dia


def black_circuit_surrounding(cfg: PercConfig, x: EmbeddedPoint, margin: float | None = None,
                              with_flag: bool = False):
    """Diameter of the largest black circuit inside the window surrounding
    ``x``; ``None`` if there is none.

    The region outside the window counts as White, so ``x`` is surrounded iff
    the White component of its hexagon (with the hexagon itself) stays off
    the window boundary.  Circuits are read off the interface loops around
    ``x``.  ``with_flag`` also reports whether the circuit runs along the
    window edge, where the cluster may continue beyond the window.
    """
    from .loops import circuit_around, trace_loops

    cfg.window.check_margin(x, margin)
    res = circuit_around(trace_loops(cfg, "closed", pad=Color.WHITE), x)
    return res if with_flag else res[0]
