"""Independent reference implementations used by the tests.

Nothing here calls the compiled kernels: adjacency, box norms, crossings,
interface edges and winding numbers are recomputed from first principles in
plain Python/numpy or with networkx.
"""
from __future__ import annotations

import itertools
import math
from collections import deque

import networkx as nx
import numpy as np

# counter-clockwise neighbour offsets of the triangular lattice in axis coordinates
NEIGHBOURS = [(1, 0), (0, 1), (-1, 1), (-1, 0), (0, -1), (1, -1)]
SQRT3_2 = math.sqrt(3.0) / 2.0


def embed(i, j, delta=1.0):
    """Works on scalars and numpy arrays."""
    return (delta * (i + 0.5 * j), delta * SQRT3_2 * j)


def box_norm_xy(dx, dy):
    v = dy / SQRT3_2
    u = dx - 0.5 * v
    return 2.0 * max(abs(u), abs(v))


def all_colorings(L_i, L_j):
    """Every colouring of an ``L_i x L_j`` window as a boolean array (True = White)."""
    n = L_i * L_j
    for bits in range(2 ** n):
        yield np.array([(bits >> k) & 1 for k in range(n)], dtype=bool).reshape(L_i, L_j)


def site_neighbours(a, b, L_i, L_j):
    for di, dj in NEIGHBOURS:
        x, y = a + di, b + dj
        if 0 <= x < L_i and 0 <= y < L_j:
            yield x, y


def bfs_connects(allowed, sources, targets) -> bool:
    """Plain BFS over ``allowed`` sites from ``sources`` to ``targets``."""
    L_i, L_j = allowed.shape
    seen = set()
    q = deque()
    for s in sources:
        if allowed[s]:
            seen.add(s)
            q.append(s)
    targets = set(targets)
    while q:
        s = q.popleft()
        if s in targets:
            return True
        for t in site_neighbours(*s, L_i, L_j):
            if allowed[t] and t not in seen:
                seen.add(t)
                q.append(t)
    return False


def box_crossing(colors, color, vertical=False) -> bool:
    L_i, L_j = colors.shape
    allowed = colors == bool(color)
    if vertical:
        return bfs_connects(allowed, [(a, 0) for a in range(L_i)], [(a, L_j - 1) for a in range(L_i)])
    return bfs_connects(allowed, [(0, b) for b in range(L_j)], [(L_i - 1, b) for b in range(L_j)])


def annulus_masks(L_i, L_j, center_xy, r, R, delta=1.0, tol=1e-9):
    """Region / inner-boundary / outer-boundary site masks from box norms of
    site centres and their neighbours."""
    region = np.zeros((L_i, L_j), bool)
    inner = np.zeros_like(region)
    outer = np.zeros_like(region)
    cx, cy = center_xy
    for a in range(L_i):
        for b in range(L_j):
            x, y = embed(a, b, delta)
            n = box_norm_xy(x - cx, y - cy)
            if not (r * (1 - tol) - tol <= n <= R * (1 + tol) + tol):
                continue
            region[a, b] = True
            for di, dj in NEIGHBOURS:
                xn, yn = embed(a + di, b + dj, delta)
                nn = box_norm_xy(xn - cx, yn - cy)
                if nn < r * (1 - tol) - tol:
                    inner[a, b] = True
                if nn > R * (1 + tol) + tol:
                    outer[a, b] = True
    return region, inner, outer


def annulus_crossing(colors, color, masks) -> bool:
    region, inner, outer = masks
    allowed = region & (colors == bool(color))
    return bfs_connects(allowed, list(zip(*np.nonzero(inner))), list(zip(*np.nonzero(outer))))


def disjoint_crossings(colors, color, masks) -> int:
    """Maximum number of vertex-disjoint inner-to-outer paths (networkx)."""
    region, inner, outer = masks
    allowed = region & (colors == bool(color))
    L_i, L_j = colors.shape
    G = nx.Graph()
    G.add_nodes_from(["S", "T"])
    for a, b in zip(*np.nonzero(allowed)):
        s = (int(a), int(b))
        G.add_node(s)
        for t in site_neighbours(*s, L_i, L_j):
            if allowed[t]:
                G.add_edge(s, t)
        if inner[s]:
            G.add_edge("S", s)
        if outer[s]:
            G.add_edge(s, "T")
    if not nx.has_path(G, "S", "T"):
        return 0
    # a site adjacent to both terminals is its own path; split it so the
    # terminals are never adjacent
    H = nx.Graph(G)
    for s in list(H.neighbors("S")):
        if H.has_edge(s, "T"):
            H.remove_edge(s, "T")
            H.add_edge(s, ("T", s))
            H.add_edge(("T", s), "T")
    return int(nx.algorithms.connectivity.local_node_connectivity(H, "S", "T"))


def interface_edges(colors) -> set:
    """All (white_flat, black_flat) adjacent pairs inside the window."""
    colors = np.asarray(colors, bool)
    L_i, L_j = colors.shape
    a, b = np.nonzero(colors)
    out = set()
    for di, dj in NEIGHBOURS:
        x, y = a + di, b + dj
        ok = (x >= 0) & (x < L_i) & (y >= 0) & (y < L_j)
        w, x, y = (a * L_j + b)[ok], x[ok], y[ok]
        black = ~colors[x, y]
        out.update(zip(w[black].tolist(), (x * L_j + y)[black].tolist()))
    return out


def winding_number(poly, x) -> int:
    """Winding number of the closed polygon ``poly`` (first vertex repeated)
    around ``x`` by summing signed turning angles."""
    p = np.asarray(poly, float) - np.asarray(x, float)
    ang = np.arctan2(p[:, 1], p[:, 0])
    d = np.diff(ang)
    d = (d + np.pi) % (2 * np.pi) - np.pi
    return int(round(d.sum() / (2 * np.pi)))


def white_flood_escapes(colors, start) -> bool:
    """True if the White component of ``start`` (``start`` itself always
    included) reaches a window-boundary site; the outside counts as White."""
    L_i, L_j = colors.shape
    seen = {start}
    q = deque([start])
    while q:
        a, b = q.popleft()
        if a in (0, L_i - 1) or b in (0, L_j - 1):
            return True
        for t in site_neighbours(a, b, L_i, L_j):
            if colors[t] and t not in seen:
                seen.add(t)
                q.append(t)
    return False


def crossing_polynomial_counts(n) -> dict:
    """``{whites: number of colourings with a white left-right crossing}`` on
    the ``n x n`` box, by enumeration."""
    counts = {}
    for col in all_colorings(n, n):
        if box_crossing(col, 1):
            w = int(col.sum())
            counts[w] = counts.get(w, 0) + 1
    return counts


def crossing_probability_exact(n, p) -> float:
    N = n * n
    return sum(c * p ** w * (1 - p) ** (N - w) for w, c in crossing_polynomial_counts(n).items())


# --------------------------------------------------------------------------
# curve metric oracles


def delta_graph_oracle(pairs, n_theta=64, s_max=5.0, stencil=5, quad=8):
    """Shortest paths for the metric with density ``1/(1+|x|^2)``.

    Nodes form a uniform grid in ``(log r, theta)`` (a conformal grid of the
    plane) plus the origin; every node links to the grid nodes within the
    given stencil radius by straight plane segments whose weight is the
    Gauss-Legendre quadrature of the density along the segment.  Query
    points are added as extra nodes joined to all grid nodes within the
    stencil neighbourhood (and to each other when close).
    """
    from scipy.sparse import coo_matrix
    from scipy.sparse.csgraph import dijkstra

    h = 2 * math.pi / n_theta
    n_s = int(round(2 * s_max / h)) + 1
    s_vals = np.linspace(-s_max, s_max, n_s)
    S, Th = np.meshgrid(s_vals, np.arange(n_theta) * h, indexing="ij")
    R = np.exp(S)
    grid = np.stack([R * np.cos(Th), R * np.sin(Th)], axis=-1).reshape(-1, 2)
    gx, gw = np.polynomial.legendre.leggauss(quad)
    gx = 0.5 * (gx + 1.0)
    gw = 0.5 * gw

    def seg_weight(P, Q):
        d = Q - P
        pts = P[:, None, :] + gx[None, :, None] * d[:, None, :]
        f = 1.0 / (1.0 + np.sum(pts ** 2, axis=-1))
        return np.hypot(d[:, 0], d[:, 1]) * (f @ gw)

    rows, cols, w = [], [], []
    idx = np.arange(n_s * n_theta).reshape(n_s, n_theta)
    offs = [(di, dj) for di in range(0, stencil + 1) for dj in range(-stencil, stencil + 1)
            if (di > 0 or dj > 0) and math.gcd(di, abs(dj)) == 1]
    for di, dj in offs:
        a = idx[: n_s - di, :]
        b = idx[di:, :]
        b = np.roll(b, -dj, axis=1)
        a, b = a.ravel(), b.ravel()
        rows.append(a)
        cols.append(b)
        w.append(seg_weight(grid[a], grid[b]))
    n_grid = len(grid)
    # origin node linked to the innermost ring
    origin = n_grid
    ring = idx[0, :]
    rows.append(np.full(n_theta, origin))
    cols.append(ring)
    w.append(seg_weight(np.zeros((n_theta, 2)), grid[ring]))
    nodes = [grid, np.zeros((1, 2))]
    n = n_grid + 1
    q_index = []
    pts = np.array([p for pair in pairs for p in pair], dtype=float)
    for k, p in enumerate(pts):
        r = math.hypot(*p)
        s = math.log(r) if r > 0 else -s_max
        th = math.atan2(p[1], p[0]) % (2 * math.pi)
        i0 = int(round((s + s_max) / h))
        j0 = int(round(th / h))
        ii = np.arange(max(0, i0 - stencil), min(n_s, i0 + stencil + 1))
        jj = (np.arange(j0 - stencil, j0 + stencil + 1)) % n_theta
        near = idx[np.ix_(ii, jj)].ravel()
        me = n + k
        rows.append(np.full(len(near), me))
        cols.append(near)
        w.append(seg_weight(np.repeat(p[None, :], len(near), 0), grid[near]))
        q_index.append(me)
    nodes.append(pts)
    # direct links between the two points of each pair (short pairs)
    for k in range(len(pairs)):
        P, Q = pts[2 * k], pts[2 * k + 1]
        rows.append(np.array([q_index[2 * k]]))
        cols.append(np.array([q_index[2 * k + 1]]))
        w.append(seg_weight(P[None, :], Q[None, :]))
    N = n + len(pts)
    A = coo_matrix((np.concatenate(w), (np.concatenate(rows), np.concatenate(cols))),
                   shape=(N, N)).tocsr()
    src = [q_index[2 * k] for k in range(len(pairs))]
    D = dijkstra(A, directed=False, indices=src)
    return np.array([D[k, q_index[2 * k + 1]] for k in range(len(pairs))])


def radial_path_integral(r_max=1e6, n=200000) -> float:
    """Integral of ``1/(1+r^2)`` along a ray from 0 to ``r_max`` (trapezoid
    on a log grid): the distance from the origin to infinity along a ray."""
    r = np.concatenate([[0.0], np.geomspace(1e-8, r_max, n)])
    f = 1.0 / (1.0 + r ** 2)
    trapezoid = getattr(np, "trapezoid", None) or np.trapz
    return float(trapezoid(f, r))


def brute_frechet_grid(P, Q, dist, n=200):
    """Frechet distance of two segments/polylines by dynamic programming
    over a dense monotone parametrisation grid (both curves resampled at
    ``n`` points by arclength)."""
    def resample(X):
        X = np.asarray(X, float)
        seg = np.hypot(*np.diff(X, axis=0).T)
        t = np.concatenate([[0], np.cumsum(seg)])
        s = np.linspace(0, t[-1], n)
        return np.stack([np.interp(s, t, X[:, 0]), np.interp(s, t, X[:, 1])], axis=1)

    A, B = resample(P), resample(Q)
    D = np.array([[dist(a, b) for b in B] for a in A])
    F = np.full_like(D, np.inf)
    F[0, 0] = D[0, 0]
    for i in range(n):
        for j in range(n):
            if i == 0 and j == 0:
                continue
            best = min(F[i - 1, j] if i else np.inf, F[i, j - 1] if j else np.inf,
                       F[i - 1, j - 1] if i and j else np.inf)
            F[i, j] = max(best, D[i, j])
    return float(F[-1, -1])


def hausdorff_bruteforce(M) -> float:
    M = np.asarray(M)
    d1 = max(min(row) for row in M)
    d2 = max(min(M[i][j] for i in range(M.shape[0])) for j in range(M.shape[1]))
    return float(max(d1, d2))


def nested_subsets(n):
    return itertools.chain.from_iterable(itertools.combinations(range(n), k) for k in range(n + 1))


# --------------------------------------------------------------------------
# loop invariants


def check_loop_invariants(ls, colors, x=None) -> list[str]:
    """Independent checks of a traced loop set; returns a list of problems.

    * edge partition: every White/Black adjacent pair of the window occurs
      in exactly one curve, and nothing else occurs;
    * each edge is the hexagon side shared by its two sites, White on the left;
    * consecutive edges share a vertex;
    * simplicity: no vertex repeats (apart from a closed loop's closure) and
      distinct curves share no vertex;
    * nesting chain: the closed loops around ``x`` are totally ordered by
      containment.
    """
    problems = []
    L_i, L_j = colors.shape
    # map the loop-set's local indices to the colour array (closed mode pads by one)
    Lw_j = ls.window.L_j

    def to_local(flat):
        a, b = np.divmod(np.asarray(flat), Lw_j)
        if ls.mode == "closed":
            a, b = a - 1, b - 1
        return a, b

    wa, wb = to_local(ls.ew)
    ba, bb = to_local(ls.eb)
    inside = (ba >= 0) & (ba < L_i) & (bb >= 0) & (bb < L_j) & \
             (wa >= 0) & (wa < L_i) & (wb >= 0) & (wb < L_j)
    pairs = list(zip((wa * L_j + wb)[inside].tolist(), (ba * L_j + bb)[inside].tolist()))
    ref = interface_edges(colors)
    if len(pairs) != len(set(pairs)):
        problems.append("an edge occurs twice")
    if set(pairs) != ref:
        problems.append(f"edge set differs: {len(set(pairs) ^ ref)} mismatches")
    if ls.mode == "plane" and not inside.all():
        problems.append("plane-mode edge outside the window")
    # colour of each side
    if inside.any():
        if not colors[wa[inside], wb[inside]].all() or colors[ba[inside], bb[inside]].any():
            problems.append("edge side colours wrong")
    # geometry: white on the left, edge is the shared side
    d = ls.window.delta
    ga, gb = np.divmod(ls.ew, Lw_j)
    ha, hb = np.divmod(ls.eb, Lw_j)
    o = np.asarray(ls.window.origin)
    seen = set()
    W = np.stack(embed(ga + o[0], gb + o[1], d), axis=1)
    B = np.stack(embed(ha + o[0], hb + o[1], d), axis=1)
    for c in range(ls.n_curves):
        V = ls.xy[ls.voff[c]:ls.voff[c + 1]]
        e0, e1 = ls.eoff[c], ls.eoff[c + 1]
        if len(V) != e1 - e0 + 1:
            problems.append(f"curve {c}: vertex/edge count mismatch")
            continue
        t = V[1:] - V[:-1]
        mid = 0.5 * (V[1:] + V[:-1])
        if not np.allclose(mid, 0.5 * (W[e0:e1] + B[e0:e1]), atol=1e-9 * (1 + d)):
            problems.append(f"curve {c}: edge is not the shared hexagon side")
        cross_w = t[:, 0] * (W[e0:e1, 1] - mid[:, 1]) - t[:, 1] * (W[e0:e1, 0] - mid[:, 0])
        if not np.all(cross_w > 0):
            problems.append(f"curve {c}: White not on the left")
        keys = list(map(tuple, np.round(V / d * 6).astype(np.int64).tolist()))
        body = keys[:-1] if ls.closed[c] else keys
        if ls.closed[c] and keys[0] != keys[-1]:
            problems.append(f"curve {c}: closed loop does not return to its start")
        if len(set(body)) != len(body):
            problems.append(f"curve {c}: repeated vertex")
        if seen.intersection(body):
            problems.append(f"curve {c}: shares a vertex with another curve")
        seen.update(body)
    if x is not None:
        around = [c for c in np.flatnonzero(ls.closed)
                  if winding_number(ls.xy[ls.voff[c]:ls.voff[c + 1]], x) != 0]
        around.sort(key=lambda c: abs(ls.signed_areas[c]))
        for c1, c2 in zip(around, around[1:]):
            inner = ls.xy[ls.voff[c1]:ls.voff[c1 + 1]]
            outer = ls.xy[ls.voff[c2]:ls.voff[c2 + 1]]
            # the curves are vertex-disjoint simple polygons (checked above),
            # so one inner vertex decides containment
            if winding_number(outer, inner[0]) == 0:
                problems.append(f"loops {c1} and {c2} around x are not nested")
    return problems
