import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from percolab.connectivity import (annulus_crossing, annulus_sites, batch_box_crossing,
                                   black_circuit_surrounding, black_cluster_diam_at, box_crossing,
                                   horizontal_crossing, label_clusters, max_disjoint_crossings)
from percolab.lattice import Annulus, Window, embed
from percolab.sampler import PercConfig, sample

import oracles as O


def colorings(max_side=7):
    return st.integers(2, max_side).flatmap(
        lambda a: st.integers(2, max_side).flatmap(
            lambda b: st.lists(st.booleans(), min_size=a * b, max_size=a * b).map(
                lambda v: np.array(v).reshape(a, b))))


@settings(max_examples=200, deadline=None)
@given(colorings())
def test_box_crossing_matches_bfs(col):
    cfg = PercConfig.from_colors(Window(*col.shape), col)
    n1, n2 = col.shape
    for color in (0, 1):
        for vertical in (False, True):
            assert box_crossing(cfg, n1, n2, color, vertical) == O.box_crossing(col, color, vertical)


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 9), st.integers(0, 2**32))
def test_hex_duality(n, seed):
    # exactly one of: white left-right crossing, black bottom-top crossing
    cfg = sample(Window.square(n), 0.5, seed)
    assert box_crossing(cfg, n, n, 1) != box_crossing(cfg, n, n, 0, vertical=True)


def test_batch_kernel_agrees_with_single_configs():
    n, p, seed = 12, 0.5, 5
    hits = batch_box_crossing(n, n, p, np.uint64(seed), 0, 200, 1, False)
    ref = sum(horizontal_crossing(sample(Window.square(n), p, seed, r), n, 1) for r in range(200))
    assert hits == ref


def test_exact_two_box_crossing_is_half():
    assert O.crossing_probability_exact(2, 0.5) == pytest.approx(0.5, abs=0)


def _random_annulus(rng, L):
    w = Window.square(L)
    c = w.center()
    R = float(rng.uniform(0.5, 0.95) * (L - 2))
    r = float(rng.uniform(0.15, 0.8) * R)
    return w, Annulus(c, r, R)


def test_annulus_masks_match_oracle():
    rng = np.random.default_rng(1)
    for _ in range(30):
        w, a = _random_annulus(rng, int(rng.integers(6, 14)))
        s = annulus_sites(w, a)
        region, inner, outer = O.annulus_masks(*w.shape, a.center, a.r, a.R)
        assert np.array_equal(s.region, region)
        assert np.array_equal(s.inner, inner)
        assert np.array_equal(s.outer, outer)


def test_annulus_crossing_and_disjoint_match_networkx():
    rng = np.random.default_rng(2)
    for t in range(150):
        w, a = _random_annulus(rng, int(rng.integers(6, 13)))
        cfg = sample(w, float(rng.uniform(0.3, 0.8)), 11, t)
        masks = O.annulus_masks(*w.shape, a.center, a.r, a.R)
        for color in (0, 1):
            assert annulus_crossing(cfg, a, color) == O.annulus_crossing(cfg.colors, color, masks)
            assert max_disjoint_crossings(cfg, a, color) == \
                O.disjoint_crossings(cfg.colors, color, masks)


def test_flow_certificate_is_valid():
    w = Window.square(20)
    a = Annulus(w.center(), 4.0, 17.0)
    for r in range(20):
        cfg = sample(w, 0.55, 3, r)
        cert = max_disjoint_crossings(cfg, a, 1, certificate=True)
        s = annulus_sites(w, a)
        used = set()
        for path in cert.paths:
            assert s.inner[path[0]] and s.outer[path[-1]]
            for u, v in zip(path, path[1:]):
                assert tuple(np.subtract(v, u)) in {tuple(d) for d in O.NEIGHBOURS}
            for site in path:
                assert cfg.colors[site] and s.region[site]
                assert site not in used
                used.add(site)
        assert len(cert.paths) == cert.k == len(cert.cut)
        # removing the cut disconnects inner from outer
        allowed = s.region & cfg.colors
        for site in cert.cut:
            allowed[site] = False
        assert not O.bfs_connects(allowed, list(zip(*np.nonzero(s.inner))),
                                  list(zip(*np.nonzero(s.outer))))


def test_annulus_outside_window_rejected():
    w = Window.square(8)
    with pytest.raises(ValueError):
        annulus_crossing(sample(w, 0.5, 0), Annulus(w.center(), 2.0, 30.0), 1)


def test_label_clusters_matches_networkx():
    import networkx as nx
    for r in range(10):
        cfg = sample(Window(15, 11), 0.5, 8, r)
        lab = label_clusters(cfg, 1)
        G = nx.Graph()
        col = cfg.colors
        for a, b in zip(*np.nonzero(col)):
            G.add_node((a, b))
            for t in O.site_neighbours(a, b, *col.shape):
                if col[t]:
                    G.add_edge((a, b), t)
        comps = list(nx.connected_components(G))
        assert lab.count == len(comps)
        for comp in comps:
            labels = {lab.labels[s] for s in comp}
            assert len(labels) == 1 and lab.sizes[labels.pop()] == len(comp)


def test_black_circuit_matches_flood_oracle():
    w = Window.square(15)
    x = w.center()
    xs = w.local(w.site_of(x))
    for r in range(300):
        cfg = sample(w, 0.45, 21, r)
        dia = black_circuit_surrounding(cfg, x)
        surrounded = not O.white_flood_escapes(cfg.colors, xs)
        assert (dia is not None) == surrounded


def test_black_cluster_diameter():
    w = Window.square(9)
    col = np.ones((9, 9), bool)
    col[4, 2:7] = False                       # horizontal black segment of 5 sites
    cfg = PercConfig.from_colors(w, col)
    x = embed((4, 4))
    assert black_cluster_diam_at(cfg, x) == pytest.approx(4.0)
    col[4, 4] = True
    cfg = PercConfig.from_colors(w, col)
    assert black_cluster_diam_at(cfg, x) is None


def test_circuit_at_p_extremes():
    w = Window.square(16)
    assert black_circuit_surrounding(sample(w, 1.0, 0), w.center()) is None
    dia, flag = black_circuit_surrounding(sample(w, 0.0, 0), w.center(), with_flag=True)
    # all-black window: the circuit is the outer ring, whose diameter is the
    # rhombus' long diagonal
    assert flag and dia == pytest.approx(float(np.hypot(*embed((15, 15)))))
