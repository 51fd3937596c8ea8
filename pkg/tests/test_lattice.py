import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from percolab.lattice import (Annulus, Box, LatticeCoord, Window, box_norm, canonical_box, diam,
                              embed, embed_array, hull_diameter, neighbors, sites_in_box, to_axis)

from oracles import NEIGHBOURS, box_norm_xy, embed as o_embed


def test_embed_unit_vectors():
    assert embed((1, 0)) == pytest.approx((1.0, 0.0))
    assert embed((0, 1)) == pytest.approx((0.5, math.sqrt(3) / 2))
    assert embed((2, 3), 0.5) == pytest.approx(o_embed(2, 3, 0.5))


def test_neighbours_are_at_unit_distance_and_ccw():
    nb = neighbors((0, 0))
    assert nb == {LatticeCoord(*d) for d in NEIGHBOURS}
    for d in nb:
        x, y = embed(d)
        assert math.hypot(x, y) == pytest.approx(1.0)


@given(st.floats(-50, 50), st.floats(-50, 50))
def test_box_norm_matches_oracle(x, y):
    assert box_norm(x, y) == pytest.approx(box_norm_xy(x, y), abs=1e-9)


@given(st.integers(-20, 20), st.integers(-20, 20))
def test_axis_roundtrip(i, j):
    x, y = embed((i, j))
    u, v = to_axis(x, y)
    assert (u, v) == pytest.approx((i, j), abs=1e-9)


def test_box_and_annulus_validation():
    with pytest.raises(ValueError):
        Box(embed((0, 0)), 0.0)
    with pytest.raises(ValueError):
        Annulus(embed((0, 0)), 2.0, 1.0)
    a = Annulus(embed((0, 0)), 1.0, 4.0)
    assert a.contains(embed((1, 0)))          # norm 2
    assert not a.contains(embed((0, 0)))
    assert not a.contains(embed((3, 0)))      # norm 6


@pytest.mark.parametrize("n", [1, 2, 5, 16])
def test_canonical_box_holds_exactly_the_block(n):
    b = canonical_box(n)
    expected = {LatticeCoord(i, j) for i in range(n) for j in range(n)}
    assert sites_in_box(b) == expected


def test_window_basics():
    w = Window.unit(1 / 16)
    assert w.shape == (16, 16) and w.n_sites == 256
    assert w.side == pytest.approx(1.0)
    with pytest.raises(ValueError):
        Window(0, 4)
    with pytest.raises(ValueError):
        Window(4, 4, -1.0)


def test_site_of_inverts_embed():
    w = Window(10, 10, 0.25)
    for i, j in itertools.product(range(10), repeat=2):
        assert w.site_of(embed((i, j), 0.25)) == (i, j)


def test_margin_rule():
    w = Window.square(32)
    w.check_margin(w.center())
    with pytest.raises(ValueError):
        w.check_margin(embed((1, 1)))


@settings(max_examples=50)
@given(st.lists(st.tuples(st.floats(-10, 10), st.floats(-10, 10)), min_size=1, max_size=40))
def test_hull_diameter_matches_pairwise(points):
    pts = np.array(points, dtype=float)
    brute = max(math.dist(p, q) for p in pts for q in pts)
    assert hull_diameter(pts[:, 0].copy(), pts[:, 1].copy()) == pytest.approx(brute, abs=1e-9)
    assert diam(points) == pytest.approx(brute, abs=1e-9)


def test_embed_array_vectorised():
    ij = np.array([[0, 0], [1, 2], [-3, 4]])
    xy = embed_array(ij, 2.0)
    for (i, j), row in zip(ij, xy):
        assert row == pytest.approx(o_embed(i, j, 2.0))
