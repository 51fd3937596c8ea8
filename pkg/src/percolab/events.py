"""Named percolation events and their Monte Carlo estimation.

Event strings (lengths are Euclidean, centred on the window centre):

==================  =====================================================
``H^w(16)``         white left-right crossing of the canonical 16-box
``H^b(16)``         black left-right crossing
``C^w(0.25,0.5)``   white crossing of the annulus A(r, R)
``X^b_2(0.1,0.4)``  at least 2 vertex-disjoint black crossings of A(r, R)
``D(0.2)``          black circuit of diameter >= r around the centre
``D'(0.2)``         black cluster of the centre hexagon has diameter >= r
``F_1``             a closed loop around the centre inside annulus A_{2k+1}
``G(0.3)``          the largest loop around the centre has diameter <= L
==================  =====================================================
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np

from .connectivity import (annulus_crossing, as_color, batch_box_crossing,
                           black_circuit_surrounding, black_cluster_diam_at,
                           horizontal_crossing, max_disjoint_crossings)
from .lattice import Annulus, Window
from .loops import count_in_annulus, largest_loop_around, trace_loops
from .parallel import map_replicas
from .sampler import PercConfig, sample
from .stats import EventStats

_COLOR_NAMES = {0: "b", 1: "w"}

_NUM = r"([0-9]*\.?[0-9]+(?:[eE][-+]?[0-9]+)?)"
_PATTERNS = [
    ("H", re.compile(rf"^H\^([wb])\(\s*(\d+)\s*\)$")),
    ("C", re.compile(rf"^C\^([wb])\(\s*{_NUM}\s*,\s*{_NUM}\s*\)$")),
    ("X", re.compile(rf"^X\^([wb])_(\d+)\(\s*{_NUM}\s*,\s*{_NUM}\s*\)$")),
    ("Dp", re.compile(rf"^D'\(\s*{_NUM}\s*\)$")),
    ("D", re.compile(rf"^D\(\s*{_NUM}\s*\)$")),
    ("F", re.compile(r"^F_(\d+)$")),
    ("G", re.compile(rf"^G\(\s*{_NUM}\s*\)$")),
]


class ReplicaError(RuntimeError):
    """A single replica failed; the whole estimate is aborted."""


@dataclass(frozen=True)
class EventSpec:
    kind: str
    color: int = 1
    n: int = 0
    r: float = 0.0
    R: float = 0.0
    k: int = 0
    L: float = 0.0

    @property
    def name(self) -> str:
        c = _COLOR_NAMES[self.color]
        if self.kind == "H":
            return f"H^{c}({self.n})"
        if self.kind == "C":
            return f"C^{c}({self.r:g},{self.R:g})"
        if self.kind == "X":
            return f"X^{c}_{self.k}({self.r:g},{self.R:g})"
        if self.kind == "D":
            return f"D({self.r:g})"
        if self.kind == "Dp":
            return f"D'({self.r:g})"
        if self.kind == "F":
            return f"F_{self.k}"
        return f"G({self.L:g})"

    @property
    def n_or_r(self) -> float:
        return {"H": self.n, "C": self.r, "X": self.r, "D": self.r, "Dp": self.r,
                "F": self.k, "G": self.L}[self.kind]


def parse_event(text: str) -> EventSpec:
    s = text.strip()
    for kind, pat in _PATTERNS:
        m = pat.match(s)
        if not m:
            continue
        g = m.groups()
        if kind == "H":
            return EventSpec("H", as_color(g[0]), n=int(g[1]))
        if kind == "C":
            return EventSpec("C", as_color(g[0]), r=float(g[1]), R=float(g[2]))
        if kind == "X":
            return EventSpec("X", as_color(g[0]), k=int(g[1]), r=float(g[2]), R=float(g[3]))
        if kind == "Dp":
            return EventSpec("Dp", 0, r=float(g[0]))
        if kind == "D":
            return EventSpec("D", 0, r=float(g[0]))
        if kind == "F":
            return EventSpec("F", k=int(g[0]))
        return EventSpec("G", L=float(g[0]))
    raise ValueError(f"cannot parse event {text!r}")


def dyadic_annulus(window: Window, m: int, x=None) -> Annulus:
    """``A_m = A(s 2^-m, s 2^-(m-1))`` with ``s`` half the window side, so
    ``A_1`` is the annulus between the quarter- and half-side boxes."""
    if m < 1:
        raise ValueError(f"dyadic annulus index must be >= 1, got {m}")
    s = window.side / 2.0
    return Annulus(window.center() if x is None else x, s * 2.0 ** -m, s * 2.0 ** -(m - 1))


def evaluate(ev: EventSpec, cfg: PercConfig) -> tuple[bool, bool, bool]:
    """``(hit, truncated, vacuous)`` for one configuration.  ``vacuous``
    marks ``G`` replicas with no surrounding loop (counted as hits)."""
    w = cfg.window
    x = w.center()
    if ev.kind == "H":
        return horizontal_crossing(cfg, ev.n, ev.color), False, False
    if ev.kind == "C":
        return annulus_crossing(cfg, Annulus(x, ev.r, ev.R), ev.color), False, False
    if ev.kind == "X":
        k = max_disjoint_crossings(cfg, Annulus(x, ev.r, ev.R), ev.color)
        return k >= ev.k, False, False
    if ev.kind == "D":
        dia, flag = black_circuit_surrounding(cfg, x, with_flag=True)
        return dia is not None and dia >= ev.r, flag, False
    if ev.kind == "Dp":
        dia, flag = black_cluster_diam_at(cfg, x, with_flag=True)
        return dia is not None and dia >= ev.r, flag, False
    ls = trace_loops(cfg)
    if ev.kind == "F":
        a = dyadic_annulus(w, 2 * ev.k + 1, x)
        return count_in_annulus(ls, a, x) >= 1, bool(ls.fragment_flags(x).any()), False
    res = largest_loop_around(ls, x)
    if res is None:
        return True, bool(ls.fragment_flags(x).any()), True
    loop, flag = res
    return loop.diameter <= ev.L, flag, False


def estimate_event(event, window: Window, p: float, delta: float | None = None,
                   replicas: int = 1000, seed: int = 0, workers: int = 1,
                   start: int = 0) -> EventStats:
    """Monte Carlo frequency of ``event`` over independent replicas.

    Replica ``r`` is ``sample(window, p, seed, r)``.  When ``delta`` is given
    it overrides the window spacing.  ``H`` events on a window equal to the
    crossing box use a fused sample-and-test kernel.
    """
    ev = parse_event(event) if isinstance(event, str) else event
    if replicas < 1:
        raise ValueError(f"replicas must be >= 1, got {replicas}")
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    if delta is not None and delta != window.delta:
        window = Window(window.L_i, window.L_j, delta, window.origin)
    seed_u = np.uint64(int(seed) % 2**64)

    if ev.kind == "H" and window.shape == (ev.n, ev.n):
        def chunk(lo, hi):
            h = batch_box_crossing(ev.n, ev.n, float(p), seed_u, lo, hi - lo, ev.color, False)
            return np.array([h, 0, 0])
    else:
        if ev.kind == "H" and (ev.n > window.L_i or ev.n > window.L_j):
            raise ValueError(f"crossing box {ev.n} exceeds window {window.shape}")

        def chunk(lo, hi):
            out = np.zeros(3, dtype=np.int64)
            for r in range(lo, hi):
                try:
                    hit, trunc, vac = evaluate(ev, sample(window, p, seed, r))
                except ValueError:
                    raise
                except Exception as exc:  # pragma: no cover - diagnostic path
                    raise ReplicaError(f"{ev.name}: replica {r} (seed {seed}) failed: {exc}") from exc
                out += (hit, trunc, vac)
            return out

        # surface geometry errors (margins, annulus size) before any sampling
        if ev.kind in ("D", "Dp", "F", "G"):
            window.check_margin(window.center())
        if ev.kind in ("C", "X"):
            if not window.contains_box(Annulus(window.center(), ev.r, ev.R).outer):
                raise ValueError(f"annulus A({ev.r},{ev.R}) exceeds window")

    hits, trunc, vac = map_replicas(chunk, replicas, workers, start=start)
    return EventStats(ev.name, int(hits), int(replicas), float(p), float(window.delta),
                      float(ev.n_or_r), int(trunc), {"vacuous": int(vac)})

