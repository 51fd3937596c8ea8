"""Crossing probabilities, the correlation length ``L_eps(p)``, the density
threshold ``p+_eps(n)`` and power-law fits.

Both threshold searches act only on probes whose 95% interval lies entirely
on one side of ``1/2 + eps``.  A probe starts with ``replicas`` samples and
doubles them (reusing the earlier replicas) until it separates or reaches
``max_replicas``; probes that never separate are logged as ``unknown`` and
the search then narrows the bracket from both sides around them.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Iterable

import numpy as np

from .events import EventSpec, estimate_event
from .lattice import Window
from .sampler import derive_seed
from .stats import EventStats

ABOVE, BELOW, UNKNOWN = "above", "below", "unknown"

PROBE_COLUMNS = ("phase", "x", "hits", "replicas", "p_hat", "ci95", "decision")


def crossing_prob(n: int, p: float, replicas: int, seed: int, workers: int = 1,
                  start: int = 0) -> EventStats:
    """White left-right crossing frequency of the canonical ``n``-box at δ = 1."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    return estimate_event(EventSpec("H", 1, n=int(n)), Window.square(int(n)), p,
                          replicas=replicas, seed=seed, workers=workers, start=start)


@dataclass
class Probe:
    phase: str
    x: float
    hits: int
    replicas: int
    p_hat: float
    ci95: float
    decision: str

    def row(self) -> list:
        return [self.phase, self.x, self.hits, self.replicas, self.p_hat, self.ci95,
                self.decision]


def gated_probe(measure: Callable[[int, int], EventStats], threshold: float,
                replicas: int, max_replicas: int) -> tuple[str, EventStats]:
    """Grow the sample until its CI clears ``threshold`` or the budget is hit.

    ``measure(start, count)`` returns statistics for replicas
    ``start .. start+count-1``; later rounds extend earlier ones.
    """
    st = measure(0, replicas)
    while True:
        if st.p_hat - st.ci95 > threshold:
            return ABOVE, st
        if st.p_hat + st.ci95 < threshold:
            return BELOW, st
        if st.replicas >= max_replicas:
            return UNKNOWN, st
        extra = min(st.replicas, max_replicas - st.replicas)
        st = st.merge(measure(st.replicas, extra))


def _search(probe, lo, hi, mid, done, ulo=None, uhi=None):
    """Narrow ``(lo, hi)`` with lo certified below and hi certified above.

    Unknown probes form a band ``[ulo, uhi]``; once one exists only the gaps
    ``(lo, ulo)`` and ``(uhi, hi)`` are refined.
    """
    while True:
        if ulo is None:
            if done(lo, hi):
                break
            m = mid(lo, hi)
        elif not done(lo, ulo):
            m = mid(lo, ulo)
        elif not done(uhi, hi):
            m = mid(uhi, hi)
        else:
            break
        d = probe(m)
        if d == ABOVE:
            hi = m
        elif d == BELOW:
            lo = m
        else:
            ulo = m if ulo is None else min(ulo, m)
            uhi = m if uhi is None else max(uhi, m)
        if ulo is not None and (uhi <= lo or ulo >= hi):
            ulo = uhi = None
        elif ulo is not None:
            ulo, uhi = max(ulo, lo), min(uhi, hi)
    return lo, hi, ulo is not None


@dataclass
class CorrEstimate:
    """``n_hat`` is ``None`` for the "exceeds n_max" sentinel, in which case
    ``bracket[1]`` is ``None`` as well."""

    p: float
    epsilon: float
    n_hat: int | None
    bracket: tuple
    replicas: int
    confident: bool
    n_max: int
    probes: list = field(default_factory=list)

    @property
    def exceeds(self) -> bool:
        return self.n_hat is None

    def scaled(self, delta: float) -> tuple[float, float]:
        """Bracket of ``delta * L`` (upper end ``inf`` for the sentinel)."""
        lo, hi = self.bracket
        return delta * lo, (math.inf if hi is None else delta * hi)


def estimate_L(p: float, epsilon: float = 0.1, n_max: int = 512, replicas: int = 256,
               seed: int = 0, max_replicas: int = 16384, workers: int = 1) -> CorrEstimate:
    """Smallest ``n`` with ``P(H^w(n)) > 1/2 + epsilon``, by doubling then bisection.

    Each ``n`` is probed with its own derived seed, so a probe's outcome does
    not depend on the search path.
    """
    if not 0.5 <= p <= 1.0:
        raise ValueError(f"p must lie in [1/2, 1] (use colour symmetry below 1/2), got {p}")
    if not 0.0 < epsilon < 0.5:
        raise ValueError(f"epsilon must lie in (0, 1/2), got {epsilon}")
    if n_max < 1:
        raise ValueError(f"n_max must be >= 1, got {n_max}")
    thr = 0.5 + epsilon
    log: list[Probe] = []
    cache: dict[int, str] = {}
    used = [0]

    def probe(n, phase):
        if n in cache:
            return cache[n]
        if n == 1:
            # the one-site box crosses iff its site is White: P = p exactly
            d = ABOVE if p > thr else BELOW
            log.append(Probe("exact", 1, 0, 0, p, 0.0, d))
            cache[n] = d
            return d
        s = derive_seed(seed, int(n))
        d, st = gated_probe(lambda a, c: crossing_prob(n, p, c, s, workers, start=a),
                            thr, replicas, max_replicas)
        log.append(Probe(phase, n, st.hits, st.replicas, st.p_hat, st.ci95, d))
        used[0] = max(used[0], st.replicas)
        cache[n] = d
        return d

    lo, hi = 0, None          # every n <= lo certified below; hi certified above
    unknown = []
    n = 1
    while True:
        m = min(n, n_max)
        d = probe(m, "doubling")
        if d == ABOVE:
            hi = m
            break
        if d == BELOW:
            lo = m
        else:
            unknown.append(m)
        if m == n_max:
            break
        n *= 2

    if hi is None:
        return CorrEstimate(p, epsilon, None, (lo + 1, None), used[0], False, n_max, log)

    pending = [u for u in unknown if lo < u < hi]
    lo, hi, _ = _search(lambda m: probe(m, "bisection"), lo, hi, lambda a, b: (a + b) // 2,
                        lambda a, b: b - a <= 1,
                        min(pending, default=None), max(pending, default=None))
    n_low, n_high = lo + 1, hi
    confident = n_low == n_high
    n_hat = n_high if confident else (n_low + n_high) // 2
    return CorrEstimate(p, epsilon, n_hat, (n_low, n_high), used[0], confident, n_max, log)


@dataclass
class PPlusEstimate:
    n: int
    epsilon: float
    p_hat: float
    bracket: tuple
    confident: bool
    probes: list = field(default_factory=list)


def estimate_p_plus(n: int, epsilon: float = 0.1, replicas: int = 256, seed: int = 0,
                    rel_width: float = 0.1, abs_width: float = 1e-6,
                    max_replicas: int = 16384, workers: int = 1) -> PPlusEstimate:
    """``inf{p : P(H^w(n)) > 1/2 + epsilon}`` by CI-gated bisection on [1/2, 1].

    The search stops once ``p_high - p_low <= max(abs_width,
    rel_width * (p_low - 1/2))``.  For ``n = 1`` the crossing probability is
    ``p`` itself and the exact answer is returned.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if not 0.0 < epsilon < 0.5:
        raise ValueError(f"epsilon must lie in (0, 1/2), got {epsilon}")
    thr = 0.5 + epsilon
    if n == 1:
        return PPlusEstimate(1, epsilon, thr, (thr, thr), True, [])
    log: list[Probe] = []
    cache: dict[float, str] = {}

    def probe(p):
        if p in cache:
            return cache[p]
        s = derive_seed(seed, int(n), int(round(p * 2**52)))
        d, st = gated_probe(lambda a, c: crossing_prob(n, p, c, s, workers, start=a),
                            thr, replicas, max_replicas)
        log.append(Probe("bisection", p, st.hits, st.replicas, st.p_hat, st.ci95, d))
        cache[p] = d
        return d

    def done(a, b):
        return b - a <= max(abs_width, rel_width * (a - 0.5))

    # at p = 1/2 the rhombus crossing probability is exactly 1/2 < thr, at
    # p = 1 it is 1 > thr, so both ends are certified without sampling
    lo, hi, _ = _search(probe, 0.5, 1.0, lambda a, b: 0.5 * (a + b), done)
    return PPlusEstimate(n, epsilon, 0.5 * (lo + hi), (lo, hi), done(lo, hi), log)


@dataclass
class PowerLawFit:
    exponent: float
    intercept: float
    r_squared: float
    points: list

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)


def fit_power_law(points: Iterable) -> PowerLawFit:
    """Least-squares line through ``(log|p - 1/2|, log L)``."""
    pts = [(float(p), float(L)) for p, L in points]
    if len(pts) < 3:
        raise ValueError("need at least 3 points")
    ps = [p for p, _ in pts]
    if len(set(ps)) != len(ps):
        raise ValueError("duplicate p values")
    if any(L <= 0 for _, L in pts):
        raise ValueError("L values must be positive")
    if any(p <= 0.5 for p in ps):
        raise ValueError("all p must exceed 1/2")
    x = np.log(np.abs(np.array(ps) - 0.5))
    y = np.log(np.array([L for _, L in pts]))
    slope, intercept, r2 = linear_fit(x, y)
    return PowerLawFit(slope, intercept, r2, pts)


def linear_fit(x, y) -> tuple[float, float, float]:
    """Slope, intercept and R² of an ordinary least-squares line."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    A = np.vstack([x, np.ones_like(x)]).T
    (slope, intercept), *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(intercept), r2


def write_probe_log(probes: list, fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(PROBE_COLUMNS)
    for pr in probes:
        w.writerow(pr.row())
