"""Regime experiments: sweeps ``p_j = 1/2 + lambda * delta_j**alpha`` over a
sequence of lattice spacings, measures loop statistics around the window
centre and classifies the scaled correlation length ``delta * L_eps(p)``.

Per level the sweep records

* the probability of a closed loop of diameter >= side/4 anywhere in the
  window (macroscopic-loop discriminator);
* ``F_k``: a closed loop around the centre inside the dyadic annulus
  ``A_{2k+1}``;
* the diameter of the largest loop around the centre, with the fragment
  truncation flag;
* a certified bracket for ``delta * L_eps(p) / side``.
"""
from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .corrlen import CorrEstimate, estimate_L, estimate_p_plus
from .events import dyadic_annulus
from .lattice import Window
from .loops import trace_loops
from .parallel import map_chunks
from .sampler import derive_seed, sample
from .stats import EventStats, ci95_halfwidth

TRIVIAL, CRITICAL, NEAR_CRITICAL, UNDETERMINED = (
    "Trivial", "Critical", "NearCritical", "Undetermined")


class TruncationAbort(RuntimeError):
    """Too many replicas had a window fragment that may hide the largest loop."""


class NonConfidentError(RuntimeError):
    """A threshold bisection could not reach the requested width."""


@dataclass(frozen=True)
class SweepSpec:
    """Declarative description of one sweep.

    With ``band = (eps1, eps2)`` each ``p_j`` is the midpoint of the band
    ``[p+_eps1(1/delta_j), p+_eps2(1/delta_j)]`` instead of the power law.
    A negative ``lam`` is run as ``|lam|`` with colours swapped, which leaves
    every loop statistic unchanged.
    """

    alpha: float = 0.75
    lam: float = 1.0
    deltas: tuple = (1 / 64, 1 / 128, 1 / 256)
    epsilon: float = 0.1
    window: float = 1.0
    replicas: int = 2000
    seed: int = 0
    thresholds: tuple = (0.3, 3.0)
    band: tuple | None = None
    fk: tuple = (0, 1)
    cdf_points: int = 16
    max_truncation: float = 0.2
    probe_replicas: int = 256
    probe_max_replicas: int = 8192
    band_rel_width: float = 0.5
    band_max_replicas: int = 16384
    workers: int = 1

    def __post_init__(self):
        d = [float(x) for x in self.deltas]
        object.__setattr__(self, "deltas", tuple(d))
        object.__setattr__(self, "thresholds", tuple(float(t) for t in self.thresholds))
        object.__setattr__(self, "fk", tuple(int(k) for k in self.fk))
        if self.band is not None:
            object.__setattr__(self, "band", tuple(float(e) for e in self.band))
        if not d or any(x <= 0 for x in d):
            raise ValueError("deltas must be positive")
        if any(b >= a for a, b in zip(d, d[1:])):
            raise ValueError("deltas must be strictly decreasing")
        if self.alpha < 0:
            raise ValueError(f"alpha must be >= 0, got {self.alpha}")
        t_low, t_high = self.thresholds
        if not 0 < t_low < t_high:
            raise ValueError(f"need 0 < t_low < t_high, got {self.thresholds}")
        if self.replicas < 1 or self.window <= 0:
            raise ValueError("replicas and window side must be positive")
        if not 0 < self.epsilon < 0.5:
            raise ValueError(f"epsilon must lie in (0, 1/2), got {self.epsilon}")
        if self.band is not None and not 0 < self.band[0] < self.band[1] < 0.5:
            raise ValueError(f"band needs 0 < eps1 < eps2 < 1/2, got {self.band}")
        if self.band is None:
            self.power_p()

    @property
    def color_swapped(self) -> bool:
        return self.lam < 0

    def power_p(self) -> list[float]:
        ps = [0.5 + abs(self.lam) * dl ** self.alpha for dl in self.deltas]
        bad = [p for p in ps if p > 1.0]
        if bad:
            raise ValueError(f"p_j = 1/2 + lambda*delta^alpha exceeds 1: {bad}")
        return ps


# --------------------------------------------------------------------------
# band and classification


def near_critical_band(delta: float, eps1: float, eps2: float, replicas: int = 256,
                       seed: int = 0, rel_width: float = 0.5,
                       max_replicas: int = 16384, workers: int = 1) -> "Band":
    """Brackets for ``p+_eps1(n)`` and ``p+_eps2(n)`` with ``n = round(1/delta)``.

    The band is usable when the two brackets are disjoint, so that their
    order is certified; otherwise :class:`NonConfidentError` is raised.
    """
    if not 0 < eps1 < eps2 < 0.5:
        raise ValueError(f"need 0 < eps1 < eps2 < 1/2, got {eps1}, {eps2}")
    n = max(1, int(round(1.0 / delta)))
    est = [estimate_p_plus(n, eps, replicas, derive_seed(seed, tag), rel_width,
                           max_replicas=max_replicas, workers=workers)
           for tag, eps in enumerate((eps1, eps2))]
    band = Band(n, est[0].bracket, est[1].bracket, est[0].confident, est[1].confident)
    if not band.ordered:
        raise NonConfidentError(
            f"p+ brackets at n={n} overlap: eps={eps1}: {band.low}, eps={eps2}: {band.high}")
    return band


@dataclass(frozen=True)
class Band:
    """Certified brackets of the two band edges at ``n = 1/delta``."""

    n: int
    low: tuple
    high: tuple
    low_confident: bool
    high_confident: bool

    @property
    def ordered(self) -> bool:
        return self.low[1] < self.high[0]

    @property
    def edges(self) -> tuple[float, float]:
        return 0.5 * (self.low[0] + self.low[1]), 0.5 * (self.high[0] + self.high[1])

    @property
    def midpoint(self) -> float:
        """Midpoint of the edge estimates; lies strictly between the brackets."""
        a, b = self.edges
        return 0.5 * (a + b)


def classify(brackets, thresholds=(0.3, 3.0)) -> str:
    """Verdict from scaled brackets ``[(lo_j, hi_j), ...]`` ordered by
    decreasing delta (``hi`` may be ``inf``).

    Trends are judged within bracket overlap: the sequence is "decreasing"
    unless some later bracket lies entirely above an earlier neighbour, and
    "increasing" unless some later bracket lies entirely below.
    """
    br = [(float(lo), float(hi)) for lo, hi in brackets]
    if len(br) < 3:
        raise ValueError("classification needs at least 3 sequence points")
    t_low, t_high = thresholds
    pairs = list(zip(br, br[1:]))
    decreasing = all(b[0] <= a[1] for a, b in pairs)
    increasing = all(b[1] >= a[0] for a, b in pairs)
    if all(hi < t_low for _, hi in br) and decreasing:
        return TRIVIAL
    if all(lo > t_high for lo, _ in br) and increasing:
        return CRITICAL
    if all(t_low <= lo and hi <= t_high for lo, hi in br):
        return NEAR_CRITICAL
    return UNDETERMINED


def scaled_bracket(est: CorrEstimate, delta: float, side: float = 1.0) -> tuple[float, float]:
    lo, hi = est.scaled(delta)
    return lo / side, hi / side


def classify_sequence(seq, epsilon: float = 0.1, thresholds=(0.3, 3.0), side: float = 1.0,
                      seed: int = 0, replicas: int = 256, max_replicas: int = 8192) -> str:
    """Estimate ``delta_j * L_eps(p_j)`` for ``[(delta_j, p_j), ...]`` and classify."""
    seq = list(seq)
    deltas = [d for d, _ in seq]
    if any(b >= a for a, b in zip(deltas, deltas[1:])):
        raise ValueError("deltas must be strictly decreasing")
    br = []
    for j, (dl, p) in enumerate(seq):
        est = estimate_L(p, epsilon, int(math.floor(thresholds[1] * side / dl)) + 1,
                         replicas, derive_seed(seed, j), max_replicas)
        br.append(scaled_bracket(est, dl, side))
    return classify(br, thresholds)


# --------------------------------------------------------------------------
# per-level loop statistics


@dataclass
class LoopSample:
    """Per-replica loop observations of one level, in replica order."""

    macro: np.ndarray
    fk: np.ndarray          # (replicas, len(fk))
    largest: np.ndarray     # NaN when no closed loop surrounds the centre
    truncated: np.ndarray
    small: np.ndarray       # surrounding loops with diameter <= side/8

    @property
    def replicas(self) -> int:
        return len(self.macro)


def sample_loops(window: Window, p: float, seed: int, replicas: int, fk=(0, 1),
                 workers: int = 1) -> LoopSample:
    side = window.side
    x = window.center()
    annuli = [dyadic_annulus(window, 2 * k + 1, x) for k in fk]

    def chunk(lo, hi):
        n = hi - lo
        macro = np.zeros(n, dtype=bool)
        fkh = np.zeros((n, len(annuli)), dtype=bool)
        largest = np.full(n, np.nan)
        trunc = np.zeros(n, dtype=bool)
        small = np.zeros(n, dtype=np.int64)
        for t, r in enumerate(range(lo, hi)):
            ls = trace_loops(sample(window, p, seed, r))
            closed = ls.closed
            bb = ls.bboxes
            w_ = np.maximum(bb[:, 1] - bb[:, 0], bb[:, 3] - bb[:, 2])
            diag = np.hypot(bb[:, 1] - bb[:, 0], bb[:, 3] - bb[:, 2])
            thr = side / 4.0
            if np.any(closed & (w_ >= thr)):
                macro[t] = True
            else:
                cand = np.flatnonzero(closed & (diag >= thr))
                if cand.size:
                    macro[t] = bool(np.any(ls.diameters(cand)[cand] >= thr))
            sur = ls.surround_flags(x)
            idx = np.flatnonzero(sur)
            if idx.size:
                d = ls.diameters(idx)[idx]
                largest[t] = d.max()
                small[t] = int(np.count_nonzero(d <= side / 8.0))
                for q, a in enumerate(annuli):
                    contained, _ = ls.annulus_states(a)
                    fkh[t, q] = bool(np.any(contained & sur))
            trunc[t] = bool(ls.fragment_flags(x).any())
        return macro, fkh, largest, trunc, small

    parts = map_chunks(chunk, replicas, workers)
    cols = list(zip(*parts))
    return LoopSample(np.concatenate(cols[0]), np.concatenate(cols[1]),
                      np.concatenate(cols[2]), np.concatenate(cols[3]),
                      np.concatenate(cols[4]))


@dataclass
class LoopCDF:
    """Empirical CDFs of the largest surrounding loop's diameter.

    Truncated replicas are excluded from both CDFs.  The conditional CDF
    uses replicas where a surrounding loop exists; the unconditional one
    counts loop-free replicas as successes for every ``L``.
    """

    grid: np.ndarray
    hits_cond: np.ndarray
    n_cond: int
    hits_uncond: np.ndarray
    n_uncond: int
    n_none: int
    n_truncated: int
    replicas: int

    @classmethod
    def from_sample(cls, largest: np.ndarray, truncated: np.ndarray, grid) -> "LoopCDF":
        grid = np.asarray(grid, dtype=float)
        valid = ~truncated
        has = valid & ~np.isnan(largest)
        d = np.sort(largest[has])
        hits_cond = np.searchsorted(d, grid, side="right").astype(np.int64)
        n_none = int(np.count_nonzero(valid & np.isnan(largest)))
        return cls(grid, hits_cond, int(has.sum()), hits_cond + n_none, int(valid.sum()),
                   n_none, int(truncated.sum()), len(largest))

    @property
    def p_cond(self) -> np.ndarray:
        return self.hits_cond / max(self.n_cond, 1)

    @property
    def p_uncond(self) -> np.ndarray:
        return self.hits_uncond / max(self.n_uncond, 1)

    def rows(self, conditional: bool = True) -> list[tuple[float, float, float]]:
        """``[(L, P(G_L), ci95), ...]``."""
        hits, n = (self.hits_cond, self.n_cond) if conditional else (self.hits_uncond,
                                                                      self.n_uncond)
        if n == 0:
            return [(float(L), float("nan"), float("nan")) for L in self.grid]
        return [(float(L), h / n, ci95_halfwidth(int(h), n)) for L, h in zip(self.grid, hits)]

    def tail_fit(self, min_tail: int = 5):
        """Slope, intercept and R² of ``log(1 - P_cond(G_L))`` against ``L``
        over grid points keeping at least ``min_tail`` replicas above ``L``."""
        from .corrlen import linear_fit

        tail = self.n_cond - self.hits_cond
        keep = tail >= min_tail
        if keep.sum() < 3:
            raise ValueError("fewer than 3 grid points with a usable tail")
        return linear_fit(self.grid[keep], np.log(tail[keep] / self.n_cond))


def default_cdf_grid(side: float, points: int = 16) -> np.ndarray:
    return side * np.geomspace(1 / 64, 1.0, points)


def largest_loop_cdf(delta: float, p: float, L_grid, replicas: int, seed: int,
                     side: float = 1.0, max_truncation: float = 0.2,
                     workers: int = 1) -> LoopCDF:
    """Largest-loop CDF at the centre of a square window of Euclidean side
    ``side``; raises :class:`TruncationAbort` above ``max_truncation``."""
    window = Window.unit(delta, side)
    s = sample_loops(window, p, seed, replicas, (), workers)
    cdf = LoopCDF.from_sample(s.largest, s.truncated, L_grid)
    rate = cdf.n_truncated / cdf.replicas
    if rate > max_truncation:
        raise TruncationAbort(f"truncation rate {rate:.3f} exceeds {max_truncation}")
    return cdf


# --------------------------------------------------------------------------
# sweeps


@dataclass
class LevelResult:
    index: int
    delta: float
    p: float
    band: Band | None
    corr: CorrEstimate
    scaled: tuple
    macro: EventStats
    fk: list
    large_loop: EventStats
    small_loop_mean: float
    cdf: LoopCDF
    quantiles: dict
    truncation_rate: float
    aborted: bool
    seconds: float = 0.0

    def event_stats(self) -> list[EventStats]:
        out = [self.macro, *self.fk, self.large_loop]
        for L, h in zip(self.cdf.grid, self.cdf.hits_cond):
            if self.cdf.n_cond:
                out.append(EventStats(f"G_cond({L:.6g})", int(h), self.cdf.n_cond, self.p,
                                      self.delta, float(L), 0))
        for L, h in zip(self.cdf.grid, self.cdf.hits_uncond):
            if self.cdf.n_uncond:
                out.append(EventStats(f"G({L:.6g})", int(h), self.cdf.n_uncond, self.p,
                                      self.delta, float(L), self.cdf.n_truncated))
        return out


LEVEL_COLUMNS = ("level", "delta", "p", "dL_low", "dL_high", "L_hat", "L_confident",
                 "truncation_rate", "aborted", "macro_p_hat", "small_loop_mean",
                 "largest_q10", "largest_q50", "largest_q90", "band_low", "band_high")


@dataclass
class RegimeReport:
    spec: SweepSpec
    levels: list
    verdict: str

    @property
    def usable(self) -> list:
        return [lv for lv in self.levels if not lv.aborted]

    @property
    def aborted_levels(self) -> list[int]:
        return [lv.index for lv in self.levels if lv.aborted]

    def level_rows(self) -> list[list]:
        rows = []
        for lv in self.levels:
            q = lv.quantiles
            rows.append([lv.index, lv.delta, lv.p, lv.scaled[0], lv.scaled[1],
                         "" if lv.corr.n_hat is None else lv.corr.n_hat,
                         int(lv.corr.confident), lv.truncation_rate, int(lv.aborted),
                         lv.macro.p_hat, lv.small_loop_mean,
                         q.get(0.1, float("nan")), q.get(0.5, float("nan")),
                         q.get(0.9, float("nan")),
                         "" if lv.band is None else lv.band.edges[0],
                         "" if lv.band is None else lv.band.edges[1]])
        return rows

    def to_dict(self) -> dict:
        return {"spec": asdict(self.spec), "verdict": self.verdict,
                "aborted_levels": self.aborted_levels}


def run_level(spec: SweepSpec, j: int) -> LevelResult:
    t0 = time.perf_counter()
    delta = spec.deltas[j]
    band = None
    if spec.band is not None:
        band = near_critical_band(delta, *spec.band, replicas=spec.probe_replicas,
                                  seed=derive_seed(spec.seed, j, 1),
                                  rel_width=spec.band_rel_width,
                                  max_replicas=spec.band_max_replicas, workers=spec.workers)
        p = band.midpoint
    else:
        p = spec.power_p()[j]
    side = spec.window
    window = Window.unit(delta, side)
    n_max = int(math.floor(spec.thresholds[1] * side / delta)) + 1
    corr = estimate_L(p, spec.epsilon, n_max, spec.probe_replicas,
                      derive_seed(spec.seed, j, 2), spec.probe_max_replicas, spec.workers)
    s = sample_loops(window, p, derive_seed(spec.seed, j, 3), spec.replicas, spec.fk,
                     spec.workers)
    n = s.replicas
    trunc = int(s.truncated.sum())
    macro = EventStats("macro_loop", int(s.macro.sum()), n, p, delta, side / 4, trunc)
    fk = [EventStats(f"F_{k}", int(s.fk[:, q].sum()), n, p, delta, float(k), trunc)
          for q, k in enumerate(spec.fk)]
    valid = ~s.truncated
    big = valid & (np.nan_to_num(s.largest, nan=0.0) >= side / 2)
    large = EventStats("large_loop", int(big.sum()), max(int(valid.sum()), 1), p, delta,
                       side / 2, 0)
    cdf = LoopCDF.from_sample(s.largest, s.truncated, default_cdf_grid(side, spec.cdf_points))
    d = s.largest[valid & ~np.isnan(s.largest)]
    quant = {q: float(np.quantile(d, q)) for q in (0.1, 0.5, 0.9)} if d.size else {}
    rate = trunc / n
    return LevelResult(j, delta, p, band, corr, scaled_bracket(corr, delta, side), macro, fk,
                       large, float(s.small.mean()), cdf, quant, rate,
                       rate > spec.max_truncation, time.perf_counter() - t0)


def run_sweep(spec: SweepSpec, on_level=None) -> RegimeReport:
    """Run every level in order and classify the scaled brackets.

    A level whose truncation rate exceeds ``spec.max_truncation`` is marked
    ``aborted``: its loop statistics are unusable, but its correlation-length
    bracket (a crossing probability of a finite box, untouched by window
    truncation) still enters the classification.
    """
    levels = []
    for j in range(len(spec.deltas)):
        lv = run_level(spec, j)
        levels.append(lv)
        if on_level is not None:
            on_level(lv)
    if len(levels) < 3:
        verdict = UNDETERMINED
    else:
        verdict = classify([lv.scaled for lv in levels], spec.thresholds)
    return RegimeReport(spec, levels, verdict)
