"""Binomial event statistics shared by every Monte Carlo estimator."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

Z95 = 1.959963984540054

CSV_COLUMNS = ("event", "p", "delta", "n_or_r", "hits", "replicas", "p_hat", "ci95",
               "truncated_count")


def ci95_halfwidth(hits: int, replicas: int) -> float:
    """Normal-approximation 95% half-width with continuity correction.

    Degenerate outcomes (no hits or all hits) get half-width 0.
    """
    if replicas < 1:
        raise ValueError("need at least one replica")
    if hits <= 0 or hits >= replicas:
        return 0.0
    ph = hits / replicas
    return Z95 * math.sqrt(ph * (1.0 - ph) / replicas) + 0.5 / replicas


@dataclass(frozen=True)
class EventStats:
    event: str
    hits: int
    replicas: int
    p: float = float("nan")
    delta: float = 1.0
    n_or_r: float = float("nan")
    truncated_count: int = 0
    extra: dict = field(default_factory=dict, compare=False)

    @property
    def p_hat(self) -> float:
        return self.hits / self.replicas

    @property
    def ci95(self) -> float:
        return ci95_halfwidth(self.hits, self.replicas)

    @property
    def lower(self) -> float:
        return max(0.0, self.p_hat - self.ci95)

    @property
    def upper(self) -> float:
        return min(1.0, self.p_hat + self.ci95)

    def sigma(self, p0: float | None = None) -> float:
        """Binomial standard error, under ``p0`` if given."""
        q = self.p_hat if p0 is None else p0
        return math.sqrt(q * (1.0 - q) / self.replicas)

    def within(self, p0: float, nsigma: float = 3.0) -> bool:
        return abs(self.p_hat - p0) <= nsigma * self.sigma(p0) + 1e-15

    def merge(self, other: "EventStats") -> "EventStats":
        return EventStats(self.event, self.hits + other.hits, self.replicas + other.replicas,
                          self.p, self.delta, self.n_or_r,
                          self.truncated_count + other.truncated_count)

    def row(self) -> list:
        return [self.event, self.p, self.delta, self.n_or_r, self.hits, self.replicas,
                self.p_hat, self.ci95, self.truncated_count]
