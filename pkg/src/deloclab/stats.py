"""Small statistics helpers: Wilson intervals and deterministic aggregation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import binomtest

__all__ = ["wilson_interval", "Moments", "pairwise_moments", "summarize"]


def wilson_interval(successes: int, n: int, confidence: float = 0.95) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if n <= 0:
        return (0.0, 1.0)
    ci = binomtest(int(successes), int(n)).proportion_ci(confidence_level=confidence, method="wilson")
    return float(ci.low), float(ci.high)


@dataclass(frozen=True)
class Moments:
    n: int
    mean: float
    m2: float  # sum of squared deviations

    @classmethod
    def of(cls, x: float) -> "Moments":
        return cls(1, float(x), 0.0)

    def merge(self, other: "Moments") -> "Moments":
        if self.n == 0:
            return other
        if other.n == 0:
            return self
        n = self.n + other.n
        d = other.mean - self.mean
        mean = self.mean + d * other.n / n
        m2 = self.m2 + other.m2 + d * d * self.n * other.n / n
        return Moments(n, mean, m2)

    @property
    def var(self) -> float:
        return self.m2 / (self.n - 1) if self.n > 1 else 0.0

    @property
    def stderr(self) -> float:
        return float(np.sqrt(self.var / self.n)) if self.n > 1 else 0.0


def pairwise_moments(keys, values) -> Moments:
    """Mean and variance by a balanced pairwise merge over values sorted by key.

    The merge tree depends only on the sorted keys, so the floating point result
    does not depend on the order in which values arrived.
    """
    order = sorted(range(len(values)), key=lambda i: keys[i])
    level = [Moments.of(values[i]) for i in order]
    if not level:
        return Moments(0, 0.0, 0.0)
    while len(level) > 1:
        nxt = [level[i].merge(level[i + 1]) for i in range(0, len(level) - 1, 2)]
        if len(level) % 2:
            nxt.append(level[-1])
        level = nxt
    return level[0]


def summarize(values) -> dict:
    """Mean, stderr and a few quantiles of a finite sample."""
    x = np.asarray(values, dtype=float)
    if x.size == 0:
        return {"n": 0, "mean": None, "stderr": None, "q05": None, "q50": None, "q95": None}
    m = pairwise_moments(list(range(x.size)), list(x))
    q = np.quantile(x, [0.05, 0.5, 0.95])
    return {"n": int(x.size), "mean": m.mean, "stderr": m.stderr,
            "q05": float(q[0]), "q50": float(q[1]), "q95": float(q[2])}
