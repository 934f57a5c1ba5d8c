"""Plaintext aggregation methods: mean, median, weighted mean, CRH and RTD.

CRH alternates distance-based source weights ``w_i = log(sum_j d_j / d_i)``
with a weighted-mean estimate. RTD is the same loop with each weight further
multiplied by the worker's reputation. These are the reference results the
masked protocol in :mod:`rdpptd.protocol` must reproduce.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

from rdpptd.errors import DomainError

DEFAULT_DELTA = 1e-6
DEFAULT_MAX_ITERS = 100
DEFAULT_DISTANCE_FLOOR = 1e-9
ZERO_INIT_OFFSET = 1e-9


@dataclass(frozen=True)
class Observation:
    worker: str
    value: float
    reputation: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.reputation <= 1.0:
            raise DomainError(f"reputation outside [0, 1]: {self.reputation}")


@dataclass(frozen=True)
class IterationConfig:
    delta: float = DEFAULT_DELTA
    max_iters: int = DEFAULT_MAX_ITERS
    distance_floor: float = DEFAULT_DISTANCE_FLOOR

    def __post_init__(self) -> None:
        if self.delta <= 0 or self.max_iters < 1 or self.distance_floor <= 0:
            raise DomainError("need delta > 0, max_iters >= 1, distance_floor > 0")


@dataclass
class AggregationResult:
    estimate: float
    weights: list[float]
    iterations: int
    converged: bool
    fallback: bool = False
    # x^0, x^1, ..., x^n
    history: list[float] = field(default_factory=list)


def mean(values: Sequence[float]) -> float:
    if len(values) == 0:
        raise DomainError("mean of an empty sequence")
    return math.fsum(values) / len(values)


def median(values: Sequence[float]) -> float:
    if len(values) == 0:
        raise DomainError("median of an empty sequence")
    s = sorted(values)
    mid = len(s) // 2
    if len(s) % 2:
        return s[mid]
    return (s[mid - 1] + s[mid]) / 2


def weighted_mean(obs: Sequence[Observation]) -> float:
    total = math.fsum(o.reputation for o in obs)
    if total <= 0:
        raise DomainError("weighted mean needs a positive reputation sum")
    return math.fsum(o.value * o.reputation for o in obs) / total


def distance_weights(residuals: Sequence[float], floor: float) -> list[float]:
    """``log(sum d / d_i)`` with ``d_i = max(|r_i|, floor)``; always >= 0."""
    d = [max(abs(r), floor) for r in residuals]
    total = math.fsum(d)
    return [max(math.log(total / di), 0.0) for di in d]


def default_init(values: Sequence[float]) -> float:
    m = mean(values)
    return m if m != 0 else ZERO_INIT_OFFSET


def _iterate(
    values: Sequence[float],
    reps: Sequence[float],
    cfg: IterationConfig,
    init: float | None,
) -> AggregationResult:
    if len(values) < 2:
        raise DomainError("truth discovery needs at least two observations")
    x = default_init(values) if init is None else init
    history = [x]
    weights: list[float] = [1.0] * len(values)
    converged = False
    n = 0
    while n < cfg.max_iters:
        weights = distance_weights([v - x for v in values], cfg.distance_floor)
        wc = [w * c for w, c in zip(weights, reps)]
        denom = math.fsum(wc)
        if denom <= 0:
            return AggregationResult(
                _fallback(values, reps), weights, n, False, fallback=True, history=history
            )
        x_next = math.fsum(v * k for v, k in zip(values, wc)) / denom
        n += 1
        history.append(x_next)
        step = abs(x_next - x)
        x = x_next
        if step < cfg.delta:
            converged = True
            break
    return AggregationResult(x, weights, n, converged, history=history)


def _fallback(values: Sequence[float], reps: Sequence[float]) -> float:
    if math.fsum(reps) > 0:
        return math.fsum(v * c for v, c in zip(values, reps)) / math.fsum(reps)
    return mean(values)


def crh(
    values: Sequence[float], cfg: IterationConfig | None = None, init: float | None = None
) -> AggregationResult:
    return _iterate(list(values), [1.0] * len(values), cfg or IterationConfig(), init)


def rtd(
    obs: Sequence[Observation], cfg: IterationConfig | None = None, init: float | None = None
) -> AggregationResult:
    """Reputation-weighted truth discovery.

    Each iteration computes CRH distance weights against the current
    estimate, scales them by reputation, and takes the normalized weighted
    sum. Stops when the estimate moves by less than ``cfg.delta`` or after
    ``cfg.max_iters`` updates. A vanishing reputation-weight sum falls back
    to the reputation-weighted mean (or plain mean) and sets ``fallback``.
    """
    return _iterate(
        [o.value for o in obs], [o.reputation for o in obs], cfg or IterationConfig(), init
    )
