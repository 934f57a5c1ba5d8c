"""Accuracy metrics for estimated truths: RMSE and sigmoid data quality."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from rdpptd.errors import DomainError
from rdpptd.reputation import reputation_mae

__all__ = [
    "MetricSample",
    "QualityParams",
    "rmse",
    "relative_error",
    "data_quality",
    "mean_quality",
    "reputation_mae",
]


@dataclass(frozen=True)
class MetricSample:
    task_id: str
    estimate: float
    truth: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.estimate) and math.isfinite(self.truth)):
            raise DomainError("metric samples must be finite")


@dataclass(frozen=True)
class QualityParams:
    lam: float = 10.0

    def __post_init__(self) -> None:
        if not self.lam > 1:
            raise DomainError("lambda must exceed 1")


def rmse(samples: Sequence[MetricSample]) -> float:
    if not samples:
        raise DomainError("rmse of no samples")
    return math.sqrt(math.fsum((s.estimate - s.truth) ** 2 for s in samples) / len(samples))


def relative_error(sample: MetricSample) -> float:
    if sample.estimate == 0:
        raise DomainError(f"task {sample.task_id}: zero estimate, relative error undefined")
    return abs(sample.estimate - sample.truth) / abs(sample.estimate)


def quality_from_q(q: float, lam: float) -> float:
    """``1 - |(1/(1 + lam^-q) - 1/2) * 2|`` for ``q >= 0``.

    With ``t = lam^-q <= 1`` this equals ``2t / (1 + t)``, which avoids the
    cancellation of the literal form for large ``q``.
    """
    if q < 0:
        raise DomainError("relative error must be non-negative")
    t = lam ** (-q)
    return 2.0 * t / (1.0 + t)


def data_quality(sample: MetricSample, params: QualityParams | None = None) -> float:
    params = params or QualityParams()
    return quality_from_q(relative_error(sample), params.lam)


def mean_quality(
    samples: Sequence[MetricSample], params: QualityParams | None = None
) -> tuple[float, int]:
    """Average quality over samples; returns ``(mean, excluded)``.

    Samples with a zero estimate have no defined quality and are skipped.
    """
    params = params or QualityParams()
    qs = [data_quality(s, params) for s in samples if s.estimate != 0]
    excluded = len(samples) - len(qs)
    if not qs:
        raise DomainError("no samples left after excluding zero estimates")
    return math.fsum(qs) / len(qs), excluded
