"""Beta-count reputations held by the trust authority."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Iterable, Mapping

from rdpptd.errors import DomainError


PRIOR_SUCCESSES = 1
PRIOR_FAILURES = 1


@dataclass(frozen=True)
class ReputationRecord:
    successes: int = PRIOR_SUCCESSES
    failures: int = PRIOR_FAILURES

    def value(self) -> float:
        return value(self)


@dataclass(frozen=True)
class FeedbackBit:
    pseudonym: str
    bit: int

    def __post_init__(self) -> None:
        if self.bit not in (0, 1):
            raise DomainError(f"feedback bit must be 0 or 1, got {self.bit}")


def value(rec: ReputationRecord) -> float:
    total = rec.successes + rec.failures
    if total <= 0:
        raise DomainError("reputation record has no mass")
    return rec.successes / total


def apply_feedback(rec: ReputationRecord, fb: FeedbackBit) -> ReputationRecord:
    if fb.bit == 1:
        return ReputationRecord(rec.successes + 1, rec.failures)
    return ReputationRecord(rec.successes, rec.failures + 1)


def gate(rec: ReputationRecord, threshold: float) -> bool:
    """Inclusive threshold test: a worker at exactly the threshold qualifies."""
    if not 0.0 <= threshold <= 1.0:
        raise DomainError("threshold must lie in [0, 1]")
    return value(rec) >= threshold


def band(rec: ReputationRecord) -> int:
    """Reputation decile 0..9, the only reputation detail disclosed to SP."""
    return min(int(value(rec) * 10), 9)


def reputation_mae(estimates: Mapping[str, float], truths: Mapping[str, float]) -> float:
    if not estimates or set(estimates) != set(truths):
        raise DomainError("reputation maps must share a nonempty key set")
    keys = sorted(estimates)
    return sum(abs(estimates[k] - truths[k]) for k in keys) / len(keys)


class ReputationStore:
    """Records keyed by pseudonym; real identities never enter the store."""

    def __init__(self) -> None:
        self._records: dict[str, ReputationRecord] = {}
        self.audit: list[str] = []

    def register(self, pseudonym: str, record: ReputationRecord | None = None) -> None:
        self._records[pseudonym] = record or ReputationRecord()

    def __contains__(self, pseudonym: object) -> bool:
        return pseudonym in self._records

    def __len__(self) -> int:
        return len(self._records)

    def record(self, pseudonym: str) -> ReputationRecord:
        try:
            return self._records[pseudonym]
        except KeyError:
            self.audit.append(f"unknown pseudonym {pseudonym}")
            raise

    def value(self, pseudonym: str) -> float:
        return value(self.record(pseudonym))

    def apply(self, feedback: Iterable[FeedbackBit]) -> None:
        for fb in feedback:
            self._records[fb.pseudonym] = apply_feedback(self.record(fb.pseudonym), fb)

    def values(self) -> dict[str, float]:
        return {k: value(r) for k, r in self._records.items()}

    def snapshot(self) -> "ReputationStore":
        other = ReputationStore()
        other._records = dict(self._records)
        return other

    def export_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["pseudonym", "alpha", "beta", "value"])
        for k in sorted(self._records):
            r = self._records[k]
            w.writerow([k, r.successes, r.failures, f"{value(r):.10g}"])
        return buf.getvalue()
