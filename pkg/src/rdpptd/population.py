"""Synthetic worker pools, sensed-data generation and collusion.

Workers come in three categories with true reputation ``c`` drawn from
disjoint ranges: malicious (MW, 30%), average (AW, 50%) and trusted (TW,
20%). ``c`` is the probability a worker submits a good reading.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from rdpptd.errors import DomainError

CATEGORIES = ("MW", "AW", "TW")
PROPORTIONS = (0.3, 0.5, 0.2)
DEFAULT_RANGES = {"MW": (0.0, 0.2), "AW": (0.2, 0.7), "TW": (0.7, 1.0)}


@dataclass(frozen=True)
class NoiseParams:
    small_frac: float = 0.02
    small_floor: float = 0.2
    large_frac: float = 0.20
    large_floor: float = 2.0
    # MW bad readings: uniform on wide_center +- wide_half_width, independent of g
    wide_center: float = 20.0
    wide_half_width: float = 30.0

    def small_sigma(self, g: float) -> float:
        return max(self.small_frac * abs(g), self.small_floor)

    def large_sigma(self, g: float) -> float:
        return max(self.large_frac * abs(g), self.large_floor)


@dataclass(frozen=True)
class AttackConfig:
    theta: float = 0.0
    xi: float = 0.2
    colluded: bool = False
    target_offset_range: tuple[float, float] = (10.0, 25.0)
    jitter: float = 0.1

    def __post_init__(self) -> None:
        if not 0.0 <= self.theta <= 1.0:
            raise DomainError("theta must lie in [0, 1]")
        if not 0.0 < self.xi < 1.0:
            raise DomainError("xi must lie in (0, 1)")
        lo, hi = self.target_offset_range
        if not 0 <= lo <= hi:
            raise DomainError("target_offset_range must satisfy 0 <= lo <= hi")


@dataclass(frozen=True)
class WorkerProfile:
    index: int
    pseudonym: str
    category: str
    true_reputation: float
    planted: bool = False

    @property
    def malicious(self) -> bool:
        return self.category == "MW"

    def draw_attributes(
        self,
        windows: Sequence[tuple[float, float]],
        rng: np.random.Generator,
        in_window_prob: float = 0.9,
    ) -> tuple[tuple[float, float, float], bool]:
        """Draw (time, lon, lat) for one task; returns ``(attrs, in_window)``.

        Out-of-window draws push exactly one attribute past a window edge.
        """
        attrs = [float(rng.uniform(lo, hi)) for lo, hi in windows]
        inside = bool(rng.random() < in_window_prob)
        if not inside:
            which = int(rng.integers(3))
            lo, hi = windows[which]
            span = max(hi - lo, 1e-3)
            gap = float(rng.uniform(0.05, 1.0)) * span
            attrs[which] = hi + gap if rng.random() < 0.5 else lo - gap
        return (attrs[0], attrs[1], attrs[2]), inside


def category_counts(n: int) -> dict[str, int]:
    """Largest-remainder apportionment of ``n`` over the 30/50/20 split."""
    exact = [n * p for p in PROPORTIONS]
    counts = [int(e) for e in exact]
    order = sorted(range(3), key=lambda i: (-(exact[i] - counts[i]), i))
    for i in order[: n - sum(counts)]:
        counts[i] += 1
    return dict(zip(CATEGORIES, counts))


def category_ranges(regime: str = "default", xi: float | None = None) -> dict[str, tuple[float, float]]:
    ranges = dict(DEFAULT_RANGES)
    if regime == "collusion":
        if xi is None or not 0 < xi < 1:
            raise DomainError("collusion regime needs xi in (0, 1)")
        ranges["MW"] = (0.0, xi)
    elif regime != "default":
        raise DomainError(f"unknown regime {regime!r}")
    return ranges


def generate_pool(
    n: int,
    rng: np.random.Generator,
    regime: str = "default",
    xi: float | None = None,
    pseudonyms: Sequence[str] | None = None,
) -> list[WorkerProfile]:
    """Build ``n`` workers with categories in shuffled order.

    The random draws do not depend on ``regime``/``xi``: reputations are
    ``lo + (hi - lo) * u`` for a fixed ``u`` per worker, so pools built from
    the same stream under different caps differ only in MW reputations.
    """
    if n < 1:
        raise DomainError("pool needs at least one worker")
    ranges = category_ranges(regime, xi)
    counts = category_counts(n)
    cats = [c for c in CATEGORIES for _ in range(counts[c])]
    order = rng.permutation(n)
    u = rng.random(n)
    pool = []
    for slot, i in enumerate(order):
        cat = cats[i]
        lo, hi = ranges[cat]
        # MW range is open at 0
        uu = u[slot] if cat != "MW" or u[slot] > 0 else 0.5
        name = pseudonyms[slot] if pseudonyms is not None else f"w{slot:05d}"
        pool.append(WorkerProfile(slot, name, cat, lo + (hi - lo) * float(uu)))
    return pool


def planted_category(c: float) -> str:
    for cat, (lo, hi) in DEFAULT_RANGES.items():
        if lo <= c < hi:
            return cat
    return "TW"


def sense_many(
    profiles: Sequence[WorkerProfile],
    g: float,
    rng: np.random.Generator,
    noise: NoiseParams | None = None,
) -> np.ndarray:
    """Readings of ``profiles`` for a task with ground truth ``g``.

    Every worker emits ``g + N(0, small)`` with probability ``c``. Otherwise
    AW/TW emit ``g + N(0, large)`` and MW emit a uniform value on a wide
    fixed range that ignores ``g``.
    """
    noise = noise or NoiseParams()
    n = len(profiles)
    c = np.array([p.true_reputation for p in profiles], dtype=float)
    mal = np.array([p.malicious for p in profiles], dtype=bool)
    u = rng.random(n)
    z = rng.standard_normal(n)
    wide = noise.wide_center + rng.uniform(-noise.wide_half_width, noise.wide_half_width, n)
    good = u < c
    out = np.where(good, g + noise.small_sigma(g) * z, g + noise.large_sigma(g) * z)
    return np.where(~good & mal, wide, out)


def sense(
    profile: WorkerProfile, g: float, rng: np.random.Generator, noise: NoiseParams | None = None
) -> float:
    return float(sense_many([profile], g, rng, noise)[0])


@dataclass
class Collusion:
    offset: float
    values: dict[str, float] = field(default_factory=dict)


def draw_offset(rng: np.random.Generator, attack: AttackConfig) -> float:
    lo, hi = attack.target_offset_range
    mag = float(rng.uniform(lo, hi))
    return mag if rng.random() < 0.5 else -mag


def collude(
    mw_profiles: Sequence[WorkerProfile],
    g: float,
    rng: np.random.Generator,
    attack: AttackConfig | None = None,
) -> Collusion:
    """One shared false target ``g + offset`` per task, plus small jitter."""
    attack = attack or AttackConfig(colluded=True)
    if not mw_profiles:
        raise DomainError("collusion needs at least one malicious worker")
    offset = draw_offset(rng, attack)
    jit = rng.normal(0.0, attack.jitter, len(mw_profiles))
    return Collusion(offset, {p.pseudonym: g + offset + float(j) for p, j in zip(mw_profiles, jit)})
