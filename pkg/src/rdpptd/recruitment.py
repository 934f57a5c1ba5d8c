"""Privacy-preserving worker recruitment.

Pipeline for one task: workers commit to their (time, lon, lat) attributes,
SP asks TA whether each pseudonym clears the reputation threshold, qualified
workers receive the windows and answer with blinded check vectors, SP keeps
those whose three inner products are non-negative, samples ``k`` of them
stratified by TA-reported reputation decile, and issues a fresh perturbation
pair to every selected worker.

SP only ever handles commitments, responses, decile bands and booleans; see
:class:`CandidateFile`.
"""

from __future__ import annotations

import logging
import random
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from rdpptd import commitment as cm
from rdpptd.errors import DomainError
from rdpptd.reputation import ReputationStore, band, gate

log = logging.getLogger(__name__)

ATTRIBUTES = ("time", "lon", "lat")
_SCALES = (cm.TIME_SCALE, cm.GEO_SCALE, cm.GEO_SCALE)
_EPSILONS = (
    cm.epsilon_for(cm.TIME_MAX),
    cm.epsilon_for(cm.LON_MAX),
    cm.epsilon_for(cm.LAT_MAX),
)

DEFAULT_ADDITIVE_BOUND = 3500.0
DEFAULT_MULTIPLICATIVE_MAX = 8.0

Window = tuple[float, float]


@dataclass(frozen=True)
class TaskSpec:
    task_id: str
    round: int
    time_window: Window
    lon_window: Window
    lat_window: Window
    rep_threshold: float = 0.5
    budget: float = 100.0
    workers_needed: int = 10
    # None: DR derives the feedback threshold from the final estimate
    gamma: float | None = None

    def __post_init__(self) -> None:
        for name in ("time_window", "lon_window", "lat_window"):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise DomainError(f"{name} lower bound exceeds upper bound")
        if not 0.0 <= self.rep_threshold <= 1.0:
            raise DomainError("rep_threshold must lie in [0, 1]")
        if self.budget < 0:
            raise DomainError("budget must be non-negative")
        if self.workers_needed < 2:
            raise DomainError("a task needs at least two workers")

    @property
    def windows(self) -> tuple[Window, Window, Window]:
        return (self.time_window, self.lon_window, self.lat_window)


@dataclass
class WorkerState:
    """Worker-side state for one task. ``attributes`` never leave the worker."""

    pseudonym: str
    attributes: tuple[float, float, float]
    participates: bool = True
    # a dishonest worker answers the range check even when out of window
    honest: bool = True
    key: cm.CommitmentKey | None = None


@dataclass(frozen=True)
class TaskRequirements:
    """Fixed-point windows and public epsilons dispatched to qualified workers."""

    windows: tuple[tuple[int, int], ...]
    epsilons: tuple[int, ...] = _EPSILONS

    @classmethod
    def from_task(cls, task: TaskSpec) -> "TaskRequirements":
        return cls(
            tuple(
                (cm.to_fixed(lo, s), cm.to_fixed(hi, s)) for (lo, hi), s in zip(task.windows, _SCALES)
            )
        )


@dataclass
class CandidateFile:
    pseudonym: str
    commitments: tuple[cm.Commitment, ...]
    gate_passed: bool = False
    responses: tuple[cm.CheckResponse, ...] | None = None
    verified: bool = False
    band: int | None = None


@dataclass(frozen=True)
class MaskPair:
    additive: float
    multiplicative: float


@dataclass(frozen=True)
class RecruitmentDecision:
    pseudonym: str
    selected: int
    mask_pair: MaskPair | None = None

    def __post_init__(self) -> None:
        if self.selected not in (0, 1):
            raise DomainError("selected flag must be 0 or 1")
        if self.selected and (self.mask_pair is None or self.mask_pair.multiplicative == 0):
            raise DomainError("a selected worker needs a nonzero multiplicative mask")
        if not self.selected and self.mask_pair is not None:
            raise DomainError("unselected workers get no mask pair")


@dataclass
class Selection:
    selected: list[CandidateFile]
    shortfall: bool


@dataclass
class RecruitmentOutcome:
    task_id: str
    decisions: dict[str, RecruitmentDecision]
    shortfall: bool
    aborted: bool
    transcript: list[dict] = field(default_factory=list)

    @property
    def selected(self) -> list[str]:
        return [p for p, d in self.decisions.items() if d.selected]


# -- worker side --------------------------------------------------------------


def submit_commitments(
    worker: WorkerState, task: TaskSpec, rng: random.Random
) -> CandidateFile | None:
    """Commit to all three attributes under one fresh per-task key."""
    if not worker.participates:
        return None
    if worker.key is None:
        worker.key = cm.random_key(rng)
    commitments = tuple(
        cm.commit(worker.key, cm.make_attribute_vector(cm.to_fixed(a, s)), rng)
        for a, s in zip(worker.attributes, _SCALES)
    )
    return CandidateFile(worker.pseudonym, commitments)


def in_windows(attributes: Sequence[float], task: TaskSpec) -> bool:
    """Window test at the fixed-point resolution the commitments use."""
    fixed = [cm.to_fixed(a, s) for a, s in zip(attributes, _SCALES)]
    return all(lo <= t <= hi for t, (lo, hi) in zip(fixed, TaskRequirements.from_task(task).windows))


def self_check_and_respond(
    worker: WorkerState, reqs: TaskRequirements, rng: random.Random
) -> tuple[cm.CheckResponse, ...] | None:
    if worker.key is None:
        raise DomainError("worker has not committed for this task")
    fixed = [cm.to_fixed(a, s) for a, s in zip(worker.attributes, _SCALES)]
    inside = all(lo <= t <= hi for t, (lo, hi) in zip(fixed, reqs.windows))
    if not inside and worker.honest:
        return None
    return tuple(
        cm.respond(worker.key, cm.make_check_vector(lo, hi, eps), rng)
        for (lo, hi), eps in zip(reqs.windows, reqs.epsilons)
    )


# -- SP / TA side ---------------------------------------------------------------


def reputation_gate(query: tuple[str, float], ta_store: ReputationStore) -> int:
    pseudonym, threshold = query
    if pseudonym not in ta_store:
        ta_store.audit.append(f"gate query for unknown pseudonym {pseudonym}")
        return 0
    return int(gate(ta_store.record(pseudonym), threshold))


def verify_candidates(files: Iterable[CandidateFile]) -> list[CandidateFile]:
    out = []
    for f in files:
        f.verified = False
        if not f.gate_passed or f.responses is None:
            continue
        if len(f.responses) != len(f.commitments) or len(f.commitments) != len(ATTRIBUTES):
            continue
        try:
            ok = all(cm.verify(c, r) for c, r in zip(f.commitments, f.responses))
        except DomainError:
            ok = False
        f.verified = ok
        if ok:
            out.append(f)
    return out


def stratified_select(
    verified: Sequence[CandidateFile], k: int, rng: random.Random
) -> Selection:
    """Proportional allocation over reputation deciles.

    Quotas are ``k * n_s / n`` floored, with leftover seats given to strata
    in order of largest fractional part (ties: lower decile first). Members
    are drawn uniformly within each stratum.
    """
    if not verified:
        raise DomainError("no verified candidates to select from")
    if len(verified) <= k:
        return Selection(list(verified), shortfall=len(verified) < k)
    strata: dict[int, list[CandidateFile]] = {}
    for f in verified:
        if f.band is None:
            raise DomainError(f"candidate {f.pseudonym} has no reputation band")
        strata.setdefault(f.band, []).append(f)
    n = len(verified)
    keys = sorted(strata)
    exact = {b: k * len(strata[b]) / n for b in keys}
    quota = {b: int(exact[b]) for b in keys}
    left = k - sum(quota.values())
    for b in sorted(keys, key=lambda b: (-(exact[b] - quota[b]), b))[:left]:
        quota[b] += 1
    chosen: list[CandidateFile] = []
    for b in keys:
        chosen.extend(rng.sample(strata[b], quota[b]))
    return Selection(chosen, shortfall=False)


def issue_masks(
    candidates: Iterable[str],
    selected: Iterable[str],
    rng: random.Random,
    additive_bound: float = DEFAULT_ADDITIVE_BOUND,
    multiplicative_max: float = DEFAULT_MULTIPLICATIVE_MAX,
) -> dict[str, RecruitmentDecision]:
    chosen = set(selected)
    out = {}
    for p in candidates:
        if p in chosen:
            pair = MaskPair(
                rng.uniform(-additive_bound, additive_bound), rng.uniform(1.0, multiplicative_max)
            )
            out[p] = RecruitmentDecision(p, 1, pair)
        else:
            out[p] = RecruitmentDecision(p, 0)
    return out


def recruit(
    task: TaskSpec,
    workers: Sequence[WorkerState],
    ta_store: ReputationStore,
    rng: random.Random,
    additive_bound: float = DEFAULT_ADDITIVE_BOUND,
    multiplicative_max: float = DEFAULT_MULTIPLICATIVE_MAX,
    trace: bool = False,
) -> RecruitmentOutcome:
    """Run the whole recruitment pipeline for ``task`` over ``workers``.

    With ``trace`` the outcome carries one SP-side record per candidate.
    """
    by_pseudonym = {w.pseudonym: w for w in workers}
    files: list[CandidateFile] = []
    for w in workers:
        f = submit_commitments(w, task, rng)
        if f is not None:
            files.append(f)

    reqs = TaskRequirements.from_task(task)
    for f in files:
        f.gate_passed = bool(reputation_gate((f.pseudonym, task.rep_threshold), ta_store))
        if f.gate_passed:
            f.band = band(ta_store.record(f.pseudonym))
            f.responses = self_check_and_respond(by_pseudonym[f.pseudonym], reqs, rng)

    verified = verify_candidates(files)
    if not verified:
        decisions = {f.pseudonym: RecruitmentDecision(f.pseudonym, 0) for f in files}
        outcome = RecruitmentOutcome(task.task_id, decisions, shortfall=True, aborted=True)
        log.debug("task %s: no verified candidates, aborting", task.task_id)
    else:
        sel = stratified_select(verified, task.workers_needed, rng)
        decisions = issue_masks(
            [f.pseudonym for f in files],
            [f.pseudonym for f in sel.selected],
            rng,
            additive_bound,
            multiplicative_max,
        )
        outcome = RecruitmentOutcome(task.task_id, decisions, sel.shortfall, aborted=False)
    if trace:
        outcome.transcript = [
            candidate_record(task, f, outcome.decisions[f.pseudonym].selected) for f in files
        ]
    return outcome


def candidate_record(task: TaskSpec, f: CandidateFile, selected: int) -> dict:
    """SP-side transcript line: commitments, responses, band and booleans only."""
    return {
        "round": task.round,
        "task": task.task_id,
        "pseudonym": f.pseudonym,
        "commitments": [c.to_bytes().hex() for c in f.commitments],
        "gate_passed": f.gate_passed,
        "responses": None if f.responses is None else [r.to_bytes().hex() for r in f.responses],
        "band": f.band,
        "verified": f.verified,
        "selected": selected,
    }


def decisions_by_pseudonym(outcome: RecruitmentOutcome) -> Mapping[str, MaskPair]:
    return {p: d.mask_pair for p, d in outcome.decisions.items() if d.mask_pair is not None}
