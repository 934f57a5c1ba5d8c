"""Scenario runner: pools, per-task sensing, all aggregation methods, metrics.

One ``(scenario, seed)`` run:

1. Build the worker pool (plus any planted workers) and give each a
   pseudonym from the trust authority secret.
2. For every task: draw candidates, generate their readings, aggregate with
   each configured method, and feed the resulting success bits back into that
   method's reputation store.
3. After each reported round emit one :class:`ResultRow` per method.

Random streams are keyed by ``(seed, purpose, task index)`` and never by the
scenario name, so scenarios that differ only in an attack parameter share
pools, truths and noise draws.
"""

from __future__ import annotations

import json
import math
import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from rdpptd import crypto, truth
from rdpptd import population as popmod
from rdpptd.errors import ConfigError, ProtocolAbort
from rdpptd.harness.config import ScenarioConfig
from rdpptd.harness.ground_truth import GroundTruthRecord, load_ground_truth, synthetic_ground_truth
from rdpptd.metrics import MetricSample, QualityParams, mean_quality, rmse
from rdpptd.protocol import (
    DataRequester,
    ServicePlatform,
    Transcript,
    TrustAuthority,
    default_gamma,
    mask_and_encrypt,
    run_round,
)
from rdpptd.recruitment import TaskSpec, WorkerState, decisions_by_pseudonym, recruit
from rdpptd.reputation import FeedbackBit, ReputationStore, reputation_mae

# stream purposes
_POOL, _TASK, _ATTR, _CRYPTO, _TRUTH, _AUTH = range(6)

# task windows around each ground-truth record
TIME_HALF_WIDTH = 1800.0
GEO_HALF_WIDTH = 0.05


@dataclass(frozen=True)
class ResultRow:
    scenario: str
    seed: int
    round: int
    method: str
    rmse: float
    mean_quality: float
    reputation_mae: float
    excluded_count: int


@dataclass
class SeedRun:
    rows: list[ResultRow]
    pool: list[popmod.WorkerProfile]
    transcript: list[str] = field(default_factory=list)


def _py_rng(seed: int, purpose: int) -> random.Random:
    state = np.random.SeedSequence([seed, purpose]).generate_state(4)
    return random.Random(int.from_bytes(np.asarray(state, dtype=np.uint32).tobytes(), "big"))


def load_truths(cfg: ScenarioConfig, seed: int) -> list[GroundTruthRecord]:
    n = (cfg.warmup_rounds + cfg.rounds) * cfg.tasks_per_round
    if cfg.ground_truth_path:
        recs = load_ground_truth(cfg.ground_truth_path)
        if len(recs) < n:
            raise ConfigError(f"{cfg.ground_truth_path}: {len(recs)} records, run needs {n}")
        return recs
    rng = np.random.default_rng([seed, _TRUTH])
    return synthetic_ground_truth(n, (cfg.truth_min, cfg.truth_max), rng)


def build_pool(cfg: ScenarioConfig, seed: int) -> list[popmod.WorkerProfile]:
    rng = np.random.default_rng([seed, _POOL])
    auth = np.random.default_rng([seed, _AUTH])
    secret, salt = (int(v) for v in auth.integers(1, 2**62, size=2))
    total = cfg.pool_size + len(cfg.planted) * cfg.planted_per_level
    names = [crypto.make_pseudonym(crypto.identity_bytes(i), secret, salt).hex() for i in range(total)]
    regime = "collusion" if cfg.colluded else "default"
    pool = popmod.generate_pool(cfg.pool_size, rng, regime, cfg.xi, names[: cfg.pool_size])
    i = cfg.pool_size
    for c in cfg.planted:
        for _ in range(cfg.planted_per_level):
            pool.append(popmod.WorkerProfile(i, names[i], popmod.planted_category(c), c, planted=True))
            i += 1
    return pool


def _half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def pick_candidates(
    n_pool: int,
    mw_idx: np.ndarray,
    honest_idx: np.ndarray,
    k: int,
    n_cand: int,
    theta: float | None,
    rng: np.random.Generator,
) -> tuple[np.ndarray, int]:
    """Candidate indices and the size of the core (the first ``core`` entries).

    Without an attack, candidates are uniform over the pool. Under attack the
    core holds ``round(theta * k)`` malicious workers and extras keep the
    same ratio as far as the pool allows.
    """
    n_cand = min(n_cand, n_pool)
    if theta is None:
        return rng.choice(n_pool, size=n_cand, replace=False), min(k, n_cand)
    n_mw = min(_half_up(theta * k), len(mw_idx))
    n_h = min(k - n_mw, len(honest_idx))
    extra = n_cand - n_mw - n_h
    e_mw = min(_half_up(theta * extra), len(mw_idx) - n_mw)
    e_h = min(extra - e_mw, len(honest_idx) - n_h)
    mw = rng.choice(mw_idx, size=n_mw + e_mw, replace=False)
    hon = rng.choice(honest_idx, size=n_h + e_h, replace=False)
    core = np.concatenate([mw[:n_mw], hon[:n_h]])
    rest = np.concatenate([mw[n_mw:], hon[n_h:]])
    rng.shuffle(core)
    rng.shuffle(rest)
    return np.concatenate([core, rest]).astype(int), len(core)


def feedback_bits(
    names: Sequence[str], values: Sequence[float], estimate: float, gamma: float | None
) -> list[FeedbackBit]:
    g = gamma if gamma is not None else default_gamma(estimate)
    return [FeedbackBit(p, int(abs(v - estimate) <= g)) for p, v in zip(names, values)]


class _MethodState:
    def __init__(self, pool: Sequence[popmod.WorkerProfile]):
        store = ReputationStore()
        for w in pool:
            store.register(w.pseudonym)
        self.ta = TrustAuthority(store)
        self.samples: list[MetricSample] = []
        self.aborted = 0

    def reset(self) -> None:
        self.samples = []
        self.aborted = 0


def run_seed(cfg: ScenarioConfig, seed: int) -> SeedRun:
    pool = build_pool(cfg, seed)
    truths = load_truths(cfg, seed)
    mal = np.array([w.malicious for w in pool])
    mw_idx = np.flatnonzero(mal)
    honest_idx = np.flatnonzero(~mal)
    noise = popmod.NoiseParams(
        cfg.small_noise_frac,
        cfg.small_noise_floor,
        cfg.large_noise_frac,
        cfg.large_noise_floor,
        (cfg.truth_min + cfg.truth_max) / 2.0,
        cfg.wide_half_width,
    )
    attack = popmod.AttackConfig(
        cfg.theta,
        cfg.xi,
        cfg.colluded,
        (cfg.collusion_offset_min, cfg.collusion_offset_max),
        cfg.collusion_jitter,
    )
    icfg = truth.IterationConfig(cfg.delta, cfg.max_iters)
    qparams = QualityParams(cfg.lam)
    magnitude = max(abs(cfg.truth_min), abs(cfg.truth_max), *(abs(r.true_value) for r in truths))
    additive_bound = cfg.additive_bound if cfg.additive_bound is not None else 100.0 * magnitude

    states = {m: _MethodState(pool) for m in cfg.methods}
    # weighted_mean reads the RTD-maintained reputations when RTD is co-run
    wm_source = "rtd" if "rtd" in states else "weighted_mean"

    planted = {w.pseudonym: w.true_reputation for w in pool if w.planted}
    tracked = planted or {w.pseudonym: w.true_reputation for w in pool}

    secure = "rdpp_td" in states
    crypto_rng = _py_rng(seed, _CRYPTO)
    dr = DataRequester(crypto.keygen(crypto.GroupParams(), crypto_rng)) if secure else None
    lines: list[str] = []
    rows: list[ResultRow] = []
    total_rounds = cfg.warmup_rounds + cfg.rounds
    task_index = 0

    for rnd in range(total_rounds):
        measured = rnd >= cfg.warmup_rounds
        report_round = rnd - cfg.warmup_rounds + 1
        for st in states.values():
            st.ta.begin_round()
            st.reset()
        n_tasks = cfg.tasks_per_round
        if measured and report_round == cfg.rounds:
            n_tasks = cfg.tasks - (cfg.rounds - 1) * cfg.tasks_per_round
        theta = cfg.theta if measured and cfg.theta > 0 else None

        for _ in range(n_tasks):
            t = task_index
            task_index += 1
            rec = truths[t]
            g = rec.true_value
            trng = np.random.default_rng([seed, _TASK, t])
            idx, core = pick_candidates(
                len(pool), mw_idx, honest_idx, cfg.workers_per_task, cfg.candidates_per_task, theta, trng
            )
            cands = [pool[i] for i in idx]
            values = popmod.sense_many(cands, g, trng, noise)
            if theta is not None and cfg.colluded:
                mws = [p for p in cands if p.malicious]
                if mws:
                    col = popmod.collude(mws, g, trng, attack)
                    values = np.array([col.values.get(p.pseudonym, v) for p, v in zip(cands, values)])
            cnames = [p.pseudonym for p in cands]
            core_names, core_vals = cnames[:core], [float(v) for v in values[:core]]

            for method, st in states.items():
                if method == "rdpp_td":
                    continue
                est = _aggregate(method, core_names, core_vals, states, wm_source, st, icfg)
                st.samples.append(MetricSample(rec.task_id, est, g))
                st.ta.store.apply(feedback_bits(core_names, core_vals, est, cfg.gamma))

            if secure:
                st = states["rdpp_td"]
                spec = TaskSpec(
                    rec.task_id,
                    report_round,
                    (rec.timestamp - TIME_HALF_WIDTH, rec.timestamp + TIME_HALF_WIDTH),
                    (rec.lon - GEO_HALF_WIDTH, rec.lon + GEO_HALF_WIDTH),
                    (rec.lat - GEO_HALF_WIDTH, rec.lat + GEO_HALF_WIDTH),
                    cfg.rep_threshold,
                    cfg.budget,
                    cfg.workers_per_task,
                    cfg.gamma,
                )
                arng = np.random.default_rng([seed, _ATTR, t])
                workers = []
                for p in cands:
                    attrs, inside = p.draw_attributes(spec.windows, arng, cfg.in_window_prob)
                    liar = (not inside) and bool(arng.random() < cfg.liar_prob)
                    workers.append(WorkerState(p.pseudonym, attrs, honest=not liar))
                reading = dict(zip(cnames, (float(v) for v in values)))
                trace = cfg.trace and measured
                outcome = recruit(
                    spec, workers, st.ta.snapshot, crypto_rng, additive_bound, cfg.multiplicative_max, trace
                )
                if trace:
                    lines.extend(_tagged(cfg, seed, "recruitment", r) for r in outcome.transcript)
                pairs = decisions_by_pseudonym(outcome)
                if outcome.aborted or len(pairs) < 2:
                    st.aborted += 1
                    continue
                readings = {
                    p: mask_and_encrypt(reading[p], pairs[p], dr.public_key, crypto_rng, dr.codec)
                    for p in pairs
                }
                tr = Transcript() if trace else None
                try:
                    res = run_round(spec, readings, ServicePlatform(pairs), st.ta, dr, icfg, tr)
                except ProtocolAbort:
                    st.aborted += 1
                    continue
                if tr is not None:
                    lines.extend(_tagged(cfg, seed, "protocol", m.to_json()) for m in tr.messages)
                st.samples.append(MetricSample(rec.task_id, res.estimate, g))
                st.ta.store.apply(res.feedback)

        if measured:
            for method in sorted(states):
                rows.append(_row(cfg, seed, report_round, method, states[method], qparams, tracked))

    return SeedRun(rows, pool, lines)


def _aggregate(method, names, vals, states, wm_source, st, icfg) -> float:
    if method == "mean":
        return truth.mean(vals)
    if method == "median":
        return truth.median(vals)
    if method == "crh":
        return truth.crh(vals, icfg).estimate
    snap = (states[wm_source] if method == "weighted_mean" else st).ta.snapshot
    obs = [truth.Observation(p, v, snap.value(p)) for p, v in zip(names, vals)]
    if method == "weighted_mean":
        return truth.weighted_mean(obs)
    return truth.rtd(obs, icfg).estimate


def _row(cfg, seed, rnd, method, st: _MethodState, qparams, tracked) -> ResultRow:
    est = st.ta.store.values()
    mae = reputation_mae({p: est[p] for p in tracked}, tracked)
    if st.samples:
        err = rmse(st.samples)
        nonzero = [s for s in st.samples if s.estimate != 0]
        q, excluded = mean_quality(st.samples, qparams) if nonzero else (math.nan, len(st.samples))
    else:
        err, q, excluded = math.nan, math.nan, 0
    return ResultRow(cfg.scenario, seed, rnd, method, err, q, mae, excluded + st.aborted)


def _tagged(cfg: ScenarioConfig, seed: int, kind: str, body) -> str:
    obj = body if isinstance(body, dict) else json.loads(body)
    return json.dumps({"scenario": cfg.scenario, "seed": seed, "kind": kind, **obj}, sort_keys=True)


def run_scenario(cfg: ScenarioConfig, jobs: int = 1) -> list[SeedRun]:
    """Run every seed of ``cfg``; with ``jobs > 1`` seeds run in worker processes."""
    if jobs > 1 and len(cfg.seeds) > 1:
        with ProcessPoolExecutor(max_workers=min(jobs, len(cfg.seeds))) as ex:
            runs = list(ex.map(run_seed, [cfg] * len(cfg.seeds), cfg.seeds))
    else:
        runs = [run_seed(cfg, s) for s in cfg.seeds]
    return runs


def all_rows(runs: Sequence[SeedRun]) -> list[ResultRow]:
    rows = [r for run in runs for r in run.rows]
    return sorted(rows, key=lambda r: (r.scenario, r.seed, r.round, r.method))
