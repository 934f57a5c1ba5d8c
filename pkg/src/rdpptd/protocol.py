"""Four-party masked truth discovery (workers, SP, TA, DR).

A selected worker masks its reading ``x`` as ``y = x + a`` and ``z = x * b``
with the pair ``(a, b)`` it shares with SP, and encrypts both under DR's
ElGamal key. Per iteration:

    DR -> SP   y_i - est             (signed distance on masked data)
    SP -> TA   (w_i, b_i)            SP strips a_i and computes CRH weights
    TA -> DR   w_i * C_i / b_i, sum  TA folds in reputation and unmasks b_i
    DR         est' = sum z_i * wt_i / sigma

Since ``z_i * w_i C_i / b_i = x_i w_i C_i`` the result is the plaintext RTD
update. DR never sees a mask, SP never sees an estimate or a raw reading;
:func:`check_confidentiality` asserts that on a transcript.
"""

from __future__ import annotations

import dataclasses
import json
import math
import random
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from rdpptd import crypto
from rdpptd.errors import DomainError, ProtocolAbort
from rdpptd.recruitment import MaskPair, TaskSpec, issue_masks
from rdpptd.reputation import FeedbackBit, ReputationStore
from rdpptd.truth import IterationConfig, ZERO_INIT_OFFSET, distance_weights

GAMMA_FRACTION = 0.05
GAMMA_FLOOR = 0.5


@dataclass(frozen=True)
class MaskedReading:
    y: float
    z: float
    ct: tuple[crypto.Ciphertext, crypto.Ciphertext]


# -- typed messages -------------------------------------------------------------


@dataclass(frozen=True)
class EncryptedReadings:
    ciphertexts: dict[str, tuple[crypto.Ciphertext, crypto.Ciphertext]]


@dataclass(frozen=True)
class Distances:
    distances: dict[str, float]


@dataclass(frozen=True)
class WeightsAndMasks:
    weights: dict[str, float]
    multiplicative: dict[str, float]


@dataclass(frozen=True)
class AdjustedWeights:
    adjusted: dict[str, float]
    sigma: float


@dataclass(frozen=True)
class FinalDistances:
    distances: dict[str, float]
    gamma: float


@dataclass(frozen=True)
class FeedbackReport:
    bits: dict[str, int]


@dataclass(frozen=True)
class RewardNotice:
    rewards: dict[str, float]


@dataclass(frozen=True)
class Message:
    round: int
    task: str
    iteration: int
    sender: str
    receiver: str
    payload: object

    def to_json(self) -> str:
        body = _jsonable(self.payload)
        return json.dumps(
            {
                "round": self.round,
                "task": self.task,
                "iteration": self.iteration,
                "sender": self.sender,
                "receiver": self.receiver,
                "kind": type(self.payload).__name__,
                "payload": body,
            },
            sort_keys=True,
        )


def _jsonable(obj: object) -> object:
    if isinstance(obj, crypto.Ciphertext):
        return [format(obj.c1, "x"), format(obj.c2, "x")]
    if dataclasses.is_dataclass(obj):
        return {f.name: _jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, float):
        return float(f"{obj:.17g}")
    return obj


class Transcript:
    def __init__(self) -> None:
        self.messages: list[Message] = []

    def send(self, msg: Message) -> object:
        self.messages.append(msg)
        return msg.payload

    def received_by(self, role: str) -> list[Message]:
        return [m for m in self.messages if m.receiver == role]

    def to_jsonl(self) -> str:
        return "".join(m.to_json() + "\n" for m in self.messages)


# payload kinds each role may receive, and field names it must never see
_ROLE_FORBIDDEN = {
    "DR": {"additive", "multiplicative", "mask", "alpha", "beta", "x", "reading"},
    "SP": {"estimate", "x", "reading", "init"},
}
_ROLE_ALLOWED = {
    "DR": {EncryptedReadings, AdjustedWeights},
    "SP": {EncryptedReadings, Distances, FinalDistances},
    "TA": {WeightsAndMasks, FeedbackReport},
}


def check_confidentiality(transcript: Transcript) -> None:
    """Raise ``AssertionError`` if any role received a payload it must not see."""
    for m in transcript.messages:
        allowed = _ROLE_ALLOWED.get(m.receiver)
        if allowed is not None and type(m.payload) not in allowed:
            raise AssertionError(f"{m.receiver} received {type(m.payload).__name__}")
        forbidden = _ROLE_FORBIDDEN.get(m.receiver, set())
        names = {f.name for f in dataclasses.fields(m.payload)}
        if names & forbidden:
            raise AssertionError(f"{m.receiver} saw fields {sorted(names & forbidden)}")


# -- per-party operations -------------------------------------------------------


def mask_and_encrypt(
    x: float,
    mask_pair: MaskPair,
    dr_public_key: crypto.PublicKey,
    rng: random.Random,
    codec: crypto.FixedPointCodec | None = None,
) -> MaskedReading:
    if mask_pair.multiplicative == 0:
        raise DomainError("multiplicative mask must be nonzero")
    codec = codec or crypto.FixedPointCodec(modulus=dr_public_key.p)
    y = x + mask_pair.additive
    z = x * mask_pair.multiplicative
    ct = (
        crypto.encrypt(dr_public_key, codec.encode(y), rng),
        crypto.encrypt(dr_public_key, codec.encode(z), rng),
    )
    return MaskedReading(y, z, ct)


def dr_distance(y: float, estimate: float) -> float:
    return y - estimate


def sp_weight(
    dr_values: Mapping[str, float], mask_pairs: Mapping[str, MaskPair], floor: float
) -> WeightsAndMasks:
    if len(dr_values) < 2:
        raise ProtocolAbort("fewer than two recruited workers")
    keys = list(dr_values)
    residuals = [dr_values[p] - mask_pairs[p].additive for p in keys]
    w = distance_weights(residuals, floor)
    return WeightsAndMasks(
        dict(zip(keys, w)), {p: mask_pairs[p].multiplicative for p in keys}
    )


def sp_residuals(dr_values: Mapping[str, float], mask_pairs: Mapping[str, MaskPair]) -> dict[str, float]:
    return {p: d - mask_pairs[p].additive for p, d in dr_values.items()}


def ta_adjust(msg: WeightsAndMasks, store: ReputationStore) -> AdjustedWeights:
    adjusted, sigma_terms = {}, []
    for p, w in msg.weights.items():
        if p not in store:
            store.audit.append(f"weight adjustment for unknown pseudonym {p}")
            raise ProtocolAbort(f"unknown pseudonym {p}")
        c = store.value(p)
        adjusted[p] = w * c / msg.multiplicative[p]
        sigma_terms.append(w * c)
    return AdjustedWeights(adjusted, math.fsum(sigma_terms))


def ta_fallback_adjust(msg: WeightsAndMasks, store: ReputationStore) -> AdjustedWeights:
    """Reputation-only weights (then uniform), mirroring the plaintext fallback."""
    reps = {p: store.value(p) for p in msg.weights}
    if math.fsum(reps.values()) <= 0:
        reps = {p: 1.0 for p in reps}
    adjusted = {p: reps[p] / msg.multiplicative[p] for p in reps}
    return AdjustedWeights(adjusted, math.fsum(reps.values()))


def dr_update(z_values: Mapping[str, float], adj: AdjustedWeights) -> float:
    if adj.sigma <= 0:
        raise DomainError("sigma must be positive")
    return math.fsum(z_values[p] * w for p, w in adj.adjusted.items()) / adj.sigma


def default_gamma(estimate: float) -> float:
    return max(GAMMA_FRACTION * abs(estimate), GAMMA_FLOOR)


def allocate_rewards(weights: Mapping[str, float], budget: float) -> dict[str, float]:
    total = math.fsum(weights.values())
    if total <= 0:
        return {p: budget / len(weights) for p in weights}
    return {p: w / total * budget for p, w in weights.items()}


# -- roles ----------------------------------------------------------------------


class DataRequester:
    def __init__(self, keypair: crypto.KeyPair, codec: crypto.FixedPointCodec | None = None):
        self.keypair = keypair
        self.codec = codec or crypto.FixedPointCodec(modulus=keypair.public.p)
        self.y: dict[str, float] = {}
        self.z: dict[str, float] = {}

    @property
    def public_key(self) -> crypto.PublicKey:
        return self.keypair.public

    def receive(self, msg: EncryptedReadings) -> None:
        self.y, self.z = {}, {}
        for p, (cy, cz) in msg.ciphertexts.items():
            self.y[p] = self.codec.decode(crypto.decrypt(self.keypair, cy))
            self.z[p] = self.codec.decode(crypto.decrypt(self.keypair, cz))

    def initial_estimate(self) -> float:
        m = math.fsum(self.y.values()) / len(self.y)
        return m if m != 0 else ZERO_INIT_OFFSET

    def distances(self, estimate: float) -> Distances:
        return Distances({p: dr_distance(y, estimate) for p, y in self.y.items()})


class ServicePlatform:
    def __init__(self, mask_pairs: Mapping[str, MaskPair]):
        self.mask_pairs = dict(mask_pairs)


class TrustAuthority:
    """Holds the live reputation store and the round-start snapshot."""

    def __init__(self, store: ReputationStore):
        self.store = store
        self.snapshot = store.snapshot()

    def begin_round(self) -> None:
        self.snapshot = self.store.snapshot()


@dataclass
class RoundOutcome:
    task_id: str
    estimate: float
    weights: dict[str, float]
    rewards: dict[str, float]
    feedback: list[FeedbackBit]
    iterations: int
    converged: bool
    initial_estimate: float
    fallback: bool = False
    history: list[float] = field(default_factory=list)


def run_round(
    task: TaskSpec,
    readings: Mapping[str, MaskedReading],
    sp: ServicePlatform,
    ta: TrustAuthority,
    dr: DataRequester,
    cfg: IterationConfig | None = None,
    transcript: Transcript | None = None,
) -> RoundOutcome:
    """Aggregate one task's masked readings into an estimate, rewards and feedback.

    Reputation comes from ``ta.snapshot``; feedback bits are returned, not
    applied. Raises :class:`ProtocolAbort` with fewer than two readings or
    an unknown pseudonym.
    """
    cfg = cfg or IterationConfig()
    tr = transcript if transcript is not None else Transcript()
    if len(readings) < 2:
        raise ProtocolAbort(f"task {task.task_id}: fewer than two recruited workers")

    def send(it: int, sender: str, receiver: str, payload: object):
        return tr.send(Message(task.round, task.task_id, it, sender, receiver, payload))

    upload = EncryptedReadings({p: r.ct for p, r in readings.items()})
    send(0, "workers", "SP", upload)
    dr.receive(send(0, "SP", "DR", upload))

    x = dr.initial_estimate()
    init = x
    history = [x]
    weights: dict[str, float] = {}
    converged = fallback = False
    n = 0
    while n < cfg.max_iters:
        dists = send(n, "DR", "SP", dr.distances(x))
        wm = send(n, "SP", "TA", sp_weight(dists.distances, sp.mask_pairs, cfg.distance_floor))
        weights = wm.weights
        adj = ta_adjust(wm, ta.snapshot)
        if adj.sigma <= 0:
            adj = send(n, "TA", "DR", ta_fallback_adjust(wm, ta.snapshot))
            x = dr_update(dr.z, adj)
            history.append(x)
            fallback = True
            break
        send(n, "TA", "DR", adj)
        x_next = dr_update(dr.z, adj)
        n += 1
        history.append(x_next)
        step = abs(x_next - x)
        x = x_next
        if step < cfg.delta:
            converged = True
            break

    gamma = task.gamma if task.gamma is not None else default_gamma(x)
    final = send(n, "DR", "SP", FinalDistances(dr.distances(x).distances, gamma))
    residuals = sp_residuals(final.distances, sp.mask_pairs)
    bits = {p: int(abs(r) <= final.gamma) for p, r in residuals.items()}
    send(n, "SP", "TA", FeedbackReport(bits))
    rewards = allocate_rewards(weights, task.budget)
    send(n, "SP", "workers", RewardNotice(rewards))
    return RoundOutcome(
        task.task_id,
        x,
        weights,
        rewards,
        [FeedbackBit(p, b) for p, b in bits.items()],
        n,
        converged,
        init,
        fallback,
        history,
    )


def simulate_round(
    task: TaskSpec,
    data: Mapping[str, float],
    store: ReputationStore,
    rng: random.Random,
    cfg: IterationConfig | None = None,
    dr_keypair: crypto.KeyPair | None = None,
    additive_bound: float = 3500.0,
    multiplicative_max: float = 8.0,
    transcript: Transcript | None = None,
) -> RoundOutcome:
    """Issue masks, mask/encrypt ``data`` and run the protocol end to end."""
    kp = dr_keypair or crypto.keygen(crypto.GroupParams(), rng)
    decisions = issue_masks(list(data), list(data), rng, additive_bound, multiplicative_max)
    pairs = {p: d.mask_pair for p, d in decisions.items()}
    dr = DataRequester(kp)
    readings = {p: mask_and_encrypt(x, pairs[p], kp.public, rng, dr.codec) for p, x in data.items()}
    return run_round(task, readings, ServicePlatform(pairs), TrustAuthority(store), dr, cfg, transcript)


def messages_of(transcript: Transcript, kind: type) -> list[Message]:
    return [m for m in transcript.messages if isinstance(m.payload, kind)]


def payload_kinds(transcript: Transcript) -> Sequence[str]:
    return sorted({type(m.payload).__name__ for m in transcript.messages})
