"""Matrix-blinded range commitments.

A worker commits to the monomials ``(T^3, T^2, T, 1)`` of a fixed-point
attribute ``T`` under a secret 4x4 integer key ``K``::

    commitment = tau  * |det K| * K^{-1} v   (= tau * sign(det K) * adj(K) v)
    response   = tau' * K^T d

where ``d`` holds the coefficients of ``(T - a)(b - T)(T + eps)``. The inner
product of the two collapses to ``tau * tau' * |det K| * <v, d>``, whose sign
is the sign of the cubic; it is non-negative exactly when ``a <= T <= b``.
All arithmetic is on Python ints, so the sign test is exact.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Sequence

from rdpptd.crypto import serialize_ints
from rdpptd.errors import DomainError

Matrix = tuple[tuple[int, int, int, int], ...]

DEFAULT_MU_BITS = 128
KEY_ENTRY_BITS = 64

# fixed-point scale per attribute kind and the largest magnitude in the domain
TIME_SCALE = 1  # seconds
GEO_SCALE = 10**6
TIME_MAX = 2**32
LON_MAX = 180 * GEO_SCALE
LAT_MAX = 90 * GEO_SCALE


def epsilon_for(max_magnitude: int) -> int:
    """Public shift keeping ``T + eps`` positive over ``[-max, max]``."""
    return 2 * max_magnitude


def to_fixed(x: float, scale: int) -> int:
    return round(x * scale)


@dataclass(frozen=True)
class AttributeVector:
    monomials: tuple[int, int, int, int]


@dataclass(frozen=True)
class CommitmentKey:
    matrix: Matrix
    det: int

    @property
    def det_abs(self) -> int:
        return abs(self.det)

    @classmethod
    def from_matrix(cls, rows: Sequence[Sequence[int]]) -> "CommitmentKey":
        m = tuple(tuple(int(x) for x in r) for r in rows)
        if len(m) != 4 or any(len(r) != 4 for r in m):
            raise DomainError("commitment key must be 4x4")
        return cls(m, det4(m))  # type: ignore[arg-type]


@dataclass(frozen=True)
class Commitment:
    blinded: tuple[int, int, int, int]

    def to_bytes(self) -> bytes:
        return serialize_ints(self.blinded)


@dataclass(frozen=True)
class IntervalCheckVector:
    coeffs: tuple[int, int, int, int]


@dataclass(frozen=True)
class CheckResponse:
    blinded: tuple[int, int, int, int]

    def to_bytes(self) -> bytes:
        return serialize_ints(self.blinded)


def _det3(m: Sequence[Sequence[int]]) -> int:
    return (
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    )


def _minor(m: Sequence[Sequence[int]], i: int, j: int) -> list[list[int]]:
    return [[m[r][c] for c in range(4) if c != j] for r in range(4) if r != i]


def det4(m: Sequence[Sequence[int]]) -> int:
    return sum((-1) ** j * m[0][j] * _det3(_minor(m, 0, j)) for j in range(4))


def adjugate4(m: Sequence[Sequence[int]]) -> list[list[int]]:
    """Transposed cofactor matrix, so ``m @ adj = det * I``."""
    return [[(-1) ** (i + j) * _det3(_minor(m, j, i)) for j in range(4)] for i in range(4)]


def random_key(rng: random.Random, entry_bits: int = KEY_ENTRY_BITS) -> CommitmentKey:
    bound = 1 << entry_bits
    while True:
        m = tuple(tuple(rng.randint(-bound, bound) for _ in range(4)) for _ in range(4))
        d = det4(m)
        if d != 0:
            return CommitmentKey(m, d)  # type: ignore[arg-type]


def _blinding(rng: random.Random, mu_bits: int) -> int:
    # positive and exactly mu bits wide
    return rng.getrandbits(mu_bits - 1) | (1 << (mu_bits - 1))


def make_attribute_vector(t: int) -> AttributeVector:
    t = int(t)
    return AttributeVector((t**3, t**2, t, 1))


def commit(
    key: CommitmentKey,
    v: AttributeVector,
    rng: random.Random,
    tau: int | None = None,
    mu_bits: int = DEFAULT_MU_BITS,
) -> Commitment:
    if key.det == 0:
        raise DomainError("commitment key is singular")
    if tau is None:
        tau = _blinding(rng, mu_bits)
    adj = adjugate4(key.matrix)
    sign = 1 if key.det > 0 else -1
    scale = tau * sign
    out = tuple(scale * sum(adj[i][j] * v.monomials[j] for j in range(4)) for i in range(4))
    return Commitment(out)  # type: ignore[arg-type]


def make_check_vector(a: int, b: int, epsilon: int) -> IntervalCheckVector:
    if a > b:
        raise DomainError(f"empty window [{a}, {b}]")
    if epsilon <= 0:
        raise DomainError("epsilon must be positive")
    return IntervalCheckVector((-1, a + b - epsilon, epsilon * (a + b) - a * b, -epsilon * a * b))


def respond(
    key: CommitmentKey,
    d: IntervalCheckVector,
    rng: random.Random,
    tau: int | None = None,
    mu_bits: int = DEFAULT_MU_BITS,
) -> CheckResponse:
    if tau is None:
        tau = _blinding(rng, mu_bits)
    k = key.matrix
    out = tuple(tau * sum(k[j][i] * d.coeffs[j] for j in range(4)) for i in range(4))
    return CheckResponse(out)  # type: ignore[arg-type]


def inner(a: Sequence[int], b: Sequence[int]) -> int:
    if len(a) != len(b):
        raise DomainError("arity mismatch")
    return sum(x * y for x, y in zip(a, b))


def verify(commitment: Commitment, response: CheckResponse) -> bool:
    return inner(commitment.blinded, response.blinded) >= 0
