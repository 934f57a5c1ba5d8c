"""ElGamal over Z_p^*, fixed-point plaintext encoding and XOR pseudonyms.

Everything here is a pure function of its arguments plus an explicit
``random.Random``; Python ints carry the arbitrary-precision arithmetic.
"""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass, field
from typing import Iterable

from rdpptd.errors import DomainError

# 256-bit safe prime p = 2q + 1 and a generator of the full group Z_p^*.
DEFAULT_P = 0x988536F84B90970E34B7FED6829E20D6AB3E9DCB97D128E3A9C4DF5B58B1C217
DEFAULT_GENERATOR = 11

_MR_BASES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71)


def is_probable_prime(n: int) -> bool:
    """Miller-Rabin with fixed bases (deterministic below 3.3e24)."""
    if n < 2:
        return False
    for b in _MR_BASES:
        if n % b == 0:
            return n == b
    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    for a in _MR_BASES:
        x = pow(a, d, n)
        if x == 1 or x == n - 1:
            continue
        for _ in range(s - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


@dataclass(frozen=True)
class GroupParams:
    p: int = DEFAULT_P
    c: int = DEFAULT_GENERATOR

    def __post_init__(self) -> None:
        if self.p <= 3 or not is_probable_prime(self.p):
            raise DomainError(f"modulus must be a prime > 3, got {self.p}")
        if not 1 < self.c < self.p:
            raise DomainError("generator must satisfy 1 < c < p")


@dataclass(frozen=True)
class PublicKey:
    c: int
    h: int
    p: int


@dataclass(frozen=True)
class KeyPair:
    secret: int
    public: PublicKey

    @property
    def params(self) -> GroupParams:
        return GroupParams(self.public.p, self.public.c)


@dataclass(frozen=True)
class Ciphertext:
    c1: int
    c2: int


def keygen(params: GroupParams, rng: random.Random, secret: int | None = None) -> KeyPair:
    """Draw ``secret`` uniformly from [1, p-2]; ``secret`` forces it (tests)."""
    p = params.p
    if secret is None:
        secret = rng.randint(1, p - 2)
    elif not 1 <= secret <= p - 2:
        raise DomainError("secret exponent must lie in [1, p-2]")
    return KeyPair(secret, PublicKey(params.c, pow(params.c, secret, p), p))


def encrypt(pk: PublicKey, m: int, rng: random.Random, k: int | None = None) -> Ciphertext:
    """Encrypt ``m`` in [1, p-1]. ``k`` forces the ephemeral exponent (tests)."""
    p = pk.p
    if not 1 <= m <= p - 1:
        raise DomainError(f"plaintext outside [1, p-1]: {m}")
    if k is None:
        k = rng.randint(1, p - 2)
    return Ciphertext(pow(pk.c, k, p), m * pow(pk.h, k, p) % p)


def decrypt(kp: KeyPair, ct: Ciphertext) -> int:
    p = kp.public.p
    shared = pow(ct.c1, kp.secret, p)
    return ct.c2 * pow(shared, -1, p) % p


@dataclass(frozen=True)
class FixedPointCodec:
    """Signed reals <-> plaintexts: ``round(x * scale) + offset``.

    The offset defaults to ``modulus // 2`` so negative values land in the
    positive plaintext range.
    """

    scale: int = 10**6
    modulus: int = DEFAULT_P
    offset: int = field(default=-1)

    def __post_init__(self) -> None:
        if self.scale <= 0:
            raise DomainError("scale must be positive")
        if self.offset < 0:
            object.__setattr__(self, "offset", self.modulus // 2)

    def encode(self, x: float) -> int:
        n = round(x * self.scale) + self.offset
        if not 1 <= n <= self.modulus - 1:
            raise DomainError(f"value {x!r} overflows the plaintext range")
        return n

    def decode(self, n: int) -> float:
        return (n - self.offset) / self.scale


def encode_real(codec: FixedPointCodec, x: float) -> int:
    return codec.encode(x)


def decode_real(codec: FixedPointCodec, n: int) -> float:
    return codec.decode(n)


# -- canonical serialization ------------------------------------------------


def serialize_int(n: int) -> bytes:
    """Sign byte, 4-byte big-endian length, big-endian magnitude."""
    mag = abs(n)
    body = mag.to_bytes((mag.bit_length() + 7) // 8, "big")
    return (b"\x01" if n < 0 else b"\x00") + len(body).to_bytes(4, "big") + body


def serialize_ints(values: Iterable[int]) -> bytes:
    values = list(values)
    return len(values).to_bytes(4, "big") + b"".join(serialize_int(v) for v in values)


def deserialize_ints(data: bytes) -> list[int]:
    count = int.from_bytes(data[:4], "big")
    pos, out = 4, []
    for _ in range(count):
        neg = data[pos] == 1
        length = int.from_bytes(data[pos + 1 : pos + 5], "big")
        pos += 5
        mag = int.from_bytes(data[pos : pos + length], "big")
        pos += length
        out.append(-mag if neg else mag)
    if pos != len(data):
        raise DomainError("trailing bytes after integer sequence")
    return out


# -- pseudonyms ---------------------------------------------------------------


@dataclass(frozen=True)
class Pseudonym:
    value: bytes

    def hex(self) -> str:
        return self.value.hex()


def _hash_to_width(data: bytes, width: int) -> bytes:
    out = b""
    counter = 0
    while len(out) < width:
        out += hashlib.sha256(counter.to_bytes(4, "big") + data).digest()
        counter += 1
    return out[:width]


def make_pseudonym(identity: bytes, authority_secret: int, salt: int) -> Pseudonym:
    """``identity XOR H(secret * salt)`` with H stretched to the identity width."""
    if not identity:
        raise DomainError("identity must be nonempty")
    pad = _hash_to_width(serialize_int(authority_secret * salt), len(identity))
    return Pseudonym(bytes(a ^ b for a, b in zip(identity, pad)))


def identity_bytes(worker_index: int, width: int = 8) -> bytes:
    return worker_index.to_bytes(width, "big")

