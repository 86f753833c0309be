"""Prime-field arithmetic and deterministic (t, n) Shamir sharing.

Wire labels are 128-bit strings, so the default field is the smallest prime
above 2**128. Sharing is deterministic: polynomial coefficients come from a
keyed PRG over the caller's randomness, so the same (secret, params) always
yields the same shares.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

from .rng import HashPrg

P128 = 2**128 + 51


class SharingError(ValueError):
    pass


def field_bytes(p: int) -> int:
    return (p.bit_length() + 7) // 8


@dataclass(frozen=True, slots=True)
class FieldElement:
    value: int
    p: int = P128

    def __post_init__(self):
        if not 0 <= self.value < self.p:
            raise ValueError(f"{self.value} not reduced mod {self.p}")

    @classmethod
    def of(cls, value: int, p: int = P128) -> "FieldElement":
        return cls(value % p, p)

    def _coerce(self, other) -> int:
        if isinstance(other, FieldElement):
            if other.p != self.p:
                raise ValueError("field mismatch")
            return other.value
        return other % self.p

    def __add__(self, other):
        return FieldElement((self.value + self._coerce(other)) % self.p, self.p)

    __radd__ = __add__

    def __sub__(self, other):
        return FieldElement((self.value - self._coerce(other)) % self.p, self.p)

    def __rsub__(self, other):
        return FieldElement((self._coerce(other) - self.value) % self.p, self.p)

    def __mul__(self, other):
        return FieldElement(self.value * self._coerce(other) % self.p, self.p)

    __rmul__ = __mul__

    def __neg__(self):
        return FieldElement(-self.value % self.p, self.p)

    def inverse(self) -> "FieldElement":
        if self.value == 0:
            raise ZeroDivisionError("zero has no inverse")
        return FieldElement(pow(self.value, -1, self.p), self.p)

    def __truediv__(self, other):
        return self * FieldElement(self._coerce(other), self.p).inverse()

    def to_bytes(self) -> bytes:
        return self.value.to_bytes(field_bytes(self.p), "little")

    @classmethod
    def from_bytes(cls, data: bytes, p: int = P128) -> "FieldElement":
        if len(data) != field_bytes(p):
            raise ValueError("wrong encoding width")
        return cls(int.from_bytes(data, "little"), p)


@dataclass(frozen=True, slots=True)
class Share:
    index: int
    value: FieldElement

    def __post_init__(self):
        if self.index < 1:
            raise SharingError("share index must be >= 1")

    def to_bytes(self) -> bytes:
        return self.index.to_bytes(2, "big") + self.value.to_bytes()

    @classmethod
    def from_bytes(cls, data: bytes, p: int = P128) -> "Share":
        return cls(int.from_bytes(data[:2], "big"), FieldElement.from_bytes(data[2:], p))

    def canonical(self) -> bytes:
        return self.to_bytes()


@dataclass(frozen=True, slots=True)
class SharingParams:
    n: int
    t: int
    randomness: bytes
    p: int = P128

    def __post_init__(self):
        if not 1 <= self.t <= self.n:
            raise SharingError(f"need 1 <= t <= n, got t={self.t}, n={self.n}")
        if self.p <= self.n:
            raise SharingError(f"field too small: p={self.p} <= n={self.n}")


@lru_cache(maxsize=1024)
def derive_coefficients(randomness: bytes, t: int, p: int = P128) -> tuple[int, ...]:
    """The t-1 non-constant coefficients a_1..a_{t-1} drawn from PRG(randomness)."""
    prg = HashPrg(b"vosc.shamir\x00" + randomness)
    return tuple(prg.randbelow(p) for _ in range(t - 1))


def _horner(secret: int, coeffs: Sequence[int], x: int, p: int) -> int:
    acc = 0
    # x <= n is small, so deferring the reduction is cheaper than reducing per step
    for c in reversed(coeffs):
        acc = acc * x + c
    return (acc * x + secret) % p


def share_with_coefficients(alpha: int, secret: int, coeffs: Sequence[int], p: int) -> Share:
    return Share(alpha, FieldElement(_horner(secret % p, coeffs, alpha, p), p))


def _as_int(s, p: int) -> int:
    if isinstance(s, FieldElement):
        if s.p != p:
            raise SharingError("secret lives in a different field")
        return s.value
    return s % p


def share(alpha: int, s, params: SharingParams) -> Share:
    if not 1 <= alpha <= params.n:
        raise SharingError(f"share index {alpha} out of range [1, {params.n}]")
    coeffs = derive_coefficients(params.randomness, params.t, params.p)
    return share_with_coefficients(alpha, _as_int(s, params.p), coeffs, params.p)


@lru_cache(maxsize=512)
def _share_vector(secret: int, n: int, t: int, randomness: bytes, p: int) -> tuple[int, ...]:
    coeffs = derive_coefficients(randomness, t, p)
    return tuple(_horner(secret, coeffs, x, p) for x in range(1, n + 1))


def share_all(s, params: SharingParams) -> list[Share]:
    values = _share_vector(_as_int(s, params.p), params.n, params.t, params.randomness, params.p)
    return [Share(i, FieldElement(v, params.p)) for i, v in enumerate(values, start=1)]


def share_value(alpha: int, s, params: SharingParams) -> int:
    """Raw integer value of the alpha-th share, served from the vector cache."""
    if not 1 <= alpha <= params.n:
        raise SharingError(f"share index {alpha} out of range [1, {params.n}]")
    vec = _share_vector(_as_int(s, params.p), params.n, params.t, params.randomness, params.p)
    return vec[alpha - 1]


@lru_cache(maxsize=256)
def lagrange_weights_at_zero(indices: tuple[int, ...], p: int) -> tuple[int, ...]:
    num = 1
    for x in indices:
        num = num * x % p
    weights = []
    for i in indices:
        den = i
        for j in indices:
            if j != i:
                den = den * (j - i) % p
        weights.append(num * pow(den, -1, p) % p)
    return tuple(weights)


def reconstruct(shares: Iterable[Share], t: int) -> FieldElement:
    """Interpolate at zero over the t lowest-indexed shares."""
    shares = sorted(shares, key=lambda s: s.index)
    if len(shares) < t:
        raise SharingError(f"insufficient shares: {len(shares)} < {t}")
    indices = [s.index for s in shares]
    if len(set(indices)) != len(indices):
        raise SharingError("duplicate share indices")
    use = shares[:t]
    p = use[0].value.p
    if any(s.value.p != p for s in use):
        raise SharingError("shares from different fields")
    weights = lagrange_weights_at_zero(tuple(s.index for s in use), p)
    return FieldElement(sum(w * s.value.value for w, s in zip(weights, use)) % p, p)
