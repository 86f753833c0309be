"""Ideal-registry multi-key homomorphic encryption.

Plaintexts live in a trusted registry; handles reveal only ids and key ids.
Partial decryptions are additive shares of an encoding of the result: every
participant except the lexicographically smallest key gets PRF(secret,
ct-id, pk), the smallest key gets the remainder. Any strict subset of shares
sums to a uniform value, and the encoding carries a 32-bit checksum so an
incomplete or mixed set of partials decodes to None (bottom).

Key generation takes no party index, and the ``idx`` argument of
``part_dec`` is accepted but ignored.
"""

from __future__ import annotations

import hashlib
import random
import threading
from dataclasses import dataclass, field
from typing import Callable, Sequence

from . import codec

CHECKSUM_BITS = 32


class MheError(Exception):
    pass


class UnknownHandle(MheError, KeyError):
    pass


class NotParticipant(MheError):
    pass


@dataclass(frozen=True)
class PublicKey:
    id: str

    def canonical(self) -> bytes:
        return b"pk:" + self.id.encode()


@dataclass(frozen=True)
class SecretKey:
    token: bytes = field(repr=False)
    pk: PublicKey

    def canonical(self) -> bytes:
        return b"sk:" + self.token


@dataclass(frozen=True)
class MheKeyPair:
    pk: PublicKey
    sk: SecretKey


@dataclass(frozen=True)
class Ciphertext:
    id: int
    pk: PublicKey
    bits: int

    def canonical(self) -> bytes:
        return codec.encode(("ct", self.id, self.pk.id, self.bits))


@dataclass(frozen=True)
class MheCircuit:
    id: str
    fn: Callable[[tuple[int, ...]], int] = field(compare=False, repr=False)
    out_bits: int = 64


@dataclass(frozen=True)
class EvaluatedCiphertext:
    id: str
    circuit_id: str
    inputs: tuple[int, ...]
    participants: tuple[str, ...]


@dataclass(frozen=True)
class PartialDecryption:
    pk_id: str
    ct_id: str
    value: int
    modulus: int


def sum_circuit(k: int, a: int) -> MheCircuit:
    return MheCircuit(f"sum:{k}:{a}", lambda xs: sum(xs), a + max(k, 1).bit_length())


def _checksum(y: int, out_bits: int) -> int:
    raw = codec.encode((y, out_bits))
    return int.from_bytes(hashlib.blake2b(raw, digest_size=4, person=b"vosc.mhe.chk").digest(), "big")


def share_modulus(circuit: MheCircuit, toy_modulus: int | None = None) -> int:
    return toy_modulus if toy_modulus else 1 << (circuit.out_bits + CHECKSUM_BITS)


def encode_result(y: int, circuit: MheCircuit, toy_modulus: int | None = None) -> int:
    if toy_modulus:
        return y % toy_modulus
    if not 0 <= y < 1 << circuit.out_bits:
        raise MheError(f"circuit output {y} exceeds {circuit.out_bits} bits")
    return (y << CHECKSUM_BITS) | _checksum(y, circuit.out_bits)


def fin_dec(circuit: MheCircuit, partials: Sequence[PartialDecryption],
            toy_modulus: int | None = None) -> int | None:
    """Sum the partials and decode; None when the checksum fails."""
    M = share_modulus(circuit, toy_modulus)
    if not partials or any(p.modulus != M for p in partials):
        return None
    s = sum(p.value for p in partials) % M
    if toy_modulus:
        return s
    y = s >> CHECKSUM_BITS
    if s & ((1 << CHECKSUM_BITS) - 1) != _checksum(y, circuit.out_bits):
        return None
    return y


class MheRegistry:
    def __init__(self, rng: random.Random | None = None, toy_modulus: int | None = None):
        self._rng = rng or random.Random(0)
        self._secret = self._rng.randbytes(32)
        self.toy_modulus = toy_modulus
        self._keys: dict[str, bytes] = {}
        self._cts: dict[int, tuple[str, int]] = {}
        self._handles: dict[int, Ciphertext] = {}
        self._evals: dict[str, tuple[EvaluatedCiphertext, int, int]] = {}
        self._next_ct = 1
        self._lock = threading.Lock()

    def keygen(self, lam: int = 128) -> MheKeyPair:
        with self._lock:
            while True:
                pk_id = self._rng.randbytes(8).hex()
                if pk_id not in self._keys:
                    break
            token = self._rng.randbytes(lam // 8)
            self._keys[pk_id] = token
        pk = PublicKey(pk_id)
        return MheKeyPair(pk, SecretKey(token, pk))

    def key_matches(self, sk: SecretKey, pk: PublicKey) -> bool:
        return isinstance(sk, SecretKey) and sk.pk == pk and self._keys.get(pk.id) == sk.token

    def is_well_formed(self, ct: Ciphertext, pk: PublicKey) -> bool:
        rec = self._cts.get(ct.id) if isinstance(ct, Ciphertext) else None
        return rec is not None and rec[0] == pk.id == ct.pk.id

    def enc(self, pk: PublicKey, x: int, bits: int = 64) -> Ciphertext:
        if pk.id not in self._keys:
            raise UnknownHandle(f"unregistered public key {pk.id}")
        if not 0 <= x < 1 << bits:
            raise MheError(f"plaintext {x} does not fit in {bits} bits")
        with self._lock:
            cid = self._next_ct
            self._next_ct += 1
            self._cts[cid] = (pk.id, x)
            ct = self._handles[cid] = Ciphertext(cid, pk, bits)
        return ct

    def ciphertext(self, ct_id: int) -> Ciphertext:
        try:
            return self._handles[ct_id]
        except KeyError:
            raise UnknownHandle(f"unknown ciphertext {ct_id}") from None

    def eval(self, circuit: MheCircuit, cts: Sequence[Ciphertext]) -> EvaluatedCiphertext:
        ids = tuple(ct.id for ct in cts)
        missing = [i for i in ids if i not in self._cts]
        if missing:
            raise UnknownHandle(f"unknown ciphertexts {missing}")
        hid = hashlib.sha256(codec.encode((circuit.id, ids))).hexdigest()[:24]
        with self._lock:
            hit = self._evals.get(hid)
            if hit is not None:
                return hit[0]
        # only the listed ciphertexts are read
        y = circuit.fn(tuple(self._cts[i][1] for i in ids))
        encoded = encode_result(y, circuit, self.toy_modulus)
        participants = tuple(sorted({self._cts[i][0] for i in ids}))
        handle = EvaluatedCiphertext(hid, circuit.id, ids, participants)
        with self._lock:
            self._evals.setdefault(hid, (handle, encoded, share_modulus(circuit, self.toy_modulus)))
        return handle

    def _prf(self, ct_id: str, pk_id: str, modulus: int) -> int:
        n = (modulus.bit_length() + 7) // 8 + 16
        raw = hashlib.blake2b(codec.encode((ct_id, pk_id)), key=self._secret,
                              person=b"vosc.mhe.prf").digest()
        while len(raw) < n:
            raw += hashlib.blake2b(raw, key=self._secret, person=b"vosc.mhe.ext").digest()
        return int.from_bytes(raw[:n], "big") % modulus

    def part_dec(self, sk: SecretKey, idx: int, ct_hat: EvaluatedCiphertext) -> PartialDecryption:
        entry = self._evals.get(ct_hat.id)
        if entry is None:
            raise UnknownHandle(f"unknown evaluated ciphertext {ct_hat.id}")
        handle, encoded, M = entry
        if not isinstance(sk, SecretKey) or self._keys.get(sk.pk.id) != sk.token:
            raise NotParticipant("secret key not registered")
        if sk.pk.id not in handle.participants:
            raise NotParticipant(f"{sk.pk.id} is not a participant of {handle.id}")
        if sk.pk.id != handle.participants[0]:
            value = self._prf(handle.id, sk.pk.id, M)
        else:
            others = sum(self._prf(handle.id, pk, M) for pk in handle.participants[1:])
            value = (encoded - others) % M
        return PartialDecryption(sk.pk.id, handle.id, value, M)

    def fin_dec(self, circuit: MheCircuit, partials: Sequence[PartialDecryption]) -> int | None:
        return fin_dec(circuit, partials, self.toy_modulus)

    def export(self) -> dict:
        return {
            "keys": sorted(self._keys),
            "ciphertexts": [{"id": i, "pk": pk} for i, (pk, _) in sorted(self._cts.items())],
            "evaluations": [{"id": h.id, "participants": list(h.participants)}
                            for h, _, _ in self._evals.values()],
        }
