"""Application functions for the OSC receiver: atomic propose, sealed-bid
auction, and differentially private aggregation, plus their fixtures.

Slot payloads and outputs are packed into integers so they ride through the
MHE registry unchanged. Signing happens natively inside the registry's
evaluation, which a real MHE scheme would have to express as a circuit.
"""

from __future__ import annotations

import hashlib
import hmac
import json
import math
import random
from dataclasses import dataclass
from typing import Callable, Sequence

from . import codec
from .osc import OscFunction
from .rng import HashPrg

HASH_LEN = 32
SK_LEN = 16
SEED_BITS = 64
FRAC_BITS = 16


def _h(*parts: bytes) -> bytes:
    h = hashlib.sha256()
    for p in parts:
        h.update(p)
    return h.digest()


# -- bulletin board ---------------------------------------------------------

_EMPTY = _h(b"\x02empty")


def _leaf(pk: bytes) -> bytes:
    return _h(b"\x00", pk)


def _node(left: bytes, right: bytes) -> bytes:
    return _h(b"\x01", left, right)


@dataclass(frozen=True)
class InclusionProof:
    index: int
    path: tuple[bytes, ...]

    def to_json(self) -> dict:
        return {"index": self.index, "path": [p.hex() for p in self.path]}


@dataclass(frozen=True)
class BulletinBoard:
    entries: tuple[bytes, ...]
    levels: tuple[tuple[bytes, ...], ...]

    @property
    def root(self) -> bytes:
        return self.levels[-1][0]

    @property
    def depth(self) -> int:
        return len(self.levels) - 1

    def __len__(self) -> int:
        return len(self.entries)

    def proof(self, i: int) -> InclusionProof:
        if not 0 <= i < len(self.entries):
            raise IndexError(i)
        path, pos = [], i
        for level in self.levels[:-1]:
            path.append(level[pos ^ 1])
            pos >>= 1
        return InclusionProof(i, tuple(path))

    def to_json(self) -> dict:
        return {"pks": [pk.hex() for pk in self.entries], "root": self.root.hex()}


def board_register(pks: Sequence[bytes]) -> tuple[BulletinBoard, list[InclusionProof]]:
    if not pks:
        raise ValueError("empty board")
    width = 1
    while width < len(pks):
        width *= 2
    level = tuple(_leaf(pk) for pk in pks) + (_EMPTY,) * (width - len(pks))
    levels = [level]
    while len(level) > 1:
        level = tuple(_node(level[j], level[j + 1]) for j in range(0, len(level), 2))
        levels.append(level)
    board = BulletinBoard(tuple(pks), tuple(levels))
    return board, [board.proof(i) for i in range(len(pks))]


def board_verify(root: bytes, pk: bytes, i: int, proof: InclusionProof) -> bool:
    if not isinstance(proof, InclusionProof) or proof.index != i or i < 0 or i >> len(proof.path):
        return False
    acc, pos = _leaf(pk), i
    for sib in proof.path:
        if not isinstance(sib, bytes) or len(sib) != HASH_LEN:
            return False
        acc = _node(acc, sib) if pos % 2 == 0 else _node(sib, acc)
        pos >>= 1
    return hmac.compare_digest(acc, root)


# -- signatures -------------------------------------------------------------

def signing_pk(sk: bytes) -> bytes:
    return _h(b"toy-sig.pk", sk)


class SignatureRegistry:
    """Toy deterministic signatures; verification asks the registry for the key."""

    def __init__(self):
        self._sks: dict[bytes, bytes] = {}

    def keygen(self, rng: random.Random) -> tuple[bytes, bytes]:
        sk = rng.randbytes(SK_LEN)
        pk = signing_pk(sk)
        self._sks[pk] = sk
        return sk, pk

    @staticmethod
    def sign(sk: bytes, message: bytes) -> bytes:
        return hmac.new(sk, message, hashlib.sha256).digest()

    def verify(self, pk: bytes, message: bytes, sig: bytes) -> bool:
        sk = self._sks.get(pk)
        return sk is not None and hmac.compare_digest(self.sign(sk, message), sig)


# -- packing ----------------------------------------------------------------

def pack_output(obj) -> int:
    return int.from_bytes(b"\x01" + json.dumps(obj, sort_keys=True, separators=(",", ":")).encode(), "big")


def unpack_output(y: int | None):
    if y is None:
        return None
    raw = y.to_bytes((y.bit_length() + 7) // 8, "big")
    return json.loads(raw[1:])


def _sigma_width(depth: int, bid_bytes: int) -> int:
    return 2 + SK_LEN + depth * HASH_LEN + bid_bytes


def pack_sigma(sk: bytes, proof: InclusionProof, depth: int, bid: int | None = None,
               bid_bytes: int = 0) -> int:
    if len(proof.path) != depth or len(sk) != SK_LEN:
        raise ValueError("proof depth or key length mismatch")
    raw = proof.index.to_bytes(2, "big") + sk + b"".join(proof.path)
    if bid_bytes:
        raw += (bid or 0).to_bytes(bid_bytes, "big")
    return int.from_bytes(raw, "big")


def unpack_sigma(x: int, depth: int, bid_bytes: int = 0):
    """(index, sk, proof, bid) or None for anything that does not parse."""
    width = _sigma_width(depth, bid_bytes)
    if x < 0 or x.bit_length() > 8 * width:
        return None
    raw = x.to_bytes(width, "big")
    idx = int.from_bytes(raw[:2], "big")
    sk = raw[2:2 + SK_LEN]
    off = 2 + SK_LEN
    path = tuple(raw[off + j * HASH_LEN: off + (j + 1) * HASH_LEN] for j in range(depth))
    bid = int.from_bytes(raw[off + depth * HASH_LEN:], "big") if bid_bytes else None
    return idx, sk, InclusionProof(idx, path), bid


def _honest(slots, board: BulletinBoard, bid_bytes: int = 0) -> dict[int, tuple]:
    """Board index -> (slot, sk, bid) for every slot carrying a valid key; first slot wins."""
    found: dict[int, tuple] = {}
    for slot, x in enumerate(slots):
        if x is None:
            continue
        parsed = unpack_sigma(x, board.depth, bid_bytes)
        if parsed is None:
            continue
        idx, sk, proof, bid = parsed
        if idx in found or idx >= len(board):
            continue
        if board_verify(board.root, signing_pk(sk), idx, proof):
            found[idx] = (slot, sk, bid)
    return found


# -- atomic propose ---------------------------------------------------------

def propose_message(v: bytes) -> bytes:
    return codec.encode(("propose", v))


def f_propose(board: BulletinBoard, v_bytes: int = 16) -> OscFunction:
    """Slot 0 carries the leader's value v; slots 1..N carry signing inputs.

    Outputs {"v", "sigs": [[board index, signature]]} when more than half the
    board signed, else None.
    """
    n = len(board)
    a = max(8 * _sigma_width(board.depth, 0), 8 * v_bytes)

    def run(slots):
        v = slots[0]
        if v is None:
            return None
        found = _honest(slots[1:], board)
        if 2 * len(found) <= n:
            return None
        vb = v.to_bytes(v_bytes, "big")
        msg = propose_message(vb)
        sigs = [[idx, SignatureRegistry.sign(sk, msg).hex()] for idx, (_, sk, _) in sorted(found.items())]
        return pack_output({"v": vb.hex(), "sigs": sigs})

    c = 8 * (64 + 2 * v_bytes + n * (2 * HASH_LEN + 16))
    return OscFunction(f"propose:{board.root.hex()[:16]}:{v_bytes}", n + 1, a, c, run, unpack_output)


# -- sealed-bid auction -----------------------------------------------------

def payment_message(bid: int) -> bytes:
    return codec.encode((bid, f"Pay auctioneer {bid}"))


def f_auction(board: BulletinBoard, bid_bits: int = 16) -> OscFunction:
    """Outputs {"bid", "winner", "sig"} for the highest honest bid (lowest
    slot on ties) when more than half the board bid, else None."""
    n = len(board)
    bid_bytes = (bid_bits + 7) // 8
    a = 8 * _sigma_width(board.depth, bid_bytes)

    def run(slots):
        found = _honest(slots, board, bid_bytes)
        if 2 * len(found) <= n:
            return None
        entries = sorted(found.items(), key=lambda kv: (-kv[1][2], kv[1][0]))
        idx, (_, sk, bid) = entries[0]
        sig = SignatureRegistry.sign(sk, payment_message(bid))
        return pack_output({"bid": bid, "winner": idx, "sig": sig.hex()})

    c = 8 * (64 + 2 * HASH_LEN + 3 * bid_bytes)
    return OscFunction(f"auction:{board.root.hex()[:16]}:{bid_bits}", n, a, c, run, unpack_output)


# -- DP aggregation ---------------------------------------------------------

def noise_uniform(seed: int) -> float:
    """First PRG sample for the combined seed, mapped into (0, 1)."""
    raw = HashPrg(b"noise-prg" + (seed % (1 << SEED_BITS)).to_bytes(8, "big")).read(8)
    return (int.from_bytes(raw, "big") + 0.5) / 2.0**64


def laplace_inverse_cdf(u: float, scale: float) -> float:
    d = u - 0.5
    return -scale * math.copysign(1.0, d) * math.log(1 - 2 * abs(d))


def noise_prg(seed: int, scale: float) -> float:
    return laplace_inverse_cdf(noise_uniform(seed), scale)


def pack_dp(seed: int, x: int, data_bits: int = 16) -> int:
    if not 0 <= seed < 1 << SEED_BITS or not 0 <= x < 1 << data_bits:
        raise ValueError("seed or datum out of range")
    return (seed << data_bits) | x


def f_dp_aggregate(k: int, scale: float = 1.0, data_bits: int = 16,
                   statistic: Callable[[list[int]], float] = sum, name: str = "sum") -> OscFunction:
    """Outputs {"fp": round((g(x) + e) * 2^16)} with e Laplace noise keyed by
    the sum of present seeds; no registration and no majority gate."""
    mask = (1 << data_bits) - 1

    def run(slots):
        present = [v for v in slots if v is not None]
        s = sum(v >> data_bits for v in present) % (1 << SEED_BITS)
        xs = [v & mask for v in present]
        value = statistic(xs) + noise_prg(s, scale)
        return pack_output({"fp": round(value * (1 << FRAC_BITS))})

    def describe(y):
        out = unpack_output(y)
        return out if out is None else {"fp": out["fp"], "value": out["fp"] / (1 << FRAC_BITS)}

    return OscFunction(f"dp:{name}:{k}:{scale!r}:{data_bits}", k, SEED_BITS + data_bits, 8 * 64, run, describe)
