"""Seed tree and hash-counter PRG.

Every random choice in a run draws from a named child of one root seed, so
changing how one component consumes randomness never shifts another
component's stream.
"""

from __future__ import annotations

import hashlib
import random


def _derive(key: bytes, label: str) -> bytes:
    return hashlib.sha256(b"vosc.seed\x00" + key + b"\x00" + label.encode()).digest()


class SeedTree:
    """A node in the deterministic seed hierarchy."""

    __slots__ = ("key", "path")

    def __init__(self, seed: int | bytes | str = 0, path: str = ""):
        if isinstance(seed, int):
            seed = seed.to_bytes(16, "big", signed=True)
        elif isinstance(seed, str):
            seed = seed.encode()
        self.key = hashlib.sha256(b"vosc.root\x00" + seed).digest() if not path else seed
        self.path = path

    def child(self, label: str | int) -> "SeedTree":
        label = str(label)
        return SeedTree(_derive(self.key, label), f"{self.path}/{label}")

    def rng(self) -> random.Random:
        return random.Random(int.from_bytes(self.key, "big"))

    def bytes(self, n: int = 32) -> bytes:
        return HashPrg(self.key).read(n)

    def __repr__(self) -> str:
        return f"SeedTree({self.path or '/'})"


class HashPrg:
    """Counter-mode BLAKE2b stream keyed by a seed."""

    __slots__ = ("_key", "_counter", "_buf")

    def __init__(self, seed: bytes):
        if len(seed) > 64:
            seed = hashlib.sha512(seed).digest()
        self._key = seed
        self._counter = 0
        self._buf = b""

    def _block(self) -> bytes:
        out = hashlib.blake2b(self._counter.to_bytes(8, "big"), key=self._key).digest()
        self._counter += 1
        return out

    def read(self, n: int) -> bytes:
        while len(self._buf) < n:
            self._buf += self._block()
        out, self._buf = self._buf[:n], self._buf[n:]
        return out

    def randbelow(self, bound: int) -> int:
        """Uniform integer in [0, bound) by masking and rejection."""
        bits = bound.bit_length()
        nbytes = (bits + 7) // 8
        mask = (1 << bits) - 1
        while True:
            v = int.from_bytes(self.read(nbytes), "little") & mask
            if v < bound:
                return v
