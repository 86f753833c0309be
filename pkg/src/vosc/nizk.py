"""Trusted NIZK-argument registry plus the global CRS.

Proofs are opaque random handles. The registry stores (sid, statement, token)
triples and verification is membership. Relations are ordinary predicates
with read access to the commitment registry.
"""

from __future__ import annotations

import random
import threading
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Callable

from . import codec
from .commitments import CommitmentId, CommitmentRegistry, Receipt, UnknownCommitment

TOKEN_BYTES = 32


class UnknownRelation(KeyError):
    pass


@dataclass(frozen=True)
class Statement:
    relation_id: str
    public: tuple

    @cached_property
    def _canonical(self) -> bytes:
        return codec.encode((self.relation_id, self.public))

    def canonical(self) -> bytes:
        return self._canonical


@dataclass(frozen=True)
class Crs:
    receipt: Receipt

    def canonical(self) -> bytes:
        return self.receipt.canonical()


@dataclass(frozen=True)
class Trapdoor:
    """Opening of the CRS commitment. Only the harness/simulator holds one."""

    id: CommitmentId
    value: bytes = field(repr=False)


@dataclass(frozen=True)
class RelationContext:
    read: Callable[[Receipt | CommitmentId], bytes]

    def opens(self, crs: Crs, trapdoor: Trapdoor | None) -> bool:
        if trapdoor is None or trapdoor.id != crs.receipt.id:
            return False
        try:
            return self.read(crs.receipt) == trapdoor.value
        except UnknownCommitment:
            return False


@dataclass(frozen=True)
class RelationPredicate:
    id: str
    evaluate: Callable[[Statement, Any, RelationContext], bool]


class NizkRegistry:
    def __init__(self, commitments: CommitmentRegistry, rng: random.Random | None = None):
        self.commitments = commitments
        self._ctx = RelationContext(commitments.trusted_reader())
        self._rng = rng or random.Random(0)
        self._relations: dict[str, RelationPredicate] = {}
        self._proofs: set[tuple[str, bytes, bytes]] = set()
        self._lock = threading.Lock()

    def register(self, relation: RelationPredicate) -> None:
        with self._lock:
            self._relations.setdefault(relation.id, relation)

    def has_relation(self, relation_id: str) -> bool:
        return relation_id in self._relations

    def setup_crs(self, seed: int | bytes) -> tuple[Crs, Trapdoor]:
        rng = random.Random(seed)
        value = rng.randbytes(32)
        tag = rng.randbytes(8).hex()
        id = CommitmentId("CRS", ("crs", tag), "setup", "*")
        receipt = self.commitments.commit(id, value)
        return Crs(receipt), Trapdoor(id, value)

    def check(self, statement: Statement, witness) -> bool:
        relation = self._relations.get(statement.relation_id)
        if relation is None:
            raise UnknownRelation(statement.relation_id)
        try:
            return bool(relation.evaluate(statement, witness, self._ctx))
        except UnknownCommitment:
            return False

    def prove(self, sid: str, statement: Statement, witness) -> bytes | None:
        """A fresh token, or None (ignored) when the witness fails the relation."""
        if not self.check(statement, witness):
            return None
        with self._lock:
            token = self._rng.randbytes(TOKEN_BYTES)
            self._proofs.add((sid, statement.canonical(), token))
        return token

    def verify(self, sid: str, statement: Statement, token: bytes | None) -> bool:
        if token is None:
            return False
        return (sid, statement.canonical(), token) in self._proofs

    def __len__(self) -> int:
        return len(self._proofs)
