"""Trusted commitment registry (ideal commitment functionality)."""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field
from functools import cached_property

from . import codec


class AccessDenied(PermissionError):
    pass


class UnknownCommitment(KeyError):
    pass


@dataclass(frozen=True)
class CommitmentId:
    sid: str
    cid: tuple
    committer: str
    receiver: str

    @cached_property
    def _canonical(self) -> bytes:
        return codec.encode((self.sid, self.cid, self.committer, self.receiver))

    def canonical(self) -> bytes:
        return self._canonical

    def as_json(self) -> dict:
        return {"sid": self.sid, "cid": list(self.cid), "committer": self.committer,
                "receiver": self.receiver}


@dataclass(frozen=True)
class Receipt:
    """What the receiver gets: the id echoed back, no message bits."""

    id: CommitmentId

    def canonical(self) -> bytes:
        return self.id.canonical()


@dataclass
class CommitmentRecord:
    id: CommitmentId
    message: bytes
    opened: bool = False


@dataclass(frozen=True)
class TrustedReader:
    """Capability for relation predicates to read unopened messages."""

    registry: "CommitmentRegistry" = field(repr=False)
    _token: object = field(repr=False)

    def __call__(self, ref: Receipt | CommitmentId) -> bytes:
        return self.registry.lookup_for_relation(ref, self)


class CommitmentRegistry:
    def __init__(self):
        self._records: dict[CommitmentId, CommitmentRecord] = {}
        self._lock = threading.Lock()
        self._reader_token = object()
        self._reader_issued = False

    def commit(self, id: CommitmentId, m: bytes) -> Receipt:
        with self._lock:
            # later commits under a recorded id are ignored
            if id not in self._records:
                self._records[id] = CommitmentRecord(id, bytes(m))
        return Receipt(id)

    def open(self, ref: Receipt | CommitmentId) -> bytes | None:
        """Returns the committed message, or None (do nothing) for an unknown id."""
        id = ref.id if isinstance(ref, Receipt) else ref
        with self._lock:
            rec = self._records.get(id)
            if rec is None:
                return None
            rec.opened = True
            return rec.message

    def trusted_reader(self) -> TrustedReader:
        """Issue the single read capability (held by the NIZK registry)."""
        with self._lock:
            if self._reader_issued:
                raise AccessDenied("trusted reader already issued")
            self._reader_issued = True
        return TrustedReader(self, self._reader_token)

    def lookup_for_relation(self, ref: Receipt | CommitmentId, capability=None) -> bytes:
        if not isinstance(capability, TrustedReader) or capability._token is not self._reader_token:
            raise AccessDenied("commitment contents are readable by the NIZK registry only")
        id = ref.id if isinstance(ref, Receipt) else ref
        rec = self._records.get(id)
        if rec is None:
            raise UnknownCommitment(id)
        return rec.message

    def __len__(self) -> int:
        return len(self._records)

    def dump(self) -> dict:
        with self._lock:
            entries = [{"id": r.id.as_json(), "opened": r.opened} for r in self._records.values()]
        return {"commitments": entries}

    def dump_json(self) -> str:
        return json.dumps(self.dump(), sort_keys=True)
