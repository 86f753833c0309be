"""Software-enforced one-time program store.

Each stored program runs at most once; execution deletes it from the store.
There is no bypass: adversarial senders can only store malformed programs.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence


class OneTimeViolation(RuntimeError):
    pass


class ArityError(ValueError):
    pass


@dataclass(frozen=True)
class OtpHandle:
    id: int
    input_arity: int
    store: "OtpStore" = field(repr=False, compare=False)

    @property
    def consumed(self) -> bool:
        return self.store.is_consumed(self)


class OtpStore:
    def __init__(self):
        self._programs: dict[int, Callable[[tuple[int, ...]], Any]] = {}
        self._issued: dict[int, int] = {}
        self._next = 1
        self._lock = threading.Lock()
        self.notifications: list[tuple[str, int]] = []

    def create(self, program: Callable[[tuple[int, ...]], Any], input_arity: int) -> OtpHandle:
        with self._lock:
            hid = self._next
            self._next += 1
            self._programs[hid] = program
            self._issued[hid] = input_arity
            self.notifications.append(("create", hid))
        return OtpHandle(hid, input_arity, self)

    def execute(self, handle: OtpHandle, x: Sequence[int] | int) -> Any:
        if isinstance(x, int):
            x = (x,)
        x = tuple(x)
        if len(x) != handle.input_arity or any(b not in (0, 1) for b in x):
            raise ArityError(f"expected {handle.input_arity} bits, got {x!r}")
        with self._lock:
            program = self._programs.pop(handle.id, None)
        if program is None:
            raise OneTimeViolation(f"otp {handle.id} already consumed")
        return program(x)

    def is_consumed(self, handle: OtpHandle) -> bool:
        return handle.id in self._issued and handle.id not in self._programs

    def listing(self) -> list[dict]:
        with self._lock:
            return [{"id": hid, "arity": a, "consumed": hid not in self._programs}
                    for hid, a in self._issued.items()]
