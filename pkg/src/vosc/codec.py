"""Canonical length-prefixed byte encoding for statements and records.

Fixed field order and explicit type tags make encodings replayable across
runs; the NIZK registry keys proofs on these bytes.
"""

from __future__ import annotations

import struct

_LEN = struct.Struct(">I")


def encode(obj) -> bytes:
    out: list[bytes] = []
    _encode(obj, out)
    return b"".join(out)


def _encode(obj, out: list[bytes]) -> None:
    if obj is None:
        out.append(b"N")
    elif obj is True:
        out.append(b"T")
    elif obj is False:
        out.append(b"F")
    elif isinstance(obj, (bytes, bytearray)):
        out += (b"B", _LEN.pack(len(obj)), bytes(obj))
    elif isinstance(obj, int):
        raw = obj.to_bytes((obj.bit_length() + 8) // 8 or 1, "big", signed=True)
        out += (b"I", _LEN.pack(len(raw)), raw)
    elif isinstance(obj, str):
        raw = obj.encode()
        out += (b"S", _LEN.pack(len(raw)), raw)
    elif isinstance(obj, (tuple, list)):
        out += (b"L", _LEN.pack(len(obj)))
        for item in obj:
            _encode(item, out)
    elif hasattr(obj, "canonical"):
        raw = obj.canonical()
        out += (b"O", _LEN.pack(len(raw)), raw)
    else:
        raise TypeError(f"no canonical encoding for {type(obj).__name__}")
