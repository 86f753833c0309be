"""Garbling scheme (Garble, Eval) for boolean circuits.

Two backends share one GarbledCircuit type:

* ``concrete``: Yao garbling with point-and-permute. Each gate row is the
  output label plus an all-zero tag, encrypted under a hash of the input
  labels; a wrong label shows up as a bad tag. Output wires decode through
  hashed label pairs, so garbage on an identity wire is caught as well.
* ``oracle``: for programs that call trusted registries (no netlist). Garble
  draws labels from the same PRG and records the (labels, program, secret)
  entry in a trusted store; Eval maps presented labels back to bits and runs
  the program.

Garbling is a deterministic function of the randomness ``r``, which is what
lets a relation check re-garble and compare bytes.
"""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Callable, Mapping, Sequence

from . import codec
from .rng import HashPrg

TAG_BYTES = 8
DEC_BYTES = 8
ARITY = {"AND": 2, "XOR": 2, "NOT": 1}


class CircuitError(ValueError):
    pass


class EvalFailure(Exception):
    pass


@dataclass(frozen=True)
class Gate:
    op: str
    ins: tuple[int, ...]
    out: int


@dataclass(frozen=True)
class BooleanCircuit:
    """Wires 0..n_inputs-1 are inputs; gates are listed in topological order."""

    n_inputs: int
    gates: tuple[Gate, ...]
    outputs: tuple[int, ...]

    def __post_init__(self):
        defined = set(range(self.n_inputs))
        for g in self.gates:
            if g.op not in ARITY:
                raise CircuitError(f"unknown gate {g.op}")
            if len(g.ins) != ARITY[g.op]:
                raise CircuitError(f"{g.op} takes {ARITY[g.op]} inputs")
            if any(w not in defined for w in g.ins):
                raise CircuitError(f"gate reads undefined wire in {g}")
            if g.out in defined:
                raise CircuitError(f"wire w{g.out} written twice")
            defined.add(g.out)
        if any(w not in defined for w in self.outputs):
            raise CircuitError("output wire never written")

    @property
    def n_outputs(self) -> int:
        return len(self.outputs)

    def evaluate(self, bits: Sequence[int]) -> tuple[int, ...]:
        if len(bits) != self.n_inputs:
            raise CircuitError(f"expected {self.n_inputs} input bits")
        v = dict(enumerate(bits))
        for g in self.gates:
            if g.op == "AND":
                v[g.out] = v[g.ins[0]] & v[g.ins[1]]
            elif g.op == "XOR":
                v[g.out] = v[g.ins[0]] ^ v[g.ins[1]]
            else:
                v[g.out] = 1 - v[g.ins[0]]
        return tuple(v[w] for w in self.outputs)

    @cached_property
    def _canonical(self) -> bytes:
        return codec.encode((self.n_inputs, [(g.op, g.ins, g.out) for g in self.gates], self.outputs))

    def canonical(self) -> bytes:
        return self._canonical

    @property
    def id(self) -> str:
        return "bc:" + hashlib.sha256(self._canonical).hexdigest()[:16]

    def to_netlist(self) -> str:
        lines = [f"inputs {self.n_inputs} outputs {self.n_outputs}"]
        for g in self.gates:
            lines.append(f"{g.op} {' '.join(f'w{w}' for w in g.ins)} -> w{g.out}")
        lines.append("out " + " ".join(f"w{w}" for w in self.outputs))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_netlist(cls, text: str) -> "BooleanCircuit":
        """Parse `inputs n outputs m`, one gate per line, optional `out w..` line.

        Without an `out` line the outputs are the last m wires written.
        """
        lines = [ln.split("#", 1)[0].strip() for ln in text.splitlines()]
        lines = [ln for ln in lines if ln]
        if not lines:
            raise CircuitError("empty netlist")
        head = lines[0].split()
        if len(head) != 4 or head[0] != "inputs" or head[2] != "outputs":
            raise CircuitError(f"bad header: {lines[0]!r}")
        n, m = int(head[1]), int(head[3])
        gates, outputs = [], None
        for ln in lines[1:]:
            parts = ln.split()
            if parts[0] == "out":
                outputs = tuple(_wire(p) for p in parts[1:])
                continue
            if len(parts) < 3 or parts[-2] != "->":
                raise CircuitError(f"bad gate line: {ln!r}")
            gates.append(Gate(parts[0], tuple(_wire(p) for p in parts[1:-2]), _wire(parts[-1])))
        if outputs is None:
            written = list(range(n)) + [g.out for g in gates]
            outputs = tuple(written[len(written) - m:]) if m else ()
        if len(outputs) != m:
            raise CircuitError(f"header says {m} outputs, found {len(outputs)}")
        return cls(n, tuple(gates), outputs)


def _wire(tok: str) -> int:
    if not tok.startswith("w"):
        raise CircuitError(f"bad wire {tok!r}")
    return int(tok[1:])


def random_circuit(n_inputs: int, n_outputs: int, n_gates: int, rng: random.Random) -> BooleanCircuit:
    gates = []
    nxt = n_inputs
    for _ in range(n_gates):
        op = rng.choice(("AND", "XOR", "NOT"))
        if nxt == 0:
            break
        ins = tuple(rng.randrange(nxt) for _ in range(ARITY[op]))
        gates.append(Gate(op, ins, nxt))
        nxt += 1
    pool = list(range(nxt))
    outputs = tuple(pool[-n_outputs:]) if n_outputs <= len(pool) else tuple(rng.choices(pool, k=n_outputs))
    return BooleanCircuit(n_inputs, tuple(gates), outputs)


@dataclass(frozen=True)
class WireLabelPair:
    label0: bytes = field(repr=False)
    label1: bytes = field(repr=False)

    def __getitem__(self, bit: int) -> bytes:
        return self.label1 if bit else self.label0


@dataclass(frozen=True)
class GarbledCircuit:
    backend: str
    n_inputs: int
    n_outputs: int
    topology: BooleanCircuit | None = None
    free_wires: tuple[int, ...] = ()
    fixed_labels: tuple[tuple[int, bytes], ...] = ()
    tables: tuple[bytes, ...] = ()
    decoding: tuple[tuple[bytes, bytes], ...] = ()
    program_id: str = ""
    gid: bytes = b""

    @cached_property
    def _canonical(self) -> bytes:
        topo = self.topology.canonical() if self.topology is not None else b""
        return codec.encode((self.backend, self.n_inputs, self.n_outputs, topo, self.free_wires,
                             self.fixed_labels, self.tables, self.decoding,
                             self.program_id, self.gid))

    def canonical(self) -> bytes:
        return self._canonical


def _perm(label: bytes) -> int:
    return label[-1] & 1


def _xor(a: bytes, b: bytes) -> bytes:
    return (int.from_bytes(a, "big") ^ int.from_bytes(b, "big")).to_bytes(len(a), "big")


def _pad(gate: int, la: bytes, lb: bytes, size: int) -> bytes:
    return hashlib.blake2b(gate.to_bytes(4, "big") + la + lb, digest_size=size,
                           person=b"vosc.gc.row").digest()


def _dec(label: bytes) -> bytes:
    return hashlib.blake2b(label, digest_size=DEC_BYTES, person=b"vosc.gc.out").digest()


def _label_pairs(prg: HashPrg, count: int, nbytes: int) -> list[WireLabelPair]:
    pairs = []
    for _ in range(count):
        l0 = prg.read(nbytes)
        l1 = bytearray(prg.read(nbytes))
        l1[-1] = (l1[-1] & 0xFE) | (1 - _perm(l0))
        pairs.append(WireLabelPair(l0, bytes(l1)))
    return pairs


def garble(circuit: BooleanCircuit, r: bytes, fixed: Mapping[int, int] | None = None,
           lam: int = 128) -> tuple[GarbledCircuit, list[WireLabelPair]]:
    """Concrete Yao garbling. Wires in ``fixed`` are baked in: their active
    label ships inside the garbled circuit and they get no label pair."""
    fixed = dict(fixed or {})
    if any(not 0 <= w < circuit.n_inputs for w in fixed):
        raise CircuitError("fixed wire is not an input")
    nbytes = lam // 8
    prg = HashPrg(b"vosc.garble\x00" + r)
    n_wires = circuit.n_inputs + len(circuit.gates)
    pairs = _label_pairs(prg, n_wires, nbytes)
    # gate outputs are numbered arbitrarily; map wire id -> pair index
    slot = {w: w for w in range(circuit.n_inputs)}
    for k, g in enumerate(circuit.gates):
        slot[g.out] = circuit.n_inputs + k
    lab = lambda w, b: pairs[slot[w]][b]
    zero = bytes(TAG_BYTES)
    tables = []
    for k, g in enumerate(circuit.gates):
        if g.op == "NOT":
            rows = [b""] * 2
            for va in (0, 1):
                la = lab(g.ins[0], va)
                rows[_perm(la)] = _xor(_pad(k, la, b"", nbytes + TAG_BYTES), lab(g.out, 1 - va) + zero)
        else:
            fn = (lambda x, y: x & y) if g.op == "AND" else (lambda x, y: x ^ y)
            rows = [b""] * 4
            for va in (0, 1):
                for vb in (0, 1):
                    la, lb = lab(g.ins[0], va), lab(g.ins[1], vb)
                    rows[2 * _perm(la) + _perm(lb)] = _xor(_pad(k, la, lb, nbytes + TAG_BYTES),
                                                           lab(g.out, fn(va, vb)) + zero)
        tables.append(b"".join(rows))
    decoding = tuple((_dec(lab(w, 0)), _dec(lab(w, 1))) for w in circuit.outputs)
    free = tuple(w for w in range(circuit.n_inputs) if w not in fixed)
    fixed_labels = tuple((w, lab(w, b)) for w, b in sorted(fixed.items()))
    gc = GarbledCircuit("concrete", len(free), circuit.n_outputs, circuit, free, fixed_labels,
                        tuple(tables), decoding)
    return gc, [pairs[slot[w]] for w in free]


def _eval_concrete(g: GarbledCircuit, labels: Sequence[bytes]) -> tuple[int, ...]:
    circuit = g.topology
    active = dict(g.fixed_labels)
    active.update(zip(g.free_wires, labels))
    for k, gate in enumerate(circuit.gates):
        table = g.tables[k]
        if gate.op == "NOT":
            la = active[gate.ins[0]]
            lb = b""
            pos = _perm(la)
        else:
            la, lb = active[gate.ins[0]], active[gate.ins[1]]
            pos = 2 * _perm(la) + _perm(lb)
        width = len(la) + TAG_BYTES
        if len(table) < (pos + 1) * width:
            raise EvalFailure(f"gate {k}: label width mismatch")
        row = _xor(table[pos * width:(pos + 1) * width], _pad(k, la, lb, width))
        if row[-TAG_BYTES:] != bytes(TAG_BYTES):
            raise EvalFailure(f"gate {k}: authentication tag mismatch")
        active[gate.out] = row[:-TAG_BYTES]
    out = []
    for w, (d0, d1) in zip(circuit.outputs, g.decoding):
        d = _dec(active[w])
        if d == d0:
            out.append(0)
        elif d == d1:
            out.append(1)
        else:
            raise EvalFailure(f"output wire w{w} does not decode")
    return tuple(out)


@dataclass(frozen=True)
class OracleProgram:
    """A program f(secret, bits) evaluated inside the trusted garbling store."""

    id: str
    n_inputs: int
    n_outputs: int
    fn: Callable[[Any, tuple[int, ...]], Any] = field(compare=False, repr=False)


class OracleGarbler:
    """Trusted label store for the oracle backend."""

    def __init__(self):
        self._entries: dict[bytes, tuple[OracleProgram, Any, list[WireLabelPair]]] = {}

    def garble(self, program: OracleProgram, secret, r: bytes, lam: int = 128,
               register: bool = True) -> tuple[GarbledCircuit, list[WireLabelPair]]:
        prg = HashPrg(b"vosc.garble\x00" + r)
        pairs = _label_pairs(prg, program.n_inputs, lam // 8)
        gid = hashlib.blake2b(codec.encode((r, program.id, secret)), digest_size=16,
                              person=b"vosc.gc.oracle").digest()
        gc = GarbledCircuit("oracle", program.n_inputs, program.n_outputs,
                            program_id=program.id, gid=gid)
        if register:
            self._entries[gid] = (program, secret, pairs)
        return gc, pairs

    def evaluate(self, g: GarbledCircuit, labels: Sequence[bytes]):
        entry = self._entries.get(g.gid)
        if entry is None or entry[0].id != g.program_id:
            raise EvalFailure("unknown garbled program")
        program, secret, pairs = entry
        bits = []
        for i, (label, pair) in enumerate(zip(labels, pairs)):
            if label == pair.label0:
                bits.append(0)
            elif label == pair.label1:
                bits.append(1)
            else:
                raise EvalFailure(f"input wire {i}: label matches neither key")
        return program.fn(secret, tuple(bits))


def garble_program(template: BooleanCircuit | OracleProgram, secret, r: bytes,
                   oracle: OracleGarbler | None = None, lam: int = 128,
                   register: bool = True) -> tuple[GarbledCircuit, list[WireLabelPair]]:
    """Garble f(secret, .): bake secret bits into a circuit template, or seal
    the secret with an oracle program."""
    if isinstance(template, BooleanCircuit):
        bits = tuple(secret)
        if len(bits) > template.n_inputs:
            raise CircuitError("secret longer than circuit input")
        return garble(template, r, dict(enumerate(bits)), lam)
    if oracle is None:
        raise CircuitError("oracle programs need an oracle garbler")
    return oracle.garble(template, secret, r, lam, register)


def evaluate(g: GarbledCircuit, labels: Sequence[bytes], oracle: OracleGarbler | None = None):
    if len(labels) != g.n_inputs:
        raise EvalFailure(f"expected {g.n_inputs} labels, got {len(labels)}")
    if g.backend == "concrete":
        return _eval_concrete(g, labels)
    if oracle is None:
        raise EvalFailure("oracle-backed circuit needs its trusted store")
    return oracle.evaluate(g, labels)
