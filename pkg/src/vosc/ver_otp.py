"""Verifiable one-time programs: create, cut-and-choose verify, eval.

The sender garbles f(s_otp, .), commits to every input-wire label and to the
sharing randomness, proves the garbling well formed, and hides each label
behind zeta single-bit OTPs that each release one Shamir share (plus its
proof) of the label for the requested bit. The receiver opens a random
zeta/16 of the OTPs per bit and wire, checks their proofs, and keeps the rest
for evaluation.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

from . import codec
from .commitments import CommitmentId, Receipt
from .field import FieldElement, Share, SharingError, SharingParams, reconstruct, share_all, share_value
from .garbling import (BooleanCircuit, EvalFailure, GarbledCircuit, OracleProgram, WireLabelPair,
                       evaluate, garble_program)
from .nizk import Crs, RelationContext, RelationPredicate, Statement, Trapdoor
from .otp import OneTimeViolation, OtpHandle
from .world import World

R1_SID = "NIZK1"


class CreateRejected(Exception):
    pass


class ReconstructionFailure(Exception):
    pass


@dataclass(frozen=True)
class Relation:
    """Public relation R(s_otp, z) the receiver wants certified."""

    id: str
    check: Callable[[Any, Any], bool] = field(compare=False, repr=False)


@dataclass(frozen=True)
class VerOtpParams:
    b: int
    zeta: int = 128
    lam: int = 128
    a: int = 0
    opened_per_bit: int | None = None

    def __post_init__(self):
        if self.zeta <= 0 or self.zeta % 16:
            raise ValueError(f"zeta must be a positive multiple of 16, got {self.zeta}")
        if self.b < 0:
            raise ValueError("negative input length")
        if self.opened_per_bit is not None and not 0 < 2 * self.opened_per_bit < self.zeta:
            raise ValueError("opened subsets must leave survivors")

    @property
    def threshold(self) -> int:
        return self.zeta // 2 + 1

    @property
    def opened(self) -> int:
        return self.opened_per_bit if self.opened_per_bit is not None else self.zeta // 16

    @property
    def survivors(self) -> int:
        return self.zeta - 2 * self.opened


@dataclass(frozen=True)
class Sabotage:
    """Fault plan for an adversarial sender.

    Any non-None plan also means the sender ships a random token when the
    registry refuses to issue a garbling proof, instead of aborting.
    """

    corrupt: dict[tuple[int, int], frozenset[int]] = field(default_factory=dict)
    bad_garbling: bool = False
    trapdoor: Trapdoor | None = None


@dataclass(frozen=True)
class R1Witness:
    s_otp: Any
    r: bytes = field(repr=False)
    labels: tuple[WireLabelPair, ...] = field(repr=False)
    trapdoor: Trapdoor | None = None


@dataclass
class VerOtpBundle:
    otps: tuple[tuple[OtpHandle, ...], ...]
    comms: tuple[tuple[Receipt, Receipt], ...]
    comms_r: tuple[tuple[Receipt, Receipt], ...]
    garbled: GarbledCircuit
    proof: bytes

    def serialize(self) -> bytes:
        handles = [[h.id for h in row] for row in self.otps]
        return b"".join([
            b"[GC]", codec.encode(self.garbled),
            b"[COMM]", codec.encode((self.comms, self.comms_r)),
            b"[PROOF]", codec.encode(self.proof),
            b"[HANDLES]", codec.encode(handles),
        ])


@dataclass
class VerifiedOtp:
    garbled: GarbledCircuit
    survivors: tuple[tuple[int, ...], ...]
    handles: tuple[tuple[OtpHandle, ...], ...]
    comms: tuple[tuple[Receipt, Receipt], ...]
    comms_r: tuple[tuple[Receipt, Receipt], ...]
    zeta: int
    lam: int


def input_length(f: BooleanCircuit | OracleProgram, s_otp) -> int:
    if isinstance(f, BooleanCircuit):
        return f.n_inputs - len(tuple(s_otp))
    return f.n_inputs


def r1_relation_id(f, relation: Relation) -> str:
    return f"R1:{f.id}:{relation.id}"


def r1_statement(gc: GarbledCircuit, z, comms, crs: Crs, f, relation: Relation) -> Statement:
    flat = tuple(c for pair in comms for c in pair)
    return Statement(r1_relation_id(f, relation), (gc, z, flat, crs))


def r2_sid(i: int, beta: int) -> str:
    return f"NIZK:{i}:{beta}"


def r2_statement(sh: Share, alpha: int, comm: Receipt, comm_r: Receipt, zeta: int) -> Statement:
    return Statement("R2", (sh.to_bytes(), alpha, comm, comm_r, zeta))


def relation1(f, relation: Relation, world: World, lam: int) -> RelationPredicate:
    """Garbling proof: labels committed, garbling re-derivable from (f, s_otp, r),
    R(s_otp, z) holds; or the witness carries the CRS opening."""

    def evaluate_r1(stmt: Statement, w: R1Witness, ctx: RelationContext) -> bool:
        gc, z, flat, crs = stmt.public
        if ctx.opens(crs, w.trapdoor):
            return True
        b = len(flat) // 2
        if len(w.labels) != b:
            return False
        for i in range(b):
            for beta in (0, 1):
                receipt = flat[2 * i + beta]
                if receipt.id.cid[:2] != (i, beta) or ctx.read(receipt) != w.labels[i][beta]:
                    return False
        gc2, pairs2 = garble_program(f, w.s_otp, w.r, world.oracle, lam, register=False)
        if gc2.canonical() != gc.canonical() or tuple(pairs2) != tuple(w.labels):
            return False
        return bool(relation.check(w.s_otp, z))

    return RelationPredicate(r1_relation_id(f, relation), evaluate_r1)


def _evaluate_r2(stmt: Statement, w, ctx: RelationContext) -> bool:
    sh_bytes, alpha, comm, comm_r, zeta = stmt.public
    kappa, r = w
    if ctx.read(comm) != kappa or ctx.read(comm_r) != r:
        return False
    sh = Share.from_bytes(sh_bytes)
    params = SharingParams(zeta, zeta // 2 + 1, r)
    return sh.index == alpha and sh.value.value == share_value(alpha, int.from_bytes(kappa, "little"), params)


RELATION2 = RelationPredicate("R2", _evaluate_r2)


def _otm_program(out0, out1):
    """One share-releasing OTP: on input bit beta return (share, proof) for beta."""
    return lambda x: out1 if x[0] else out0


def create(s_otp, z, crs: Crs, f, relation: Relation, params: VerOtpParams, world: World,
           rng: random.Random, sabotage: Sabotage | None = None,
           sender: str = "S", receiver: str = "R") -> VerOtpBundle:
    b = input_length(f, s_otp)
    if b != params.b:
        raise ValueError(f"program takes {b} free input bits, params say {params.b}")
    sab = sabotage
    nonce = rng.randbytes(8).hex()
    sid_c = f"Commit1:{nonce}"
    r = rng.randbytes(32)
    gc, pairs = garble_program(f, s_otp, r, world.oracle, params.lam)
    if sab is not None and sab.bad_garbling:
        gc = _tamper(gc)

    comms = []
    for i in range(b):
        comms.append(tuple(
            world.commitments.commit(CommitmentId(sid_c, (i, beta, "label"), sender, receiver),
                                     pairs[i][beta])
            for beta in (0, 1)))
    comms = tuple(comms)

    world.nizk.register(relation1(f, relation, world, params.lam))
    world.nizk.register(RELATION2)
    witness = R1Witness(s_otp, r, tuple(pairs), sab.trapdoor if sab else None)
    proof = world.nizk.prove(R1_SID, r1_statement(gc, z, comms, crs, f, relation), witness)
    if proof is None:
        if sab is None:
            raise CreateRejected("garbling/relation witness rejected")
        proof = rng.randbytes(32)

    zeta, t = params.zeta, params.threshold
    comms_r = []
    outputs: dict[tuple[int, int], list] = {}
    for i in range(b):
        row = []
        for beta in (0, 1):
            r_ib = rng.randbytes(32)
            row.append(world.commitments.commit(
                CommitmentId(sid_c, (i, beta, "rand"), sender, receiver), r_ib))
            kappa = pairs[i][beta]
            shares = share_all(int.from_bytes(kappa, "little"), SharingParams(zeta, t, r_ib))
            bad = sab.corrupt.get((i, beta), frozenset()) if sab else frozenset()
            out = []
            sid = r2_sid(i, beta)
            for sh in shares:
                if sh.index in bad:
                    junk = FieldElement((sh.value.value + 1 + rng.randrange(2**64)) % sh.value.p)
                    out.append((Share(sh.index, junk), rng.randbytes(32)))
                    continue
                stmt = r2_statement(sh, sh.index, comms[i][beta], row[beta], zeta)
                out.append((sh, world.nizk.prove(sid, stmt, (kappa, r_ib))))
            outputs[(i, beta)] = out
        comms_r.append(tuple(row))

    otps = tuple(
        tuple(world.otps.create(_otm_program(outputs[(i, 0)][a], outputs[(i, 1)][a]), 1)
              for a in range(zeta))
        for i in range(b))
    return VerOtpBundle(otps, comms, tuple(comms_r), gc, proof)


def _tamper(gc: GarbledCircuit) -> GarbledCircuit:
    from dataclasses import replace
    if gc.backend == "oracle":
        return replace(gc, gid=bytes([gc.gid[0] ^ 1]) + gc.gid[1:])
    if gc.tables:
        # corrupt every row of the first gate so any evaluation through it fails
        rows = 2 if gc.topology.gates[0].op == "NOT" else 4
        t0 = bytearray(gc.tables[0])
        width = len(t0) // rows
        for j in range(rows):
            t0[j * width + width - 1] ^= 1
        return replace(gc, tables=(bytes(t0),) + gc.tables[1:])
    d0 = gc.decoding[0] if gc.decoding else (b"\0", b"\0")
    return replace(gc, decoding=((d0[1], d0[0]),) + gc.decoding[1:])


def _check_share(world: World, out, i: int, beta: int, alpha: int, bundle_comms, comms_r, zeta) -> Share | None:
    try:
        sh, token = out
        if not isinstance(sh, Share) or sh.index != alpha:
            return None
        stmt = r2_statement(sh, alpha, bundle_comms[i][beta], comms_r[i][beta], zeta)
    except (TypeError, ValueError, IndexError):
        return None
    return sh if world.nizk.verify(r2_sid(i, beta), stmt, token) else None


def _well_formed(bundle: VerOtpBundle, params: VerOtpParams) -> bool:
    return (len(bundle.otps) == params.b and all(len(row) == params.zeta for row in bundle.otps)
            and len(bundle.comms) == params.b and len(bundle.comms_r) == params.b
            and bundle.garbled.n_inputs == params.b)


def verify(bundle: VerOtpBundle, z, crs: Crs, f, relation: Relation, params: VerOtpParams,
           world: World, rng: random.Random) -> tuple[bool, VerifiedOtp | None]:
    if not _well_formed(bundle, params):
        return False, None
    world.nizk.register(relation1(f, relation, world, params.lam))
    world.nizk.register(RELATION2)
    stmt = r1_statement(bundle.garbled, z, bundle.comms, crs, f, relation)
    if not world.nizk.verify(R1_SID, stmt, bundle.proof):
        return False, None
    zeta, m = params.zeta, params.opened
    survivors = []
    for i in range(params.b):
        picks = rng.sample(range(1, zeta + 1), 2 * m)
        for beta, subset in ((0, picks[:m]), (1, picks[m:])):
            for alpha in subset:
                try:
                    out = world.otps.execute(bundle.otps[i][alpha - 1], beta)
                except OneTimeViolation:
                    return False, None
                except Exception:
                    # a malformed program is the sender's fault
                    return False, None
                if _check_share(world, out, i, beta, alpha, bundle.comms, bundle.comms_r, zeta) is None:
                    return False, None
        opened = set(picks)
        survivors.append(tuple(a for a in range(1, zeta + 1) if a not in opened))
    handles = tuple(tuple(bundle.otps[i][a - 1] for a in survivors[i]) for i in range(params.b))
    return True, VerifiedOtp(bundle.garbled, tuple(survivors), handles, bundle.comms,
                             bundle.comms_r, zeta, params.lam)


def eval(verified: VerifiedOtp, x: Sequence[int], world: World):
    """Run the surviving OTPs on x, rebuild one label per wire, evaluate."""
    b = len(verified.survivors)
    if len(x) != b:
        raise ValueError(f"expected {b} input bits")
    t = verified.zeta // 2 + 1
    outs = []
    for i in range(b):
        row = []
        for alpha, h in zip(verified.survivors[i], verified.handles[i]):
            try:
                row.append((alpha, world.otps.execute(h, x[i])))
            except OneTimeViolation:
                raise
            except Exception:
                row.append((alpha, None))
        outs.append(row)
    labels = []
    nbytes = verified.lam // 8
    for i in range(b):
        valid = [sh for alpha, out in outs[i]
                 if out is not None
                 and (sh := _check_share(world, out, i, x[i], alpha, verified.comms,
                                         verified.comms_r, verified.zeta)) is not None]
        if len(valid) < t:
            raise ReconstructionFailure(f"wire {i}: {len(valid)} valid shares < threshold {t}")
        try:
            kappa = reconstruct(valid, t).value
        except SharingError as e:
            raise ReconstructionFailure(str(e)) from e
        if kappa >= 1 << (8 * nbytes):
            raise ReconstructionFailure(f"wire {i}: reconstructed value is not a label")
        labels.append(kappa.to_bytes(nbytes, "little"))
    return evaluate(verified.garbled, labels, world.oracle)


class IdealVerOtp:
    """Reference semantics of the ideal verifiable-OTP functionality.

    ``adversary`` models the simulator's answer to (prove, z): it may return
    a replacement (s*, z*) pair, with s* = None meaning keep s_otp.
    """

    def __init__(self, f: Callable[[Any, Sequence[int]], Any], relation: Relation,
                 adversary: Callable[[Any], tuple[Any, Any]] | None = None):
        self.f = f
        self.relation = relation
        self.adversary = adversary
        self._stored: tuple[Any, Any] | None = None
        self._accepted = False

    def create(self, s_otp, z) -> bool:
        if not self.relation.check(s_otp, z):
            return False
        if self.adversary is not None:
            s_star, z_star = self.adversary(z)
            if s_star is not None:
                s_otp = s_star
            z = z_star
        if not self.relation.check(s_otp, z):
            return False
        self._stored = (z, s_otp)
        return True

    def verify(self, z) -> bool:
        if self._stored is not None and self._stored[0] == z:
            self._accepted = True
            return True
        return False

    def execute(self, x: Sequence[int]):
        """f(s_otp, x) once after acceptance; None otherwise."""
        if self._stored is None or not self._accepted:
            return None
        _, s_otp = self._stored
        self._stored, self._accepted = None, False
        return self.f(s_otp, x)


def ideal_ver_otp(s_otp, z, relation: Relation, f, adversary=None) -> IdealVerOtp:
    oracle = IdealVerOtp(f, relation, adversary)
    oracle.create(s_otp, z)
    return oracle
