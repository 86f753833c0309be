"""Open secure computation: single-message senders, adaptive receiver.

Each sender encrypts its input under a fresh MHE key and ships a Ver-OTP for
f_l(sk, CT): given the receiver's k-slot ciphertext vector, f_l checks its own
ciphertext is present, evaluates f homomorphically and returns its partial
decryption. The receiver verifies every Ver-OTP, then repeatedly lets its
strategy pick disjoint groups of verified senders, fills the remaining slots
with dummy-key ciphertexts, and combines partial decryptions.

Slots carry a bottom flag: plaintext 0 is bottom, v is stored as 2v+1. The
same encoding is used for function outputs.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Callable, Sequence

from . import ver_otp
from .garbling import EvalFailure, OracleProgram
from .mhe import Ciphertext, MheCircuit, MheError, PublicKey
from .nizk import Crs
from .otp import OneTimeViolation
from .ver_otp import Relation, Sabotage, VerOtpBundle, VerOtpParams, VerifiedOtp
from .world import World


class StrategyError(ValueError):
    def __init__(self, msg: str, partial: list | None = None):
        super().__init__(msg)
        self.partial = partial


class InternalError(RuntimeError):
    pass


class SingleRoundViolation(RuntimeError):
    pass


def encode_slot(x: int | None, a: int) -> int:
    if x is None:
        return 0
    if not 0 <= x < 1 << a:
        raise ValueError(f"value {x} does not fit in {a} bits")
    return (x << 1) | 1


def decode_slot(v: int | None) -> int | None:
    if not v:
        return None
    return v >> 1


@dataclass(frozen=True)
class OscFunction:
    """f over k slots of a-bit values (or None), producing a c-bit value or None."""

    name: str
    k: int
    a: int
    c: int
    fn: Callable[[tuple[int | None, ...]], int | None] = field(compare=False, repr=False)
    describe: Callable[[int | None], Any] = field(default=lambda y: y, compare=False, repr=False)

    def __call__(self, slots: Sequence[int | None]) -> int | None:
        if len(slots) != self.k:
            raise ValueError(f"{self.name} takes {self.k} slots")
        y = self.fn(tuple(slots))
        if y is not None and not 0 <= y < 1 << self.c:
            raise ValueError(f"{self.name} output exceeds {self.c} bits")
        return y

    @cached_property
    def circuit(self) -> MheCircuit:
        def run(xs):
            return encode_slot(self(tuple(decode_slot(v) for v in xs)), self.c)
        return MheCircuit(f"osc:{self.name}:{self.k}:{self.a}:{self.c}", run, self.c + 1)


@dataclass(frozen=True)
class OscParams:
    zeta: int = 64
    lam: int = 128
    ct_bits: int = 8

    def ver_otp_params(self, f: OscFunction) -> VerOtpParams:
        return VerOtpParams(b=f.k * self.ct_bits, zeta=self.zeta, lam=self.lam)


@dataclass(frozen=True)
class SenderSabotage:
    """bad_garbling | corrupt_shares (m handles on wire/bit) | wrong_relation."""

    kind: str
    m: int = 0
    wire: int = 0
    bit: int = 0


@dataclass
class SenderMessage:
    v_otp: VerOtpBundle
    ct: Ciphertext
    pk: PublicKey
    sender: str = ""


@dataclass(frozen=True)
class Round:
    S: tuple[int, ...]
    J: tuple[int, ...]
    filler: dict[int, int | None] = field(default_factory=dict)


Strategy = Callable[[frozenset, tuple], "Round | None"]


@dataclass
class OscTrace:
    verified: list[int]
    rounds: list[dict]
    Y: list
    blocked: str | None = None

    def as_json(self, f: OscFunction) -> dict:
        out = {
            "verified": list(self.verified),
            "rounds": [{"S": list(r["S"]), "J": list(r["J"]), "y": f.describe(r["y"])}
                       for r in self.rounds],
            "Y": [f.describe(y) for y in self.Y],
        }
        if self.blocked is not None:
            out["blocked"] = self.blocked
        return out


def encode_ct_ids(cts: Sequence[Ciphertext], ct_bits: int) -> tuple[int, ...]:
    bits = []
    for ct in cts:
        if not 0 < ct.id < 1 << ct_bits:
            raise InternalError(f"ciphertext id {ct.id} exceeds {ct_bits} bits")
        bits.extend((ct.id >> j) & 1 for j in range(ct_bits))
    return tuple(bits)


def decode_ct_ids(bits: Sequence[int], k: int, ct_bits: int) -> list[int]:
    return [sum(bits[s * ct_bits + j] << j for j in range(ct_bits)) for s in range(k)]


def f_ell_program(f: OscFunction, ct: Ciphertext, world: World, ct_bits: int) -> OracleProgram:
    """f_l(sk, CT): partial decryption of f(CT) under sk, or None if ct_l is absent."""

    def run(sk, bits):
        ids = decode_ct_ids(bits, f.k, ct_bits)
        if ct.id not in ids:
            return None
        idx = ids.index(ct.id)
        ct_hat = world.mhe.eval(f.circuit, [world.mhe.ciphertext(i) for i in ids])
        return world.mhe.part_dec(sk, idx, ct_hat)

    return OracleProgram(f"f_ell:{f.circuit.id}:ct{ct.id}:{ct_bits}", f.k * ct_bits, 1, run)


def key_relation(world: World) -> Relation:
    """ct is well formed under pk and sk is pk's secret key; z = (ct, pk)."""
    return Relation("osc-key", lambda sk, z: world.mhe.key_matches(sk, z[1])
                    and world.mhe.is_well_formed(z[0], z[1]))


def send(x: int, crs: Crs, f: OscFunction, world: World, params: OscParams,
         rng: random.Random, sabotage: SenderSabotage | None = None,
         name: str = "S") -> SenderMessage:
    kp = world.mhe.keygen(params.lam)
    ct = world.mhe.enc(kp.pk, encode_slot(x, f.a), bits=f.a + 1)
    program = f_ell_program(f, ct, world, params.ct_bits)
    s_otp, plan = kp.sk, None
    if sabotage is not None:
        if sabotage.kind == "wrong_relation":
            s_otp = world.mhe.keygen(params.lam).sk
            plan = Sabotage()
        elif sabotage.kind == "bad_garbling":
            plan = Sabotage(bad_garbling=True)
        elif sabotage.kind == "corrupt_shares":
            vp = params.ver_otp_params(f)
            picks = frozenset(rng.sample(range(1, vp.zeta + 1), min(sabotage.m, vp.zeta)))
            plan = Sabotage(corrupt={(sabotage.wire, sabotage.bit): picks})
        else:
            raise ValueError(f"unknown sabotage {sabotage.kind!r}")
    bundle = ver_otp.create(s_otp, (ct, kp.pk), crs, program, key_relation(world),
                            params.ver_otp_params(f), world, rng, plan, sender=name)
    return SenderMessage(bundle, ct, kp.pk, name)


def verify_message(msg: SenderMessage, f: OscFunction, world: World, params: OscParams,
                   rng: random.Random) -> VerifiedOtp | None:
    program = f_ell_program(f, msg.ct, world, params.ct_bits)
    ok, otp = ver_otp.verify(msg.v_otp, (msg.ct, msg.pk), world.crs, program, key_relation(world),
                             params.ver_otp_params(f), world, rng)
    return otp if ok else None


def _check_round(rnd: Round, left: set, k: int) -> None:
    if len(rnd.S) != len(rnd.J) or len(rnd.S) > k:
        raise StrategyError("need |S| = |J| <= k")
    if len(set(rnd.J)) != len(rnd.J) or any(not 0 <= j < k for j in rnd.J):
        raise StrategyError("J must be distinct slots in [0, k)")
    if len(set(rnd.S)) != len(rnd.S) or not set(rnd.S) <= left:
        raise StrategyError("S must be distinct left-over senders")


def compute(messages: Sequence[SenderMessage], strategy: Strategy, f: OscFunction,
            world: World, params: OscParams, rng: random.Random, *,
            skip_verify: bool = False, check_plan: bool = True,
            max_rounds: int = 1000) -> OscTrace:
    """Receiver side. ``skip_verify`` is a deliberate bug for checker self-tests;
    ``check_plan=False`` drops the plan check so reuse hits the OTP store.

    A round the plan check or the OTP store refuses stops the run and is
    recorded in ``blocked``.
    """
    good: dict[int, VerifiedOtp] = {}
    vp = params.ver_otp_params(f)
    for idx, msg in enumerate(messages):
        if skip_verify:
            good[idx] = _unverified(msg, vp)
            continue
        otp = verify_message(msg, f, world, params, rng)
        if otp is not None:
            good[idx] = otp
    left = set(good)
    Y: list = []
    rounds: list[dict] = []
    blocked = None
    while left and len(rounds) < max_rounds:
        rnd = strategy(frozenset(left), tuple(Y))
        if rnd is None:
            break
        try:
            if check_plan:
                _check_round(rnd, left, f.k)
            y = _run_round(rnd, messages, good, f, world, params)
        except (StrategyError, OneTimeViolation) as e:
            blocked = f"{type(e).__name__}: {e}"
            break
        Y.append(y)
        rounds.append({"S": tuple(rnd.S), "J": tuple(rnd.J), "y": y})
        left -= set(rnd.S)
    return OscTrace(sorted(good), rounds, Y, blocked)


def _unverified(msg: SenderMessage, vp: VerOtpParams) -> VerifiedOtp:
    everything = tuple(tuple(range(1, vp.zeta + 1)) for _ in range(vp.b))
    return VerifiedOtp(msg.v_otp.garbled, everything, msg.v_otp.otps, msg.v_otp.comms,
                       msg.v_otp.comms_r, vp.zeta, vp.lam)


def _run_round(rnd: Round, messages, good, f: OscFunction, world: World, params: OscParams):
    dummy = world.mhe.keygen(params.lam)
    CT: list[Ciphertext | None] = [None] * f.k
    for i, slot in zip(rnd.S, rnd.J):
        CT[slot] = messages[i].ct
    fill = [slot for slot in range(f.k) if CT[slot] is None]
    for slot in fill:
        CT[slot] = world.mhe.enc(dummy.pk, encode_slot(rnd.filler.get(slot), f.a), bits=f.a + 1)
    ct_hat = world.mhe.eval(f.circuit, CT)
    x = encode_ct_ids(CT, params.ct_bits)
    if len(rnd.S) != len(rnd.J) or any(not 0 <= j < f.k for j in rnd.J):
        raise StrategyError("malformed round")
    partials = {}
    for i in rnd.S:
        if i not in good:
            raise StrategyError(f"sender {i} has no verified OTP")
        p = ver_otp.eval(good[i], x, world)
        if p is None:
            raise InternalError(f"sender {i} returned bottom on a vector containing its ciphertext")
        partials[p.pk_id] = p
    # one partial per participant key, however many filler slots the dummy key covers
    for slot in fill:
        p = world.mhe.part_dec(dummy.sk, slot, ct_hat)
        partials.setdefault(p.pk_id, p)
    y = world.mhe.fin_dec(f.circuit, list(partials.values()))
    if y is None:
        raise InternalError("final decryption failed")
    return decode_slot(y)


def ideal_osc(inputs: Sequence[int | None], corrupted, strategy: Strategy,
              f: OscFunction, max_rounds: int = 1000) -> list:
    """Reference ideal functionality: corrupted inputs become bottom, the
    receiver adaptively picks disjoint groups of left-over honest senders."""
    corrupted = set(corrupted)
    X = [None if i in corrupted else x for i, x in enumerate(inputs)]
    left = {i for i in range(len(inputs)) if i not in corrupted}
    Y: list = []
    while left and len(Y) < max_rounds:
        rnd = strategy(frozenset(left), tuple(Y))
        if rnd is None:
            break
        try:
            _check_round(rnd, left, f.k)
        except StrategyError as e:
            raise StrategyError(str(e), partial=list(Y)) from None
        left -= set(rnd.S)
        vec: list[int | None] = [rnd.filler.get(slot) for slot in range(f.k)]
        for i, slot in zip(rnd.S, rnd.J):
            vec[slot] = X[i] if i not in corrupted else None
        Y.append(f(vec))
    return Y


class Transport:
    """In-process sender -> receiver queue; delivery order is a seeded shuffle."""

    def __init__(self, rng: random.Random):
        self._rng = rng
        self._queue: list = []

    def to_receiver(self, item) -> None:
        self._queue.append(item)

    def to_sender(self, *_):
        raise SingleRoundViolation("receiver-to-sender messages are not part of the protocol")

    def deliver(self) -> list:
        out = list(self._queue)
        self._rng.shuffle(out)
        self._queue.clear()
        return out


@dataclass
class EquivalenceReport:
    match: bool
    real: list
    ideal: list
    verified: list[int]
    rejected: list[int]
    sabotaged: list[int]
    honest_rejected: list[int]
    real_blocked: str | None = None
    ideal_blocked: str | None = None
    error: str | None = None
    order: list[int] = field(default_factory=list)
    trace: OscTrace | None = None

    def as_json(self, f: OscFunction) -> dict:
        return {
            "match": self.match,
            "real": None if self.real is None else [f.describe(y) for y in self.real],
            "ideal": None if self.ideal is None else [f.describe(y) for y in self.ideal],
            "verified": self.verified, "rejected": self.rejected,
            "sabotaged": self.sabotaged, "honest_rejected": self.honest_rejected,
            "real_blocked": self.real_blocked, "ideal_blocked": self.ideal_blocked,
            "error": self.error, "arrival_order": self.order,
            "trace": self.trace.as_json(f) if self.trace else None,
        }


def check_equivalence(inputs: Sequence[int], sabotage: Sequence[SenderSabotage | None],
                      strategy_factory: Callable[[list[int]], Strategy], f: OscFunction,
                      params: OscParams, seeds, *, skip_verify: bool = False,
                      check_plan: bool = True) -> EquivalenceReport:
    """Run the real protocol and the ideal functionality with the same strategy.

    Senders rejected by verification play corrupted in the ideal run. The
    strategy factory receives the arrival order (arrival index -> sender
    number) and must return a fresh, deterministic strategy on every call.
    """
    world = World.create(seeds.child("world"))
    transport = Transport(seeds.child("transport").rng())
    for n, (x, sab) in enumerate(zip(inputs, sabotage)):
        msg = send(x, world.crs, f, world, params, seeds.child(f"sender{n}").rng(), sab, name=f"P{n}")
        transport.to_receiver((n, msg))
    arrived = transport.deliver()
    order = [n for n, _ in arrived]
    messages = [m for _, m in arrived]
    sab_by_arrival = [sabotage[n] for n in order]
    sabotaged = [i for i, s in enumerate(sab_by_arrival) if s is not None]
    errors = []
    trace = None
    try:
        trace = compute(messages, strategy_factory(order), f, world, params,
                        seeds.child("receiver").rng(), skip_verify=skip_verify, check_plan=check_plan)
        real, verified = trace.Y, trace.verified
    except (InternalError, ver_otp.ReconstructionFailure, EvalFailure, MheError) as e:
        real, verified = None, []
        errors.append(f"real: {type(e).__name__}: {e}")
    rejected = [i for i in range(len(messages)) if i not in verified] if trace else []
    ideal_blocked = None
    try:
        ideal = ideal_osc([inputs[n] for n in order], rejected, strategy_factory(order), f)
    except StrategyError as e:
        ideal, ideal_blocked = e.partial, f"StrategyError: {e}"
    honest_rejected = [i for i in rejected if sab_by_arrival[i] is None]
    real_blocked = trace.blocked if trace else None
    match = (not errors and real == ideal and not honest_rejected
             and (real_blocked is None) == (ideal_blocked is None))
    return EquivalenceReport(match, real, ideal, verified, rejected, sabotaged, honest_rejected,
                             real_blocked, ideal_blocked, "; ".join(errors) or None, order, trace)
