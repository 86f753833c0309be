"""The set of trusted registries one protocol run composes with."""

from __future__ import annotations

from dataclasses import dataclass, field

from .commitments import CommitmentRegistry
from .garbling import OracleGarbler
from .mhe import MheRegistry
from .nizk import Crs, NizkRegistry, Trapdoor
from .otp import OtpStore
from .rng import SeedTree


@dataclass
class World:
    commitments: CommitmentRegistry
    nizk: NizkRegistry
    otps: OtpStore
    oracle: OracleGarbler
    mhe: MheRegistry
    crs: Crs
    # held by the harness in its simulator role; honest parties never read it
    trapdoor: Trapdoor = field(repr=False)

    @classmethod
    def create(cls, seeds: SeedTree, toy_modulus: int | None = None) -> "World":
        commitments = CommitmentRegistry()
        nizk = NizkRegistry(commitments, seeds.child("nizk").rng())
        crs, trapdoor = nizk.setup_crs(seeds.child("crs").key)
        mhe = MheRegistry(seeds.child("mhe").rng(), toy_modulus=toy_modulus)
        return cls(commitments, nizk, OtpStore(), OracleGarbler(), mhe, crs, trapdoor)
