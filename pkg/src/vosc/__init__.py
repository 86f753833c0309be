"""Verifiable one-time programs and single-round open secure computation
over trusted-registry primitives."""

from .osc import OscFunction, OscParams, Round, check_equivalence, compute, ideal_osc, send
from .rng import SeedTree
from .ver_otp import VerOtpParams
from .world import World

__all__ = ["OscFunction", "OscParams", "Round", "SeedTree", "VerOtpParams", "World",
           "check_equivalence", "compute", "ideal_osc", "send"]
__version__ = "0.1.0"
