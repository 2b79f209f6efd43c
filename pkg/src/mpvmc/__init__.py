"""Finite-precision Metropolis-Hastings perturbation bounds and a
desk-scale neural-quantum-state variational Monte Carlo engine."""

__version__ = "0.1.0"

from .lattice import (
    LatticeSpec,
    SpinConfiguration,
    enumerate_states,
    exchange_neighbor,
    flip_neighbor,
)
from .precision import (
    BF16,
    F16,
    F32,
    F64,
    FloatFormat,
    RoundingMode,
    parse_format,
    relative_roundoff,
    round_to_format,
)

__all__ = [
    "LatticeSpec",
    "SpinConfiguration",
    "enumerate_states",
    "flip_neighbor",
    "exchange_neighbor",
    "FloatFormat",
    "RoundingMode",
    "parse_format",
    "relative_roundoff",
    "round_to_format",
    "BF16",
    "F16",
    "F32",
    "F64",
    "__version__",
]
