"""Group-level risk functions over the emission frame of a token.

Frames passed to these functions are 1-based. Higher values mean a more
preferred group; every function returns 1 when ``lam == 0``.
"""

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from ._validation import ContractViolation


class Variant(str, Enum):
    UNIT = "unit"
    OFFLINE = "offline"
    STREAMING = "streaming"

    @classmethod
    def parse(cls, name):
        if isinstance(name, cls):
            return name
        aliases = {"vanilla": cls.UNIT, "offlinelasttoken": cls.OFFLINE,
                   "streamingpertoken": cls.STREAMING}
        key = str(name).strip().lower()
        if key in aliases:
            return aliases[key]
        try:
            return cls(key)
        except ValueError:
            raise ContractViolation(f"unknown risk variant {name!r}") from None


@dataclass(frozen=True)
class RiskSpec:
    variant: Variant = Variant.UNIT
    lam: float = 0.0
    m: int = 2

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant.parse(self.variant))
        if not self.lam >= 0:
            raise ContractViolation(f"lambda must be >= 0, got {self.lam}")
        if int(self.m) != self.m or self.m < 1:
            raise ContractViolation(f"m must be a positive integer, got {self.m}")
        object.__setattr__(self, "lam", float(self.lam))
        object.__setattr__(self, "m", int(self.m))

    def to_dict(self):
        return {"variant": self.variant.value, "lambda": self.lam, "m": self.m}

    @classmethod
    def from_dict(cls, d):
        return cls(variant=d["variant"], lam=float(d.get("lambda", 0.0)), m=int(d.get("m", 2)))


def risk_unit(tau):
    return 1.0


def risk_offline(tau, U, T, lam, m=2):
    """``min(exp(-lam * (tau - m*U) / T), 1)``: flat up to ``m*U``, decaying after."""
    return min(math.exp(-lam * (tau - m * U) / T), 1.0)


def risk_streaming(tau, tau_star, T, lam):
    """``exp(-lam * (tau - tau_star) / T)``, exactly 1 at ``tau_star``; not clamped."""
    return math.exp(-lam * (tau - tau_star) / T)


def log_risk_offline(T, U, lam, m=2):
    """Vector of ``log risk_offline`` for frames ``1..T``."""
    tau = np.arange(1, T + 1, dtype=np.float64)
    return np.minimum(-lam * (tau - m * U) / T, 0.0)


def log_risk_streaming(T, tau_star, lam):
    """Vector of ``log risk_streaming`` for frames ``1..T``."""
    tau = np.arange(1, T + 1, dtype=np.float64)
    return -lam * (tau - tau_star) / T
