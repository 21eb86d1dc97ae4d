"""Compression / expansion moduli as closed-form callables with their parameters."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np


@dataclass(frozen=True)
class ModulusPair:
    kind: str
    rho1: Callable = field(repr=False)
    rho2: Callable = field(repr=False)
    params: dict = field(default_factory=dict)

    def bounds(self, s):
        return float(self.rho1(s)), float(self.rho2(s))

    def with_rho1_scaled(self, factor: float) -> "ModulusPair":
        r1 = self.rho1
        return ModulusPair(self.kind + f"*rho1x{factor:g}", lambda s: factor * r1(s),
                           self.rho2, dict(self.params, rho1_factor=factor))

    def to_dict(self):
        return {"kind": self.kind, "params": self.params}


def identity_moduli() -> ModulusPair:
    return ModulusPair("identity", lambda s: s, lambda s: s, {})


def power_moduli(c1: float, e1: float, c2: float, e2: float, kind="power") -> ModulusPair:
    """rho1(s) = c1 s^e1, rho2(s) = c2 s^e2."""
    return ModulusPair(kind, lambda s: c1 * np.power(s, e1), lambda s: c2 * np.power(s, e2),
                       {"c1": c1, "e1": e1, "c2": c2, "e2": e2})
