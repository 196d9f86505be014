from __future__ import annotations

import dataclasses
from dataclasses import dataclass

from ..errors import InputError


@dataclass(frozen=True)
class SearchConfig:
    """Knobs shared by every sampling-based check.

    Magnitudes are drawn log-uniformly from ``[range_low, range_high]``.
    Estimators that look for divergence replace ``range_high`` by each value
    of ``escalation`` in turn and stop once the running sup passes ``ceiling``.
    ``reference_K`` is the relaxation constant given to B/S inputs when a
    class quantifies over all constants. ``threads`` never changes results.
    """

    seed: int = 0
    samples: int = 100_000
    range_low: float = 1e-3
    range_high: float = 1e3
    boundary_fraction: float = 0.5
    zero_fraction: float = 0.05
    threads: int = 1
    ceiling: float = 1e6
    escalation: tuple[float, ...] = (1e1, 1e2, 1e3, 1e4, 1e5, 1e6)
    reference_K: float = 2.0

    def __post_init__(self):
        if not isinstance(self.seed, int) or not 0 <= self.seed < 2**64:
            raise InputError(f"seed must be an integer in [0, 2^64), got {self.seed!r}")
        if self.samples < 1:
            raise InputError("samples must be >= 1")
        if not 0 < self.range_low < self.range_high:
            raise InputError("need 0 < range_low < range_high")
        for name in ("boundary_fraction", "zero_fraction"):
            v = getattr(self, name)
            if not 0 <= v <= 1:
                raise InputError(f"{name} must lie in [0, 1]")
        if self.boundary_fraction + self.zero_fraction > 1:
            raise InputError("boundary_fraction + zero_fraction must not exceed 1")
        if self.threads < 1:
            raise InputError("threads must be >= 1")
        if not self.escalation or any(h <= self.range_low for h in self.escalation):
            raise InputError("escalation magnitudes must exceed range_low")
        if self.reference_K < 1:
            raise InputError("reference_K must be >= 1")
        object.__setattr__(self, "escalation", tuple(float(h) for h in self.escalation))

    def replace(self, **changes) -> "SearchConfig":
        return dataclasses.replace(self, **changes)
