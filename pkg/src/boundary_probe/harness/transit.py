"""Public-transit crowd reports: a speed ceiling, a little flakiness below it,
and a speed-dependent chance that other riders see the effect."""

from __future__ import annotations

import random
import threading
from dataclasses import dataclass
from fractions import Fraction

from ..core import Speed


@dataclass(frozen=True)
class TransitRules:
    threshold_tenths: int = 23_500
    p_fail: float = 0.03
    observer_low: float = 0.85
    observer_low_until_tenths: int = 10_000
    observer_at_threshold: float = 0.30
    seed: int = 0

    def observer_probability(self, speed: Speed) -> float:
        t = speed.tenths
        if t <= self.observer_low_until_tenths:
            return self.observer_low
        if t > self.threshold_tenths:
            return 0.0
        frac = Fraction(t - self.observer_low_until_tenths,
                        self.threshold_tenths - self.observer_low_until_tenths)
        return self.observer_low + float(frac) * (self.observer_at_threshold - self.observer_low)


class TransitService:
    """Every ride draws from ``Random(f"{seed}:{call_index}")`` so outcomes
    depend only on the seed and how many rides came before."""

    def __init__(self, rules: TransitRules = TransitRules()):
        self.rules = rules
        self.calls = 0
        self._lock = threading.Lock()

    def ride(self, identity: str, speed: Speed, now: int = 0) -> dict:
        with self._lock:
            idx = self.calls
            self.calls += 1
        rng = random.Random(f"{self.rules.seed}:{idx}")
        fail_draw, observer_draw = rng.random(), rng.random()
        accepted = speed.tenths <= self.rules.threshold_tenths and fail_draw >= self.rules.p_fail
        seen = accepted and observer_draw < self.rules.observer_probability(speed)
        return {"self_accepted": accepted, "observer_affected": seen, "call_index": idx}
