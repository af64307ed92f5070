"""Activity-tracking service: per-variant duration/distance bounds and a daily quota."""

from __future__ import annotations

import threading
from dataclasses import dataclass, field, replace
from typing import Optional

from ..core import ProbeOutcome, Status

DAY_MS = 86_400_000
UINT32_MAX = 4_294_967_295
INT32_MAX = 2_147_483_647


@dataclass(frozen=True)
class FitnessRules:
    variant: str = "strava"
    min_duration_s: int = 0
    max_duration_s: Optional[int] = 31_622_400
    min_distance_m: int = 0
    max_distance_m: Optional[int] = 50_000_000
    accumulated_distance_cap: int = UINT32_MAX
    posts_per_day: Optional[int] = 50
    render_modulo: Optional[int] = None

    @classmethod
    def for_variant(cls, variant: str = "strava", **overrides) -> "FitnessRules":
        exclusive_zero = overrides.pop("exclusive_zero", False)
        base = {
            "strava": cls(),
            "fitbit": cls("fitbit", 1, INT32_MAX, 1_000, 1_609_344, posts_per_day=None),
            "mapmyrun": cls("mapmyrun", 0, None, 0, None, posts_per_day=None, render_modulo=86_400),
        }
        if variant not in base:
            raise ValueError(f"unknown fitness variant {variant!r}")
        rules = replace(base[variant], **overrides)
        if exclusive_zero:
            rules = replace(rules, min_duration_s=max(rules.min_duration_s, 1),
                            min_distance_m=max(rules.min_distance_m, 1))
        return rules

    def valid(self, duration_s: int, distance_m: int) -> bool:
        def inside(v, lo, hi):
            return v >= lo and (hi is None or v <= hi)
        return inside(duration_s, self.min_duration_s, self.max_duration_s) and \
            inside(distance_m, self.min_distance_m, self.max_distance_m)


@dataclass
class _Athlete:
    distance_m: int = 0
    duration_s: int = 0
    activities: int = 0
    per_day: dict = field(default_factory=dict)


class FitnessService:
    def __init__(self, rules: FitnessRules = FitnessRules()):
        self.rules = rules
        self._athletes: dict[str, _Athlete] = {}
        self._lock = threading.Lock()

    def submit(self, identity: str, activity: dict, now: int = 0) -> ProbeOutcome:
        duration, distance = int(activity["duration_s"]), int(activity["distance_m"])
        with self._lock:
            a = self._athletes.setdefault(identity, _Athlete())
            day = now // DAY_MS
            used = a.per_day.get(day, 0)
            if self.rules.posts_per_day is not None and used >= self.rules.posts_per_day:
                return ProbeOutcome(Status.RATE_LIMITED, detail="daily quota", t_virtual=now)
            a.per_day[day] = used + 1
            if not self.rules.valid(duration, distance):
                return ProbeOutcome(Status.REJECTED, t_virtual=now)
            a.distance_m = min(a.distance_m + distance, self.rules.accumulated_distance_cap)
            a.duration_s += duration
            a.activities += 1
            return ProbeOutcome(Status.ACCEPTED, t_virtual=now, ref=f"{identity}/{a.activities}")

    def stats(self, identity: str) -> dict:
        with self._lock:
            a = self._athletes.get(identity, _Athlete())
            return {"distance_m": a.distance_m, "duration_s": a.duration_s, "activities": a.activities}

    def render(self, identity: str) -> dict:
        """What the app shows, as opposed to what the server stores."""
        s = self.stats(identity)
        if self.rules.render_modulo:
            s["duration_s"] %= self.rules.render_modulo
        return s
