"""Injection sessions: identities, rate-limit-aware scheduling, feedback.

Time is virtual by default. A campaign that has to respect "50 posts a day" or
"20 to 35 minutes between posts" simply advances a :class:`VirtualClock`, so
multi-day experiments run in milliseconds and replay exactly.
"""

from __future__ import annotations

import enum
import hashlib
import json
import random
import time
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

from .core import ProbeError, ProbeOutcome, ProbeValue, RateLimitSpec, Status


class PoolExhausted(ProbeError):
    pass


class OracleUnavailable(ProbeError):
    pass


class Rotation(str, enum.Enum):
    OFF = "off"
    ROUND_ROBIN = "round-robin"
    ON_BLOCK = "on-block"
    PER_PROBE = "per-probe"


ACTIVE, BLOCKED = "Active", "Blocked"


@dataclass
class Identity:
    user_id: str
    registration_id: str
    state: str = ACTIVE
    requests: dict = field(default_factory=dict)
    rejections: dict = field(default_factory=dict)
    last_issue: Optional[int] = None

    @property
    def token(self) -> str:
        return f"{self.registration_id}:{self.user_id}"

    @property
    def active(self) -> bool:
        return self.state == ACTIVE


@dataclass(frozen=True)
class RateLimitPolicy:
    scope: str = "per-identity"
    window: int = 86_400_000
    max_requests: Optional[int] = None
    max_rejections: Optional[int] = None
    min_gap: int = 0
    jitter: Optional[tuple[int, int]] = None

    def __post_init__(self):
        if self.scope not in ("per-identity", "global"):
            raise ValueError("scope is per-identity or global")
        if self.window <= 0:
            raise ValueError("window must be positive")
        if self.min_gap < 0:
            raise ValueError("min_gap must be >= 0")
        if self.jitter is not None and self.jitter[0] > self.jitter[1]:
            raise ValueError("jitter lo must not exceed hi")

    @classmethod
    def from_spec(cls, s: RateLimitSpec) -> "RateLimitPolicy":
        return cls(s.scope, s.window, s.max_requests, s.max_rejections, s.min_gap, s.jitter)


class VirtualClock:
    """Milliseconds. Simulated mode only moves on sleep/advance; wall mode
    tracks (and really sleeps on) the monotonic clock."""

    def __init__(self, now: int = 0, mode: str = "simulated"):
        if mode not in ("simulated", "wall"):
            raise ValueError("mode is simulated or wall")
        self.mode = mode
        self._now = now
        self._origin = time.monotonic() - now / 1000

    def now(self) -> int:
        if self.mode == "wall":
            self._now = max(self._now, int((time.monotonic() - self._origin) * 1000))
        return self._now

    def sleep(self, ms: int) -> None:
        if ms < 0:
            raise ValueError("cannot sleep a negative duration")
        if self.mode == "wall":
            time.sleep(ms / 1000)
            self.now()
        else:
            self._now += ms

    def advance_to(self, t: int) -> None:
        now = self.now()
        if t > now:
            self.sleep(t - now)


class IdentityPool:
    """Owns the identities and every rate-limit counter kept against them."""

    def __init__(self, identities: list[Identity], rotation: Rotation = Rotation.OFF):
        if not identities:
            raise ValueError("pool needs at least one identity")
        self.identities = identities
        self.rotation = Rotation(rotation)
        self.cursor = 0
        self.global_state = Identity("*", "*")

    @property
    def size(self) -> int:
        return len(self.identities)

    def active(self) -> list[Identity]:
        return [i for i in self.identities if i.active]

    def current(self) -> Identity:
        ident = self.identities[self.cursor]
        if ident.active:
            return ident
        if self.rotation is Rotation.OFF:
            raise PoolExhausted(f"identity {ident.token} is blocked")
        return self.advance()

    def advance(self) -> Identity:
        """Move to the next active identity, wrapping around."""
        n = len(self.identities)
        for k in range(1, n + 1):
            j = (self.cursor + k) % n
            if self.identities[j].active:
                self.cursor = j
                return self.identities[j]
        raise PoolExhausted("every identity in the pool is blocked")

    def pick(self, rng: random.Random) -> Identity:
        active = [j for j, i in enumerate(self.identities) if i.active]
        if not active:
            raise PoolExhausted("every identity in the pool is blocked")
        self.cursor = rng.choice(active)
        return self.identities[self.cursor]

    def block(self, ident: Identity) -> None:
        ident.state = BLOCKED

    def state_for(self, policy: RateLimitPolicy, ident: Identity) -> Identity:
        return self.global_state if policy.scope == "global" else ident

    def note_rejection(self, ident: Identity, policies, t: int) -> None:
        """Count a rejection that arrived asynchronously (decided at ``t``)."""
        for pol in policies:
            st = self.state_for(pol, ident)
            key = (pol, t // pol.window)
            st.rejections[key] = st.rejections.get(key, 0) + 1


def mint_identities(n: int, seed: int, rotation: Rotation = Rotation.OFF) -> IdentityPool:
    """Derive ``n`` distinct (registration_id, user_id) pairs from ``seed``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    out = []
    for i in range(n):
        h = hashlib.sha256(f"{seed}:{i}".encode()).hexdigest()
        out.append(Identity(user_id="u" + h[:16], registration_id="r" + h[16:32]))
    assert len({x.token for x in out}) == n
    return IdentityPool(out, rotation)


class SessionLog:
    """JSON-lines record of every probe issued."""

    def __init__(self):
        self.records: list[dict] = []

    def add(self, t: int, ident: Identity, value, status: Status, strategy: Optional[str] = None):
        rec = {"t_virtual": t, "identity": ident.token, "value": value, "status": status.value}
        if strategy is not None:
            rec["strategy"] = strategy
        self.records.append(rec)

    def dumps(self) -> str:
        return "".join(json.dumps(r, sort_keys=True) + "\n" for r in self.records)


def _earliest(pool: IdentityPool, ident: Identity, policies, t: int, rng: random.Random) -> int:
    earliest = t
    for pol in policies:
        st = pool.state_for(pol, ident)
        if st.last_issue is not None and (pol.min_gap or pol.jitter):
            gap = pol.min_gap + (rng.randint(*pol.jitter) if pol.jitter else 0)
            earliest = max(earliest, st.last_issue + gap)
    moved = True
    while moved:
        moved = False
        for pol in policies:
            st = pool.state_for(pol, ident)
            w = earliest // pol.window
            full = pol.max_requests is not None and st.requests.get((pol, w), 0) >= pol.max_requests
            burnt = pol.max_rejections is not None and st.rejections.get((pol, w), 0) >= pol.max_rejections
            if full or burnt:
                earliest = (w + 1) * pol.window
                moved = True
    return earliest


def schedule_probe(pool: IdentityPool, policies, clock: VirtualClock,
                   probe_fn: Callable[[Identity], ProbeOutcome], *,
                   rng: Optional[random.Random] = None, log: Optional[SessionLog] = None,
                   value: Optional[ProbeValue] = None, strategy: Optional[str] = None) -> ProbeOutcome:
    """Issue one probe as soon as every policy allows it.

    Waits (on ``clock``) for min-gap plus jitter and for window budget, issues
    ``probe_fn(identity)``, and updates the counters. A Blocked answer, or a
    RateLimited one while rotation is on, retires the identity; the probe is
    then retried once under the next identity.
    """
    rng = rng or random.Random(0)
    policies = list(policies)
    vdict = value.to_dict() if value is not None else None
    retried = False
    while True:
        if pool.rotation is Rotation.PER_PROBE:
            ident = pool.pick(rng)
        else:
            ident = pool.current()
        t = _earliest(pool, ident, policies, clock.now(), rng)
        clock.advance_to(t)
        t = clock.now()
        out = replace(probe_fn(ident), t_virtual=t)
        for pol in policies:
            st = pool.state_for(pol, ident)
            key = (pol, t // pol.window)
            st.requests[key] = st.requests.get(key, 0) + 1
            if out.status is Status.REJECTED:
                st.rejections[key] = st.rejections.get(key, 0) + 1
            st.last_issue = t
        ident.last_issue = t
        if log is not None:
            log.add(t, ident, vdict, out.status, strategy)

        spent = out.status is Status.BLOCKED or (
            out.status is Status.RATE_LIMITED and pool.rotation is not Rotation.OFF)
        if spent:
            pool.block(ident)
            if pool.rotation is Rotation.OFF or retried:
                return out
            if pool.rotation is not Rotation.PER_PROBE:
                pool.advance()
            retried = True
            continue
        if pool.rotation is Rotation.ROUND_ROBIN:
            pool.advance()
        return out


class Session:
    """A pool, its policies, a clock and one seeded generator, bundled."""

    def __init__(self, pool: IdentityPool, policies=(), clock: Optional[VirtualClock] = None,
                 seed: int = 0, log: Optional[SessionLog] = None):
        self.pool = pool
        self.policies = list(policies)
        self.clock = clock or VirtualClock()
        self.rng = random.Random(seed)
        self.log = log if log is not None else SessionLog()

    def probe(self, fn: Callable[[Identity], ProbeOutcome], value: Optional[ProbeValue] = None,
              strategy: Optional[str] = None) -> ProbeOutcome:
        return schedule_probe(self.pool, self.policies, self.clock, fn, rng=self.rng,
                              log=self.log, value=value, strategy=strategy)


# ---------------------------------------------------------------------------
# feedback

class OracleKind(str, enum.Enum):
    RESPONSE = "ResponseBased"
    SECONDARY_QUERY = "SecondaryQuery"
    OBSERVER = "Observer"


@dataclass
class FeedbackOracle:
    """How an injection's fate is learnt.

    ``query(ref, now)`` returns "accepted", "rejected" or None (undecided) and
    must not change target state.
    """

    kind: OracleKind
    query: Optional[Callable[[str, int], Optional[str]]] = None
    pending_window: int = 8 * 60_000
    poll_interval: int = 30_000


def resolve_feedback(oracle: FeedbackOracle, submission_ref: str, clock: VirtualClock) -> ProbeOutcome:
    """Poll until the submission shows up, is turned down, or the window closes.

    Running out of window with no rejection notice means the target dropped
    the submission without telling anyone: Rejected with detail
    ``silent-ignore``.
    """
    if oracle.query is None:
        raise OracleUnavailable("oracle has no query channel")
    start = clock.now()
    deadline = start + oracle.pending_window
    while True:
        now = clock.now()
        try:
            verdict = oracle.query(submission_ref, now)
        except (OSError, ConnectionError) as e:
            raise OracleUnavailable(str(e)) from e
        if verdict == "accepted":
            return ProbeOutcome(Status.ACCEPTED, latency=now - start, t_virtual=now, ref=submission_ref)
        if verdict == "rejected":
            return ProbeOutcome(Status.REJECTED, latency=now - start, detail="rejection-notice",
                                t_virtual=now, ref=submission_ref)
        if now >= deadline:
            return ProbeOutcome(Status.REJECTED, latency=now - start, detail="silent-ignore",
                                t_virtual=now, ref=submission_ref)
        clock.sleep(min(oracle.poll_interval, deadline - now))
