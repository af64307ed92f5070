"""Numeric value exploration.

Find where an integer input domain stops being accepted: grow geometrically
from a starting value until the first rejection, then refine between the last
success and that rejection either by a linear walk or by bisection. Bisection
can demand confirmation of each rejection, which is what keeps it usable on
flaky targets.

Values are plain ints on a grid of step ``s`` (cents, seconds, meters, km/h);
the caller maps them to and from service units.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Union

from .core import ProbeError, ProbeOutcome, Status, as_outcome

Probe = Callable[[int], Union[ProbeOutcome, bool]]

AUTO_BISECT_STEPS = 1000


class InitialRejected(ProbeError):
    pass


class CapReachedAccepted(ProbeError):
    def __init__(self, cap: int):
        super().__init__(f"hard cap {cap} probed and still accepted")
        self.cap = cap


class InconsistentOracle(ProbeError):
    pass


class OracleExhausted(ProbeError):
    pass


class InconclusiveProbe(ProbeError):
    """The target answered with something other than accept/reject."""


@dataclass(frozen=True)
class NumericDomain:
    x0: int
    s: int = 1
    direction: int = 1
    hard_cap: Optional[int] = None

    def __post_init__(self):
        if self.s <= 0:
            raise ValueError("step must be positive")
        if self.direction not in (1, -1):
            raise ValueError("direction must be +1 or -1")
        if self.hard_cap is not None and (self.hard_cap - self.x0) * self.direction <= 0:
            raise ValueError("hard_cap must lie beyond x0 in the exploration direction")


@dataclass(frozen=True)
class ConfirmPolicy:
    """How hard to check a rejection before trusting it.

    A rejected candidate ``c`` is re-tested at ``c + k*step`` (k = 1..n_extra,
    in the exploration direction); the rejection stands only if at least
    ``fail_threshold`` of the ``n_extra + 1`` results are failures. ``step=0``
    re-probes the candidate itself.
    """

    n_extra: int = 4
    step: int = 10
    fail_threshold: int = 5

    def __post_init__(self):
        if self.n_extra < 0:
            raise ValueError("n_extra must be >= 0")
        if not 1 <= self.fail_threshold <= self.n_extra + 1:
            raise ValueError("fail_threshold must be within 1..n_extra+1")


NO_CONFIRM = ConfirmPolicy(n_extra=0, step=0, fail_threshold=1)


@dataclass(frozen=True)
class TraceEntry:
    value: int
    status: Status
    t_virtual: Optional[int] = None

    def to_dict(self) -> dict:
        return {"value": self.value, "status": self.status.value, "t_virtual": self.t_virtual}


@dataclass
class BoundaryReport:
    last_accepted: int
    first_rejected: Optional[int]
    probes_used: int
    trace: list[TraceEntry] = field(default_factory=list)
    phase_split: int = 0
    mode: str = "linear"
    cap_reached: bool = False
    inconsistent: bool = False

    def to_dict(self) -> dict:
        return {
            "last_accepted": self.last_accepted,
            "first_rejected": self.first_rejected,
            "probes_used": self.probes_used,
            "phase_split": self.phase_split,
            "mode": self.mode,
            "cap_reached": self.cap_reached,
            "inconsistent": self.inconsistent,
            "trace": [t.to_dict() for t in self.trace],
        }


class _Prober:
    """Wraps the probe callback: records the trace, enforces budget and bounds."""

    def __init__(self, probe: Probe, budget: Optional[int] = None,
                 lo: Optional[int] = None, hi: Optional[int] = None):
        self.probe = probe
        self.budget = budget
        self.bounds = (lo, hi)
        self.trace: list[TraceEntry] = []

    def __call__(self, x: int) -> bool:
        lo, hi = self.bounds
        if (lo is not None and x < lo) or (hi is not None and x > hi):
            raise AssertionError(f"probe {x} outside [{lo}, {hi}]")
        if self.budget is not None and len(self.trace) >= self.budget:
            raise OracleExhausted(f"probe budget of {self.budget} spent")
        out = as_outcome(self.probe(x))
        self.trace.append(TraceEntry(x, out.status, out.t_virtual))
        if not out.status.decisive:
            raise InconclusiveProbe(f"probe {x} returned {out.status.value}")
        return out.accepted

    def confirmed_failure(self, x: int, direction: int, confirm: ConfirmPolicy,
                          limit: Optional[int] = None) -> tuple[bool, Optional[int]]:
        """After ``x`` was rejected: is the rejection confirmed?

        Returns (confirmed, furthest accepted extra).
        """
        fails, best = 1, None
        n = 1
        for k in range(1, confirm.n_extra + 1):
            y = x + direction * confirm.step * k
            if limit is not None and (y - limit) * direction > 0:
                break
            n += 1
            if self(y):
                best = y
            else:
                fails += 1
        return fails >= min(confirm.fail_threshold, n), best


def _sign(x: int) -> int:
    return (x > 0) - (x < 0)


def next_geometric(x: int, d: NumericDomain) -> int:
    """One geometric step from ``x``.

    Away from zero the value doubles; toward zero it halves (snapped onto the
    step grid); zero itself is seeded with one grid step, since doubling zero
    goes nowhere.
    """
    if x == 0:
        return d.direction * d.s
    if _sign(x) == d.direction:
        return 2 * x
    half = (abs(x) // 2) // d.s * d.s
    return _sign(x) * half


def _beyond(a: int, b: int, direction: int) -> bool:
    return (a - b) * direction > 0


def _bounds(d: NumericDomain) -> tuple[Optional[int], Optional[int]]:
    if d.hard_cap is None:
        return (d.x0, None) if d.direction > 0 else (None, d.x0)
    return (min(d.x0, d.hard_cap), max(d.x0, d.hard_cap))


def geometric_phase(d: NumericDomain, probe: Probe, *, confirm: Optional[ConfirmPolicy] = None,
                    verify_initial: bool = True, _prober: Optional[_Prober] = None) -> tuple[int, int]:
    """Double (or halve) from ``d.x0`` until the first rejection.

    ``x0`` itself is only probed when the very first step fails, to tell a
    boundary right at ``x0`` from a rejected start.
    """
    p = _prober or _Prober(probe, None, *_bounds(d))
    confirm = confirm or NO_CONFIRM
    x = d.x0
    while True:
        nxt = next_geometric(x, d)
        if d.hard_cap is not None and not _beyond(d.hard_cap, nxt, d.direction):
            nxt = d.hard_cap
        if p(nxt):
            ok = True
        else:
            confirmed, _ = p.confirmed_failure(nxt, d.direction, confirm, d.hard_cap)
            ok = not confirmed
        if ok:
            x = nxt
            if x == d.hard_cap:
                raise CapReachedAccepted(x)
            continue
        if x == d.x0 and verify_initial and not p(d.x0):
            raise InitialRejected(f"initial value {d.x0} rejected")
        return x, nxt


def linear_refine(last_success: int, first_fail: int, s: int, probe: Probe, *,
                  _prober: Optional[_Prober] = None) -> BoundaryReport:
    """Walk from ``last_success`` by ``s`` toward ``first_fail`` until a rejection."""
    if s <= 0:
        raise ValueError("step must be positive")
    p = _prober or _Prober(probe)
    start = len(p.trace)
    direction = _sign(first_fail - last_success) or 1
    v, last = last_success + direction * s, last_success
    first_rejected = first_fail
    while _beyond(first_fail, v, direction):
        if not p(v):
            first_rejected = v
            break
        last = v
        v += direction * s
    return BoundaryReport(last, first_rejected, len(p.trace) - start,
                          trace=list(p.trace[start:]), mode="linear")


def bisect_refine(last_success: int, first_fail: int, probe: Probe,
                  confirm: Optional[ConfirmPolicy] = None, *, s: int = 1,
                  budget: Optional[int] = None, limit: Optional[int] = None,
                  _prober: Optional[_Prober] = None) -> BoundaryReport:
    """Halve [last_success, first_fail] until its width is at most ``s``.

    A rejected midpoint only moves the upper end once ``confirm`` agrees; an
    unconfirmed rejection is treated as a success (and any accepted
    confirmation probe further out moves the lower end there).
    """
    if s <= 0:
        raise ValueError("step must be positive")
    p = _prober or _Prober(probe, budget)
    confirm = confirm or NO_CONFIRM
    start = len(p.trace)
    direction = _sign(first_fail - last_success) or 1
    lo, hi = last_success, first_fail
    while abs(hi - lo) > s:
        k = max(1, (abs(hi - lo) // s) // 2)
        mid = lo + direction * s * k
        if p(mid):
            lo = mid
            continue
        confirmed, best = p.confirmed_failure(mid, direction, confirm, limit)
        if confirmed:
            hi = mid
        else:
            lo = mid
            if best is not None and _beyond(hi, best, direction) and _beyond(best, lo, direction):
                lo = best
    return BoundaryReport(lo, hi, len(p.trace) - start, trace=list(p.trace[start:]), mode="bisect")


def explore(d: NumericDomain, probe: Probe, mode: str = "auto",
            confirm: Optional[ConfirmPolicy] = None, *, budget: Optional[int] = None,
            verify_initial: bool = True, strict: bool = False) -> BoundaryReport:
    """Geometric phase followed by linear or bisection refinement.

    ``mode="auto"`` bisects when the bracket spans more than 1000 grid steps.
    The same ``confirm`` policy guards rejections in both phases. With
    ``strict`` an acceptance seen beyond the reported boundary raises
    InconsistentOracle; otherwise the report is flagged.
    """
    if mode not in ("linear", "bisect", "auto"):
        raise ValueError(f"unknown mode {mode!r}")
    p = _Prober(probe, budget, *_bounds(d))
    try:
        last, fail = geometric_phase(d, probe, confirm=confirm, verify_initial=verify_initial, _prober=p)
    except CapReachedAccepted as e:
        return BoundaryReport(e.cap, None, len(p.trace), list(p.trace), len(p.trace),
                              mode="geometric", cap_reached=True)
    split = len(p.trace)
    if mode == "auto":
        mode = "bisect" if abs(fail - last) / d.s > AUTO_BISECT_STEPS else "linear"
    if mode == "linear":
        rep = linear_refine(last, fail, d.s, probe, _prober=p)
    else:
        rep = bisect_refine(last, fail, probe, confirm, s=d.s, limit=d.hard_cap, _prober=p)
    rep.trace = list(p.trace)
    rep.probes_used = len(p.trace)
    rep.phase_split = split
    rep.inconsistent = any(
        t.status is Status.ACCEPTED and _beyond(t.value, rep.first_rejected, d.direction)
        for t in p.trace
    )
    if rep.inconsistent and strict:
        raise InconsistentOracle(f"accepted value beyond first rejection {rep.first_rejected}")
    return rep


def monotone_oracle(boundary: int, direction: int = 1) -> Callable[[int], bool]:
    """Accept iff x is on the accepted side of (or at) ``boundary``."""
    return lambda x: (boundary - x) * direction >= 0
