"""Neighborhood-safety posts under asynchronous moderation.

A post is accepted when its description mentions a keyword of its category,
names something concrete, and is long enough (a relevant image lowers the
bar). Verdicts land 1 to 7 minutes after submission and are settled lazily
whenever the service is touched. The eighth rejection in a day blocks the
identity; from then on its submissions vanish without a notice.
"""

from __future__ import annotations

import random
import threading
from dataclasses import dataclass, field
from typing import Optional

from ..core import Category, Image, PostDraft, ProbeOutcome, Status, tokenize

DAY_MS = 86_400_000

DEFAULT_KEYWORDS = {
    Category.CRIME: ("stolen", "packages", "porch", "theft", "burglary", "robbed", "thief", "broke"),
    Category.SAFETY: ("fire", "smoke", "hazard", "accident", "danger", "warning", "flooding", "fallen"),
    Category.LOST_PET: ("dog", "cat", "lost", "missing", "pet", "collar", "found", "puppy"),
    Category.UNEXPECTED_ACTIVITY: ("suspicious", "strange", "loud", "lurking", "unfamiliar", "noises"),
}

CONCRETE_NOUNS = (
    "alley", "backyard", "bike", "building", "car", "cat", "collar", "corner", "door", "dog",
    "driveway", "fence", "garage", "gate", "house", "lawn", "mailbox", "neighbor", "neighbors",
    "package", "packages", "park", "pole", "porch", "road", "sidewalk", "street", "tree", "truck",
    "van", "window", "wire", "yard",
)


@dataclass(frozen=True)
class SafetyRules:
    keywords: dict = field(default_factory=lambda: dict(DEFAULT_KEYWORDS))
    concrete_nouns: frozenset = frozenset(CONCRETE_NOUNS)
    min_words: int = 12
    min_words_with_image: int = 8
    latency_ms: tuple[int, int] = (60_000, 420_000)
    max_rejections_per_day: int = 8
    seed: int = 0

    def accepts(self, post: PostDraft) -> bool:
        words = tokenize(post.description)
        need = self.min_words_with_image if post.image is Image.RELEVANT else self.min_words
        keywords = set(self.keywords.get(post.category, ()))
        return len(words) >= need and any(w in keywords for w in words) \
            and any(w in self.concrete_nouns for w in words)


@dataclass
class _Submission:
    ref: str
    identity: str
    post: PostDraft
    submitted: int
    decide_at: int
    verdict: bool
    state: str = "pending"  # pending | accepted | rejected | ignored


class SafetyService:
    def __init__(self, rules: SafetyRules = SafetyRules()):
        self.rules = rules
        self.calls = 0
        self._subs: list[_Submission] = []
        self._blocked: set[str] = set()
        self._rejections: dict[tuple[str, int], int] = {}
        self._now = 0
        self._lock = threading.Lock()

    def _settle(self, now: int) -> None:
        self._now = max(self._now, now)
        due = sorted((s for s in self._subs if s.state == "pending" and s.decide_at <= self._now),
                     key=lambda s: (s.decide_at, s.ref))
        for s in due:
            if s.identity in self._blocked:
                s.state = "ignored"
                continue
            if s.verdict:
                s.state = "accepted"
                continue
            s.state = "rejected"
            key = (s.identity, s.decide_at // DAY_MS)
            self._rejections[key] = self._rejections.get(key, 0) + 1
            if self._rejections[key] >= self.rules.max_rejections_per_day:
                self._blocked.add(s.identity)

    def submit(self, identity: str, post: PostDraft, now: int = 0) -> ProbeOutcome:
        with self._lock:
            self._settle(now)
            idx = self.calls
            self.calls += 1
            rng = random.Random(f"{self.rules.seed}:{idx}")
            latency = rng.randint(*self.rules.latency_ms)
            sub = _Submission(f"post-{idx}", identity, post, now, now + latency, self.rules.accepts(post))
            if identity in self._blocked:
                sub.state = "ignored"
            self._subs.append(sub)
            return ProbeOutcome(Status.PENDING, t_virtual=now, ref=sub.ref)

    def list(self, identity: str, now: int = 0) -> list[dict]:
        """Posts of ``identity`` that made it onto the feed."""
        with self._lock:
            self._settle(now)
            return [{"ref": s.ref, "category": s.post.category.value, "title": s.post.title}
                    for s in self._subs if s.identity == identity and s.state == "accepted"]

    def inbox(self, identity: str, now: int = 0) -> list[dict]:
        """Rejection notices for ``identity``."""
        with self._lock:
            self._settle(now)
            return [{"ref": s.ref, "at": s.decide_at}
                    for s in self._subs if s.identity == identity and s.state == "rejected"]

    def is_blocked(self, identity: str, now: Optional[int] = None) -> bool:
        with self._lock:
            if now is not None:
                self._settle(now)
            return identity in self._blocked
