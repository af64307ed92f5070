"""Grocery price reports with a per-item accepted envelope.

The envelope is derived from the catalog's reference value and stays put as
reports come in: min is 10% of the value (30% for milk above $5), rounded half
up to the cent; max is $2 per started dollar. Items whose observed bounds break
the rule carry explicit overrides.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from typing import Optional

from ..core import ProbeError, ProbeOutcome, Status


class UnknownItem(ProbeError):
    pass


@dataclass(frozen=True)
class CatalogItem:
    store: str
    item: str
    value: int
    milk: bool = False
    min_override: Optional[int] = None
    max_override: Optional[int] = None


@dataclass(frozen=True)
class PricingRules:
    min_percent: int = 10
    milk_min_percent: int = 30
    milk_tier_above: int = 500
    max_per_dollar: int = 200

    def envelope(self, it: CatalogItem) -> tuple[int, int]:
        pct = self.milk_min_percent if it.milk and it.value > self.milk_tier_above else self.min_percent
        lo = (it.value * pct + 50) // 100
        hi = self.max_per_dollar * -(-it.value // 100)
        if it.min_override is not None:
            lo = it.min_override
        if it.max_override is not None:
            hi = it.max_override
        return lo, hi


class PricingService:
    def __init__(self, catalog: list[CatalogItem], rules: PricingRules = PricingRules()):
        self.rules = rules
        self._items = {(c.store, c.item): c for c in catalog}
        self._current = {k: c.value for k, c in self._items.items()}
        self._lock = threading.Lock()

    def _get(self, store: str, item: str) -> CatalogItem:
        try:
            return self._items[(store, item)]
        except KeyError:
            raise UnknownItem(f"{store}/{item}") from None

    def items(self) -> list[tuple[str, str]]:
        return sorted(self._items)

    def range(self, store: str, item: str) -> tuple[int, int]:
        return self.rules.envelope(self._get(store, item))

    def submit(self, identity: str, store: str, item: str, price_cents: int, now: int = 0) -> ProbeOutcome:
        lo, hi = self.range(store, item)
        with self._lock:
            if lo <= price_cents <= hi:
                self._current[(store, item)] = price_cents
                return ProbeOutcome(Status.ACCEPTED, t_virtual=now)
            return ProbeOutcome(Status.REJECTED, t_virtual=now)

    def current(self, store: str, item: str) -> int:
        self._get(store, item)
        with self._lock:
            return self._current[(store, item)]
