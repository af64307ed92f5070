"""Simulated target services with known validation rules.

:class:`Harness` bundles one instance of each service behind the method names
the HTTP facade exposes, so a campaign can bind to either interchangeably.
"""

from __future__ import annotations

import copy
from importlib import resources
from pathlib import Path
from typing import Optional, Union

from ..core import Category, ConfigError, GeoPoint, PostDraft, ProbeOutcome, Speed, tomllib
from .fitness import FitnessRules, FitnessService
from .location import LocationRules, LocationService, NotOwner, UnknownPoi
from .pricing import CatalogItem, PricingRules, PricingService, UnknownItem
from .safety import SafetyRules, SafetyService
from .transit import TransitRules, TransitService

__all__ = [
    "Harness", "load_fixture", "merge", "NotOwner", "UnknownItem", "UnknownPoi",
    "FitnessRules", "PricingRules", "LocationRules", "SafetyRules", "TransitRules",
    "CatalogItem",
]


def load_fixture(name_or_path: Union[str, Path] = "default") -> dict:
    """A built-in fixture by name ("default", "toifi") or a TOML file path."""
    p = Path(name_or_path)
    try:
        if p.suffix == ".toml" or p.exists():
            text = p.read_text()
        else:
            text = resources.files(__package__).joinpath("fixtures", f"{name_or_path}.toml").read_text()
    except (OSError, FileNotFoundError) as e:
        raise ConfigError(f"cannot read fixture {name_or_path}: {e}") from e
    try:
        return tomllib.loads(text)
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"fixture syntax error: {e}") from e


def merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def _catalog(section: dict) -> list[CatalogItem]:
    items = []
    for row in section.get("item", []):
        items.append(CatalogItem(row["store"], row["item"], int(row["value"]), bool(row.get("milk", False)),
                                 row.get("min"), row.get("max")))
    return items


class Harness:
    """All five services, configured from a fixture document."""

    def __init__(self, fixture: Optional[dict] = None):
        doc = fixture if fixture is not None else load_fixture()
        self.fixture = doc
        try:
            f = dict(doc.get("fitness", {}))
            self.fitness = FitnessService(FitnessRules.for_variant(f.pop("variant", "strava"), **f))
            p = dict(doc.get("pricing", {}))
            catalog = _catalog(p)
            p.pop("item", None)
            self.pricing = PricingService(catalog, PricingRules(**p))
            loc = dict(doc.get("location", {}))
            seeds = tuple(GeoPoint.parse(lon, lat) for lon, lat in loc.pop("seed_pois", []))
            if "min_separation" in loc:
                loc["min_separation_units"] = GeoPoint.parse(loc.pop("min_separation"), 0).at_resolution()[0]
            self.location = LocationService(LocationRules.for_variant(loc.pop("variant", "toifi"), **loc), seeds)
            s = dict(doc.get("safety", {}))
            if "keywords" in s:
                s["keywords"] = {Category(k): tuple(v) for k, v in s["keywords"].items()}
            if "concrete_nouns" in s:
                s["concrete_nouns"] = frozenset(s["concrete_nouns"])
            if "latency_ms" in s:
                s["latency_ms"] = tuple(s["latency_ms"])
            self.safety = SafetyService(SafetyRules(**s))
            self.transit = TransitService(TransitRules(**doc.get("transit", {})))
        except (TypeError, ValueError, KeyError) as e:
            raise ConfigError(f"bad harness fixture: {e}") from e

    # fitness
    def fitness_submit(self, identity: str, activity: dict, now: int = 0) -> ProbeOutcome:
        return self.fitness.submit(identity, activity, now)

    def fitness_stats(self, identity: str) -> dict:
        return self.fitness.stats(identity)

    def fitness_render(self, identity: str) -> dict:
        return self.fitness.render(identity)

    # pricing
    def pricing_submit(self, identity: str, store: str, item: str, price_cents: int, now: int = 0) -> ProbeOutcome:
        return self.pricing.submit(identity, store, item, price_cents, now)

    def pricing_range(self, store: str, item: str) -> tuple[int, int]:
        return self.pricing.range(store, item)

    def pricing_current(self, store: str, item: str) -> int:
        return self.pricing.current(store, item)

    def pricing_items(self) -> list[tuple[str, str]]:
        return self.pricing.items()

    # location
    def poi_add(self, identity: str, point: GeoPoint, now: int = 0) -> ProbeOutcome:
        return self.location.add(identity, point, now)

    def poi_search(self, bbox: Optional[tuple] = None) -> list[dict]:
        return self.location.search(bbox)

    def poi_delete(self, identity: str, poi_id: str) -> bool:
        return self.location.delete(identity, poi_id)

    # safety
    def safety_submit(self, identity: str, post: PostDraft, now: int = 0) -> ProbeOutcome:
        return self.safety.submit(identity, post, now)

    def safety_list(self, identity: str, now: int = 0) -> list[dict]:
        return self.safety.list(identity, now)

    def safety_inbox(self, identity: str, now: int = 0) -> list[dict]:
        return self.safety.inbox(identity, now)

    # transit
    def transit_ride(self, identity: str, speed: Speed, now: int = 0) -> dict:
        return self.transit.ride(identity, speed, now)
