"""Point-of-interest reports (speed-trap and hotspot style services).

Checks run in a fixed order: per-identity cap, coordinate range, reject set,
declared precision, separation from every stored POI.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, replace
from typing import Optional

from ..core import GeoPoint, ProbeError, ProbeOutcome, Status, chebyshev_units

DEG = 10**9  # 1e-9 degree units per degree


class NotOwner(ProbeError):
    pass


class UnknownPoi(ProbeError):
    pass


@dataclass(frozen=True)
class LocationRules:
    variant: str = "toifi"
    precision_places: Optional[int] = 7
    min_separation_units: int = 0
    reject_lon_zero: bool = False
    reject_lat_zero: bool = False
    reject_lat_poles: bool = False
    per_identity_cap: Optional[int] = None
    validate_range: bool = True
    display_places: int = 9

    @classmethod
    def for_variant(cls, variant: str = "toifi", **overrides) -> "LocationRules":
        base = {
            "toifi": cls(),
            "police": cls("police", 5, 2 * DEG // 1000, True, True, True, 50),
            "open": cls("open", None),
        }
        if variant not in base:
            raise ValueError(f"unknown location variant {variant!r}")
        return replace(base[variant], **overrides)


@dataclass(frozen=True)
class Poi:
    id: str
    owner: str
    point: GeoPoint


class LocationService:
    def __init__(self, rules: LocationRules = LocationRules(), seed_pois: tuple[GeoPoint, ...] = ()):
        self.rules = rules
        self._pois: dict[str, Poi] = {}
        self._adds: dict[str, int] = {}
        self._next = 0
        self._lock = threading.Lock()
        for p in seed_pois:
            self._store("seed", p)

    def _store(self, owner: str, p: GeoPoint) -> Poi:
        self._next += 1
        poi = Poi(f"poi-{self._next}", owner, p)
        self._pois[poi.id] = poi
        return poi

    def _verdict(self, p: GeoPoint) -> Optional[str]:
        r = self.rules
        lon, lat = p.at_resolution()
        if r.validate_range and not (-180 * DEG <= lon <= 180 * DEG and -90 * DEG <= lat <= 90 * DEG):
            return "range"
        if (r.reject_lon_zero and lon == 0) or (r.reject_lat_zero and lat == 0) \
                or (r.reject_lat_poles and abs(lat) == 90 * DEG):
            return "reject-set"
        if r.precision_places is not None and p.places > r.precision_places:
            return "precision"
        if r.min_separation_units and any(
                chebyshev_units(p, q.point) < r.min_separation_units for q in self._pois.values()):
            return "separation"
        return None

    def add(self, identity: str, p: GeoPoint, now: int = 0) -> ProbeOutcome:
        with self._lock:
            n = self._adds.get(identity, 0) + 1
            self._adds[identity] = n
            cap = self.rules.per_identity_cap
            if cap is not None and n > cap:
                return ProbeOutcome(Status.RATE_LIMITED, detail="identity cap", t_virtual=now)
            why = self._verdict(p)
            if why:
                return ProbeOutcome(Status.REJECTED, detail=why, t_virtual=now)
            return ProbeOutcome(Status.ACCEPTED, t_virtual=now, ref=self._store(identity, p).id)

    def search(self, bbox: Optional[tuple] = None) -> list[dict]:
        """Stored POIs, coordinates printed at the service's display precision."""
        with self._lock:
            pois = sorted(self._pois.values(), key=lambda q: int(q.id.split("-")[1]))
        if bbox is not None:
            lo = GeoPoint.parse(bbox[0], bbox[1]).at_resolution()
            hi = GeoPoint.parse(bbox[2], bbox[3]).at_resolution()
            pois = [q for q in pois if lo[0] <= q.point.at_resolution()[0] <= hi[0]
                    and lo[1] <= q.point.at_resolution()[1] <= hi[1]]
        d = self.rules.display_places
        out = []
        for q in pois:
            lon, lat = q.point.at_resolution(max(d, q.point.places))
            shown = GeoPoint(lon, lat, max(d, q.point.places))
            out.append({"id": q.id, "lon": shown.lon_text, "lat": shown.lat_text})
        return out

    def delete(self, identity: str, poi_id: str) -> bool:
        with self._lock:
            poi = self._pois.get(poi_id)
            if poi is None:
                raise UnknownPoi(poi_id)
            if poi.owner != identity:
                raise NotOwner(f"{poi_id} is not owned by {identity}")
            del self._pois[poi_id]
            return True

    def adds_by(self, identity: str) -> int:
        with self._lock:
            return self._adds.get(identity, 0)
