"""HTTP client with the same method surface as the in-process :class:`Harness`."""

from __future__ import annotations

import json
import urllib.error
import urllib.request
from typing import Optional
from urllib.parse import quote, urlencode

from ..core import GeoPoint, PostDraft, ProbeOutcome, Speed
from .location import NotOwner, UnknownPoi
from .pricing import UnknownItem

_ERRORS = {"UnknownItem": UnknownItem, "UnknownPoi": UnknownPoi, "NotOwner": NotOwner}


class HttpHarness:
    def __init__(self, url: str, timeout: float = 10.0):
        self.url = url.rstrip("/")
        self.timeout = timeout

    def _call(self, method: str, path: str, identity: str = "anonymous", now: int = 0,
              body: Optional[dict] = None, query: Optional[dict] = None):
        url = self.url + path + ("?" + urlencode(query) if query else "")
        data = json.dumps(body).encode() if body is not None else None
        req = urllib.request.Request(url, data=data, method=method, headers={
            "X-Identity": identity, "X-Virtual-Time": str(now), "Content-Type": "application/json"})
        try:
            with urllib.request.urlopen(req, timeout=self.timeout) as r:
                return json.loads(r.read())
        except urllib.error.HTTPError as e:
            payload = json.loads(e.read() or b"{}")
            exc = _ERRORS.get(payload.get("type"))
            if exc:
                raise exc(payload.get("error", "")) from None
            raise ValueError(payload.get("error", f"HTTP {e.code}")) from None

    def fitness_submit(self, identity: str, activity: dict, now: int = 0) -> ProbeOutcome:
        return ProbeOutcome.from_dict(self._call("POST", "/fitness/activity", identity, now, activity))

    def fitness_stats(self, identity: str) -> dict:
        return self._call("GET", f"/fitness/stats/{quote(identity)}")

    def fitness_render(self, identity: str) -> dict:
        return self._call("GET", f"/fitness/render/{quote(identity)}")

    def pricing_submit(self, identity: str, store: str, item: str, price_cents: int, now: int = 0) -> ProbeOutcome:
        body = {"store": store, "item": item, "price_cents": price_cents}
        return ProbeOutcome.from_dict(self._call("POST", "/pricing/price", identity, now, body))

    def pricing_range(self, store: str, item: str) -> tuple[int, int]:
        r = self._call("GET", "/pricing/range", query={"store": store, "item": item})
        return r["min"], r["max"]

    def pricing_current(self, store: str, item: str) -> int:
        return self._call("GET", "/pricing/current", query={"store": store, "item": item})["price_cents"]

    def pricing_items(self) -> list[tuple[str, str]]:
        return [tuple(x) for x in self._call("GET", "/pricing/items")]

    def poi_add(self, identity: str, point: GeoPoint, now: int = 0) -> ProbeOutcome:
        body = {"lon": point.lon_text, "lat": point.lat_text, "places": point.places}
        return ProbeOutcome.from_dict(self._call("POST", "/poi", identity, now, body))

    def poi_search(self, bbox: Optional[tuple] = None) -> list[dict]:
        return self._call("GET", "/poi/search", query={"bbox": ",".join(map(str, bbox))} if bbox else None)

    def poi_delete(self, identity: str, poi_id: str) -> bool:
        return self._call("DELETE", f"/poi/{quote(poi_id)}", identity)["deleted"]

    def safety_submit(self, identity: str, post: PostDraft, now: int = 0) -> ProbeOutcome:
        body = {k: v for k, v in post.to_dict().items() if k != "kind"}
        return ProbeOutcome.from_dict(self._call("POST", "/safety/post", identity, now, body))

    def safety_list(self, identity: str, now: int = 0) -> list[dict]:
        return self._call("GET", f"/safety/list/{quote(identity)}", identity, now)

    def safety_inbox(self, identity: str, now: int = 0) -> list[dict]:
        return self._call("GET", f"/safety/inbox/{quote(identity)}", identity, now)

    def transit_ride(self, identity: str, speed: Speed, now: int = 0) -> dict:
        return self._call("POST", "/transit/ride", identity, now, {"kmh": str(speed)})
