"""HTTP facade over :class:`Harness`.

The caller identifies itself with ``X-Identity: <registration_id>:<user_id>``
and passes its virtual time in ``X-Virtual-Time`` (ms), so rate windows and
moderation delays follow the client's clock rather than the server's.
"""

from __future__ import annotations

import json
import logging
import re
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import parse_qs, unquote, urlsplit

from ..core import GeoPoint, Speed, value_from_dict
from . import Harness, NotOwner, UnknownItem, UnknownPoi

log = logging.getLogger(__name__)


class _Handler(BaseHTTPRequestHandler):
    harness: Harness
    protocol_version = "HTTP/1.1"

    def log_message(self, fmt, *args):
        log.debug("%s " + fmt, self.address_string(), *args)

    def _send(self, code: int, body) -> None:
        data = json.dumps(body, sort_keys=True).encode()
        self.send_response(code)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def _body(self) -> dict:
        n = int(self.headers.get("Content-Length", 0))
        return json.loads(self.rfile.read(n) or b"{}")

    def _dispatch(self, method: str) -> None:
        url = urlsplit(self.path)
        q = {k: v[0] for k, v in parse_qs(url.query).items()}
        ident = self.headers.get("X-Identity", "anonymous")
        now = int(self.headers.get("X-Virtual-Time", 0))
        h = self.harness
        path = url.path.rstrip("/")
        try:
            body = self._body() if method in ("POST",) else {}
            m = None if path == "/poi/search" else \
                re.fullmatch(r"/(fitness/stats|fitness/render|safety/list|safety/inbox|poi)/(.+)", path)
            tail = unquote(m.group(2)) if m else None
            route = (method, m.group(1) if m else path)
            if route == ("POST", "/fitness/activity"):
                out = h.fitness_submit(ident, body, now).to_dict()
            elif route == ("GET", "fitness/stats"):
                out = h.fitness_stats(tail)
            elif route == ("GET", "fitness/render"):
                out = h.fitness_render(tail)
            elif route == ("POST", "/pricing/price"):
                out = h.pricing_submit(ident, body["store"], body["item"], int(body["price_cents"]), now).to_dict()
            elif route == ("GET", "/pricing/range"):
                lo, hi = h.pricing_range(q["store"], q["item"])
                out = {"min": lo, "max": hi}
            elif route == ("GET", "/pricing/current"):
                out = {"price_cents": h.pricing_current(q["store"], q["item"])}
            elif route == ("GET", "/pricing/items"):
                out = [list(x) for x in h.pricing_items()]
            elif route == ("POST", "/poi"):
                out = h.poi_add(ident, GeoPoint.parse(body["lon"], body["lat"], body.get("places")), now).to_dict()
            elif route == ("GET", "/poi/search"):
                bbox = tuple(q["bbox"].split(",")) if "bbox" in q else None
                out = h.poi_search(bbox)
            elif route == ("DELETE", "poi"):
                out = {"deleted": h.poi_delete(ident, tail)}
            elif route == ("POST", "/safety/post"):
                out = h.safety_submit(ident, value_from_dict({"kind": "post", **body}), now).to_dict()
            elif route == ("GET", "safety/list"):
                out = h.safety_list(tail, now)
            elif route == ("GET", "safety/inbox"):
                out = h.safety_inbox(tail, now)
            elif route == ("POST", "/transit/ride"):
                out = h.transit_ride(ident, Speed.kmh(body["kmh"]), now)
            else:
                return self._send(404, {"error": f"no route {method} {path}"})
        except (UnknownItem, UnknownPoi) as e:
            return self._send(404, {"error": str(e), "type": type(e).__name__})
        except NotOwner as e:
            return self._send(403, {"error": str(e), "type": "NotOwner"})
        except (KeyError, ValueError, TypeError) as e:
            return self._send(400, {"error": f"bad request: {e}"})
        self._send(200, out)

    def do_GET(self):
        self._dispatch("GET")

    def do_POST(self):
        self._dispatch("POST")

    def do_DELETE(self):
        self._dispatch("DELETE")


def make_server(harness: Harness, host: str = "127.0.0.1", port: int = 0) -> ThreadingHTTPServer:
    """Bind (port 0 picks a free one); call ``serve_forever`` to run."""
    handler = type("HarnessHandler", (_Handler,), {"harness": harness})
    srv = ThreadingHTTPServer((host, port), handler)
    srv.daemon_threads = True
    return srv
