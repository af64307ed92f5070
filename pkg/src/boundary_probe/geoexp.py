"""GPS coordinate exploration and simulated movement.

Strategies take a ``probe(GeoPoint) -> ProbeOutcome`` callable; identity
rotation, pacing and cleanup belong to whoever builds that callable.

Distances use an equirectangular projection at the local latitude. Over the
few-kilometre spans involved the error against a geodesic stays well under
0.1%, which is as precise as anything this module is compared with.
"""

from __future__ import annotations

import bisect
import csv
import io
import math
from dataclasses import dataclass, field
from decimal import Decimal
from typing import Callable, Optional, Sequence, Union

from .core import MAX_PLACES, GeoPoint, ProbeError, ProbeOutcome, Speed, Status, chebyshev_units
from .nve import NumericDomain, explore

GeoProbe = Callable[[GeoPoint], ProbeOutcome]
EARTH_RADIUS_M = 6_371_008.8


class EmptyRoute(ProbeError):
    pass


@dataclass
class GeoCampaignResult:
    """Probes issued by one strategy.

    RateLimited and Blocked outcomes count as rate-limited; anything else that
    is not Accepted counts as rejected.
    """

    strategy: str
    probes: list[tuple[GeoPoint, ProbeOutcome]] = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    def _count(self, statuses) -> int:
        return sum(1 for _, o in self.probes if o.status in statuses)

    @property
    def accepted_count(self) -> int:
        return self._count({Status.ACCEPTED})

    @property
    def rate_limited_count(self) -> int:
        return self._count({Status.RATE_LIMITED, Status.BLOCKED})

    @property
    def rejected_count(self) -> int:
        return len(self.probes) - self.accepted_count - self.rate_limited_count

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["lon", "lat", "status"])
        for p, o in self.probes:
            w.writerow([p.lon_text, p.lat_text, o.status.value])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {
            "strategy": self.strategy,
            "probes": len(self.probes),
            "accepted": self.accepted_count,
            "rejected": self.rejected_count,
            "rate_limited": self.rate_limited_count,
            **self.extra,
        }


def _point(lon: int, lat: int) -> GeoPoint:
    return GeoPoint(lon, lat, 0)


# ---------------------------------------------------------------------------
# out-of-range

def ce_o(probe: GeoProbe, *, fixed: int = 1, cap_factor: int = 4) -> GeoCampaignResult:
    """Integer-degree exploration outward from each of the four range edges.

    Each edge runs NVE with step 1 from the edge itself, which is not probed;
    ``cap_factor * edge`` bounds the doubling when a target accepts anything.
    """
    res = GeoCampaignResult("CE-O")
    edges = []
    for axis, edge in (("lon", 180), ("lat", 90)):
        for direction in (1, -1):
            x0 = edge * direction
            d = NumericDomain(x0, 1, direction, hard_cap=x0 * cap_factor)

            def one(x: int, axis=axis) -> ProbeOutcome:
                p = _point(x, fixed) if axis == "lon" else _point(fixed, x)
                out = probe(p)
                res.probes.append((p, out))
                return out

            rep = explore(d, one, mode="linear", verify_initial=False)
            edges.append({"axis": axis, "edge": x0, "last_accepted": rep.last_accepted,
                          "first_rejected": rep.first_rejected, "cap_reached": rep.cap_reached,
                          "probes": rep.probes_used})
    res.extra["edges"] = edges
    return res


# ---------------------------------------------------------------------------
# single-axis sweeps

def axis_order(limit: int, order: str = "outward") -> list[int]:
    """Integers in [-limit, limit]: ``outward`` is 0, 1, -1, 2, -2, ...;
    ``ascending`` is -limit..limit."""
    if order == "ascending":
        return list(range(-limit, limit + 1))
    if order != "outward":
        raise ValueError("order is outward or ascending")
    out = [0]
    for k in range(1, limit + 1):
        out += [k, -k]
    return out


def ce_axis(axis: str, fixed: int, probe: GeoProbe, order: str = "outward") -> GeoCampaignResult:
    """Sweep every integer degree of one axis with the other held at ``fixed``.

    Longitude issues 361 probes and latitude 181 (both endpoints included);
    the result also carries the counts with the positive endpoint left out.
    """
    axis = axis.lower()
    if axis not in ("long", "lon", "lat"):
        raise ValueError("axis is long or lat")
    lon_axis = axis != "lat"
    limit, other = (180, 90) if lon_axis else (90, 180)
    if abs(fixed) > other:
        raise ValueError(f"fixed value {fixed} outside the other axis' range")
    res = GeoCampaignResult("CE-Long" if lon_axis else "CE-Lat")
    for x in axis_order(limit, order):
        p = _point(x, fixed) if lon_axis else _point(fixed, x)
        res.probes.append((p, probe(p)))
    edge_ok = sum(1 for p, o in res.probes
                  if o.accepted and (p.lon_units if lon_axis else p.lat_units) == limit)
    res.extra.update({
        "probes_inclusive": len(res.probes),
        "probes_exclusive": len(res.probes) - 1,
        "accepted_inclusive": res.accepted_count,
        "accepted_exclusive": res.accepted_count - edge_ok,
        "order": order,
    })
    return res


# ---------------------------------------------------------------------------
# 2D grid

def grid_points(step: int) -> list[GeoPoint]:
    if step <= 0 or 360 % step or 180 % step:
        raise ValueError("step must divide both 360 and 180")
    return [_point(lon, lat) for lon in range(-180, 181, step) for lat in range(-90, 91, step)]


def ce_2d(step: int, probe: GeoProbe,
          cleanup: Optional[Callable[[ProbeOutcome], None]] = None) -> GeoCampaignResult:
    """Every point of the ``step``-degree grid, longitude-major.

    ``cleanup`` is called on each accepted outcome (e.g. to delete the POI).
    """
    res = GeoCampaignResult("CE-2D", extra={"step": step})
    for p in grid_points(step):
        out = probe(p)
        res.probes.append((p, out))
        if cleanup is not None and out.accepted:
            cleanup(out)
    return res


# ---------------------------------------------------------------------------
# precision

@dataclass
class PrecisionReport:
    max_places: Optional[int]
    min_separation_units: Optional[int]
    trace: list[dict] = field(default_factory=list)
    probes: list[tuple[GeoPoint, ProbeOutcome]] = field(default_factory=list)

    @property
    def min_separation(self) -> Optional[Decimal]:
        """Degrees."""
        if self.min_separation_units is None:
            return None
        return Decimal(self.min_separation_units).scaleb(-MAX_PLACES).normalize()

    def to_dict(self) -> dict:
        sep = self.min_separation
        return {"max_places": self.max_places,
                "min_separation": None if sep is None else format(sep, "f"),
                "levels": self.trace, "probes": len(self.probes)}


def level_points(origin: GeoPoint, places: int) -> list[GeoPoint]:
    """The 100 points that differ from ``origin`` only in the last of ``places``
    decimals of each coordinate (longitude digit outer)."""
    scale = 10 ** (MAX_PLACES - places)
    lon9, lat9 = origin.at_resolution()
    base_lon, base_lat = (lon9 // scale) // 10 * 10, (lat9 // scale) // 10 * 10
    return [GeoPoint(base_lon + i, base_lat + j, places) for i in range(10) for j in range(10)]


def ce_prec(origin: GeoPoint, start_places: int, probe: GeoProbe,
            cleanup: Optional[Callable[[list[ProbeOutcome]], None]] = None) -> PrecisionReport:
    """Find the finest precision accepted and the closest two POIs may sit.

    Levels descend from ``start_places``. A level with no acceptance, or with
    a rejection after an acceptance, moves one decimal coarser; a level where
    every probe after the first is accepted ends the search. POIs accepted at
    a level coexist until the level is done, then ``cleanup`` removes them.
    """
    if not 0 <= start_places <= MAX_PLACES:
        raise ValueError("start_places must be within 0..9")
    rep = PrecisionReport(None, None)
    places = start_places
    while places >= 0:
        accepted: list[tuple[GeoPoint, ProbeOutcome]] = []
        for p in level_points(origin, places):
            out = probe(p)
            rep.probes.append((p, out))
            if out.accepted:
                accepted.append((p, out))
        n_rej = 100 - len(accepted)
        rep.trace.append({"places": places, "accepted": len(accepted), "rejected": n_rej})
        if accepted and rep.max_places is None:
            rep.max_places = places
        for a in range(len(accepted)):
            for b in range(a + 1, len(accepted)):
                gap = chebyshev_units(accepted[a][0], accepted[b][0])
                if rep.min_separation_units is None or gap < rep.min_separation_units:
                    rep.min_separation_units = gap
        if cleanup is not None and accepted:
            cleanup([o for _, o in accepted])
        if accepted and n_rej == 0:
            break
        places -= 1
    return rep


# ---------------------------------------------------------------------------
# movement

def planar_metres(a: GeoPoint, b: GeoPoint) -> float:
    """Equirectangular distance, projected at the pair's mean latitude."""
    (ax, ay), (bx, by) = a.at_resolution(), b.at_resolution()
    mean_lat = math.radians((ay + by) / 2e9)
    dx = math.radians((bx - ax) / 1e9) * math.cos(mean_lat)
    dy = math.radians((by - ay) / 1e9)
    return EARTH_RADIUS_M * math.hypot(dx, dy)


@dataclass(frozen=True)
class GpsSample:
    t: int
    point: GeoPoint


class Route:
    """A polyline with cumulative distance in metres."""

    def __init__(self, points: Sequence[GeoPoint]):
        pts = list(points)
        if len(pts) < 2:
            raise EmptyRoute("a route needs at least two points")
        self.points = pts
        self.cumulative = [0.0]
        for a, b in zip(pts, pts[1:]):
            self.cumulative.append(self.cumulative[-1] + planar_metres(a, b))
        if self.length <= 0:
            raise EmptyRoute("route has zero length")

    @property
    def length(self) -> float:
        return self.cumulative[-1]

    def at(self, dist: float) -> GeoPoint:
        """Position ``dist`` metres along the route (clamped to its ends)."""
        dist = min(max(dist, 0.0), self.length)
        k = min(bisect.bisect_right(self.cumulative, dist), len(self.points) - 1)
        k = max(k, 1)
        seg = self.cumulative[k] - self.cumulative[k - 1]
        f = 0.0 if seg == 0 else (dist - self.cumulative[k - 1]) / seg
        (ax, ay), (bx, by) = self.points[k - 1].at_resolution(), self.points[k].at_resolution()
        return GeoPoint(round(ax + f * (bx - ax)), round(ay + f * (by - ay)), MAX_PLACES)


def gen_gps_timeseries(route: Route, speed: Union[Speed, float, int, Decimal],
                       interval: int = 1000) -> list[GpsSample]:
    """Positions every ``interval`` ms while moving along ``route`` at a
    constant speed (km/h), ending with a sample exactly at the route's end."""
    kmh = float(speed.value if isinstance(speed, Speed) else speed)
    if kmh <= 0:
        raise ValueError("speed must be positive")
    if interval <= 0:
        raise ValueError("interval must be positive")
    mps = kmh / 3.6
    # a route shorter than a millisecond of travel still gets a distinct end sample
    end_ms = max(1, round(route.length / mps * 1000))
    out = [GpsSample(t, route.at(mps * t / 1000)) for t in range(0, end_ms, interval)]
    out.append(GpsSample(end_ms, route.points[-1]))
    return out
