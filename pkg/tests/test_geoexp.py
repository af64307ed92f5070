import csv
import io
import math

import pytest
from hypothesis import given, strategies as st

from boundary_probe.core import GeoPoint, ProbeOutcome, Speed, Status
from boundary_probe.geoexp import (
    EmptyRoute, Route, axis_order, ce_2d, ce_axis, ce_o, ce_prec, gen_gps_timeseries, grid_points,
    level_points, planar_metres,
)

DIVISORS = [d for d in range(1, 181) if 360 % d == 0 and 180 % d == 0]
ACC, REJ = ProbeOutcome(Status.ACCEPTED), ProbeOutcome(Status.REJECTED)


def in_range(p: GeoPoint) -> ProbeOutcome:
    lon, lat = p.at_resolution()
    return ACC if abs(lon) <= 180 * 10**9 and abs(lat) <= 90 * 10**9 else REJ


def police_rule(p: GeoPoint) -> ProbeOutcome:
    lon, lat = p.at_resolution()
    return REJ if lon == 0 or lat == 0 or abs(lat) == 90 * 10**9 else ACC


def harness_probe(h, pool_size=200):
    state = {"k": 0}

    def probe(p):
        state["k"] += 1
        return h.poi_add(f"id-{state['k'] // 50}", p)

    return probe


# ---------------------------------------------------------------------------
# out-of-range and axes

def test_ce_o_conforming_target_rejects_everything():
    res = ce_o(in_range)
    assert res.accepted_count == 0
    assert {(e["axis"], e["edge"]) for e in res.extra["edges"]} == {("lon", 180), ("lon", -180), ("lat", 90), ("lat", -90)}
    probed = [p for p, _ in res.probes]
    assert GeoPoint(181, 1) in probed and GeoPoint(360, 1) in probed


def test_ce_o_reports_acceptance_when_validation_disabled(make_harness):
    h = make_harness(location={"variant": "open", "validate_range": False})
    res = ce_o(harness_probe(h))
    assert res.accepted_count > 0
    assert all(e["cap_reached"] and abs(e["last_accepted"]) == 4 * abs(e["edge"]) for e in res.extra["edges"])
    assert h.poi_add("x", GeoPoint(181, 1)).accepted


def test_ce_o_on_toifi_harness(make_harness):
    assert ce_o(harness_probe(make_harness("toifi"))).accepted_count == 0


def test_axis_probe_counts_and_order():
    lon = ce_axis("long", 1, in_range)
    lat = ce_axis("lat", 1, in_range)
    assert len(lon.probes) == 361 and len(lat.probes) == 181
    assert [p.lon_units for p, _ in lon.probes[:5]] == [0, 1, -1, 2, -2]
    assert lon.extra["probes_exclusive"] == 360 and lat.extra["accepted_exclusive"] == 180
    assert axis_order(2, "ascending") == [-2, -1, 0, 1, 2]
    with pytest.raises(ValueError):
        ce_axis("lat", 181, in_range)


def test_lat_sweep_rejects_only_reject_set(make_harness):
    res = ce_axis("lat", 1, harness_probe(make_harness()))
    assert sorted(p.lat_units for p, o in res.probes if not o.accepted) == [-90, 0, 90]


def test_toifi_long_sweep_all_accepted(make_harness):
    h = make_harness("toifi")
    res = ce_axis("long", 1, harness_probe(h))
    assert res.accepted_count == 361


def test_police_without_rotation_has_contiguous_tail(make_harness):
    h = make_harness()
    res = ce_axis("long", 1, lambda p: h.poi_add("only", p))
    statuses = [o.status for _, o in res.probes]
    first = statuses.index(Status.RATE_LIMITED)
    assert first == 50 and set(statuses[first:]) == {Status.RATE_LIMITED}


# ---------------------------------------------------------------------------
# 2D grid

@pytest.mark.parametrize("step", DIVISORS)
def test_grid_count_for_every_legal_step(step):
    assert len(grid_points(step)) == (360 // step + 1) * (180 // step + 1)


def test_grid_examples():
    assert len(ce_2d(5, in_range).probes) == 2701
    assert len(ce_2d(90, in_range).probes) == 15
    for bad in (0, 7, -5):
        with pytest.raises(ValueError):
            grid_points(bad)


def test_ce_2d_police_counts_match_enumeration(make_harness):
    h = make_harness()
    res = ce_2d(5, harness_probe(h))
    expected = ce_2d(5, police_rule)
    assert (res.accepted_count, res.rejected_count) == (2448, 253)
    assert [o.status for _, o in res.probes] == [o.status for _, o in expected.probes]
    assert res.accepted_count + res.rejected_count + res.rate_limited_count == len(res.probes)


def test_ce_2d_cleanup_called_per_acceptance():
    seen = []
    res = ce_2d(30, police_rule, cleanup=seen.append)
    assert len(seen) == res.accepted_count


def test_csv_export():
    res = ce_axis("lat", 0, police_rule)
    rows = list(csv.reader(io.StringIO(res.to_csv())))
    assert rows[0] == ["lon", "lat", "status"]
    assert len(rows) == 182 and rows[1] == ["0", "0", "Rejected"]


def test_strategies_are_repeatable(make_harness):
    a = ce_axis("lat", 1, harness_probe(make_harness())).to_dict()
    b = ce_axis("lat", 1, harness_probe(make_harness())).to_dict()
    assert a == b


# ---------------------------------------------------------------------------
# precision

def places_limit(limit, sep_units=0):
    live = []

    def probe(p):
        lon, lat = p.at_resolution()
        if p.places > limit:
            return REJ
        if any(max(abs(lon - a), abs(lat - b)) < sep_units for a, b in live):
            return REJ
        live.append((lon, lat))
        return ACC

    return probe, live


def test_ce_prec_unlimited_target():
    probe, _ = places_limit(9)
    rep = ce_prec(GeoPoint.parse("2.1234", "48.9876"), 6, probe)
    assert rep.max_places == 6 and rep.trace == [{"places": 6, "accepted": 100, "rejected": 0}]
    assert rep.min_separation_units == 1000


def test_ce_prec_harnesses(make_harness):
    toifi = make_harness("toifi")
    owned = []
    rep = ce_prec(GeoPoint.parse("2.123456789", "48.987654321"), 9, harness_probe(toifi),
                  cleanup=lambda outs: owned.extend(outs))
    assert rep.max_places == 7

    police = make_harness()
    pr = harness_probe(police)
    rep = ce_prec(GeoPoint.parse("2.123456789", "48.987654321"), 9, pr)
    assert rep.max_places == 5 and str(rep.min_separation) == "0.002"


@given(st.integers(-180 * 10**9, 180 * 10**9), st.integers(-90 * 10**9, 90 * 10**9),
       st.integers(0, 9), st.integers(0, 9))
def test_ce_prec_stays_in_unit_cell(lon, lat, start, limit):
    origin = GeoPoint(lon, lat, 9)
    probe, _ = places_limit(limit, sep_units=10**6)
    rep = ce_prec(origin, start, probe)
    for p, _ in rep.probes:
        cell = 10 ** (9 - p.places + 1)
        (px, py), (ox, oy) = p.at_resolution(), origin.at_resolution()
        assert px // cell == ox // cell and py // cell == oy // cell
    assert rep.max_places is None or 0 <= rep.max_places <= 9
    assert rep.min_separation_units is None or rep.min_separation_units > 0


def test_level_points_shape():
    pts = level_points(GeoPoint.parse("1.23", "4.56"), 2)
    assert len(set(pts)) == 100
    assert pts[0] == GeoPoint(120, 450, 2) and pts[-1] == GeoPoint(129, 459, 2)


# ---------------------------------------------------------------------------
# movement

def straight_route_km(km: float) -> Route:
    # along the equator one degree of longitude is radians(1) * R metres
    deg = km * 1000 / math.radians(1) / 6_371_008.8
    return Route([GeoPoint(0, 0, 9), GeoPoint(round(deg * 1e9), 0, 9)])


def test_eighteen_km_at_twelve_kmh():
    samples = gen_gps_timeseries(straight_route_km(18), 12)
    assert len(samples) == 5401
    assert samples[-1].t == 90 * 60_000


def test_supersonic_duration():
    samples = gen_gps_timeseries(straight_route_km(18), Speed.kmh("925.4"))
    assert samples[-1].t == pytest.approx(70_000, rel=0.002)


def test_empty_route():
    with pytest.raises(EmptyRoute):
        Route([GeoPoint(1, 1)])
    with pytest.raises(EmptyRoute):
        Route([GeoPoint(1, 1), GeoPoint(1, 1)])


coords = st.tuples(st.integers(-5_000_000, 5_000_000), st.integers(-5_000_000, 5_000_000))


@given(st.lists(coords, min_size=2, max_size=6, unique=True), st.floats(1, 3000), st.integers(100, 5000))
def test_timeseries_properties(raw, kmh, interval):
    base_lon, base_lat = 10 * 10**9, 45 * 10**9
    route = Route([GeoPoint(base_lon + x, base_lat + y, 9) for x, y in raw])
    samples = gen_gps_timeseries(route, kmh, interval)
    ts = [s.t for s in samples]
    assert all(a < b for a, b in zip(ts, ts[1:]))
    assert samples[-1].point == route.points[-1]
    assert all(a <= b for a, b in zip(route.cumulative, route.cumulative[1:]))
    step_m = kmh / 3.6 * interval / 1000
    travelled = sum(planar_metres(a.point, b.point) for a, b in zip(samples, samples[1:]))
    assert travelled <= route.length + 1e-3
    # each corner can be cut by at most one sample step
    assert travelled >= route.length - step_m * (len(route.points) - 1) - 1e-3
    mps = kmh / 3.6
    for a, b in zip(samples, samples[1:-1]):
        assert b.t - a.t == interval
    # samples lie on the polyline: distance to the nearest segment is below a millimetre
    for s in samples[:: max(1, len(samples) // 20)]:
        assert min(_seg_dist(s.point, p, q) for p, q in zip(route.points, route.points[1:])) < 1e-3 + 1e-6 * mps


def _seg_dist(p, a, b):
    (px, py), (ax, ay), (bx, by) = (x.at_resolution() for x in (p, a, b))
    dx, dy = bx - ax, by - ay
    t = max(0.0, min(1.0, ((px - ax) * dx + (py - ay) * dy) / (dx * dx + dy * dy)))
    foot = GeoPoint(round(ax + t * dx), round(ay + t * dy), 9)
    return planar_metres(p, foot)


def test_straight_line_speed_within_tolerance():
    samples = gen_gps_timeseries(straight_route_km(5), 50, 1000)
    for a, b in zip(samples, samples[1:-1]):
        speed = planar_metres(a.point, b.point) / ((b.t - a.t) / 1000) * 3.6
        assert speed == pytest.approx(50, rel=1e-3)
