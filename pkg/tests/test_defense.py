import math
from decimal import Decimal
from fractions import Fraction
from pathlib import Path

import pytest
from hypothesis import given, settings, strategies as st

from boundary_probe.core import GeoPoint, Status, UnitMismatch
from boundary_probe.defense import (
    DefenseRule, EmptyRoadNetwork, RoadNetwork, RuleKind, Segment, apply_rule, countermeasure_table,
    geofence_reduction, load_rules, percent2, point_to_segment_distance, q, reduction,
)
from boundary_probe.core import tomllib
from boundary_probe.geoexp import grid_points

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"
RADIUS_M = 6_371_008.8
MILES_350 = DefenseRule(RuleKind.RANGE_CAP, 350, Fraction(1, 5), "mi")
MPH_70 = DefenseRule(RuleKind.SPEED_CAP, 70, Fraction(1, 5), "mph")


# ---------------------------------------------------------------------------
# rules

def test_rule_boundaries():
    assert apply_rule(MILES_350, q(420, "mi")) is Status.ACCEPTED
    assert apply_rule(MILES_350, q(421, "mi")) is Status.REJECTED
    assert apply_rule(MPH_70, q(84, "mph")) is Status.ACCEPTED
    assert apply_rule(MPH_70, q(85, "mph")) is Status.REJECTED
    assert apply_rule(MILES_350, q(0, "mi")) is Status.REJECTED


def test_rule_converts_units_and_refuses_mismatch():
    assert apply_rule(MILES_350, q("675924.48", "m")) is Status.ACCEPTED  # 420 mi exactly
    assert apply_rule(MILES_350, q("675924.49", "m")) is Status.REJECTED
    with pytest.raises(UnitMismatch):
        apply_rule(MILES_350, q(10, "s"))


def test_rule_validation():
    for cap, tol in ((0, 0), (-1, 0), (1, 1), (1, -0.1)):
        with pytest.raises(ValueError):
            DefenseRule(RuleKind.RANGE_CAP, cap, tol)


def test_declarative_rules():
    env = DefenseRule(RuleKind.PRICE_ENVELOPE, 50, 0, "cents")
    assert apply_rule(env, q(449, "cents"), q(400, "cents")) is Status.ACCEPTED
    assert apply_rule(env, q(451, "cents"), q(400, "cents")) is Status.REJECTED
    rep = DefenseRule(RuleKind.REPUTATION, 10, 0, "score")
    assert apply_rule(rep, q(10, "score")) is Status.ACCEPTED
    assert apply_rule(rep, q(9, "score")) is Status.REJECTED


@given(st.fractions(min_value=Fraction(1, 1000), max_value=10**6), st.fractions(0, Fraction(99, 100)),
       st.fractions(Fraction(1, 10**6), 10**7), st.fractions(Fraction(1, 10**6), 1))
def test_apply_rule_monotone(cap, tol, v, shrink):
    rule = DefenseRule(RuleKind.RANGE_CAP, cap, tol, "km")
    if apply_rule(rule, q(v, "km")) is Status.ACCEPTED:
        assert apply_rule(rule, q(v * shrink, "km")) is Status.ACCEPTED


# ---------------------------------------------------------------------------
# reductions

def test_reported_reductions():
    assert reduction(Decimal("31068.56"), 420).reduction_percent == Decimal("98.65")
    assert reduction(Decimal("100051.4"), 420).reduction_percent == Decimal("99.58")
    assert reduction(1460, 84).reduction_percent == Decimal("94.25")
    assert reduction(q(50_000_000, "m"), MILES_350.limit).reduction_percent == Decimal("98.65")
    assert reduction(q(2350, "kmh"), MPH_70.limit).reduction_percent == Decimal("94.25")


def test_fitbit_discrepancy_is_computable():
    assert reduction(10_000, 420).reduction_percent == Decimal("95.80")


def test_reduction_formula_exactly():
    r = reduction(8, 3)
    assert r.fraction_removed == Fraction(5, 8) and r.reduction_percent == Decimal("62.50")
    assert percent2(Fraction(1, 8000)) == Decimal("0.01")  # 0.0125 rounds half up
    with pytest.raises(ValueError):
        reduction(0, 1)


@given(st.fractions(Fraction(1, 100), 10**9), st.fractions(Fraction(1, 100), 1))
def test_reduction_bounds(original, share):
    pct = reduction(original, original * share).reduction_percent
    assert Decimal(0) <= pct <= Decimal(100)


# ---------------------------------------------------------------------------
# geometry

def seg(lon1, lat1, lon2, lat2, sid="s"):
    return Segment(sid, GeoPoint.parse(str(lon1), str(lat1)), GeoPoint.parse(str(lon2), str(lat2)))


def test_distance_trivia():
    road = seg("10", "0", "20", "0")
    assert point_to_segment_distance(GeoPoint.parse("15", "0"), road) == 0
    assert point_to_segment_distance(GeoPoint.parse("15", "0.001"), road) == pytest.approx(0.001, abs=1e-12)


def degrees(g: GeoPoint) -> tuple[float, float]:
    return g.lon_units / 10**g.places, g.lat_units / 10**g.places


def sampled_distance(p: GeoPoint, s: Segment, t_range=(0.0, 1.0)) -> float:
    """Dense-sampling oracle: walk the segment (or the ``t_range`` part of it)
    at 1e-4 degree spacing in the same projection, then resample finely around
    the best coarse sample."""
    (px, py), (ax, ay), (bx, by) = degrees(p), degrees(s.a), degrees(s.b)
    k = math.cos(math.radians(py))

    def at(t):
        x, y = ax + t * (bx - ax), ay + t * (by - ay)
        return math.hypot((px - x) * k, py - y)

    t0, t1 = t_range
    n = max(1, math.ceil((t1 - t0) * math.hypot(bx - ax, by - ay) / 1e-4))
    ts = [t0 + (t1 - t0) * i / n for i in range(n + 1)]
    best = min(range(n + 1), key=lambda i: at(ts[i]))
    lo, hi = ts[max(0, best - 1)], ts[min(n, best + 1)]
    return min(at(lo + (hi - lo) * j / 2000) for j in range(2001))


coord = st.decimals(min_value=-1, max_value=1, places=5)


@settings(max_examples=200)
@given(coord, coord, coord, coord, coord, coord, st.integers(-60, 60), st.integers(-170, 170))
def test_distance_matches_dense_sampling(x1, y1, x2, y2, px, py, lat0, lon0):
    s = seg(lon0 + x1 / 100, lat0 + y1 / 100, lon0 + x2 / 100, lat0 + y2 / 100)
    if s.a == s.b:
        return
    p = GeoPoint.parse(str(lon0 + px / 50), str(lat0 + py / 50))
    assert point_to_segment_distance(p, s) == pytest.approx(sampled_distance(p, s), abs=1e-6)


# ---------------------------------------------------------------------------
# geofence

@pytest.fixture(scope="module")
def roads():
    return RoadNetwork.from_csv(FIXTURES / "roads.csv")


def brute_force_inside(grid, roads, threshold_m, window=0.05):
    """Count grid points within ``threshold_m`` of a road. Only the part of a
    segment within ``window`` degrees of the point is sampled; anything
    farther is beyond every threshold used here."""
    inside = 0
    for p in grid:
        px, py = degrees(p)
        best = math.inf
        for s in roads.segments:
            (ax, ay), (bx, by) = degrees(s.a), degrees(s.b)
            ts = []
            for a, b, c in ((ax, bx, px), (ay, by, py)):
                if a == b:
                    ts.append((0.0, 1.0) if abs(c - a) <= window else None)
                else:
                    lo, hi = sorted(((c - window - a) / (b - a), (c + window - a) / (b - a)))
                    ts.append((max(lo, 0.0), min(hi, 1.0)))
            if None in ts:
                continue
            t0, t1 = max(ts[0][0], ts[1][0]), min(ts[0][1], ts[1][1])
            if t0 <= t1:
                best = min(best, sampled_distance(p, s, (t0, t1)))
        inside += math.radians(best) * RADIUS_M <= threshold_m
    return inside


@pytest.mark.parametrize("threshold,count,percent", [(10, 3, "99.89"), (100, 33, "98.78")])
def test_geofence_fixture_counts(roads, threshold, count, percent):
    grid = grid_points(5)
    rep = geofence_reduction(grid, roads, threshold)
    assert rep.allowed_extent == count == brute_force_inside(grid, roads, threshold)
    assert rep.original_extent == 2701 and str(rep.reduction_percent) == percent


def test_geofence_monotone_in_threshold(roads):
    grid = grid_points(5)
    allowed = [geofence_reduction(grid, roads, t).allowed_extent for t in (1, 10, 50, 100, 1000, 10**6)]
    assert allowed == sorted(allowed)
    assert allowed[1] < allowed[3]


def test_empty_road_network():
    with pytest.raises(EmptyRoadNetwork):
        geofence_reduction(grid_points(90), RoadNetwork(), 10)
    with pytest.raises(ValueError):
        RoadNetwork((seg(1, 1, 1, 1),))


def test_road_csv_inline():
    net = RoadNetwork.from_csv("lon1,lat1,lon2,lat2,id\n0,0,1,0,a\n")
    assert [s.id for s in net.segments] == ["a"]


# ---------------------------------------------------------------------------
# countermeasure table

@pytest.fixture(scope="module")
def rules():
    return load_rules(tomllib.loads((FIXTURES / "countermeasures.toml").read_text()))


def test_table_with_stated_originals(rules):
    table, warnings = countermeasure_table(rules, {})
    got = {r["service"]: r for r in table}
    assert got["Strava"]["reduction_percent"] == "98.65"
    assert got["MapMyRun"]["reduction_percent"] == "99.58"
    assert got["Transit"]["reduction_percent"] == "94.25"
    fitbit = got["Fitbit"]
    assert fitbit["reduction_percent"] == "95.80" and fitbit["reported_percent"] == "99.58"
    assert "95.80" in fitbit["note"] and "99.58" in fitbit["note"]
    assert got["Strava"]["limit"] == "420" and warnings == []


def test_table_prefers_report_extents(rules):
    table, warnings = countermeasure_table(rules, {"strava.distance_m": q(25_000_000, "m")}, use_stated=False)
    assert [r["service"] for r in table] == ["Strava"]
    assert table[0]["source"] == "report:strava.distance_m" and table[0]["reduction_percent"] == "97.30"
    assert len(warnings) == 3
