"""Countermeasure rules and how much of an input domain they remove.

Rule arithmetic is exact (:class:`fractions.Fraction`); percentages are
rounded half up to two decimals only when reported.
"""

from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Optional, Sequence, Union

from .core import GeoPoint, ProbeError, Status, UnitMismatch
from .geoexp import EARTH_RADIUS_M

Number = Union[int, str, Decimal, Fraction]


class EmptyRoadNetwork(ProbeError):
    pass


# unit -> (dimension, size in the dimension's base unit)
UNITS = {
    "m": ("length", Fraction(1)),
    "km": ("length", Fraction(1000)),
    "mi": ("length", Fraction("1609.344")),
    "s": ("time", Fraction(1)),
    "h": ("time", Fraction(3600)),
    "kmh": ("speed", Fraction(1000, 3600)),
    "mph": ("speed", Fraction("1609.344") / 3600),
    "cents": ("price", Fraction(1)),
    "score": ("score", Fraction(1)),
}


def _frac(x: Number) -> Fraction:
    return x if isinstance(x, Fraction) else Fraction(str(x))


@dataclass(frozen=True)
class Quantity:
    value: Fraction
    unit: str

    def __post_init__(self):
        if self.unit not in UNITS:
            raise ValueError(f"unknown unit {self.unit!r}")
        object.__setattr__(self, "value", _frac(self.value))

    def to(self, unit: str) -> "Quantity":
        (dim_a, size_a), (dim_b, size_b) = UNITS[self.unit], UNITS[unit]
        if dim_a != dim_b:
            raise UnitMismatch(f"cannot convert {self.unit} to {unit}")
        return Quantity(self.value * size_a / size_b, unit)


def q(value: Number, unit: str) -> Quantity:
    return Quantity(_frac(value), unit)


class RuleKind(str, enum.Enum):
    RANGE_CAP = "RangeCap"
    SPEED_CAP = "SpeedCap"
    PRICE_ENVELOPE = "PriceEnvelope"
    GEOFENCE = "Geofence"
    REPUTATION = "ReputationThreshold"


@dataclass(frozen=True)
class DefenseRule:
    """``cap`` and ``unit`` describe the limit; ``tolerance`` widens it by that
    fraction (0.2 turns a 350-mile cap into 420)."""

    kind: RuleKind
    cap: Fraction
    tolerance: Fraction = Fraction(0)
    unit: str = "m"

    def __post_init__(self):
        object.__setattr__(self, "kind", RuleKind(self.kind))
        object.__setattr__(self, "cap", _frac(self.cap))
        object.__setattr__(self, "tolerance", _frac(self.tolerance))
        if self.cap <= 0:
            raise ValueError("cap must be positive")
        if not 0 <= self.tolerance < 1:
            raise ValueError("tolerance must be within [0, 1)")
        if self.unit not in UNITS:
            raise ValueError(f"unknown unit {self.unit!r}")

    @property
    def limit(self) -> Quantity:
        return Quantity(self.cap * (1 + self.tolerance), self.unit)


def apply_rule(rule: DefenseRule, value: Quantity, reference: Optional[Quantity] = None) -> Status:
    """Accepted or Rejected under ``rule``.

    Caps accept 0 < v <= limit; a geofence accepts a road distance
    0 <= d <= limit; a price envelope accepts |v - reference| <= limit; a
    reputation threshold accepts scores >= cap.
    """
    v = value.to(rule.unit).value
    lim = rule.limit.value
    if rule.kind in (RuleKind.RANGE_CAP, RuleKind.SPEED_CAP):
        ok = 0 < v <= lim
    elif rule.kind is RuleKind.GEOFENCE:
        ok = 0 <= v <= lim
    elif rule.kind is RuleKind.PRICE_ENVELOPE:
        if reference is None:
            raise ValueError("a price envelope needs a reference price")
        ok = abs(v - reference.to(rule.unit).value) <= lim
    else:
        ok = v >= rule.cap
    return Status.ACCEPTED if ok else Status.REJECTED


# ---------------------------------------------------------------------------
# reductions

def percent2(x: Fraction) -> Decimal:
    """A fraction as a percentage, rounded half up to two decimals."""
    return (Decimal(x.numerator * 100) / Decimal(x.denominator)).quantize(Decimal("0.01"), ROUND_HALF_UP)


@dataclass(frozen=True)
class ReductionReport:
    original_extent: Fraction
    allowed_extent: Fraction
    unit: str = ""
    note: str = ""

    @property
    def fraction_removed(self) -> Fraction:
        return 1 - self.allowed_extent / self.original_extent

    @property
    def reduction_percent(self) -> Decimal:
        return percent2(self.fraction_removed)

    def to_dict(self) -> dict:
        return {"original_extent": str(_dec(self.original_extent)),
                "allowed_extent": str(_dec(self.allowed_extent)),
                "unit": self.unit, "reduction_percent": str(self.reduction_percent), "note": self.note}


def _dec(x: Fraction) -> Decimal:
    d = (Decimal(x.numerator) / Decimal(x.denominator)).normalize()
    return d.quantize(Decimal(1)) if d.as_tuple().exponent > 0 else d


def reduction(original_max: Union[Number, Quantity], allowed_max: Union[Number, Quantity],
              note: str = "") -> ReductionReport:
    """100 * (1 - allowed / original). Quantities are compared in the original's unit."""
    unit = ""
    if isinstance(original_max, Quantity):
        unit = original_max.unit
        allowed = allowed_max.to(unit).value if isinstance(allowed_max, Quantity) else _frac(allowed_max)
        original = original_max.value
    else:
        original = _frac(original_max)
        allowed = _frac(allowed_max.value if isinstance(allowed_max, Quantity) else allowed_max)
    if original <= 0 or allowed <= 0:
        raise ValueError("extents must be positive")
    return ReductionReport(original, allowed, unit, note)


# ---------------------------------------------------------------------------
# geofence

@dataclass(frozen=True)
class Segment:
    id: str
    a: GeoPoint
    b: GeoPoint


@dataclass(frozen=True)
class RoadNetwork:
    segments: tuple[Segment, ...] = field(default_factory=tuple)

    def __post_init__(self):
        for s in self.segments:
            if s.a.at_resolution() == s.b.at_resolution():
                raise ValueError(f"segment {s.id} has zero length")

    @classmethod
    def from_csv(cls, source: Union[str, Path]) -> "RoadNetwork":
        """Rows of ``lon1,lat1,lon2,lat2,id`` (header optional)."""
        text = Path(source).read_text() if isinstance(source, Path) or "\n" not in str(source) else source
        segs = []
        for row in csv.reader(io.StringIO(text)):
            if not row or row[0].strip().startswith("#") or row[0].strip() == "lon1":
                continue
            lon1, lat1, lon2, lat2, sid = (c.strip() for c in row[:5])
            segs.append(Segment(sid, GeoPoint.parse(lon1, lat1), GeoPoint.parse(lon2, lat2)))
        return cls(tuple(segs))


def _deg(p: GeoPoint) -> tuple[float, float]:
    lon, lat = p.at_resolution()
    return lon / 1e9, lat / 1e9


def point_to_segment_distance(p: GeoPoint, seg: Segment) -> float:
    """Planar distance in degrees, longitudes shrunk by cos(latitude of ``p``)."""
    (px, py), (ax, ay), (bx, by) = _deg(p), _deg(seg.a), _deg(seg.b)
    k = math.cos(math.radians(py))
    px, ax, bx = px * k, ax * k, bx * k
    dx, dy = bx - ax, by - ay
    norm = dx * dx + dy * dy
    # at the poles the projection squashes east-west segments to a point
    t = 0.0 if norm == 0 else min(1.0, max(0.0, ((px - ax) * dx + (py - ay) * dy) / norm))
    return math.hypot(px - (ax + t * dx), py - (ay + t * dy))


def degrees_to_metres(deg: float) -> float:
    """Arc length of ``deg`` degrees on the mean-radius sphere."""
    return math.radians(deg) * EARTH_RADIUS_M


def nearest_road_metres(p: GeoPoint, roads: RoadNetwork) -> float:
    return degrees_to_metres(min(point_to_segment_distance(p, s) for s in roads.segments))


def geofence_reduction(grid: Sequence[GeoPoint], roads: RoadNetwork, threshold_m: float) -> ReductionReport:
    """Share of ``grid`` a road-distance geofence would turn away."""
    if not grid:
        raise ValueError("grid is empty")
    if not roads.segments:
        raise EmptyRoadNetwork("road network has no segments")
    inside = sum(1 for p in grid if nearest_road_metres(p, roads) <= threshold_m)
    return ReductionReport(Fraction(len(grid)), Fraction(inside), "points",
                           f"{inside} of {len(grid)} points within {threshold_m} m of a road")


# ---------------------------------------------------------------------------
# rule files

@dataclass(frozen=True)
class CountermeasureRow:
    service: str
    rule: DefenseRule
    extent: Optional[str] = None
    original: Optional[Quantity] = None
    reported: Optional[Decimal] = None


def load_rules(doc: dict) -> list[CountermeasureRow]:
    """``[[rule]]`` tables: service, kind, cap, tolerance, unit, and where the
    original extent comes from (``extent`` key in a report, else ``original``)."""
    rows = []
    for r in doc.get("rule", []):
        rule = DefenseRule(RuleKind(r["kind"]), _frac(r["cap"]), _frac(r.get("tolerance", 0)), r.get("unit", "m"))
        orig = q(r["original"], r.get("original_unit", rule.unit)) if "original" in r else None
        rep = Decimal(str(r["reported"])) if "reported" in r else None
        rows.append(CountermeasureRow(r["service"], rule, r.get("extent"), orig, rep))
    return rows


def countermeasure_table(rows: Iterable[CountermeasureRow], extents: dict,
                         use_stated: bool = True) -> tuple[list[dict], list[str]]:
    """Reduction per rule; ``extents`` maps report keys to Quantities.

    A rule without a matching extent falls back to its stated original when
    ``use_stated`` is set. Returns (rows, warnings). A row whose reported
    figure disagrees with the computed one keeps both.
    """
    out, warnings = [], []
    for row in rows:
        original, source = None, None
        if row.extent and row.extent in extents:
            original, source = extents[row.extent], f"report:{row.extent}"
        elif use_stated and row.original is not None:
            original, source = row.original, "stated"
        if original is None:
            why = "has only a stated original" if row.extent is None else f"extent {row.extent!r} not in report"
            warnings.append(f"{row.service}: {why}")
            continue
        rep = reduction(original, row.rule.limit)
        d = {"service": row.service, "kind": row.rule.kind.value,
             "limit": str(_dec(row.rule.limit.value)), "unit": row.rule.unit,
             "original": str(_dec(original.to(row.rule.unit).value).quantize(Decimal("0.01"), ROUND_HALF_UP)),
             "source": source, "reduction_percent": str(rep.reduction_percent),
             "reported_percent": "" if row.reported is None else str(row.reported), "note": ""}
        if row.reported is not None and row.reported != rep.reduction_percent:
            d["note"] = f"computed {rep.reduction_percent} differs from reported {row.reported}"
        out.append(d)
    return out, warnings
