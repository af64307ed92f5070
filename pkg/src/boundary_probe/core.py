"""Shared value types, probe outcomes and campaign configuration.

Every explorer in the package talks in terms of :class:`ProbeOutcome`; every
injected value is one of the immutable :data:`ProbeValue` variants below.
Prices are integer cents and coordinates are scaled integers so that boundary
detection never compares binary floats.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field
from decimal import Decimal
from typing import Any, Optional, Union

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib


class ProbeError(Exception):
    """Base class for errors raised by this package."""


class UnitMismatch(ProbeError):
    pass


class ConfigError(ProbeError):
    """A config document failed to parse or validate."""


class Status(str, enum.Enum):
    ACCEPTED = "Accepted"
    REJECTED = "Rejected"
    RATE_LIMITED = "RateLimited"
    BLOCKED = "Blocked"
    PENDING = "Pending"

    @property
    def decisive(self) -> bool:
        return self in (Status.ACCEPTED, Status.REJECTED)


@dataclass(frozen=True)
class ProbeOutcome:
    status: Status
    latency: int = 0
    detail: Optional[str] = None
    t_virtual: Optional[int] = None
    ref: Optional[str] = None

    @property
    def accepted(self) -> bool:
        return self.status is Status.ACCEPTED

    def to_dict(self) -> dict:
        d = {"status": self.status.value, "latency": self.latency}
        if self.detail is not None:
            d["detail"] = self.detail
        if self.t_virtual is not None:
            d["t_virtual"] = self.t_virtual
        if self.ref is not None:
            d["ref"] = self.ref
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ProbeOutcome":
        return cls(
            status=Status(d["status"]),
            latency=int(d.get("latency", 0)),
            detail=d.get("detail"),
            t_virtual=d.get("t_virtual"),
            ref=d.get("ref"),
        )


def as_outcome(result: Union[ProbeOutcome, bool]) -> ProbeOutcome:
    """Let plain predicates stand in for probe functions."""
    if isinstance(result, ProbeOutcome):
        return result
    return ProbeOutcome(Status.ACCEPTED if result else Status.REJECTED)


# ---------------------------------------------------------------------------
# probe values

UNITS = ("", "s", "m", "deg")


@dataclass(frozen=True)
class IntValue:
    value: int
    unit: str = ""

    def __post_init__(self):
        if self.unit not in UNITS:
            raise ValueError(f"unknown unit {self.unit!r}")
        if isinstance(self.value, bool) or not isinstance(self.value, int):
            raise TypeError("IntValue holds an int")

    def to_dict(self) -> dict:
        return {"kind": "int", "value": self.value, "unit": self.unit}


@dataclass(frozen=True)
class Cents:
    cents: int

    def __post_init__(self):
        if isinstance(self.cents, bool) or not isinstance(self.cents, int):
            raise TypeError("prices are an integer number of cents")

    @classmethod
    def from_dollars(cls, text: Union[str, Decimal]) -> "Cents":
        d = Decimal(str(text)) * 100
        if d != d.to_integral_value():
            raise ValueError(f"{text} is not a whole number of cents")
        return cls(int(d))

    @property
    def dollars(self) -> Decimal:
        return Decimal(self.cents).scaleb(-2)

    def to_dict(self) -> dict:
        return {"kind": "cents", "cents": self.cents}


MAX_PLACES = 9
_SCALE = 10**MAX_PLACES


def _scaled(text: Union[str, int, Decimal], places: int) -> int:
    d = Decimal(str(text)).scaleb(places)
    if d != d.to_integral_value():
        raise ValueError(f"{text} has more than {places} decimal places")
    return int(d)


def _fmt_scaled(v: int, places: int) -> str:
    sign = "-" if v < 0 else ""
    v = abs(v)
    if places == 0:
        return f"{sign}{v}"
    whole, frac = divmod(v, 10**places)
    return f"{sign}{whole}.{frac:0{places}d}"


@dataclass(frozen=True)
class GeoPoint:
    """A longitude/latitude pair held as integers at ``10**places`` resolution.

    ``GeoPoint.parse("12.3456789", "1.0")`` keeps the widest precision of the
    two strings; ``str(point)`` gives back exactly ``places`` decimals.
    """

    lon_units: int
    lat_units: int
    places: int = 0

    def __post_init__(self):
        if not 0 <= self.places <= MAX_PLACES:
            raise ValueError("places must be within 0..9")

    @classmethod
    def parse(cls, lon: Union[str, int, Decimal], lat: Union[str, int, Decimal],
              places: Optional[int] = None) -> "GeoPoint":
        if places is None:
            places = max(_decimal_places(lon), _decimal_places(lat))
        return cls(_scaled(lon, places), _scaled(lat, places), places)

    @property
    def lon(self) -> Decimal:
        return Decimal(self.lon_units).scaleb(-self.places)

    @property
    def lat(self) -> Decimal:
        return Decimal(self.lat_units).scaleb(-self.places)

    @property
    def lon_text(self) -> str:
        return _fmt_scaled(self.lon_units, self.places)

    @property
    def lat_text(self) -> str:
        return _fmt_scaled(self.lat_units, self.places)

    def at_resolution(self, places: int = MAX_PLACES) -> tuple[int, int]:
        """Coordinates rescaled to a common (finer) resolution."""
        if places < self.places:
            raise ValueError("cannot rescale to a coarser resolution")
        k = 10 ** (places - self.places)
        return self.lon_units * k, self.lat_units * k

    def __str__(self) -> str:
        return f"({self.lon_text}, {self.lat_text})"

    def to_dict(self) -> dict:
        return {"kind": "geo", "lon": self.lon_text, "lat": self.lat_text, "places": self.places}


def _decimal_places(x: Union[str, int, Decimal]) -> int:
    exp = Decimal(str(x)).as_tuple().exponent
    return max(0, -exp) if isinstance(exp, int) else 0


def chebyshev_units(a: GeoPoint, b: GeoPoint) -> int:
    """Per-axis (max) separation of two points in 1e-9 degree units."""
    (ax, ay), (bx, by) = a.at_resolution(), b.at_resolution()
    return max(abs(ax - bx), abs(ay - by))


class Category(str, enum.Enum):
    CRIME = "Crime"
    SAFETY = "Safety"
    LOST_PET = "LostPet"
    UNEXPECTED_ACTIVITY = "UnexpectedActivity"


class Image(str, enum.Enum):
    NONE = "None"
    IRRELEVANT = "Irrelevant"
    RELEVANT = "Relevant"


_WORD = re.compile(r"[A-Za-z0-9]+")


def tokenize(text: str) -> list[str]:
    """Lowercased alphanumeric runs; everything else separates words."""
    return [w.lower() for w in _WORD.findall(text)]


@dataclass(frozen=True)
class PostDraft:
    category: Category
    title: str
    description: str
    image: Image = Image.NONE

    def __post_init__(self):
        if not self.title.strip():
            raise ValueError("title must be nonempty")
        if not tokenize(self.description):
            raise ValueError("description needs at least one word")

    @property
    def word_count(self) -> int:
        return len(tokenize(self.description))

    def with_image(self, image: Image) -> "PostDraft":
        return PostDraft(self.category, self.title, self.description, image)

    def to_dict(self) -> dict:
        return {
            "kind": "post",
            "category": self.category.value,
            "title": self.title,
            "description": self.description,
            "image": self.image.value,
        }


@dataclass(frozen=True)
class Speed:
    """Non-negative speed in km/h, one decimal place, stored as tenths."""

    tenths: int

    def __post_init__(self):
        if self.tenths < 0:
            raise ValueError("speed must be non-negative")

    @classmethod
    def kmh(cls, value: Union[str, int, Decimal]) -> "Speed":
        return cls(_scaled(value, 1))

    @property
    def value(self) -> Decimal:
        return Decimal(self.tenths).scaleb(-1)

    def __str__(self) -> str:
        return _fmt_scaled(self.tenths, 1)

    def to_dict(self) -> dict:
        return {"kind": "speed", "kmh": str(self)}


ProbeValue = Union[IntValue, Cents, GeoPoint, PostDraft, Speed]


def value_from_dict(d: dict) -> ProbeValue:
    kind = d["kind"]
    if kind == "int":
        return IntValue(int(d["value"]), d.get("unit", ""))
    if kind == "cents":
        return Cents(int(d["cents"]))
    if kind == "geo":
        return GeoPoint.parse(d["lon"], d["lat"], d.get("places"))
    if kind == "post":
        return PostDraft(Category(d["category"]), d["title"], d["description"],
                         Image(d.get("image", "None")))
    if kind == "speed":
        return Speed.kmh(d["kmh"])
    raise ValueError(f"unknown probe value kind {kind!r}")


SERVICE_KINDS = ("fitness", "pricing", "location", "safety", "transit")


def validate_probe(v: ProbeValue, target_kind: str) -> None:
    """Client-side sanity check before a value is submitted.

    Raises UnitMismatch when ``v`` is not what ``target_kind`` consumes.
    """
    ok = {
        "fitness": isinstance(v, IntValue) and v.unit in ("s", "m"),
        "pricing": isinstance(v, Cents),
        "location": isinstance(v, GeoPoint),
        "safety": isinstance(v, PostDraft),
        "transit": isinstance(v, Speed),
    }
    if target_kind not in ok:
        raise ValueError(f"unknown service kind {target_kind!r}")
    if not ok[target_kind]:
        raise UnitMismatch(f"{type(v).__name__} cannot be submitted to a {target_kind} service")


# ---------------------------------------------------------------------------
# durations

_DUR = re.compile(r"^\s*(\d+)\s*(ms|s|m|min|h|d)?\s*$")
_DUR_MS = {"ms": 1, "s": 1000, "m": 60_000, "min": 60_000, "h": 3_600_000, "d": 86_400_000, None: 1}


def parse_duration(v: Union[str, int]) -> int:
    """'10s', '20m', '1d', '500ms' or a bare int (ms) -> milliseconds."""
    if isinstance(v, bool):
        raise ConfigError(f"bad duration {v!r}")
    if isinstance(v, int):
        return v
    m = _DUR.match(str(v))
    if not m:
        raise ConfigError(f"bad duration {v!r}")
    return int(m.group(1)) * _DUR_MS[m.group(2)]


# ---------------------------------------------------------------------------
# campaign config

ROTATIONS = ("off", "round-robin", "on-block", "per-probe")
BINDINGS = ("harness", "http")


@dataclass(frozen=True)
class TargetSpec:
    kind: str
    binding: str = "harness"
    url: Optional[str] = None
    harness: dict = field(default_factory=dict)
    service: Optional[str] = None


@dataclass(frozen=True)
class StrategySpec:
    id: str
    name: str
    params: dict = field(default_factory=dict)


@dataclass(frozen=True)
class PoolSpec:
    size: int = 1
    rotation: str = "off"


@dataclass(frozen=True)
class RateLimitSpec:
    scope: str = "per-identity"
    window: int = 86_400_000
    max_requests: Optional[int] = None
    max_rejections: Optional[int] = None
    min_gap: int = 0
    jitter: Optional[tuple[int, int]] = None


@dataclass(frozen=True)
class CampaignConfig:
    target: TargetSpec
    strategies: tuple[StrategySpec, ...]
    identity_pool: PoolSpec
    rate_limits: tuple[RateLimitSpec, ...]
    seed: int
    report_path: str
    source: dict = field(default_factory=dict, compare=False)

    def echo(self) -> dict:
        """The parsed config as plain data, for embedding in reports."""
        return {
            "target": {"kind": self.target.kind, "binding": self.target.binding,
                       "url": self.target.url, "harness": self.target.harness,
                       "service": self.target.service},
            "strategies": [{"id": s.id, "name": s.name, "params": s.params} for s in self.strategies],
            "identity_pool": {"size": self.identity_pool.size, "rotation": self.identity_pool.rotation},
            "rate_limits": [
                {"scope": r.scope, "window": r.window, "max_requests": r.max_requests,
                 "max_rejections": r.max_rejections, "min_gap": r.min_gap,
                 "jitter": list(r.jitter) if r.jitter else None}
                for r in self.rate_limits
            ],
            "seed": self.seed,
            "report_path": self.report_path,
        }


STRATEGIES = {
    "nve": "fitness pricing transit",
    "accumulate": "fitness",
    "price-envelope": "pricing",
    "sweep": "transit",
    "observer-trials": "transit",
    "ce-o": "location",
    "ce-long": "location",
    "ce-lat": "location",
    "ce-2d": "location",
    "ce-prec": "location",
    "rsg": "safety",
    "template": "safety",
}

MODES = ("linear", "bisect", "auto")


def _positive(params: dict, key: str, default=None) -> Any:
    v = params.get(key, default)
    if v is None:
        return v
    if isinstance(v, bool) or not isinstance(v, (int, float)) or v <= 0:
        raise ConfigError(f"{key} must be positive")
    return v


def _check_strategy(s: StrategySpec, kind: str) -> None:
    if s.id not in STRATEGIES:
        raise ConfigError(f"unknown strategy {s.id!r}")
    if kind not in STRATEGIES[s.id].split():
        raise ConfigError(f"strategy {s.id!r} does not apply to a {kind} target")
    p = s.params
    _positive(p, "step")
    _positive(p, "n")
    _positive(p, "length")
    _positive(p, "trials")
    if "mode" in p and p["mode"] not in MODES:
        raise ConfigError(f"mode must be one of {MODES}")
    if "direction" in p and p["direction"] not in (1, -1, "up", "down", "both"):
        raise ConfigError("direction must be up, down, both or +1/-1")
    if s.id == "ce-2d":
        step = p.get("step", 5)
        if 360 % step or 180 % step:
            raise ConfigError("ce-2d step must divide both 360 and 180")
    if s.id == "ce-prec":
        start = p.get("start_places", "auto")
        if start != "auto" and (isinstance(start, bool) or not isinstance(start, int) or not 0 <= start <= MAX_PLACES):
            raise ConfigError("start_places must be auto or within 0..9")
    confirm = p.get("confirm")
    if confirm is not None:
        n_extra = confirm.get("n_extra", 4)
        thr = confirm.get("fail_threshold", n_extra + 1)
        if n_extra < 0 or not 1 <= thr <= n_extra + 1:
            raise ConfigError("confirm needs n_extra >= 0 and 1 <= fail_threshold <= n_extra + 1")


def parse_config(text: str, *, fallback_seed: int = 0) -> CampaignConfig:
    """Parse a TOML campaign document (grammar in docs/config.md).

    Syntax errors keep tomli's line/column report; semantic errors name the
    offending key.
    """
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"syntax error: {e}") from e

    t = doc.get("target")
    if not isinstance(t, dict) or "kind" not in t:
        raise ConfigError("missing [target] with a kind")
    if t["kind"] not in SERVICE_KINDS:
        raise ConfigError(f"target kind must be one of {SERVICE_KINDS}")
    binding = t.get("binding", "harness")
    if binding not in BINDINGS:
        raise ConfigError(f"binding must be one of {BINDINGS}")
    if binding == "http" and not t.get("url"):
        raise ConfigError("http binding needs a url")
    harness = dict(t.get("harness", {}))
    for k in ("variant",):
        if k in t:
            harness.setdefault(t["kind"], {})[k] = t[k]
    target = TargetSpec(t["kind"], binding, t.get("url"), harness, t.get("service"))

    raw = doc.get("strategy", [])
    if isinstance(raw, dict):
        raw = [raw]
    if not raw:
        raise ConfigError("at least one [[strategy]] is required")
    strategies = []
    for i, s in enumerate(raw):
        if "id" not in s:
            raise ConfigError(f"strategy #{i} has no id")
        params = {k: v for k, v in s.items() if k not in ("id", "name")}
        spec = StrategySpec(s["id"], s.get("name", f"{s['id']}-{i}"), params)
        _check_strategy(spec, target.kind)
        strategies.append(spec)
    names = [s.name for s in strategies]
    if len(set(names)) != len(names):
        raise ConfigError("strategy names must be unique")

    pool = doc.get("identity_pool", {})
    size = pool.get("size", 1)
    if isinstance(size, bool) or not isinstance(size, int) or size < 1:
        raise ConfigError("identity pool size must be at least 1")
    rotation = pool.get("rotation", "off")
    if rotation not in ROTATIONS:
        raise ConfigError(f"rotation must be one of {ROTATIONS}")

    limits = []
    for r in doc.get("rate_limits", []):
        scope = r.get("scope", "per-identity")
        if scope not in ("per-identity", "global"):
            raise ConfigError("rate limit scope must be per-identity or global")
        window = parse_duration(r.get("window", "1d"))
        if window <= 0:
            raise ConfigError("rate limit window must be positive")
        jitter = r.get("jitter")
        if jitter is not None:
            lo, hi = (parse_duration(x) for x in jitter)
            if lo > hi:
                raise ConfigError("jitter lo must not exceed hi")
            jitter = (lo, hi)
        limits.append(RateLimitSpec(
            scope=scope, window=window,
            max_requests=_positive(r, "max_requests"),
            max_rejections=_positive(r, "max_rejections"),
            min_gap=parse_duration(r.get("min_gap", 0)),
            jitter=jitter,
        ))

    seed = doc.get("seed", fallback_seed)
    if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < 2**64:
        raise ConfigError("seed must be a 64-bit unsigned integer")

    return CampaignConfig(
        target=target,
        strategies=tuple(strategies),
        identity_pool=PoolSpec(size, rotation),
        rate_limits=tuple(limits),
        seed=seed,
        report_path=doc.get("report_path", "report"),
        source=doc,
    )
