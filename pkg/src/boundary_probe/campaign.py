"""Run a parsed campaign against a target and collect the report bundle."""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

from .core import (
    CampaignConfig, Category, Cents, ConfigError, GeoPoint, Image, IntValue, ProbeOutcome, Speed,
    StrategySpec, Status, TargetSpec,
)
from .geoexp import ce_2d, ce_axis, ce_o, ce_prec
from .harness import Harness, load_fixture, merge
from .harness.client import HttpHarness
from .nve import BoundaryReport, ConfirmPolicy, NumericDomain, explore
from .session import (
    FeedbackOracle, OracleKind, RateLimitPolicy, Rotation, Session, SessionLog, VirtualClock,
    mint_identities, resolve_feedback,
)
from .textgen import corpus_stats, rsg_generate, rsg_wordlist, synthetic_corpus, template_generate


def open_target(spec: TargetSpec):
    """In-process harness (fixture plus overrides) or an HTTP endpoint."""
    if spec.binding == "http":
        return HttpHarness(spec.url)
    over = dict(spec.harness)
    fixture = over.pop("fixture", "default")
    return Harness(merge(load_fixture(fixture), over))


@dataclass
class ReportBundle:
    config: dict
    results: dict = field(default_factory=dict)
    extents: dict = field(default_factory=dict)
    csv: dict = field(default_factory=dict)
    session_log: str = "session.jsonl"
    inconsistent: bool = False
    log: Optional[SessionLog] = None

    def to_dict(self) -> dict:
        return {"config": self.config, "results": self.results, "extents": self.extents,
                "session_log": self.session_log, "inconsistent": self.inconsistent,
                "probes": len(self.log.records) if self.log else 0}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    def write(self, out_dir: Path) -> Path:
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "report.json").write_text(self.to_json())
        (out_dir / self.session_log).write_text(self.log.dumps() if self.log else "")
        for name, text in sorted(self.csv.items()):
            (out_dir / f"{name}.csv").write_text(text)
        return out_dir / "report.json"


def _extent(value, unit: str, **kw) -> dict:
    return {"value": str(value), "unit": unit, **kw}


def _confirm(p: dict) -> Optional[ConfirmPolicy]:
    c = p.get("confirm")
    if c is None:
        return None
    n = c.get("n_extra", 4)
    return ConfirmPolicy(n, c.get("step", 10), c.get("fail_threshold", n + 1))


def _direction(p: dict, default: int = 1) -> int:
    d = p.get("direction", default)
    return {"up": 1, "down": -1}.get(d, d)


class Campaign:
    def __init__(self, config: CampaignConfig, *, target=None, wall_clock: bool = False):
        self.config = config
        self.target = target if target is not None else open_target(config.target)
        self.clock = VirtualClock(mode="wall" if wall_clock else "simulated")
        pool = mint_identities(config.identity_pool.size, config.seed, Rotation(config.identity_pool.rotation))
        policies = [RateLimitPolicy.from_spec(r) for r in config.rate_limits]
        self.session = Session(pool, policies, self.clock, seed=config.seed)
        self.rng = random.Random(f"{config.seed}:strategies")
        t = config.target
        # extents are keyed by service so one rules file can serve several reports
        self.service = t.service or t.harness.get(t.kind, {}).get("variant", t.kind)

    @property
    def now(self) -> int:
        return self.clock.now()

    def probe(self, call: Callable, value, strategy: str) -> ProbeOutcome:
        return self.session.probe(call, value=value, strategy=strategy)

    def run(self) -> ReportBundle:
        bundle = ReportBundle(self.config.echo(), log=self.session.log)
        for spec in self.config.strategies:
            runner = RUNNERS[(spec.id, self.config.target.kind)]
            runner(self, spec, bundle)
        return bundle


# ---------------------------------------------------------------------------
# numeric strategies

def _nve(c: Campaign, spec: StrategySpec, d: NumericDomain, probe, bundle: ReportBundle) -> BoundaryReport:
    p = spec.params
    rep = explore(d, probe, p.get("mode", "auto"), _confirm(p), budget=p.get("budget"),
                  verify_initial=p.get("verify_initial", True), strict=p.get("strict", False))
    bundle.inconsistent |= rep.inconsistent
    return rep


def run_fitness_nve(c: Campaign, spec: StrategySpec, bundle: ReportBundle) -> None:
    p = spec.params
    out = {}
    for fld in p.get("fields", ["duration", "distance"]):
        unit = "s" if fld == "duration" else "m"
        companion = dict(p.get("companion", {"duration_s": 1, "distance_m": 1000}))
        key = f"{fld}_{unit}"

        def probe(x: int, key=key, unit=unit, companion=companion) -> ProbeOutcome:
            act = {"type": p.get("activity", "run"), **companion, key: x}
            return c.probe(lambda ident: c.target.fitness_submit(ident.token, act, now=c.now),
                           IntValue(x, unit), spec.name)

        d = NumericDomain(p.get("x0", 0), p.get("step", 1), _direction(p), p.get("hard_cap"))
        rep = _nve(c, spec, d, probe, bundle)
        out[fld] = rep.to_dict()
        bundle.extents[f"{c.service}.{key}"] = _extent(rep.last_accepted, unit, cap_reached=rep.cap_reached)
    bundle.results[spec.name] = {"strategy": "nve", "fields": out, "virtual_ms": c.now}


def run_accumulate(c: Campaign, spec: StrategySpec, bundle: ReportBundle) -> None:
    p = spec.params
    ident = c.session.pool.current()
    act = {"type": p.get("activity", "run"), "duration_s": p.get("duration_s", 1),
           "distance_m": p.get("distance_m", 50_000_000)}
    history, last = [], None
    for _ in range(p.get("max_submissions", 200)):
        c.probe(lambda i: c.target.fitness_submit(i.token, act, now=c.now), IntValue(act["distance_m"], "m"),
                spec.name)
        total = c.target.fitness_stats(ident.token)["distance_m"]
        history.append(total)
        if total == last:
            break
        last = total
    bundle.results[spec.name] = {"strategy": "accumulate", "final_distance_m": last,
                                 "submissions": len(history), "saturated": len(history) > 1 and history[-1] == history[-2]}
    bundle.extents[f"{c.service}.accumulated_m"] = _extent(last, "m")


def _pricing_items(c: Campaign, p: dict) -> list[tuple[str, str]]:
    items = c.target.pricing_items()
    if "store" in p:
        items = [x for x in items if x[0] == p["store"]]
    if "items" in p:
        items = [x for x in items if x[1] in p["items"]]
    return items


def run_pricing_nve(c: Campaign, spec: StrategySpec, bundle: ReportBundle) -> None:
    p = spec.params
    out = {}
    dirs = (-1, 1) if p.get("direction", "both") == "both" else (_direction(p),)
    for store, item in _pricing_items(c, p):
        ref = c.target.pricing_current(store, item)

        def probe(x: int, store=store, item=item) -> ProbeOutcome:
            return c.probe(lambda i: c.target.pricing_submit(i.token, store, item, x, now=c.now), Cents(x), spec.name)

        row = {"value": ref}
        for direction in dirs:
            rep = _nve(c, spec, NumericDomain(ref, p.get("step", 1), direction), probe, bundle)
            row["max" if direction > 0 else "min"] = rep.last_accepted
            row["probes_" + ("max" if direction > 0 else "min")] = rep.probes_used
            bundle.extents[f"{c.service}.{store}.{item}.{'max' if direction > 0 else 'min'}"] = \
                _extent(rep.last_accepted, "cents")
        if p.get("restore", True):
            probe(ref)
        out[f"{store}/{item}"] = row
    bundle.results[spec.name] = {"strategy": "nve", "items": out}


def run_price_envelope(c: Campaign, spec: StrategySpec, bundle: ReportBundle) -> None:
    out = {}
    for store, item in _pricing_items(c, spec.params):
        lo, hi = c.target.pricing_range(store, item)
        out[f"{store}/{item}"] = {"value": c.target.pricing_current(store, item), "min": lo, "max": hi}
    bundle.results[spec.name] = {"strategy": "price-envelope", "items": out}


def _ride(c: Campaign, kmh, name: str) -> tuple[ProbeOutcome, dict]:
    holder = {}
    speed = Speed.kmh(kmh)

    def call(ident) -> ProbeOutcome:
        holder.update(c.target.transit_ride(ident.token, speed, now=c.now))
        return ProbeOutcome(Status.ACCEPTED if holder["self_accepted"] else Status.REJECTED)

    return c.probe(call, speed, name), holder


def run_transit_nve(c: Campaign, spec: StrategySpec, bundle: ReportBundle) -> None:
    p = spec.params
    d = NumericDomain(p.get("x0", 10), p.get("step", 10), 1, p.get("hard_cap"))
    rep = _nve(c, spec, d, lambda x: _ride(c, x, spec.name)[0], bundle)
    bundle.results[spec.name] = {"strategy": "nve", "speed_kmh": rep.to_dict()}
    bundle.extents[f"{c.service}.speed_kmh"] = _extent(rep.last_accepted, "kmh")


def run_sweep(c: Campaign, spec: StrategySpec, bundle: ReportBundle) -> None:
    p = spec.params
    speeds = range(p.get("start", 10), p.get("stop", 1000) + 1, p.get("step", 10))
    rides = [_ride(c, v, spec.name)[1] for v in speeds]
    bundle.results[spec.name] = {
        "strategy": "sweep", "rides": len(rides),
        "self_accepted": sum(r["self_accepted"] for r in rides),
        "observer_affected": sum(r["observer_affected"] for r in rides),
    }


def run_observer_trials(c: Campaign, spec: StrategySpec, bundle: ReportBundle) -> None:
    p = spec.params
    rides = [_ride(c, p.get("speed", 2350), spec.name)[1] for _ in range(p.get("trials", 1000))]
    ok = [r for r in rides if r["self_accepted"]]
    seen = sum(r["observer_affected"] for r in ok)
    bundle.results[spec.name] = {"strategy": "observer-trials", "speed_kmh": p.get("speed", 2350),
                                 "trials": len(rides), "self_accepted": len(ok), "observer_affected": seen}


# ---------------------------------------------------------------------------
# location strategies

class _PoiProbe:
    """Adds a POI through the session, remembering who owns what for cleanup."""

    def __init__(self, c: Campaign, name: str, warmup: bool):
        self.c, self.name, self.warmup = c, name, warmup
        self.owner: dict[str, str] = {}

    def __call__(self, pt: GeoPoint) -> ProbeOutcome:
        def call(ident) -> ProbeOutcome:
            if self.warmup:
                self.c.target.poi_search()
            out = self.c.target.poi_add(ident.token, pt, now=self.c.now)
            if out.accepted:
                self.owner[out.ref] = ident.token
            return out
        return self.c.probe(call, pt, self.name)

    def cleanup(self, out: ProbeOutcome) -> None:
        self.c.target.poi_delete(self.owner.pop(out.ref), out.ref)

    def cleanup_many(self, outs: list[ProbeOutcome]) -> None:
        for o in outs:
            self.cleanup(o)


def _geo(c: Campaign, spec: StrategySpec, bundle: ReportBundle, res) -> None:
    bundle.results[spec.name] = res.to_dict()
    bundle.csv[spec.name] = res.to_csv()


def run_ce_o(c, spec, bundle):
    probe = _PoiProbe(c, spec.name, spec.params.get("warmup", False))
    cleanup = spec.params.get("cleanup", True)

    def one(pt):
        out = probe(pt)
        if cleanup and out.accepted:
            probe.cleanup(out)
        return out
    _geo(c, spec, bundle, ce_o(one, fixed=spec.params.get("fixed", 1), cap_factor=spec.params.get("cap_factor", 4)))


def _run_axis(axis: str):
    def run(c, spec, bundle):
        p = spec.params
        probe = _PoiProbe(c, spec.name, p.get("warmup", False))

        def one(pt):
            out = probe(pt)
            if p.get("cleanup", True) and out.accepted:
                probe.cleanup(out)
            return out
        _geo(c, spec, bundle, ce_axis(axis, p.get("fixed", 1), one, p.get("order", "outward")))
    return run


def run_ce_2d(c, spec, bundle):
    p = spec.params
    probe = _PoiProbe(c, spec.name, p.get("warmup", False))
    res = ce_2d(p.get("step", 5), probe, probe.cleanup if p.get("cleanup", True) else None)
    _geo(c, spec, bundle, res)


def _start_places(c: Campaign) -> int:
    shown = c.target.poi_search()
    if not shown:
        return 9
    return max(len(s["lon"].partition(".")[2]) for s in shown)


def run_ce_prec(c, spec, bundle):
    p = spec.params
    origin = GeoPoint.parse(*p.get("origin", ["2.123456789", "48.987654321"]))
    start = p.get("start_places", "auto")
    start = _start_places(c) if start == "auto" else int(start)
    probe = _PoiProbe(c, spec.name, p.get("warmup", False))
    rep = ce_prec(origin, start, probe, probe.cleanup_many)
    bundle.results[spec.name] = {"strategy": "CE-Prec", "start_places": start, **rep.to_dict()}
    if rep.min_separation is not None:
        bundle.extents[f"{c.service}.min_separation_deg"] = _extent(format(rep.min_separation, "f"), "deg")
    bundle.extents[f"{c.service}.max_places"] = _extent(rep.max_places, "places")


# ---------------------------------------------------------------------------
# text strategies

def _submit_post(c: Campaign, post, name: str, pending_window: int) -> ProbeOutcome:
    holder = {}

    def call(ident) -> ProbeOutcome:
        holder["ident"] = ident
        return c.target.safety_submit(ident.token, post, now=c.now)

    first = c.probe(call, post, name)
    if first.status is not Status.PENDING:
        return first
    ident = holder["ident"]

    def query(ref: str, now: int) -> Optional[str]:
        if any(x["ref"] == ref for x in c.target.safety_list(ident.token, now)):
            return "accepted"
        if any(x["ref"] == ref for x in c.target.safety_inbox(ident.token, now)):
            return "rejected"
        return None

    out = resolve_feedback(FeedbackOracle(OracleKind.SECONDARY_QUERY, query, pending_window), first.ref, c.clock)
    if out.status is Status.REJECTED:
        c.session.pool.note_rejection(ident, c.session.policies, out.t_virtual)
    return out


def _tally(outs: list[ProbeOutcome]) -> dict:
    return {"submitted": len(outs), "accepted": sum(o.accepted for o in outs),
            "rejected": sum(o.status is Status.REJECTED for o in outs),
            "silent_ignore": sum(o.detail == "silent-ignore" for o in outs)}


def run_rsg(c, spec, bundle):
    p = spec.params
    cat = Category(p.get("category", "Crime"))
    window = p.get("pending_window_ms", 8 * 60_000)
    outs = [_submit_post(c, rsg_generate(rsg_wordlist(), p.get("length", 30), c.rng.getrandbits(32), cat),
                         spec.name, window)
            for _ in range(p.get("n", 100))]
    bundle.results[spec.name] = {"strategy": "rsg", "category": cat.value, **_tally(outs)}


def run_template(c, spec, bundle):
    p = spec.params
    stats = corpus_stats(synthetic_corpus(p.get("corpus_size", 1080), seed=p.get("corpus_seed", 0)))
    cats = [Category(x) for x in p.get("categories", [x.value for x in Category])]
    window = p.get("pending_window_ms", 8 * 60_000)
    table = {}
    for cat in cats:
        outs = []
        for _ in range(p.get("n", 100)):
            post = template_generate(cat, stats, c.rng.getrandbits(32), Image(p.get("image", "None")))
            out = _submit_post(c, post, spec.name, window)
            if p.get("augment_on_reject", False) and out.status is Status.REJECTED:
                out = _submit_post(c, post.with_image(Image.RELEVANT), spec.name, window)
            outs.append(out)
        table[cat.value] = _tally(outs)
    bundle.results[spec.name] = {"strategy": "template", "avg_sentence_len": stats.avg_sentence_len,
                                 "keywords": {k.value: list(v) for k, v in stats.top_keywords.items()},
                                 "categories": table}


RUNNERS = {
    ("nve", "fitness"): run_fitness_nve,
    ("nve", "pricing"): run_pricing_nve,
    ("nve", "transit"): run_transit_nve,
    ("accumulate", "fitness"): run_accumulate,
    ("price-envelope", "pricing"): run_price_envelope,
    ("sweep", "transit"): run_sweep,
    ("observer-trials", "transit"): run_observer_trials,
    ("ce-o", "location"): run_ce_o,
    ("ce-long", "location"): _run_axis("long"),
    ("ce-lat", "location"): _run_axis("lat"),
    ("ce-2d", "location"): run_ce_2d,
    ("ce-prec", "location"): run_ce_prec,
    ("rsg", "safety"): run_rsg,
    ("template", "safety"): run_template,
}


def run_campaign(config: CampaignConfig, *, target=None, wall_clock: bool = False) -> ReportBundle:
    missing = [s.id for s in config.strategies if (s.id, config.target.kind) not in RUNNERS]
    if missing:
        raise ConfigError(f"no runner for {missing} on a {config.target.kind} target")
    return Campaign(config, target=target, wall_clock=wall_clock).run()
