"""Command line: explore | serve | defend | report."""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

from .campaign import run_campaign
from .core import ConfigError, ProbeError, parse_config, tomllib
from .defense import RoadNetwork, countermeasure_table, geofence_reduction, load_rules, q
from .geoexp import grid_points
from .nve import InconsistentOracle

OK, USAGE, INCONSISTENT = 0, 1, 2
SEED_ENV = "BOUNDARY_PROBE_SEED"


def _err(msg: str) -> None:
    print(f"boundary-probe: {msg}", file=sys.stderr)


def _env_seed() -> int:
    raw = os.environ.get(SEED_ENV)
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"{SEED_ENV} must be an integer, got {raw!r}") from None


def load_config(path: str, seed: Optional[int] = None):
    """Seed precedence: ``seed`` argument, then the file, then the environment, then 0."""
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise ConfigError(f"cannot read {path}: {e}") from e
    cfg = parse_config(text, fallback_seed=_env_seed())
    if seed is not None:
        if not 0 <= seed < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        cfg = dataclasses.replace(cfg, seed=seed)
    return cfg


def cmd_explore(config_path: str, *, seed: Optional[int] = None, wall_clock: bool = False,
                out: Optional[str] = None) -> int:
    try:
        cfg = load_config(config_path, seed)
        bundle = run_campaign(cfg, wall_clock=wall_clock)
    except ConfigError as e:
        _err(f"config error: {e}")
        return USAGE
    except InconsistentOracle as e:
        _err(f"oracle inconsistency: {e}")
        return INCONSISTENT
    except (ProbeError, OSError) as e:
        _err(f"{type(e).__name__}: {e}")
        return USAGE
    path = bundle.write(Path(out or cfg.report_path))
    print(path)
    if bundle.inconsistent:
        _err("oracle inconsistency recorded in report")
        return INCONSISTENT
    return OK


def cmd_serve(fixture: str = "default", port: int = 8080, host: str = "127.0.0.1") -> int:
    from .harness import Harness, load_fixture
    from .harness.server import make_server

    try:
        harness = Harness(load_fixture(fixture))
    except ConfigError as e:
        _err(f"fixture error: {e}")
        return USAGE
    try:
        srv = make_server(harness, host, port)
    except OSError as e:
        _err(f"cannot bind {host}:{port}: {e}")
        return USAGE
    h, p = srv.server_address[:2]
    print(f"serving on http://{h}:{p}", flush=True)
    try:
        srv.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        srv.server_close()
    return OK


def _report_json(path: str) -> dict:
    p = Path(path)
    if p.is_dir():
        p = p / "report.json"
    text = p.read_text()
    return json.loads(text) if text.strip() else {}


def _extents(report: dict, warnings: list[str]) -> dict:
    out = {}
    for key, e in sorted(report.get("extents", {}).items()):
        if e.get("cap_reached"):
            warnings.append(f"{key}: exploration hit its hard cap, not a discovered maximum")
            continue
        try:
            out[key] = q(e["value"], e["unit"])
        except (KeyError, ValueError) as err:
            warnings.append(f"{key}: unusable extent ({err})")
    return out


def _geofence_rows(doc: dict, base: Path, steps: set) -> list[dict]:
    rows = []
    for g in doc.get("geofence", []):
        step = g.get("step", 5)
        if step not in steps:
            continue
        rep = geofence_reduction(grid_points(step), RoadNetwork.from_csv(base / g["roads"]), g["threshold_m"])
        rows.append({"service": g["service"], "kind": "Geofence", "limit": str(g["threshold_m"]), "unit": "m",
                     "original": str(int(rep.original_extent)), "source": f"grid step {step}",
                     "reduction_percent": str(rep.reduction_percent), "reported_percent": "", "note": rep.note})
    return rows


TABLE_FIELDS = ["service", "kind", "limit", "unit", "original", "source", "reduction_percent",
                "reported_percent", "note"]


def defend(report: dict, rules_doc: dict, base: Path = Path("."),
           with_stated: bool = False) -> tuple[list[dict], list[str]]:
    """Countermeasure rows for ``report``.

    Rules are evaluated against the report's extents; ``with_stated`` lets
    unmatched rules use their stated originals. Geofence rules apply to the
    CE-2D grids present in the report (or to all of them with ``with_stated``).
    """
    warnings: list[str] = []
    if not report.get("extents"):
        warnings.append("report has no extents")
    table, more = countermeasure_table(load_rules(rules_doc), _extents(report, warnings), with_stated)
    steps = {r.get("step") for r in report.get("results", {}).values() if r.get("strategy") == "CE-2D"}
    if with_stated:
        steps |= {g.get("step", 5) for g in rules_doc.get("geofence", [])}
    table += _geofence_rows(rules_doc, base, steps)
    return table, warnings + more


def cmd_defend(report_path: str, rules_path: str, out: Optional[str] = None, with_stated: bool = False) -> int:
    try:
        report = _report_json(report_path)
        rules_doc = tomllib.loads(Path(rules_path).read_text())
        table, warnings = defend(report, rules_doc, Path(rules_path).parent, with_stated)
    except (OSError, ValueError, KeyError, ProbeError, tomllib.TOMLDecodeError) as e:
        _err(f"{type(e).__name__}: {e}")
        return USAGE
    for w in warnings:
        _err(f"warning: {w}")
    buf = io.StringIO()
    w = csv.DictWriter(buf, TABLE_FIELDS, lineterminator="\n")
    w.writeheader()
    w.writerows(table)
    if out:
        Path(out).write_text(buf.getvalue())
    else:
        sys.stdout.write(buf.getvalue())
    return OK


def _summary(name: str, r: dict) -> str:
    if "fields" in r:
        return ", ".join(f"{k} last_accepted={v['last_accepted']} ({v['probes_used']} probes)"
                         for k, v in r["fields"].items())
    if "speed_kmh" in r and isinstance(r["speed_kmh"], dict):
        v = r["speed_kmh"]
        return f"speed last_accepted={v['last_accepted']} km/h ({v['probes_used']} probes)"
    if "items" in r:
        return "; ".join(f"{k} {v['min']}..{v['max']}" for k, v in r["items"].items())
    if "max_places" in r:
        return f"max_places={r['max_places']} min_separation={r['min_separation']}"
    if "categories" in r:
        return ", ".join(f"{k} {v['accepted']}/{v['submitted']}" for k, v in r["categories"].items())
    keys = [k for k in ("probes", "accepted", "rejected", "rate_limited", "submitted", "rides", "trials",
                        "self_accepted", "observer_affected", "final_distance_m") if k in r]
    return " ".join(f"{k}={r[k]}" for k in keys)


def cmd_report(report_path: str) -> int:
    try:
        report = _report_json(report_path)
    except (OSError, ValueError) as e:
        _err(f"{type(e).__name__}: {e}")
        return USAGE
    cfg = report.get("config", {})
    print(f"target: {cfg.get('target', {}).get('kind')}  seed: {cfg.get('seed')}  probes: {report.get('probes')}")
    for name, r in report.get("results", {}).items():
        print(f"  {name} [{r.get('strategy')}]: {_summary(name, r)}")
    for key, e in report.get("extents", {}).items():
        print(f"  extent {key} = {e['value']} {e['unit']}")
    return OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    ap = argparse.ArgumentParser(prog="boundary-probe", description="Input-validation boundary exploration.")
    sub = ap.add_subparsers(dest="cmd", required=True)

    e = sub.add_parser("explore", help="run a campaign config")
    e.add_argument("config")
    e.add_argument("--seed", type=int, help="overrides the config seed")
    e.add_argument("--wall-clock", action="store_true", help="really wait instead of advancing virtual time")
    e.add_argument("--out", help="report directory (default: the config's report_path)")

    s = sub.add_parser("serve", help="serve the simulated services over HTTP")
    s.add_argument("--fixture", default="default", help="built-in name (default, toifi) or TOML path")
    s.add_argument("--port", type=int, default=8080)
    s.add_argument("--host", default="127.0.0.1")

    d = sub.add_parser("defend", help="countermeasure table for a report")
    d.add_argument("report")
    d.add_argument("rules")
    d.add_argument("--out", help="CSV path (default: stdout)")
    d.add_argument("--with-stated", action="store_true",
                   help="fall back to each rule's stated original when the report lacks its extent")

    r = sub.add_parser("report", help="summarise a report bundle")
    r.add_argument("report")

    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return USAGE if exc.code else OK
    if args.cmd == "explore":
        return cmd_explore(args.config, seed=args.seed, wall_clock=args.wall_clock, out=args.out)
    if args.cmd == "serve":
        return cmd_serve(args.fixture, args.port, args.host)
    if args.cmd == "defend":
        return cmd_defend(args.report, args.rules, args.out, args.with_stated)
    return cmd_report(args.report)


if __name__ == "__main__":
    sys.exit(main())
