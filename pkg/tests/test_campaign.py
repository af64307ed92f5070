import json
import threading
from pathlib import Path

import pytest

from boundary_probe.campaign import open_target, run_campaign
from boundary_probe.cli import load_config
from boundary_probe.core import ConfigError, ProbeOutcome, Status, parse_config
from boundary_probe.harness import Harness
from boundary_probe.harness.server import make_server
from boundary_probe.nve import InconsistentOracle

CONFIGS = Path(__file__).resolve().parent.parent / "configs"
ALL_CONFIGS = sorted(p.name for p in CONFIGS.glob("*.toml"))


def bundle_for(name, **kw):
    return run_campaign(load_config(str(CONFIGS / name)), **kw)


@pytest.fixture(scope="module")
def bundles():
    return {name: bundle_for(name) for name in ALL_CONFIGS}


@pytest.mark.parametrize("name", ALL_CONFIGS)
def test_every_log_record_belongs_to_one_strategy(bundles, name):
    b = bundles[name]
    names = {s.name for s in load_config(str(CONFIGS / name)).strategies}
    records = b.log.records
    assert records, name
    assert all(r["strategy"] in names for r in records)
    assert b.to_dict()["probes"] == len(records)
    assert not b.inconsistent


@pytest.mark.parametrize("name", ALL_CONFIGS)
def test_rerun_is_byte_identical(bundles, name):
    assert bundle_for(name).to_json() == bundles[name].to_json()


def test_strava_report(bundles):
    b = bundles["strava-boundaries.toml"]
    fields = b.results["activity-limits"]["fields"]
    assert fields["duration"]["last_accepted"] == 31_622_400
    assert fields["distance"]["last_accepted"] == 50_000_000
    assert b.extents["strava.distance_m"] == {"value": "50000000", "unit": "m", "cap_reached": False}
    assert max(r["t_virtual"] for r in b.log.records) >= 86_400_000
    assert not any(r["status"] == "RateLimited" for r in b.log.records)


def test_police_ce2d_csv(bundles):
    b = bundles["police-ce2d.toml"]
    (csv_text,) = b.csv.values()
    lines = csv_text.splitlines()
    assert lines[0] == "lon,lat,status" and len(lines) == 2702
    assert sum(line.endswith(",Accepted") for line in lines) == 2448


def test_pricing_restores_original_prices(bundles):
    h = Harness()
    before = {k: h.pricing_current(*k) for k in h.pricing_items()}
    run_campaign(load_config(str(CONFIGS / "pricing.toml")), target=h)
    assert {k: h.pricing_current(*k) for k in h.pricing_items()} == before


def test_geo_campaign_leaves_no_pois():
    h = Harness()
    before = len(h.poi_search())
    run_campaign(load_config(str(CONFIGS / "police-axes.toml")), target=h)
    assert len(h.poi_search()) == before


def test_write_bundle(tmp_path, bundles):
    path = bundles["transit.toml"].write(tmp_path / "out")
    assert path == tmp_path / "out" / "report.json"
    doc = json.loads(path.read_text())
    assert doc["extents"]["transit.speed_kmh"]["value"] == "2350"
    lines = (tmp_path / "out" / "session.jsonl").read_text().splitlines()
    assert len(lines) == doc["probes"]


def test_http_binding_matches_in_process(bundles):
    local_cfg = load_config(str(CONFIGS / "fitbit.toml"))
    srv = make_server(open_target(local_cfg.target), "127.0.0.1", 0)
    threading.Thread(target=srv.serve_forever, daemon=True).start()
    try:
        host, port = srv.server_address[:2]
        text = (CONFIGS / "fitbit.toml").read_text().replace(
            '[target]\nkind = "fitness"', f'[target]\nkind = "fitness"\nbinding = "http"\nurl = "http://{host}:{port}"')
        cfg = parse_config(text)
        assert cfg.target.binding == "http"
        remote = run_campaign(cfg)
    finally:
        srv.shutdown()
        srv.server_close()
    local = bundles["fitbit.toml"]
    assert remote.results == local.results
    assert [r["status"] for r in remote.log.records] == [r["status"] for r in local.log.records]


def test_unknown_strategy_for_target():
    cfg = parse_config('seed = 1\n[target]\nkind = "fitness"\n[[strategy]]\nid = "nve"\nname = "x"\n')
    cfg = cfg.__class__(**{**cfg.__dict__, "target": cfg.target.__class__(kind="location")})
    with pytest.raises(ConfigError):
        run_campaign(cfg)


class Holey:
    """Accepts durations up to 200 s except 64 and 74."""

    def fitness_submit(self, identity, activity, now=0):
        x = activity["duration_s"]
        return ProbeOutcome(Status.ACCEPTED if x <= 200 and x not in (64, 74) else Status.REJECTED)


def test_inconsistency_flagged_and_strict_raises():
    base = ('seed = 1\n[target]\nkind = "fitness"\n[[strategy]]\nid = "nve"\nname = "d"\n'
            'fields = ["duration"]\nmode = "linear"\nx0 = 1\n'
            'confirm = { n_extra = 4, step = 10, fail_threshold = 2 }\n')
    b = run_campaign(parse_config(base), target=Holey())
    assert b.inconsistent and b.to_dict()["inconsistent"]
    with pytest.raises(InconsistentOracle):
        run_campaign(parse_config(base + "strict = true\n"), target=Holey())


def test_open_target_fixture_override():
    h = open_target(parse_config('[target]\nkind = "location"\n[target.harness]\nfixture = "toifi"\n[[strategy]]\nid = "ce-o"\nname = "o"\n').target)
    assert h.location.rules.precision_places == 7
