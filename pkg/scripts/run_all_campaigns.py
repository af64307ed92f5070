"""Run every shipped campaign config, then build the countermeasure table.

    python scripts/run_all_campaigns.py --out reports
"""

import argparse
import sys
from dataclasses import dataclass
from pathlib import Path

from boundary_probe.cli import cmd_defend, cmd_explore, cmd_report

ROOT = Path(__file__).resolve().parent.parent


@dataclass
class Settings:
    configs: Path = ROOT / "configs"
    rules: Path = ROOT / "fixtures" / "countermeasures.toml"
    out: Path = ROOT / "reports"


def main(s: Settings) -> int:
    worst = 0
    for cfg in sorted(s.configs.glob("*.toml")):
        dest = s.out / cfg.stem
        code = cmd_explore(str(cfg), out=str(dest))
        worst = max(worst, code)
        if code == 0:
            cmd_report(str(dest))
    for name in ("strava-boundaries", "mapmyrun", "transit", "police-ce2d"):
        report = s.out / name
        if (report / "report.json").exists():
            print(f"\n# countermeasures against {name}")
            cmd_defend(str(report), str(s.rules))
    print("\n# countermeasures from stated originals")
    (s.out / "empty.json").write_text("{}")
    cmd_defend(str(s.out / "empty.json"), str(s.rules), with_stated=True)
    return worst


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=Settings.out)
    ap.add_argument("--configs", type=Path, default=Settings.configs)
    args = ap.parse_args()
    sys.exit(main(Settings(configs=args.configs, out=args.out)))
