"""Monte Carlo of bisection under a flaky oracle: how often does the search
land within one step of the true boundary, with and without confirmation?

    python scripts/flaky_bisect_mc.py --runs 2000 --p-fail 0.03
"""

import argparse
import random
from dataclasses import dataclass

from boundary_probe.nve import ConfirmPolicy, InitialRejected, NumericDomain, explore


@dataclass
class Settings:
    runs: int = 2000
    p_fail: float = 0.03
    boundary: int = 2350
    step: int = 10
    x0: int = 10
    seed: int = 0


def success_rate(s: Settings, confirm) -> float:
    ok = 0
    for k in range(s.runs):
        rng = random.Random(f"{s.seed}:{k}")

        def oracle(x: int) -> bool:
            return x <= s.boundary and rng.random() >= s.p_fail

        try:
            rep = explore(NumericDomain(s.x0, s.step, 1), oracle, mode="bisect", confirm=confirm)
        except InitialRejected:  # a flaky first ride counts as a failed run
            continue
        ok += s.boundary - s.step <= rep.last_accepted <= s.boundary
    return ok / s.runs


def main(s: Settings) -> None:
    policies = {"none": None, "4 extra, all must fail": ConfirmPolicy(4, s.step, 5),
                "4 extra, 3 must fail": ConfirmPolicy(4, s.step, 3)}
    for name, policy in policies.items():
        print(f"{name:24s} {success_rate(s, policy):.4f}")


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--runs", type=int, default=Settings.runs)
    ap.add_argument("--p-fail", type=float, default=Settings.p_fail)
    a = ap.parse_args()
    main(Settings(runs=a.runs, p_fail=a.p_fail))
