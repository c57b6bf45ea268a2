"""A/B comparison of the hybrid A* warm start against zero initial inputs on parking.

    python3 scripts/warm_start_ab.py --trials 20
"""

import argparse
from dataclasses import dataclass

from geopro.scenarios import build_scenario


@dataclass
class ABConfig:
    scenario: str = "parking_vertical"
    trials: int = 20
    seed: int = 0


def compare(cfg: ABConfig) -> dict:
    sc = build_scenario(cfg.scenario)
    agents = sc.agents_for(cfg.trials, cfg.seed)
    out = {}
    for method in ("hybrid_astar", "zero"):
        res = [sc.run_trial(a, i, warm_start=method) for i, a in enumerate(agents)]
        out[method] = sum(r.success for r in res)
        print(f"{method:<13} {out[method]}/{cfg.trials} successful, "
              f"mean outer iterations {sum(r.report.outer_iters for r in res) / len(res):.1f}")
    return out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--scenario", default="parking_vertical")
    ap.add_argument("--trials", type=int, default=20)
    ap.add_argument("--seed", type=int, default=0)
    a = ap.parse_args()
    compare(ABConfig(a.scenario, a.trials, a.seed))


if __name__ == "__main__":
    main()
