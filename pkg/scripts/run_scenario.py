"""Run one catalog scenario and print per-trial results.

    python3 scripts/run_scenario.py arm_reach
    python3 scripts/run_scenario.py parking_vertical --trials 5 --seed 3
"""

import argparse
import logging
from dataclasses import dataclass, field

from geopro.scenarios import build_scenario


@dataclass
class RunConfig:
    scenario: str
    trials: int | None = None
    seed: int = 0
    interp: int = 10
    overrides: list = field(default_factory=list)


def run(cfg: RunConfig):
    sc = build_scenario(cfg.scenario, cfg.overrides)
    results = sc.run(cfg.trials, cfg.seed, cfg.interp)
    for r in results:
        print(f"trial {r.index:03d} converged={r.converged} success={r.success} |V|={r.report.final_v_norm:.2e} "
              f"outer={r.report.outer_iters} clearance={r.audit.min_clearance:.4f} "
              f"pos_err={r.position_error} time={r.report.solve_time:.2f}s")
    n_ok = sum(r.success for r in results)
    print(f"{cfg.scenario}: {n_ok}/{len(results)} successful")
    return results


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("scenario")
    ap.add_argument("--trials", type=int)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--interp", type=int, default=10)
    ap.add_argument("--override", action="append", default=[])
    ap.add_argument("-v", "--verbose", action="store_true")
    a = ap.parse_args()
    logging.basicConfig(level=logging.INFO if a.verbose else logging.WARNING)
    run(RunConfig(a.scenario, a.trials, a.seed, a.interp, a.override))


if __name__ == "__main__":
    main()
