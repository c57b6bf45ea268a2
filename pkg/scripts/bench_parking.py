"""Seeded parking benchmark: success rate, residuals, clearance and solve-time statistics.

    python3 scripts/bench_parking.py --trials 100 --out results/parking.json
"""

import argparse
import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from geopro.scenarios import build_scenario, run_benchmark


@dataclass
class BenchConfig:
    trials: int = 100
    seed: int = 0
    interp: int = 10
    residual_tol: float = 1e-3
    scenarios: tuple = ("parking_vertical", "parking_parallel")
    out: str | None = None


def bench(cfg: BenchConfig) -> dict:
    report = {"config": asdict(cfg), "scenarios": {}}
    for name in cfg.scenarios:
        res = run_benchmark(build_scenario(name), cfg.trials, cfg.seed, cfg.interp)
        trs = res.trial_results
        good = [t for t in trs if t.report.final_v_norm <= cfg.residual_tol]
        times = np.array([t.report.solve_time for t in trs])
        report["scenarios"][name] = {
            "aggregate": res.aggregate,
            "residual_ok": len(good),
            "colliding": sum(t.audit.min_clearance < -1e-3 for t in good),
            "warm_start_found": sum(bool(t.warm_start_found) for t in trs),
            "median_time_s": float(np.median(times)),
        }
        s = report["scenarios"][name]
        print(f"{name:<18} |V|<={cfg.residual_tol:g}: {len(good)}/{cfg.trials}  colliding {s['colliding']}  "
              f"A* found {s['warm_start_found']}  median {s['median_time_s']:.2f} s")
    if cfg.out:
        Path(cfg.out).parent.mkdir(parents=True, exist_ok=True)
        Path(cfg.out).write_text(json.dumps(report, indent=2))
    return report


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--trials", type=int, default=100)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--interp", type=int, default=10)
    ap.add_argument("--only", choices=["parking_vertical", "parking_parallel"])
    ap.add_argument("--out")
    a = ap.parse_args()
    names = (a.only,) if a.only else BenchConfig.scenarios
    bench(BenchConfig(a.trials, a.seed, a.interp, scenarios=names, out=a.out))


if __name__ == "__main__":
    main()
