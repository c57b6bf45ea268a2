"""Minimum clearance of barrier-wrapped agents against the same agents without the wrap.

    python3 scripts/barrier_compare.py --runs 20
"""

import argparse
from dataclasses import dataclass

from geopro.scenarios import build_scenario
from geopro.scenarios.catalog import barrier_agents


@dataclass
class BarrierConfig:
    runs: int = 20


def _plain_overrides(sc):
    return {f"behaviors.{i}.barrier": None for i, b in enumerate(sc.config["behaviors"]) if b.get("barrier")}


def compare(cfg: BarrierConfig):
    wrapped = build_scenario("barrier_swarm")
    plain = build_scenario("barrier_swarm", _plain_overrides(wrapped))
    gains = []
    for seed in range(cfg.runs):
        agent = barrier_agents(1, seed)[0]
        cw = wrapped.run_trial(agent, seed).audit.min_clearance
        cp = plain.run_trial(agent, seed).audit.min_clearance
        gains.append(cw - cp)
        print(f"seed {seed:2d}: wrapped {cw:.4f}  plain {cp:.4f}  gain {cw - cp:+.4f}")
    print(f"wrapped strictly safer in {sum(g > 0 for g in gains)}/{cfg.runs} runs, min gain {min(gains):.4f}")
    return gains


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--runs", type=int, default=20)
    compare(BarrierConfig(ap.parse_args().runs))


if __name__ == "__main__":
    main()
