"""Scenario catalog, builder, warm starts, collision audit and benchmark harness."""

from ..errors import ConfigError
from .audit import AuditResult, audit_collision, audit_obstacles, body_clearance, point_clearance_polytope
from .catalog import CATALOG, default_config
from .config import apply_overrides, deep_merge, load_config_file, resolve_config, validate
from .hybrid_astar import HybridAStarConfig, hybrid_astar_warm_start, plan_path
from .scenario import BenchmarkResult, Scenario, TrialResult, aggregate, make_rng, run_benchmark


def list_scenarios() -> list:
    return sorted(CATALOG)


def build_scenario(name: str, overrides=None) -> Scenario:
    """Catalog scenario with dotted-path ``overrides`` applied."""
    if name not in CATALOG:
        raise ConfigError(f"unknown scenario {name!r}; available: {', '.join(list_scenarios())}", "scenario.name")
    return Scenario(resolve_config(name, overrides=overrides))


def warm_start(scenario: Scenario, x_start, method=None):
    """Initial input sequence for a start state (zero or hybrid A*)."""
    U, _, _, _ = scenario.warm_start({"x0": list(map(float, x_start))}, method)
    return U


__all__ = [
    "AuditResult", "BenchmarkResult", "CATALOG", "HybridAStarConfig", "Scenario", "TrialResult", "aggregate",
    "apply_overrides", "audit_collision", "audit_obstacles", "body_clearance", "build_scenario", "deep_merge",
    "default_config", "hybrid_astar_warm_start", "list_scenarios", "load_config_file", "make_rng",
    "plan_path", "point_clearance_polytope", "resolve_config", "run_benchmark", "validate", "warm_start",
]
