"""Greedy primal-dual control for matching systems and queueing networks."""

from ._core import (
    DomainError,
    InfeasibleError,
    Scenario,
    SchemaError,
    beta_sweep,
    bipartite_scenario,
    check_ncond,
    drift_condition,
    experiment_a,
    experiment_c,
    fluid,
    load_scenario,
    matching_lp,
    parse_scenario,
    preset_names,
    run_preset,
    simulate,
)

__all__ = [name for name in dir() if not name.startswith("_")]
