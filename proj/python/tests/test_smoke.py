import math

import pytest

import egpd


def test_lp_reference_value():
    lp = egpd.matching_lp(egpd.experiment_a())
    assert lp["value"] == pytest.approx(10.8, abs=1e-9)
    assert lp["rates"][3] == pytest.approx(1.7, abs=1e-9)
    assert sum(lp["rates"]) == pytest.approx(4.0)


def test_simulate_short_run():
    s = egpd.experiment_a()
    s.horizon = 2000
    out = egpd.simulate(s)
    assert out["invariant_violations"] == 0
    assert 9.5 < out["avg_reward"] < 11.5
    assert len(out["completed_rates"]) == s.num_matchings


def test_round_trip_and_schema_error():
    s = egpd.bipartite_scenario()
    again = egpd.parse_scenario(s.dump())
    assert again.dump() == s.dump()
    with pytest.raises(egpd.SchemaError, match="line"):
        egpd.parse_scenario("name: x\nitems: [a]\nmatchings:\n  - mu: oops\n")
    with pytest.raises(ValueError):
        egpd.parse_scenario("items: [a\n")


def test_sweep_is_deterministic():
    s = egpd.experiment_a()
    s.horizon = 500
    a = egpd.beta_sweep(s, [0.1, 1.0], threads=1)
    b = egpd.beta_sweep(s, [1.0, 0.1], threads=2)
    assert a == b
    assert [r["beta"] for r in a] == [0.1, 1.0]


def test_fluid_and_structure():
    f = egpd.fluid(egpd.experiment_a(), t_end=20.0)
    assert f["negative_constrained"] == 0
    assert math.isfinite(f["entered_region_at"])
    d = egpd.drift_condition(egpd.bipartite_scenario())
    assert not d["holds"] and d["reduced_holds"]
    edges = [(0, 0), (0, 1), (1, 1)]
    assert egpd.check_ncond([0.6, 0.4], [0.5, 0.5], edges)["stabilizable"]
    tight = egpd.check_ncond([0.5, 0.5], [0.5, 0.5], edges)
    assert not tight["stabilizable"] and tight["violating_subset"] == [1]


def test_presets_listed():
    assert "expA" in egpd.preset_names()
    with pytest.raises(Exception):
        egpd.run_preset("missing")
