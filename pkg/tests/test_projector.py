import mpmath as mp
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from searise.errors import DataError
from searise.estimator import injected_fit
from searise.projector import (
    ScenarioId,
    ScenarioPath,
    aggregate_scenario,
    load_scenario_csv,
    project_region,
    project_scenarios,
    rank_regions,
)

mp.mp.dps = 50

FIT = injected_fit("adaptation", {"ln_slr": 600.0, "ln_slr_sq": -34.0, "penalty": -30.0})
SCN = ScenarioId("SSP2-RCP4.5-Medium", 2, "4.5", "medium")


def _path(region, rises, pops=None, years=(2025, 2050, 2075, 2100)):
    pops = pops or [1e6] * len(rises)
    return ScenarioPath(SCN, region, tuple(zip(years, rises, pops)))


def test_scenario_id_validation():
    with pytest.raises(DataError):
        ScenarioId("x", 3, "4.5", "medium")
    with pytest.raises(DataError):
        ScenarioId("x", 2, "6.0", "medium")
    with pytest.raises(DataError):
        ScenarioId("x", 2, "4.5", "extreme")


def test_path_validation():
    with pytest.raises(DataError, match="outside"):
        _path("A", [0.0, 0.0, 0.0, 0.0], years=(2010, 2050, 2075, 2100))
    with pytest.raises(DataError, match="not increasing"):
        ScenarioPath(SCN, "A", ((2050, 0.0, 1e6), (2050, 1.0, 1e6)))
    with pytest.raises(DataError, match="population"):
        ScenarioPath(SCN, "A", ((2050, 0.0, 0.0),))


def test_flat_path_projects_to_zero():
    proj = project_region(FIT, _path("A", [0.0, 0.0, 0.0, 0.0]), base_rlr_mm=7000.0)
    assert proj.path[0] == (2020, 0.0)
    assert all(change == 0.0 for _y, change in proj.path)
    assert proj.terminal_2100 == 0.0


def test_projection_matches_high_precision_oracle():
    proj = project_region(FIT, _path("A", [100.0, 250.0, 400.0, 500.0]),
                          base_rlr_mm=7050.0)
    ls, lr = mp.log(7050 + 500), mp.log(7050)
    want = float(600 * (ls - lr) - 34 * (ls**2 - lr**2))
    assert proj.terminal_2100 == pytest.approx(want, abs=1e-12)
    assert proj.terminal_2100 == pytest.approx(-0.33320668174538314, abs=1e-12)


def test_base_year_identity_is_exact_zero():
    proj = project_region(FIT, _path("A", [120.0, 260.0, 390.0, 505.0]), 7000.0)
    assert proj.path[0] == (2020, 0.0)


def test_missing_terminal_reported():
    proj = project_region(FIT, _path("A", [10.0, 20.0, 30.0], years=(2025, 2050, 2075)),
                          base_rlr_mm=7000.0)
    assert proj.terminal_2100 is None
    assert any("terminal omitted" in d for d in proj.diagnostics)


def test_uplift_gives_positive_change():
    # negative rise from a 7000 mm base lands on the rising branch of the
    # fitted quadratic (vertex near 6792 mm), so relative sea-level fall
    # reads as a gain
    proj = project_region(FIT, _path("FI1D", [-30.0, -60.0, -90.0, -120.0]), 7000.0)
    assert proj.terminal_2100 > 0.0


def test_monotonicity_in_rise():
    lo = project_region(FIT, _path("A", [50.0, 100.0, 150.0, 200.0]), 7000.0)
    hi = project_region(FIT, _path("A", [60.0, 120.0, 180.0, 240.0]), 7000.0)
    assert hi.terminal_2100 <= lo.terminal_2100


@given(st.floats(min_value=0.0, max_value=2000.0), st.floats(min_value=0.0, max_value=2000.0))
@settings(max_examples=60, deadline=None)
def test_monotonicity_property_beyond_vertex(r1, r2):
    lo, hi = sorted((r1, r2))
    p_lo = project_region(FIT, _path("A", [0.0, 0.0, 0.0, lo]), 7000.0)
    p_hi = project_region(FIT, _path("A", [0.0, 0.0, 0.0, hi]), 7000.0)
    assert p_hi.terminal_2100 <= p_lo.terminal_2100 + 1e-12


def test_aggregate_single_region():
    projs = [project_region(FIT, _path("A", [0.0, 0.0, 0.0, 500.0]), 7000.0)]
    agg = aggregate_scenario(projs)
    assert agg.mean_uniform == projs[0].terminal_2100
    assert agg.mean_population_weighted == projs[0].terminal_2100
    assert agg.n_regions == 1


def _fake_projection(region, terminal, pop=1e6):
    from searise.projector import ScenarioProjection

    return ScenarioProjection(SCN, region, ((2020, 0.0), (2100, terminal)),
                              terminal, pop)


def test_aggregate_uniform_two_regions():
    agg = aggregate_scenario([_fake_projection("A", -0.10), _fake_projection("B", -0.02)])
    assert agg.mean_uniform == pytest.approx(-0.06, abs=1e-15)


def test_aggregate_population_weighted_hand_case():
    projs = [
        _fake_projection("A", -0.09, 2e6),
        _fake_projection("B", -0.03, 1e6),
        _fake_projection("C", 0.01, 1e6),
    ]
    agg = aggregate_scenario(projs)
    assert agg.mean_population_weighted == pytest.approx(-0.05, abs=1e-15)
    assert agg.mean_uniform == pytest.approx((-0.09 - 0.03 + 0.01) / 3.0, abs=1e-15)
    assert agg.percentiles[0] == pytest.approx(-0.09)
    assert agg.percentiles[100] == pytest.approx(0.01)


def test_rank_regions_basic_and_ties():
    projs = [_fake_projection("A", -0.05), _fake_projection("B", -0.01)]
    worst, best = rank_regions(projs, 1)
    assert worst == [("A", -0.05)] and best == [("B", -0.01)]
    tied = [_fake_projection("B", -0.05), _fake_projection("A", -0.05)]
    worst, best = rank_regions(tied, 1)
    assert worst == [("A", -0.05)]  # lexicographic tie break
    assert best == [("A", -0.05)]
    with pytest.raises(DataError):
        rank_regions(projs, 3)


def test_project_scenarios_default_base_diagnostic():
    projs, diags = project_scenarios(FIT, [_path("A", [0.0, 0.0, 0.0, 100.0])], {})
    assert len(projs) == 1
    assert any("7000 mm default" in d for d in diags)


def test_scenario_csv_round_trip(tmp_path, fixtures_dir):
    paths = load_scenario_csv(fixtures_dir / "scenarios.csv")
    assert len(paths) == 9  # 3 scenarios x 3 regions
    labels = {p.scenario.label for p in paths}
    assert labels == {"SSP1-RCP2.6-Low", "SSP2-RCP4.5-Medium", "SSP5-RCP8.5-HighEnd"}
    for p in paths:
        assert p.steps[-1][0] == 2100
