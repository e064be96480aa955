import math
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from searise.ingest import RegionEconSeries, StationSeries
from searise.panel import (
    PanelRow,
    _finalize,
    build_region_sea_level,
    compute_region_means,
    max_observed_rise,
    read_panel_csv,
    recompute_penalty,
    to_decadal_panel,
    write_panel_csv,
)


def _station(sid, values):
    return StationSeries(sid, records=tuple((y, v) for y, v in values))


def test_region_average_two_stations():
    groups = {"DE11": [_station(1, [(1950, 6990.0)]), _station(2, [(1950, 7010.0)])]}
    assert build_region_sea_level(groups)["DE11"][1950] == 7000.0


def test_region_average_uses_present_subset():
    groups = {"DE11": [_station(1, [(1950, None)]), _station(2, [(1950, 7010.0)])]}
    assert build_region_sea_level(groups)["DE11"][1950] == 7010.0


def test_region_average_three_stations():
    groups = {"DE11": [_station(i, [(1950, v)]) for i, v in
              ((1, 6980.0), (2, 7005.0), (3, 7025.0))]}
    got = build_region_sea_level(groups)["DE11"][1950]
    assert got == pytest.approx(21010.0 / 3.0, rel=1e-15)


def _single_region_inputs(gdppc_pairs, sea_years):
    # gdp in millions so that gdp*1e6/population equals the intended GDP pc
    obs = tuple((y, g, 1_000_000.0) for y, g in gdppc_pairs)
    econ = {"DE11": RegionEconSeries("DE11", "DE", obs)}
    sea = {"DE11": dict(sea_years)}
    return sea, econ


def test_decadal_row_arithmetic():
    sea, econ = _single_region_inputs([(1990, 10_000.0), (2000, 12_000.0)],
                                      [(1990, 7000.0), (2000, 7000.0)])
    panel = to_decadal_panel(sea, econ)
    assert panel.n_rows == 1
    row = panel.rows[0]
    assert row.year == 2000
    assert row.d_ln_gdppc == pytest.approx(math.log(1.2), abs=1e-12)
    assert row.d_ln_gdppc == pytest.approx(0.1823215567939546, abs=1e-12)
    assert row.ln_slr == pytest.approx(math.log(7000.0), abs=0)
    assert row.ln_slr == pytest.approx(8.85367, abs=5e-6)
    assert row.country_year == "DE-2000"


def test_missing_sea_level_blocks_row():
    # sea unobserved anywhere near 1990: the 2000 row cannot be formed
    sea, econ = _single_region_inputs([(1990, 10_000.0), (2000, 12_000.0)],
                                      [(2000, 7000.0)])
    assert to_decadal_panel(sea, econ).n_rows == 0
    # likewise when the row's own year is the missing one
    sea2, econ2 = _single_region_inputs([(1990, 10_000.0), (2000, 12_000.0)],
                                        [(1990, 7000.0)])
    assert to_decadal_panel(sea2, econ2).n_rows == 0


def test_constant_gdppc_gives_zero_growth():
    sea, econ = _single_region_inputs([(1990, 10_000.0), (2000, 10_000.0)],
                                      [(1990, 7000.0), (2000, 7010.0)])
    panel = to_decadal_panel(sea, econ)
    assert panel.rows[0].d_ln_gdppc == 0.0


def test_sea_point_fallback_radius():
    sea, econ = _single_region_inputs([(1990, 10_000.0), (2000, 12_000.0)],
                                      [(1989, 6990.0), (1991, 7010.0), (2000, 7000.0)])
    panel = to_decadal_panel(sea, econ)
    assert panel.n_rows == 1
    assert panel.rows[0].ln_slr_lag == pytest.approx(math.log(7000.0), abs=1e-12)
    # radius 0 disables the fallback, so the 1990 level is missing again
    assert to_decadal_panel(sea, econ, sea_fallback_radius=0).n_rows == 0


def test_decade_average_mode():
    years = {y: 7000.0 + (y - 1990) for y in range(1991, 2001)}
    sea, econ = _single_region_inputs([(1990, 10_000.0), (2000, 12_000.0)],
                                      list(years.items()) + [(1990, 7000.0)])
    panel = to_decadal_panel(sea, econ, sea_mode="decade_average")
    expected = math.log(sum(7000.0 + k for k in range(1, 11)) / 10.0)
    assert panel.rows[0].ln_slr == pytest.approx(expected, abs=1e-12)


def _rows_with_ln_slr(values, region="DE11"):
    rows = []
    for i, v in enumerate(values):
        year = 1910 + 10 * i
        rows.append(
            PanelRow(region, "DE", year, 0.0, 9.0, v, v * v,
                     float("nan"), float("nan"), 0.0, f"DE-{year}")
        )
    return rows


def test_region_mean_two_point_symmetric():
    panel = _finalize(tuple(_rows_with_ln_slr([8.85, 8.87])), (1900, 1910, 1920), ())
    means = compute_region_means(panel)
    assert means["DE11"] == pytest.approx(8.86, rel=1e-14)
    repen = recompute_penalty(panel)
    expected = ((8.87 - 8.85) / 2.0) ** 2
    for r in repen.rows:
        assert r.penalty == pytest.approx(expected, rel=1e-9)


def test_single_row_region_penalty_zero():
    panel = _finalize(tuple(_rows_with_ln_slr([8.9])), (1900, 1910), ())
    assert recompute_penalty(panel).rows[0].penalty == 0.0


def test_region_mean_three_point_fraction_oracle():
    vals = [8.80, 8.85, 8.95]
    panel = _finalize(tuple(_rows_with_ln_slr(vals)), (1900, 1910, 1920, 1930), ())
    repen = recompute_penalty(panel)
    exact = [Fraction("8.80"), Fraction("8.85"), Fraction("8.95")]
    mean = sum(exact, Fraction(0)) / 3
    for row, v in zip(repen.rows, exact):
        assert row.penalty == pytest.approx(float((v - mean) ** 2), rel=1e-9)
    assert compute_region_means(panel)["DE11"] == pytest.approx(float(mean), rel=1e-12)


@given(shift=st.floats(min_value=-2.0, max_value=2.0, allow_nan=False))
@settings(max_examples=50, deadline=None)
def test_penalty_translation_covariance(shift):
    base_vals = [8.80, 8.85, 8.95, 9.01]
    p1 = recompute_penalty(
        _finalize(tuple(_rows_with_ln_slr(base_vals)), (1900,) + tuple(1910 + 10 * i for i in range(4)), ())
    )
    p2 = recompute_penalty(
        _finalize(tuple(_rows_with_ln_slr([v + shift for v in base_vals])),
                  (1900,) + tuple(1910 + 10 * i for i in range(4)), ())
    )
    for a, b in zip(p1.rows, p2.rows):
        assert b.penalty == pytest.approx(a.penalty, abs=1e-12)


def test_demeaned_ln_slr_sums_to_zero():
    vals = [8.80, 8.85, 8.95, 9.01, 8.88]
    panel = _finalize(tuple(_rows_with_ln_slr(vals)),
                      (1900,) + tuple(1910 + 10 * i for i in range(5)), ())
    mean = compute_region_means(panel)["DE11"]
    assert abs(sum(v - mean for v in vals)) < 1e-12


def test_row_count_monotone_under_missingness():
    pairs = [(1980, 9_000.0), (1990, 10_000.0), (2000, 12_000.0), (2010, 13_000.0)]
    sea_full = {y: 7000.0 for y, _ in pairs}
    sea, econ = _single_region_inputs(pairs, list(sea_full.items()))
    full = to_decadal_panel(sea, econ)
    sea_missing = dict(sea_full)
    del sea_missing[2000]
    panel2 = to_decadal_panel({"DE11": sea_missing}, econ)
    assert panel2.n_rows <= full.n_rows


def test_grid_alignment():
    sea, econ = _single_region_inputs(
        [(1990, 10_000.0), (2000, 12_000.0), (2010, 12_500.0)],
        [(1990, 7000.0), (2000, 7001.0), (2010, 7002.0)],
    )
    panel = to_decadal_panel(sea, econ, grid_start=1900, grid_step=10)
    for r in panel.rows:
        assert (r.year - 1900) % 10 == 0


def test_panel_csv_round_trip(tmp_path):
    sea, econ = _single_region_inputs(
        [(1990, 10_000.0), (2000, 12_000.0), (2010, 12_500.0)],
        [(1990, 7000.0), (2000, 7001.0), (2010, 7002.0)],
    )
    panel = to_decadal_panel(sea, econ)
    path = tmp_path / "panel.csv"
    write_panel_csv(panel, path, header_lines=["test header"])
    back = read_panel_csv(path)
    assert back.n_rows == panel.n_rows
    for a, b in zip(panel.rows, back.rows):
        assert a.region_code == b.region_code and a.year == b.year
        assert a.d_ln_gdppc == b.d_ln_gdppc  # repr round trip is exact
        assert a.penalty == b.penalty
        assert math.isnan(b.ln_slr_lag) == math.isnan(a.ln_slr_lag)


def test_max_observed_rise():
    sea = {"A": {1900: 7000.0, 2020: 7397.0}, "B": {1900: 7000.0, 2020: 7100.0}}
    assert max_observed_rise(sea) == pytest.approx(397.0)
