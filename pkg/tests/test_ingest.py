import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from searise.errors import DataError, ParseError, StructuralError
from searise.ingest import (
    RegionEconSeries,
    StationRegionMap,
    StationSeries,
    load_rlr_directory,
    load_station_mapping,
    map_stations_to_regions,
    parse_rlr_annual,
    serialize_rlr_annual,
    splice_growth_extension,
)


def test_parse_two_plain_lines():
    s = parse_rlr_annual("1900; 6978; 0; 000\n1901; 6982; 0; 000", station_id=7)
    assert s.records == ((1900, 6978.0), (1901, 6982.0))


def test_parse_sentinel_becomes_absent():
    s = parse_rlr_annual("1900; -99999; 0; 000", station_id=7)
    assert s.records == ((1900, None),)
    assert s.present_values == {}


def test_parse_errors_name_the_line():
    with pytest.raises(ParseError, match="line 2"):
        parse_rlr_annual("1900; 6978; 0; 000\nabcd; 6980; 0; 000", station_id=7)
    with pytest.raises(ParseError, match="line 1"):
        parse_rlr_annual("1900; six; 0; 000", station_id=7)
    with pytest.raises(ParseError, match="line 1"):
        parse_rlr_annual("justonefield", station_id=7)


def test_parse_duplicate_year_is_structural():
    with pytest.raises(StructuralError, match="duplicate year 1900"):
        parse_rlr_annual("1900; 6978; 0; 000\n1900; 6979; 0; 000", station_id=7)


def test_fixture_station_round_trip(fixtures_dir):
    content = (fixtures_dir / "stations" / "101.rlrdata").read_text()
    assert len(content.splitlines()) == 121
    s = parse_rlr_annual(content, station_id=101)
    assert len(s.records) == 121
    assert len(s.present_values) == 118
    again = parse_rlr_annual(serialize_rlr_annual(s), station_id=101)
    assert again.records == s.records


@given(
    start=st.integers(min_value=1800, max_value=2000),
    values=st.lists(
        st.one_of(st.none(), st.integers(min_value=1, max_value=12000)),
        min_size=1, max_size=60,
    ),
)
@settings(max_examples=60, deadline=None)
def test_round_trip_identity_on_any_valid_series(start, values):
    records = tuple((start + i, None if v is None else float(v))
                    for i, v in enumerate(values))
    series = StationSeries(9, records=records)
    again = parse_rlr_annual(serialize_rlr_annual(series), station_id=9)
    assert again.records == series.records


def test_station_series_rejects_nonpositive_reading():
    with pytest.raises(StructuralError, match="non-positive"):
        StationSeries(1, records=((1900, -5.0),))


def test_custom_sentinel():
    s = parse_rlr_annual("1900; -1; 0; 000", station_id=1, missing_sentinel=-1)
    assert s.records == ((1900, None),)


def test_load_rlr_directory_sorted_with_metadata(fixtures_dir):
    stations = load_rlr_directory(fixtures_dir / "stations")
    assert [s.station_id for s in stations] == [101, 102, 201, 301, 401]
    assert stations[0].name == "STATION 101"
    assert stations[0].latitude == pytest.approx(50.0)


def test_mapping_rejects_duplicates_and_bad_codes():
    with pytest.raises(StructuralError, match="mapped more than once"):
        StationRegionMap(((1, "DE11", "DE"), (1, "DE12", "DE")))
    with pytest.raises(StructuralError, match="not a valid NUTS2"):
        StationRegionMap(((1, "de11x9", "DE"),))


def _station(sid):
    return StationSeries(sid, records=((1900, 7000.0),))


def test_grouping_two_stations_one_region():
    mapping = StationRegionMap(((1, "ITH3", "IT"), (2, "ITH3", "IT")))
    g = map_stations_to_regions([_station(1), _station(2)], mapping)
    assert set(g.groups) == {"ITH3"}
    assert [s.station_id for s in g.groups["ITH3"]] == [1, 2]
    assert g.unmapped == ()
    assert g.warnings == ()


def test_grouping_unmapped_station_reported():
    g = map_stations_to_regions([_station(5)], StationRegionMap(()))
    assert g.groups == {}
    assert g.unmapped == (5,)


def test_grouping_partition_and_unknown_warning():
    mapping = StationRegionMap(
        ((1, "DE11", "DE"), (2, "DE11", "DE"), (3, "DK01", "DK"),
         (4, "SE32", "SE"), (99, "FI19", "FI"))
    )
    stations = [_station(i) for i in (1, 2, 3, 4, 5)]
    g = map_stations_to_regions(stations, mapping)
    assert set(g.groups) == {"DE11", "DK01", "SE32"}
    assert g.unmapped == (5,)
    assert len(g.warnings) == 1 and "99" in g.warnings[0]
    # grouping partitions the stations: mapped + unmapped covers everything
    assert sum(len(v) for v in g.groups.values()) + len(g.unmapped) == len(stations)


def test_load_station_mapping_fixture(fixtures_dir):
    mapping = load_station_mapping(fixtures_dir / "mapping.csv")
    assert len(mapping.entries) == 5  # 4 real stations + 1 unknown id


def _econ(end_year=2015, gdp=100.0):
    obs = tuple((y, gdp, 1_000_000.0) for y in range(2010, end_year + 1, 5))
    return RegionEconSeries("DE11", "DE", obs)


def test_splice_zero_growth_is_identity_level():
    base = _econ()
    ext = [(y, 0.0, 0.0) for y in range(2016, 2021)]
    s = splice_growth_extension(base, ext)
    assert s.observations[-1] == (2020, 100.0, 1_000_000.0)
    # base observations preserved bit for bit
    assert s.observations[: len(base.observations)] == base.observations


def test_splice_compounds_growth():
    s = splice_growth_extension(_econ(), [(y, 0.02, 0.0) for y in range(2016, 2021)])
    assert s.observations[-1][0] == 2020
    assert s.observations[-1][1] == pytest.approx(100.0 * 1.02**5, rel=1e-12)
    assert s.observations[-1][1] == pytest.approx(110.40808032, rel=1e-9)


def test_splice_gap_and_bad_rate_errors():
    with pytest.raises(DataError, match="gap"):
        splice_growth_extension(_econ(), [(2018, 0.01, 0.0)])
    with pytest.raises(DataError, match="-100%"):
        splice_growth_extension(_econ(), [(2016, -1.0, 0.0)])


def test_econ_series_rejects_nonpositive():
    with pytest.raises(StructuralError):
        RegionEconSeries("DE11", "DE", ((2000, -1.0, 10.0),))
