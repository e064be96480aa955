"""Tide-gauge and regional-economy ingestion.

Parses PSMSL-convention RLR annual files (semicolon-separated
``year; value_mm; flag; quality`` lines, missing sentinel -99999), joins
stations to NUTS2 regions through a user-supplied mapping table, and loads
regional GDP/population series with an optional growth-rate extension splice.

Everything here is a pure function over file contents; per-station loading
may run concurrently as long as the merged result is ordered by station id,
which :func:`load_rlr_directory` guarantees.
"""

from __future__ import annotations

import csv
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .errors import DataError, ParseError, StructuralError

MISSING_SENTINEL = -99999.0
NUTS2_PATTERN = re.compile(r"^[A-Z]{2}[A-Z0-9]{1,2}$")


@dataclass(frozen=True)
class StationSeries:
    """One tide gauge's annual sea-level record on the RLR datum.

    The datum sits roughly 7000 mm below local mean sea level, so present
    readings are positive numbers near 7000. ``records`` pairs each year
    with its annual mean in mm, or None where the year is unobserved.
    """

    station_id: int
    name: str = ""
    latitude: float | None = None
    longitude: float | None = None
    records: tuple[tuple[int, float | None], ...] = ()

    def __post_init__(self):
        last = None
        for year, value in self.records:
            if last is not None and year <= last:
                raise StructuralError(
                    f"station {self.station_id}: years not strictly increasing at {year}"
                )
            last = year
            if value is not None and value <= 0:
                raise StructuralError(
                    f"station {self.station_id}: non-positive reading {value} in {year}"
                )

    @property
    def present_values(self) -> dict[int, float]:
        return {y: v for y, v in self.records if v is not None}


@dataclass(frozen=True)
class StationRegionMap:
    """Station-to-NUTS2 assignment supplied as an external table."""

    entries: tuple[tuple[int, str, str], ...]

    def __post_init__(self):
        seen = set()
        for station_id, region, _country in self.entries:
            if station_id in seen:
                raise StructuralError(f"station {station_id} mapped more than once")
            seen.add(station_id)
            if not NUTS2_PATTERN.match(region):
                raise StructuralError(f"'{region}' is not a valid NUTS2 code")

    def region_of(self) -> dict[int, tuple[str, str]]:
        return {sid: (region, country) for sid, region, country in self.entries}


@dataclass(frozen=True)
class RegionEconSeries:
    """Regional GDP (millions, constant international dollars) and population."""

    region_code: str
    country_code: str
    observations: tuple[tuple[int, float, float], ...]  # (year, gdp, population)

    def __post_init__(self):
        last = None
        for year, gdp, pop in self.observations:
            if last is not None and year <= last:
                raise StructuralError(
                    f"region {self.region_code}: years not increasing at {year}"
                )
            last = year
            if gdp <= 0 or pop <= 0:
                raise StructuralError(
                    f"region {self.region_code}: non-positive GDP or population in {year}"
                )

    @property
    def end_year(self) -> int:
        return self.observations[-1][0]


@dataclass(frozen=True)
class RegionGrouping:
    groups: dict[str, list[StationSeries]]
    unmapped: tuple[int, ...]
    warnings: tuple[str, ...]


def parse_rlr_annual(
    content: str,
    station_id: int,
    name: str = "",
    latitude: float | None = None,
    longitude: float | None = None,
    missing_sentinel: float = MISSING_SENTINEL,
) -> StationSeries:
    """Parse one RLR annual file into a StationSeries.

    One record per non-empty line; a value equal to the sentinel becomes an
    absent reading. Raises :class:`ParseError` naming the line for malformed
    fields and :class:`StructuralError` for duplicate years.
    """
    records: list[tuple[int, float | None]] = []
    years = set()
    for lineno, raw in enumerate(content.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        fields = [f.strip() for f in line.split(";")]
        if len(fields) < 2:
            raise ParseError(f"station {station_id} line {lineno}: expected 'year; value; ...'")
        try:
            year = int(fields[0])
        except ValueError:
            raise ParseError(
                f"station {station_id} line {lineno}: non-integer year '{fields[0]}'"
            ) from None
        try:
            value = float(fields[1])
        except ValueError:
            raise ParseError(
                f"station {station_id} line {lineno}: non-numeric value '{fields[1]}'"
            ) from None
        if year in years:
            raise StructuralError(f"station {station_id} line {lineno}: duplicate year {year}")
        years.add(year)
        records.append((year, None if value == missing_sentinel else value))
    records.sort(key=lambda r: r[0])
    return StationSeries(station_id, name, latitude, longitude, tuple(records))


def serialize_rlr_annual(series: StationSeries,
                         missing_sentinel: float = MISSING_SENTINEL) -> str:
    """Inverse of :func:`parse_rlr_annual` with canonical flag fields."""
    lines = []
    for year, value in series.records:
        v = missing_sentinel if value is None else value
        text = f"{v:.0f}" if float(v).is_integer() else repr(float(v))
        lines.append(f"{year}; {text}; 0; 000")
    return "\n".join(lines) + ("\n" if lines else "")


def load_rlr_directory(path, missing_sentinel: float = MISSING_SENTINEL) -> list[StationSeries]:
    """Load every ``<station_id>.rlrdata`` file under ``path``, sorted by id.

    An optional ``filelist.txt`` (``id; lat; lon; name; ...`` lines) supplies
    station names and coordinates.
    """
    base = Path(path)
    meta: dict[int, tuple[str, float | None, float | None]] = {}
    filelist = base / "filelist.txt"
    if filelist.exists():
        for lineno, raw in enumerate(filelist.read_text().splitlines(), start=1):
            line = raw.strip()
            if not line:
                continue
            fields = [f.strip() for f in line.split(";")]
            if len(fields) < 4:
                raise ParseError(f"filelist.txt line {lineno}: expected 'id; lat; lon; name; ...'")
            try:
                sid = int(fields[0])
                lat = float(fields[1])
                lon = float(fields[2])
            except ValueError:
                raise ParseError(f"filelist.txt line {lineno}: malformed numeric field") from None
            meta[sid] = (fields[3], lat, lon)
    stations = []
    files = sorted(base.glob("*.rlrdata"), key=lambda p: p.stem)
    for f in files:
        try:
            sid = int(f.stem)
        except ValueError:
            raise ParseError(f"{f.name}: file name is not a station id") from None
        name, lat, lon = meta.get(sid, ("", None, None))
        stations.append(parse_rlr_annual(f.read_text(), sid, name, lat, lon, missing_sentinel))
    stations.sort(key=lambda s: s.station_id)
    return stations


def load_station_mapping(path) -> StationRegionMap:
    entries = []
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        required = {"station_id", "region_code", "country_code"}
        if not required <= set(reader.fieldnames or ()):
            raise ParseError(f"{path}: mapping CSV must have columns {sorted(required)}")
        for i, rec in enumerate(reader, start=2):
            try:
                sid = int(rec["station_id"])
            except ValueError:
                raise ParseError(f"{path} line {i}: non-integer station_id") from None
            entries.append((sid, rec["region_code"].strip(), rec["country_code"].strip()))
    return StationRegionMap(tuple(entries))


def map_stations_to_regions(
    stations: Sequence[StationSeries], mapping: StationRegionMap
) -> RegionGrouping:
    """Group stations by region; unmapped stations are reported, not dropped.

    Mapping entries that reference unknown station ids produce warnings.
    Regions without stations simply do not appear (they are excluded from
    the analysis downstream).
    """
    lookup = mapping.region_of()
    known = {s.station_id for s in stations}
    groups: dict[str, list[StationSeries]] = {}
    unmapped = []
    for st in sorted(stations, key=lambda s: s.station_id):
        if st.station_id in lookup:
            region, _country = lookup[st.station_id]
            groups.setdefault(region, []).append(st)
        else:
            unmapped.append(st.station_id)
    warnings = tuple(
        f"mapping references unknown station {sid}"
        for sid in sorted(lookup)
        if sid not in known
    )
    return RegionGrouping(groups, tuple(unmapped), warnings)


def region_countries(mapping: StationRegionMap) -> dict[str, str]:
    return {region: country for _sid, region, country in mapping.entries}


def load_econ_csv(path) -> dict[str, RegionEconSeries]:
    by_region: dict[str, tuple[str, list[tuple[int, float, float]]]] = {}
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        required = {"region_code", "country_code", "year", "gdp", "population"}
        if not required <= set(reader.fieldnames or ()):
            raise ParseError(f"{path}: economic CSV must have columns {sorted(required)}")
        for i, rec in enumerate(reader, start=2):
            try:
                year = int(rec["year"])
                gdp = float(rec["gdp"])
                pop = float(rec["population"])
            except ValueError:
                raise ParseError(f"{path} line {i}: malformed numeric field") from None
            region = rec["region_code"].strip()
            country = rec["country_code"].strip()
            by_region.setdefault(region, (country, []))[1].append((year, gdp, pop))
    out = {}
    for region in sorted(by_region):
        country, obs = by_region[region]
        obs.sort(key=lambda o: o[0])
        out[region] = RegionEconSeries(region, country, tuple(obs))
    return out


def load_extension_csv(path) -> dict[str, list[tuple[int, float, float]]]:
    out: dict[str, list[tuple[int, float, float]]] = {}
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        required = {"region_code", "year", "gdp_growth", "pop_growth"}
        if not required <= set(reader.fieldnames or ()):
            raise ParseError(f"{path}: extension CSV must have columns {sorted(required)}")
        for i, rec in enumerate(reader, start=2):
            try:
                year = int(rec["year"])
                g = float(rec["gdp_growth"])
                p = float(rec["pop_growth"])
            except ValueError:
                raise ParseError(f"{path} line {i}: malformed numeric field") from None
            out.setdefault(rec["region_code"].strip(), []).append((year, g, p))
    for rows in out.values():
        rows.sort(key=lambda r: r[0])
    return out


def splice_growth_extension(
    base: RegionEconSeries,
    extension_growth: Iterable[tuple[int, float, float]],
) -> RegionEconSeries:
    """Extend a series by compounding growth rates from its final year.

    Extension years must start at ``end_year + 1`` and be contiguous; each
    appended GDP is the previous year's GDP times (1 + rate), population
    analogous. Base observations are preserved untouched.
    """
    ext = sorted(extension_growth, key=lambda r: r[0])
    if not ext:
        return base
    expected = base.end_year + 1
    obs = list(base.observations)
    _, gdp, pop = obs[-1]
    for year, g, p in ext:
        if year != expected:
            raise DataError(
                f"region {base.region_code}: extension year {year} leaves a gap "
                f"after {expected - 1}"
            )
        if g <= -1 or p <= -1:
            raise DataError(
                f"region {base.region_code}: growth rate at {year} is <= -100%"
            )
        gdp = gdp * (1.0 + g)
        pop = pop * (1.0 + p)
        obs.append((year, gdp, pop))
        expected += 1
    return RegionEconSeries(base.region_code, base.country_code, tuple(obs))
