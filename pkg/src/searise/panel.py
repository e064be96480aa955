"""Decadal estimation panel.

Turns per-region annual sea-level series and regional GDP/population series
into the rectangular region-by-decade table used by the estimator: 10-year
log GDP-per-capita growth, its lag, log sea level and its square (current and
lagged), the squared deviation of log sea level from the region mean
("penalty"), and the composite country-year fixed-effect label.

Construction is single threaded; the resulting dataset is immutable and may
be shared freely across concurrent fits.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from typing import Iterable, Mapping

import numpy as np

from .errors import DataError
from .ingest import RegionEconSeries, StationSeries

PANEL_COLUMNS = (
    "region_code",
    "country_code",
    "year",
    "d_ln_gdppc",
    "ln_gdppc_lag",
    "ln_slr",
    "ln_slr_sq",
    "ln_slr_lag",
    "ln_slr_lag_sq",
    "penalty",
    "country_year",
)

DEFAULT_GRID_START = 1900
DEFAULT_GRID_END = 2020
DEFAULT_GRID_STEP = 10


@dataclass(frozen=True)
class PanelRow:
    region_code: str
    country_code: str
    year: int
    d_ln_gdppc: float
    ln_gdppc_lag: float
    ln_slr: float
    ln_slr_sq: float
    ln_slr_lag: float  # nan when the lagged sea level is unobserved
    ln_slr_lag_sq: float
    penalty: float
    country_year: str


@dataclass(frozen=True)
class PanelDataset:
    rows: tuple[PanelRow, ...]
    decade_grid: tuple[int, ...]
    region_index: dict[str, int]
    country_year_index: dict[str, int]
    diagnostics: tuple[str, ...] = ()

    @property
    def n_rows(self) -> int:
        return len(self.rows)

    def column(self, name: str) -> np.ndarray:
        if name not in PANEL_COLUMNS:
            raise KeyError(name)
        vals = [getattr(r, name) for r in self.rows]
        if name in ("region_code", "country_code", "country_year"):
            return np.asarray(vals, dtype=object)
        if name == "year":
            return np.asarray(vals, dtype=np.int64)
        return np.asarray(vals, dtype=np.float64)

    def filter_rows(self, keep: Iterable[bool], note: str = "") -> "PanelDataset":
        rows = tuple(r for r, k in zip(self.rows, keep) if k)
        diags = self.diagnostics + ((note,) if note else ())
        return _finalize(rows, self.decade_grid, diags)


def _finalize(rows: tuple[PanelRow, ...], grid: tuple[int, ...],
              diagnostics: tuple[str, ...]) -> PanelDataset:
    region_index: dict[str, int] = {}
    cy_index: dict[str, int] = {}
    seen = set()
    for r in rows:
        key = (r.region_code, r.year)
        if key in seen:
            raise DataError(f"duplicate panel row for {r.region_code} at {r.year}")
        seen.add(key)
        region_index.setdefault(r.region_code, len(region_index))
        cy_index.setdefault(r.country_year, len(cy_index))
    return PanelDataset(rows, grid, region_index, cy_index, diagnostics)


def build_region_sea_level(
    groups: Mapping[str, list[StationSeries]],
) -> dict[str, dict[int, float]]:
    """Average station readings per region per year.

    A year's value is the arithmetic mean over stations with a present
    reading that year; years reported by no station are simply absent.
    """
    out: dict[str, dict[int, float]] = {}
    for region in sorted(groups):
        stations = groups[region]
        if not stations:
            continue
        acc: dict[int, list[float]] = {}
        for st in stations:
            for year, value in st.records:
                if value is not None:
                    acc.setdefault(year, []).append(value)
        out[region] = {y: sum(v) / len(v) for y, v in sorted(acc.items())}
    return out


def _sea_at(series: dict[int, float], year: int, mode: str, radius: int,
            step: int) -> float | None:
    if mode == "point":
        if year in series:
            return series[year]
        window = [series[y] for y in range(year - radius, year + radius + 1) if y in series]
        return sum(window) / len(window) if window else None
    if mode == "decade_average":
        window = [series[y] for y in range(year - step + 1, year + 1) if y in series]
        return sum(window) / len(window) if window else None
    raise DataError(f"unknown sea-level sampling mode '{mode}'")


def to_decadal_panel(
    sea: Mapping[str, dict[int, float]],
    econ: Mapping[str, RegionEconSeries],
    grid_start: int = DEFAULT_GRID_START,
    grid_end: int = DEFAULT_GRID_END,
    grid_step: int = DEFAULT_GRID_STEP,
    sea_mode: str = "point",
    sea_fallback_radius: int = 2,
) -> PanelDataset:
    """Assemble the decadal panel.

    A row exists at grid year t for a region only when GDP per capita at t
    and t-step and the sea level at both t and t-step are all available.
    Sea level at a grid year is the point value, falling back to the mean of
    the surrounding +-radius years ("point" mode), or the trailing decade
    mean ("decade_average" mode).
    """
    grid = tuple(range(grid_start, grid_end + 1, grid_step))
    diagnostics: list[str] = []
    rows: list[PanelRow] = []
    regions = sorted(set(sea) & set(econ))
    for skipped in sorted(set(sea) - set(econ)):
        diagnostics.append(f"region {skipped}: sea level but no economic series")
    for skipped in sorted(set(econ) - set(sea)):
        diagnostics.append(f"region {skipped}: economic series but no sea level")
    for region in regions:
        series = sea[region]
        eseries = econ[region]
        by_year = {y: (g, p) for y, g, p in eseries.observations}
        region_rows: list[dict] = []
        for t in grid[1:]:
            lag = t - grid_step
            if t not in by_year or lag not in by_year:
                continue
            gdp_t, pop_t = by_year[t]
            gdp_l, pop_l = by_year[lag]
            if gdp_t <= 0 or pop_t <= 0 or gdp_l <= 0 or pop_l <= 0:
                diagnostics.append(f"region {region} year {t}: non-positive GDP or population")
                continue
            s_t = _sea_at(series, t, sea_mode, sea_fallback_radius, grid_step)
            if s_t is None:
                continue
            if s_t <= 0:
                diagnostics.append(f"region {region} year {t}: non-positive sea level")
                continue
            s_l = _sea_at(series, lag, sea_mode, sea_fallback_radius, grid_step)
            if s_l is None:
                continue
            if s_l <= 0:
                diagnostics.append(f"region {region} year {lag}: non-positive sea level")
                continue
            gdppc_t = gdp_t * 1e6 / pop_t
            gdppc_l = gdp_l * 1e6 / pop_l
            ln_slr = math.log(s_t)
            region_rows.append(
                dict(
                    year=t,
                    d_ln_gdppc=math.log(gdppc_t) - math.log(gdppc_l),
                    ln_gdppc_lag=math.log(gdppc_l),
                    ln_slr=ln_slr,
                    ln_slr_lag=math.log(s_l),
                )
            )
        if not region_rows:
            diagnostics.append(f"region {region}: no complete decade pairs")
            continue
        mean_ln = sum(r["ln_slr"] for r in region_rows) / len(region_rows)
        for r in region_rows:
            rows.append(
                PanelRow(
                    region_code=region,
                    country_code=eseries.country_code,
                    year=r["year"],
                    d_ln_gdppc=r["d_ln_gdppc"],
                    ln_gdppc_lag=r["ln_gdppc_lag"],
                    ln_slr=r["ln_slr"],
                    ln_slr_sq=r["ln_slr"] ** 2,
                    ln_slr_lag=r["ln_slr_lag"],
                    ln_slr_lag_sq=r["ln_slr_lag"] ** 2,
                    penalty=(r["ln_slr"] - mean_ln) ** 2,
                    country_year=f"{eseries.country_code}-{r['year']}",
                )
            )
    return _finalize(tuple(rows), grid, tuple(diagnostics))


def compute_region_means(panel: PanelDataset) -> dict[str, float]:
    """Mean log sea level per region over the panel's included rows."""
    sums: dict[str, list[float]] = {}
    for r in panel.rows:
        sums.setdefault(r.region_code, []).append(r.ln_slr)
    return {k: sum(v) / len(v) for k, v in sums.items()}


def recompute_penalty(panel: PanelDataset) -> PanelDataset:
    """Rebuild the penalty column from the current rows' region means."""
    means = compute_region_means(panel)
    rows = tuple(
        replace(r, penalty=(r.ln_slr - means[r.region_code]) ** 2) for r in panel.rows
    )
    return _finalize(rows, panel.decade_grid, panel.diagnostics)


def max_observed_rise(sea: Mapping[str, dict[int, float]]) -> float | None:
    """Largest first-to-last sea-level change across regions, in mm."""
    rises = []
    for series in sea.values():
        if len(series) >= 2:
            years = sorted(series)
            rises.append(series[years[-1]] - series[years[0]])
    return max(rises) if rises else None


# ---------------------------------------------------------------------------
# CSV round trip (audit/export contract)
# ---------------------------------------------------------------------------

def write_panel_csv(panel: PanelDataset, path, header_lines: Iterable[str] = ()) -> None:
    with open(path, "w", newline="") as f:
        for line in header_lines:
            f.write(f"# {line}\n")
        w = csv.writer(f)
        w.writerow(PANEL_COLUMNS)
        for r in panel.rows:
            w.writerow(
                [
                    r.region_code,
                    r.country_code,
                    r.year,
                    repr(float(r.d_ln_gdppc)),
                    repr(float(r.ln_gdppc_lag)),
                    repr(float(r.ln_slr)),
                    repr(float(r.ln_slr_sq)),
                    "" if math.isnan(r.ln_slr_lag) else repr(float(r.ln_slr_lag)),
                    "" if math.isnan(r.ln_slr_lag_sq) else repr(float(r.ln_slr_lag_sq)),
                    repr(float(r.penalty)),
                    r.country_year,
                ]
            )


def read_panel_csv(path) -> PanelDataset:
    rows: list[PanelRow] = []
    with open(path, newline="") as f:
        lines = [ln for ln in f if not ln.startswith("#")]
    reader = csv.DictReader(lines)
    missing = set(PANEL_COLUMNS) - set(reader.fieldnames or ())
    if missing:
        raise DataError(f"panel CSV missing columns: {sorted(missing)}")
    for rec in reader:
        rows.append(
            PanelRow(
                region_code=rec["region_code"],
                country_code=rec["country_code"],
                year=int(rec["year"]),
                d_ln_gdppc=float(rec["d_ln_gdppc"]),
                ln_gdppc_lag=float(rec["ln_gdppc_lag"]),
                ln_slr=float(rec["ln_slr"]),
                ln_slr_sq=float(rec["ln_slr_sq"]),
                ln_slr_lag=float(rec["ln_slr_lag"]) if rec["ln_slr_lag"] else float("nan"),
                ln_slr_lag_sq=float(rec["ln_slr_lag_sq"]) if rec["ln_slr_lag_sq"] else float("nan"),
                penalty=float(rec["penalty"]),
                country_year=rec["country_year"],
            )
        )
    years = sorted({r.year for r in rows})
    if years:
        step = min((b - a for a, b in zip(years, years[1:])), default=DEFAULT_GRID_STEP)
        grid = tuple(range(years[0] - step, years[-1] + 1, step))
    else:
        grid = ()
    return _finalize(tuple(rows), grid, ())
