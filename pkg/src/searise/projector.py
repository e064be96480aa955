"""Scenario projections of cumulative regional GDP-per-capita change to 2100.

Scenario paths (SSP x RCP x ice-melt assumption) supply each region's
sea-level rise relative to its base year and its projected population. The
cumulative change at a horizon year is the closed-form long-term effect of
the projected sea level against the region's own base level; population
enters only as an aggregation weight. Region/scenario projections are
independent and ordered deterministically by (scenario, region).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import DataError, ParseError
from .estimator import FitResult
from .effects import long_term_effect

VALID_SSP = (1, 2, 5)
VALID_RCP = ("2.6", "4.5", "8.5")
VALID_ICE = ("low", "medium", "high", "high_end")
TERMINAL_YEAR = 2100
DEFAULT_BASE_YEAR = 2020
DEFAULT_BASE_RLR_MM = 7000.0
PERCENTILE_POINTS = (0, 5, 10, 25, 50, 75, 90, 95, 100)


@dataclass(frozen=True)
class ScenarioId:
    label: str
    ssp: int
    rcp: str
    ice: str

    def __post_init__(self):
        if self.ssp not in VALID_SSP:
            raise DataError(f"unknown SSP {self.ssp}; expected one of {VALID_SSP}")
        if self.rcp not in VALID_RCP:
            raise DataError(f"unknown RCP '{self.rcp}'; expected one of {VALID_RCP}")
        if self.ice not in VALID_ICE:
            raise DataError(f"unknown ice assumption '{self.ice}'; expected one of {VALID_ICE}")

    @property
    def key(self) -> tuple:
        return (self.label, self.ssp, self.rcp, self.ice)


@dataclass(frozen=True)
class ScenarioPath:
    scenario: ScenarioId
    region_code: str
    steps: tuple[tuple[int, float, float], ...]  # (year, slr_mm_vs_base, population)

    def __post_init__(self):
        last = None
        for year, _rise, pop in self.steps:
            if not (2025 <= year <= TERMINAL_YEAR):
                raise DataError(
                    f"{self.region_code}: projection year {year} outside 2025-{TERMINAL_YEAR}"
                )
            if last is not None and year <= last:
                raise DataError(f"{self.region_code}: projection years not increasing")
            last = year
            if pop <= 0:
                raise DataError(f"{self.region_code}: non-positive population at {year}")

    def population_at(self, year: int) -> float | None:
        for y, _r, p in self.steps:
            if y == year:
                return p
        return None


@dataclass(frozen=True)
class ScenarioProjection:
    scenario: ScenarioId
    region_code: str
    path: tuple[tuple[int, float], ...]  # (year, cumulative log-point change)
    terminal_2100: float | None
    population_2100: float | None
    diagnostics: tuple[str, ...] = ()


def project_region(
    fit: FitResult,
    path: ScenarioPath,
    base_rlr_mm: float,
    base_year: int = DEFAULT_BASE_YEAR,
) -> ScenarioProjection:
    """Cumulative change at every step: the long-term effect of the projected
    level against the region's base level, zero at the base year by
    construction."""
    if base_rlr_mm <= 0:
        raise DataError(f"{path.region_code}: non-positive base sea level")
    c = fit.coefficients
    for n in ("ln_slr", "ln_slr_sq"):
        if n not in c:
            raise DataError(f"projection fit lacks coefficient '{n}'")
    points: list[tuple[int, float]] = [(base_year, 0.0)]
    terminal = None
    pop_terminal = None
    diags: list[str] = []
    for year, rise, pop in path.steps:
        level = base_rlr_mm + rise
        if level <= 0:
            raise DataError(
                f"{path.region_code}: projected sea level {level} mm at {year} is non-positive"
            )
        change = long_term_effect(c["ln_slr"], c["ln_slr_sq"], level, base_rlr_mm)
        points.append((year, change))
        if year == TERMINAL_YEAR:
            terminal = change
            pop_terminal = pop
    if terminal is None:
        diags.append(f"{path.region_code}: path has no {TERMINAL_YEAR} step; terminal omitted")
    return ScenarioProjection(
        scenario=path.scenario,
        region_code=path.region_code,
        path=tuple(points),
        terminal_2100=terminal,
        population_2100=pop_terminal,
        diagnostics=tuple(diags),
    )


def project_scenarios(
    fit: FitResult,
    paths: Sequence[ScenarioPath],
    base_levels: Mapping[str, float] | None = None,
    base_year: int = DEFAULT_BASE_YEAR,
) -> tuple[list[ScenarioProjection], list[str]]:
    """Project every path, ordered by (scenario, region).

    Regions without an entry in ``base_levels`` use the 7000 mm datum
    default and are reported in the diagnostics.
    """
    base_levels = base_levels or {}
    diags: list[str] = []
    projections = []
    for path in sorted(paths, key=lambda p: (p.scenario.key, p.region_code)):
        base = base_levels.get(path.region_code)
        if base is None:
            base = DEFAULT_BASE_RLR_MM
            diags.append(
                f"{path.region_code}: no observed base level, using {base:.0f} mm default"
            )
        projections.append(project_region(fit, path, base, base_year))
    return projections, diags


@dataclass(frozen=True)
class AggregateSummary:
    scenario: ScenarioId
    n_regions: int
    mean_population_weighted: float
    mean_uniform: float
    percentiles: dict[int, float]
    skipped_regions: tuple[str, ...]


def aggregate_scenario(projections: Sequence[ScenarioProjection],
                       ) -> AggregateSummary:
    """Population-weighted and uniform means of terminal changes, plus a
    percentile table over regions (uniform)."""
    if not projections:
        raise DataError("cannot aggregate an empty projection set")
    scenario = projections[0].scenario
    terminals, weights, skipped = [], [], []
    for p in projections:
        if p.scenario != scenario:
            raise DataError("aggregate_scenario expects a single scenario")
        if p.terminal_2100 is None:
            skipped.append(p.region_code)
            continue
        terminals.append(p.terminal_2100)
        weights.append(p.population_2100 if p.population_2100 else 0.0)
    if not terminals:
        raise DataError(f"scenario {scenario.label}: no region reaches {TERMINAL_YEAR}")
    t = np.asarray(terminals)
    w = np.asarray(weights)
    weighted = float((t * w).sum() / w.sum()) if w.sum() > 0 else float(t.mean())
    return AggregateSummary(
        scenario=scenario,
        n_regions=len(terminals),
        mean_population_weighted=weighted,
        mean_uniform=float(t.mean()),
        percentiles={p: float(np.percentile(t, p)) for p in PERCENTILE_POINTS},
        skipped_regions=tuple(skipped),
    )


def rank_regions(
    projections: Sequence[ScenarioProjection], k: int
) -> tuple[list[tuple[str, float]], list[tuple[str, float]]]:
    """Top-k most negative and top-k least negative terminal changes.

    Ties break lexicographically on the region code in both lists.
    """
    usable = [(p.region_code, p.terminal_2100) for p in projections
              if p.terminal_2100 is not None]
    if k > len(usable):
        raise DataError(f"k={k} exceeds the {len(usable)} regions with terminal values")
    worst = sorted(usable, key=lambda r: (r[1], r[0]))[:k]
    best = sorted(usable, key=lambda r: (-r[1], r[0]))[:k]
    return worst, best


# ---------------------------------------------------------------------------
# CSV contract
# ---------------------------------------------------------------------------

SCENARIO_COLUMNS = ("scenario", "ssp", "rcp", "ice", "region_code", "year",
                    "slr_mm_vs_base", "population")


def load_scenario_csv(path) -> list[ScenarioPath]:
    groups: dict[tuple, list[tuple[int, float, float]]] = {}
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        if not set(SCENARIO_COLUMNS) <= set(reader.fieldnames or ()):
            raise ParseError(f"{path}: scenario CSV must have columns {list(SCENARIO_COLUMNS)}")
        for i, rec in enumerate(reader, start=2):
            try:
                ssp = int(rec["ssp"])
                year = int(rec["year"])
                rise = float(rec["slr_mm_vs_base"])
                pop = float(rec["population"])
            except ValueError:
                raise ParseError(f"{path} line {i}: malformed numeric field") from None
            key = (rec["scenario"].strip(), ssp, rec["rcp"].strip(), rec["ice"].strip(),
                   rec["region_code"].strip())
            groups.setdefault(key, []).append((year, rise, pop))
    paths = []
    for key in sorted(groups):
        label, ssp, rcp, ice, region = key
        steps = tuple(sorted(groups[key], key=lambda s: s[0]))
        paths.append(ScenarioPath(ScenarioId(label, ssp, rcp, ice), region, steps))
    return paths


def load_base_levels_csv(path) -> dict[str, float]:
    out = {}
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        required = {"region_code", "base_rlr_mm"}
        if not required <= set(reader.fieldnames or ()):
            raise ParseError(f"{path}: base-level CSV must have columns {sorted(required)}")
        for i, rec in enumerate(reader, start=2):
            try:
                out[rec["region_code"].strip()] = float(rec["base_rlr_mm"])
            except ValueError:
                raise ParseError(f"{path} line {i}: malformed base level") from None
    return out


def write_projection_csv(projections: Sequence[ScenarioProjection], path,
                         header_lines: Iterable[str] = ()) -> None:
    with open(path, "w", newline="") as f:
        for line in header_lines:
            f.write(f"# {line}\n")
        w = csv.writer(f)
        w.writerow(["scenario", "ssp", "rcp", "ice", "region_code", "year",
                    "cumulative_change"])
        for p in projections:
            s = p.scenario
            for year, change in p.path:
                w.writerow([s.label, s.ssp, s.rcp, s.ice, p.region_code, year, repr(change)])


def write_ranking_csv(worst: list[tuple[str, float]], best: list[tuple[str, float]],
                      path, header_lines: Iterable[str] = ()) -> None:
    with open(path, "w", newline="") as f:
        for line in header_lines:
            f.write(f"# {line}\n")
        w = csv.writer(f)
        w.writerow(["group", "rank", "region_code", "terminal_change_pct"])
        for rank, (region, val) in enumerate(worst, start=1):
            w.writerow(["highest_loss", rank, region, f"{100.0 * val:.1f}"])
        for rank, (region, val) in enumerate(best, start=1):
            w.writerow(["lowest_loss", rank, region, f"{100.0 * val:.1f}"])
