"""Economic quantities derived from fitted coefficients.

All effects are log-point changes in GDP per capita relative to a reference
sea level (default 7000 mm, the RLR datum's nominal offset below mean sea
level), so every operation returns exactly zero at the reference. Confidence
bands use the delta method with the fit's coefficient covariance; grid points
beyond the largest observed in-sample rise are flagged as extrapolation.

Percentage outputs report ``100 * log-point change``; the exponentiated
alternative ``exp(change) - 1`` is emitted alongside under ``*_exp`` labels.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import DataError
from .estimator import FitResult, Z_95

DEFAULT_REFERENCE_MM = 7000.0
POINT_ESTIMATE_LEVELS = (6500.0, 7000.0, 7500.0, 8000.0, 8500.0, 9000.0)
# largest first-to-last rise observed in the estimation data, in mm; used as
# the default extrapolation boundary when no panel is supplied
DEFAULT_MAX_OBSERVED_RISE_MM = 397.0


def _check_level(s_mm: float) -> None:
    if s_mm <= 0:
        raise DataError(f"sea level must be positive, got {s_mm}")


def long_term_effect(b1: float, b2: float, s_mm: float,
                     ref_mm: float = DEFAULT_REFERENCE_MM) -> float:
    """Log-point GDP-per-capita change at sea level ``s_mm`` once the
    deviation penalty has vanished:
    ``b1*(ln s - ln ref) + b2*((ln s)^2 - (ln ref)^2)``."""
    _check_level(s_mm)
    _check_level(ref_mm)
    ls, lr = math.log(s_mm), math.log(ref_mm)
    return b1 * (ls - lr) + b2 * (ls * ls - lr * lr)


def adaptation_gap(b3: float, s_mm: float, ref_mm: float = DEFAULT_REFERENCE_MM,
                   region_mean_ln_slr: float | None = None) -> float:
    """Short-term minus long-term effect: the penalty contribution
    ``b3 * ((ln s - m)^2 - (ln ref - m)^2)`` with region mean ``m``
    defaulting to ``ln ref``."""
    _check_level(s_mm)
    _check_level(ref_mm)
    m = math.log(ref_mm) if region_mean_ln_slr is None else region_mean_ln_slr
    ls, lr = math.log(s_mm), math.log(ref_mm)
    return b3 * ((ls - m) ** 2 - (lr - m) ** 2)


def short_term_effect(b1: float, b2: float, b3: float, s_mm: float,
                      ref_mm: float = DEFAULT_REFERENCE_MM,
                      region_mean_ln_slr: float | None = None) -> float:
    """Long-term effect plus the deviation penalty, both measured against the
    same reference so the curve is zero there."""
    return long_term_effect(b1, b2, s_mm, ref_mm) + adaptation_gap(
        b3, s_mm, ref_mm, region_mean_ln_slr
    )


def annualized_growth_impact(cumulative_effect: float, years: float) -> float:
    """Cumulative log-point effect spread evenly over ``years``."""
    if years <= 0:
        raise DataError("years must be positive")
    return cumulative_effect / years


# ---------------------------------------------------------------------------
# curves with delta-method bands
# ---------------------------------------------------------------------------

def _coef_and_vcov(fit: FitResult, names: Sequence[str]) -> tuple[np.ndarray, np.ndarray]:
    missing = [n for n in names if n not in fit.coefficients]
    if missing:
        raise DataError(f"fit '{fit.spec_name}' lacks coefficients: {missing}")
    idx = [fit.coef_names.index(n) for n in names]
    b = np.array([fit.coefficients[n] for n in names])
    v = fit.vcov[np.ix_(idx, idx)]
    return b, v


@dataclass(frozen=True)
class EffectCurve:
    """Short- and long-term effect grids with 95% delta-method bands."""

    grid: np.ndarray
    lt_effect: np.ndarray
    st_effect: np.ndarray
    lt_ci_low: np.ndarray
    lt_ci_high: np.ndarray
    st_ci_low: np.ndarray
    st_ci_high: np.ndarray
    reference_mm: float
    extrapolation_from_mm: float | None
    upper_lt_band: Callable[[float], float]

    def extrapolated(self) -> np.ndarray:
        if self.extrapolation_from_mm is None:
            return np.zeros(len(self.grid), dtype=bool)
        return self.grid > self.extrapolation_from_mm

    def write_csv(self, path, header_lines: Iterable[str] = ()) -> None:
        flags = self.extrapolated()
        with open(path, "w", newline="") as f:
            for line in header_lines:
                f.write(f"# {line}\n")
            w = csv.writer(f)
            w.writerow(
                ["sea_level_mm", "lt_effect", "lt_ci_low", "lt_ci_high",
                 "st_effect", "st_ci_low", "st_ci_high", "extrapolated"]
            )
            for i, s in enumerate(self.grid):
                w.writerow(
                    [repr(float(s)), repr(float(self.lt_effect[i])),
                     repr(float(self.lt_ci_low[i])), repr(float(self.lt_ci_high[i])),
                     repr(float(self.st_effect[i])), repr(float(self.st_ci_low[i])),
                     repr(float(self.st_ci_high[i])), int(flags[i])]
                )

    def to_json_dict(self) -> dict:
        return {
            "reference_mm": self.reference_mm,
            "extrapolation_from_mm": self.extrapolation_from_mm,
            "grid_mm": [float(v) for v in self.grid],
            "lt_effect": [float(v) for v in self.lt_effect],
            "lt_ci_low": [float(v) for v in self.lt_ci_low],
            "lt_ci_high": [float(v) for v in self.lt_ci_high],
            "st_effect": [float(v) for v in self.st_effect],
            "st_ci_low": [float(v) for v in self.st_ci_low],
            "st_ci_high": [float(v) for v in self.st_ci_high],
            "extrapolated": [bool(v) for v in self.extrapolated()],
        }


def effect_curve(
    fit: FitResult,
    grid: Sequence[float],
    ref_mm: float = DEFAULT_REFERENCE_MM,
    region_mean_ln_slr: float | None = None,
    max_rise_mm: float | None = DEFAULT_MAX_OBSERVED_RISE_MM,
) -> EffectCurve:
    """Evaluate short-/long-term effects with pointwise delta-method bands.

    The long-term variance uses the gradient in (ln_slr, ln_slr_sq); the
    short-term adds the penalty coefficient. Requires those coefficients in
    the fit; a zero covariance collapses the bands onto the point estimates.
    """
    grid = np.asarray(sorted(float(g) for g in grid))
    if len(grid) == 0:
        raise DataError("effect grid is empty")
    if np.any(grid <= 0):
        raise DataError("effect grid must be positive")
    if len(np.unique(grid)) != len(grid):
        raise DataError("effect grid has duplicate points")
    m = math.log(ref_mm) if region_mean_ln_slr is None else region_mean_ln_slr
    b_lt, v_lt = _coef_and_vcov(fit, ["ln_slr", "ln_slr_sq"])
    b_st, v_st = _coef_and_vcov(fit, ["ln_slr", "ln_slr_sq", "penalty"])
    lr = math.log(ref_mm)

    def lt_parts(s: float) -> tuple[float, float]:
        ls = math.log(s)
        g = np.array([ls - lr, ls * ls - lr * lr])
        eff = float(g @ b_lt)
        sd = math.sqrt(max(float(g @ v_lt @ g), 0.0))
        return eff, sd

    def st_parts(s: float) -> tuple[float, float]:
        ls = math.log(s)
        g = np.array([ls - lr, ls * ls - lr * lr, (ls - m) ** 2 - (lr - m) ** 2])
        eff = float(g @ b_st)
        sd = math.sqrt(max(float(g @ v_st @ g), 0.0))
        return eff, sd

    lt = np.empty(len(grid))
    lt_sd = np.empty(len(grid))
    st = np.empty(len(grid))
    st_sd = np.empty(len(grid))
    for i, s in enumerate(grid):
        lt[i], lt_sd[i] = lt_parts(s)
        st[i], st_sd[i] = st_parts(s)

    boundary = None if max_rise_mm is None else ref_mm + max_rise_mm
    return EffectCurve(
        grid=grid,
        lt_effect=lt,
        st_effect=st,
        lt_ci_low=lt - Z_95 * lt_sd,
        lt_ci_high=lt + Z_95 * lt_sd,
        st_ci_low=st - Z_95 * st_sd,
        st_ci_high=st + Z_95 * st_sd,
        reference_mm=ref_mm,
        extrapolation_from_mm=boundary,
        upper_lt_band=lambda s: lt_parts(s)[0] + Z_95 * lt_parts(s)[1],
    )


def significance_threshold(curve: EffectCurve, resolution_mm: float = 1.0) -> float | None:
    """Smallest sea level where the upper 95% long-term band turns negative.

    Scans the curve grid for the first bracketing pair, then bisects the
    continuous band to the requested resolution. Returns None when the band
    never crosses zero on the grid.
    """
    upper = curve.lt_ci_high
    bracket = None
    for i in range(1, len(curve.grid)):
        if upper[i - 1] >= 0.0 > upper[i]:
            bracket = (float(curve.grid[i - 1]), float(curve.grid[i]))
            break
    if bracket is None:
        return None
    lo, hi = bracket
    f = curve.upper_lt_band
    while hi - lo > resolution_mm:
        mid = 0.5 * (lo + hi)
        if f(mid) >= 0.0:
            lo = mid
        else:
            hi = mid
    return hi


# ---------------------------------------------------------------------------
# dynamic estimates and point tables
# ---------------------------------------------------------------------------

def dynamic_effects(fit: FitResult, s_mm: float,
                    ref_mm: float = DEFAULT_REFERENCE_MM) -> tuple[float, float]:
    """(immediate, lagged) log-point changes from the dynamic specification.

    Immediate uses the contemporaneous coefficients; lagged uses the sums of
    current and lagged coefficients, i.e. the response remaining after one
    decade has passed.
    """
    if fit.spec_name != "dynamic":
        raise DataError(f"dynamic effects need the dynamic specification, got '{fit.spec_name}'")
    c = fit.coefficients
    needed = ("ln_slr", "ln_slr_sq", "ln_slr_lag", "ln_slr_lag_sq")
    missing = [n for n in needed if n not in c]
    if missing:
        raise DataError(f"dynamic fit lacks coefficients: {missing}")
    immediate = long_term_effect(c["ln_slr"], c["ln_slr_sq"], s_mm, ref_mm)
    lagged = long_term_effect(
        c["ln_slr"] + c["ln_slr_lag"], c["ln_slr_sq"] + c["ln_slr_lag_sq"], s_mm, ref_mm
    )
    return immediate, lagged


@dataclass(frozen=True)
class PointEstimateRow:
    sea_level_mm: float
    immediate: float
    lagged: float
    short_term: float
    long_term: float

    def as_percent(self) -> dict[str, float]:
        return {
            "sea_level_mm": self.sea_level_mm,
            "immediate_pct": round(100.0 * self.immediate, 1),
            "lagged_pct": round(100.0 * self.lagged, 1),
            "short_term_pct": round(100.0 * self.short_term, 1),
            "long_term_pct": round(100.0 * self.long_term, 1),
            "immediate_pct_exp": round(100.0 * (math.exp(self.immediate) - 1.0), 1),
            "lagged_pct_exp": round(100.0 * (math.exp(self.lagged) - 1.0), 1),
            "short_term_pct_exp": round(100.0 * (math.exp(self.short_term) - 1.0), 1),
            "long_term_pct_exp": round(100.0 * (math.exp(self.long_term) - 1.0), 1),
        }


def point_estimate_table(
    adaptation_fit: FitResult,
    dynamic_fit: FitResult,
    levels: Sequence[float] = POINT_ESTIMATE_LEVELS,
    ref_mm: float = DEFAULT_REFERENCE_MM,
    region_mean_ln_slr: float | None = None,
) -> list[PointEstimateRow]:
    """Immediate/lagged/short-/long-term effects at a ladder of sea levels."""
    a = adaptation_fit.coefficients
    for n in ("ln_slr", "ln_slr_sq", "penalty"):
        if n not in a:
            raise DataError(f"adaptation fit lacks coefficient '{n}'")
    rows = []
    for s in levels:
        imm, lag = dynamic_effects(dynamic_fit, s, ref_mm)
        lt = long_term_effect(a["ln_slr"], a["ln_slr_sq"], s, ref_mm)
        st = short_term_effect(
            a["ln_slr"], a["ln_slr_sq"], a["penalty"], s, ref_mm, region_mean_ln_slr
        )
        rows.append(PointEstimateRow(float(s), imm, lag, st, lt))
    return rows


def write_point_estimates_csv(rows: list[PointEstimateRow], path,
                              header_lines: Iterable[str] = ()) -> None:
    cols = ["sea_level_mm", "immediate_pct", "lagged_pct", "short_term_pct",
            "long_term_pct", "immediate_pct_exp", "lagged_pct_exp",
            "short_term_pct_exp", "long_term_pct_exp"]
    with open(path, "w", newline="") as f:
        for line in header_lines:
            f.write(f"# {line}\n")
        w = csv.writer(f)
        w.writerow(cols)
        for row in rows:
            d = row.as_percent()
            w.writerow([f"{d['sea_level_mm']:.0f}"] + [f"{d[c]:.1f}" for c in cols[1:]])
