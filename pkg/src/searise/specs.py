"""Registry of the six regression specifications.

Each specification is frozen to a fixed regressor list, fixed-effect
composition and optional sample window; there is deliberately no generic
formula language so the registry stays auditable. Names:

========================  ==========================================  ================
name                      regressors                                  fixed effects
========================  ==========================================  ================
adaptation                ln_slr, ln_slr_sq, ln_gdppc_lag, penalty    region, country_year
dynamic                   ln_slr, ln_slr_sq, ln_slr_lag,              country_year
                          ln_slr_lag_sq, ln_gdppc_lag
linear                    ln_slr, ln_gdppc_lag, penalty               region, country_year
subsample_1980_2020       adaptation regressors, years >= 1980        region, country_year
fes_1                     adaptation regressors                       region
fes_2                     adaptation regressors                       country_year
========================  ==========================================  ================

Inference clusters on region and country-year; ``cluster_mode`` picks
one-way (region) or two-way treatment.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import DataError, SeariseError, UsageError
from .estimator import DesignMatrix, FitResult, fit
from .panel import PanelDataset

SPEC_NAMES = ("adaptation", "dynamic", "linear", "subsample_1980_2020", "fes_1", "fes_2")

_ADAPTATION_REGRESSORS = ("ln_slr", "ln_slr_sq", "ln_gdppc_lag", "penalty")


@dataclass(frozen=True)
class ModelSpec:
    name: str
    regressors: tuple[str, ...]
    fe_groups: tuple[str, ...]
    sample_filter: tuple[int | None, int | None] | None = None
    cluster_mode: str = "two_way"


def build_spec(name: str, cluster_mode: str = "two_way") -> ModelSpec:
    if name == "adaptation":
        return ModelSpec(name, _ADAPTATION_REGRESSORS, ("region", "country_year"),
                         None, cluster_mode)
    if name == "dynamic":
        return ModelSpec(
            name,
            ("ln_slr", "ln_slr_sq", "ln_slr_lag", "ln_slr_lag_sq", "ln_gdppc_lag"),
            ("country_year",),
            None,
            cluster_mode,
        )
    if name == "linear":
        return ModelSpec(name, ("ln_slr", "ln_gdppc_lag", "penalty"),
                         ("region", "country_year"), None, cluster_mode)
    if name == "subsample_1980_2020":
        return ModelSpec(name, _ADAPTATION_REGRESSORS, ("region", "country_year"),
                         (1980, None), cluster_mode)
    if name == "fes_1":
        return ModelSpec(name, _ADAPTATION_REGRESSORS, ("region",), None, cluster_mode)
    if name == "fes_2":
        return ModelSpec(name, _ADAPTATION_REGRESSORS, ("country_year",), None, cluster_mode)
    raise UsageError(f"unknown model '{name}'; expected one of {', '.join(SPEC_NAMES)}")


def describe_spec(spec: ModelSpec) -> dict:
    """Exact regressor/FE/cluster composition, for audit listings."""
    return {
        "name": spec.name,
        "regressors": list(spec.regressors),
        "fixed_effects": list(spec.fe_groups),
        "sample_filter": list(spec.sample_filter) if spec.sample_filter else None,
        "cluster_mode": spec.cluster_mode,
        "clusters": ["region", "country_year"],
    }


def design_matrix(spec: ModelSpec, panel: PanelDataset) -> tuple[DesignMatrix, tuple[str, ...]]:
    """Select, filter and encode panel columns for one specification.

    Applies the spec's year window, then drops rows with missing values in
    any required column (the lagged sea-level columns may be NaN when the
    previous decade was unobserved). Returns the design and drop notes.
    """
    years = panel.column("year")
    keep = np.ones(panel.n_rows, dtype=bool)
    notes: list[str] = []
    if spec.sample_filter:
        lo, hi = spec.sample_filter
        if lo is not None:
            keep &= years >= lo
        if hi is not None:
            keep &= years <= hi
    cols = {name: panel.column(name) for name in spec.regressors}
    complete = np.ones(panel.n_rows, dtype=bool)
    for name, values in cols.items():
        complete &= np.isfinite(values)
    n_incomplete = int((keep & ~complete).sum())
    if n_incomplete:
        notes.append(f"{n_incomplete} rows dropped with missing {spec.name} columns")
    keep &= complete
    if not keep.any():
        raise DataError(f"specification '{spec.name}' leaves an empty sample")
    idx = np.flatnonzero(keep)
    response = panel.column("d_ln_gdppc")[idx]
    columns = {name: cols[name][idx] for name in spec.regressors}
    fe_labels = {}
    for g in spec.fe_groups:
        source = "region_code" if g == "region" else "country_year"
        fe_labels[g] = panel.column(source)[idx].tolist()
    cluster_labels = {
        "region": panel.column("region_code")[idx].tolist(),
        "country_year": panel.column("country_year")[idx].tolist(),
    }
    dm = DesignMatrix.from_columns(columns, response, fe_labels, cluster_labels)
    total_levels = sum(dm.fe_levels)
    if dm.n_obs < len(spec.regressors) + total_levels + 2:
        raise DataError(
            f"specification '{spec.name}': sample of {dm.n_obs} rows is too small for "
            f"{len(spec.regressors)} regressors and {total_levels} fixed-effect levels"
        )
    return dm, tuple(notes)


def fit_panel(spec: ModelSpec, panel: PanelDataset, tolerance: float = 1e-10) -> FitResult:
    """Fit one specification on a panel."""
    dm, _notes = design_matrix(spec, panel)
    result = fit(dm, spec_name=spec.name, cluster_mode=spec.cluster_mode, tolerance=tolerance)
    if spec.name == "dynamic":
        result = replace(result, derived=dynamic_decomposition(result))
    return result


def dynamic_decomposition(result: FitResult) -> dict[str, float]:
    """Level/growth split of the dynamic specification's coefficients.

    The lagged terms enter with the negated level coefficients, so
    ``beta = -(lag coefficient)`` recovers the level effect and the sum of
    current and lagged coefficients recovers the growth effect.
    """
    c = result.coefficients
    needed = ("ln_slr", "ln_slr_sq", "ln_slr_lag", "ln_slr_lag_sq")
    if any(k not in c for k in needed):
        raise DataError("dynamic decomposition needs current and lagged sea-level terms")
    return {
        "beta1_level": -c["ln_slr_lag"],
        "beta2_level": -c["ln_slr_lag_sq"],
        "gamma1_growth": c["ln_slr"] + c["ln_slr_lag"],
        "gamma2_growth": c["ln_slr_sq"] + c["ln_slr_lag_sq"],
    }


# ---------------------------------------------------------------------------
# rolling windows
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RollingResult:
    entries: tuple[tuple[int, FitResult], ...]
    skipped: tuple[tuple[int, str], ...]

    def first_significant(self, coefficient: str = "ln_slr") -> int | None:
        """End year of the first window whose 95% CI for ``coefficient``
        excludes zero."""
        for end_year, res in self.entries:
            if coefficient not in res.coefficients:
                continue
            lo, hi = res.conf_int(coefficient)
            if lo > 0.0 or hi < 0.0:
                return end_year
        return None


def rolling_fit(
    spec: ModelSpec,
    panel: PanelDataset,
    window_points: int,
    step: int = 1,
    tolerance: float = 1e-10,
) -> RollingResult:
    """Fit the specification on a moving window over the decade grid.

    ``window_points`` counts grid years per window and ``step`` the grid
    years advanced between windows. Windows whose sample is too small (or
    degenerate) are skipped with a diagnostic instead of failing the sweep.
    """
    if window_points < len(spec.regressors) + 2:
        raise UsageError("window must cover at least regressors + 2 grid points")
    if step < 1:
        raise UsageError("step must be >= 1")
    grid = [y for y in panel.decade_grid]
    row_years = sorted({r.year for r in panel.rows})
    usable = [y for y in grid if y >= (row_years[0] if row_years else y)]
    entries = []
    skipped = []
    if window_points > len(usable):
        return RollingResult((), ((0, "window larger than available grid"),))
    windowed = replace(spec, sample_filter=None)
    for start in range(0, len(usable) - window_points + 1, step):
        window = usable[start:start + window_points]
        lo, hi = window[0], window[-1]
        sub = panel.filter_rows([lo <= r.year <= hi for r in panel.rows])
        try:
            res = fit_panel(windowed, sub, tolerance=tolerance)
        except SeariseError as exc:
            skipped.append((hi, str(exc)))
            continue
        entries.append((hi, res))
    return RollingResult(tuple(entries), tuple(skipped))
