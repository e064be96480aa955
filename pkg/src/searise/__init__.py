"""Sea-level rise and regional economic growth.

Estimates the historical effect of relative sea-level rise on regional
GDP-per-capita growth from tide-gauge and regional-accounts panels
(fixed-effects specifications with cluster-robust inference), derives
short-/long-term effect curves with delta-method bands, and projects
cumulative regional GDP changes to 2100 under SSP/RCP scenario paths.
"""

__version__ = "0.1.0"

from .effects import (
    EffectCurve,
    adaptation_gap,
    annualized_growth_impact,
    dynamic_effects,
    effect_curve,
    long_term_effect,
    point_estimate_table,
    short_term_effect,
    significance_threshold,
)
from .estimator import (
    AbsorptionReport,
    DesignMatrix,
    FitResult,
    absorb_fixed_effects,
    cluster_robust_vcov,
    fit,
    injected_fit,
    ols_fit,
)
from .ingest import (
    RegionEconSeries,
    StationRegionMap,
    StationSeries,
    map_stations_to_regions,
    parse_rlr_annual,
    splice_growth_extension,
)
from .panel import (
    PanelDataset,
    PanelRow,
    build_region_sea_level,
    compute_region_means,
    recompute_penalty,
    to_decadal_panel,
)
from .projector import (
    ScenarioId,
    ScenarioPath,
    ScenarioProjection,
    aggregate_scenario,
    project_region,
    rank_regions,
)
from .specs import ModelSpec, build_spec, fit_panel, rolling_fit
from .validation import SyntheticDGP, dense_dummy_ols, generate_panel

__all__ = [name for name in dir() if not name.startswith("_")]
