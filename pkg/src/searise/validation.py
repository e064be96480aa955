"""Independent oracles and synthetic data generation.

Everything here exists to check the production estimator from a different
direction: dense-dummy least squares solved by pseudoinverse (versus
absorption plus QR), brute-force sandwich summation (versus vectorised
scores), and seeded synthetic panels with known coefficients for Monte Carlo
recovery, coverage and break-detection studies.

Random generation is counter-based: every draw comes from a Philox stream
keyed by (seed, unit, period, purpose), so panel content is independent of
generation order and safe to parallelise.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DataError
from .estimator import Z_95, encode_labels
from .panel import PanelDataset, PanelRow, _finalize, write_panel_csv
from .specs import ModelSpec, build_spec, design_matrix, fit_panel, rolling_fit

_TAG_REGION_FE = 1
_TAG_CY_FE = 2
_TAG_SEA = 3
_TAG_EPS = 4
_TAG_GDP = 5
_TAG_SLOPE = 6
_TAG_BASE = 7


def _rng(seed: int, a: int, b: int, tag: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(counter=[0, a, b, tag], key=seed))


@dataclass(frozen=True)
class SyntheticDGP:
    """Synthetic decadal panel with known coefficients.

    The outcome follows the growth equation (or the dynamic equation when
    ``gamma1``/``gamma2`` are set): fixed region and country-year effects,
    exogenous lagged log GDP per capita, and a sea-level process with
    region-specific base offsets and trends. ``effect_onset_year`` switches
    the sea-level terms on only from that grid year (for break detection).
    Errors are AR(1) within region across decades with unit-variance
    innovations scaled to ``noise_sd``.
    """

    n_regions: int
    n_decades: int
    beta1: float
    beta2: float
    beta3: float
    theta: float
    gamma1: float | None = None
    gamma2: float | None = None
    region_fe_sd: float = 0.05
    country_year_fe_sd: float = 0.05
    noise_sd: float = 0.05
    noise_ar: float = 0.0
    sea_base_mm: float = 7000.0
    sea_base_spread_mm: float = 250.0
    sea_trend_mm: float = 400.0
    sea_noise_mm: float = 30.0
    gdppc_log_mean: float = 9.0
    gdppc_log_sd: float = 0.4
    regions_per_country: int = 8
    grid_start: int = 1930
    grid_step: int = 10
    effect_onset_year: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.noise_sd < 0:
            raise DataError("noise_sd must be non-negative")
        if self.n_regions * (self.n_decades - 1) < 30 and self.n_regions * self.n_decades < 30:
            raise DataError("synthetic panel too small to be useful")

    @property
    def is_dynamic(self) -> bool:
        return self.gamma1 is not None or self.gamma2 is not None

    def true_value(self, coefficient: str) -> float:
        """Population value of one regression coefficient under this DGP."""
        if self.is_dynamic:
            g1 = self.gamma1 or 0.0
            g2 = self.gamma2 or 0.0
            table = {
                "ln_slr": self.beta1 + g1,
                "ln_slr_sq": self.beta2 + g2,
                "ln_slr_lag": -self.beta1,
                "ln_slr_lag_sq": -self.beta2,
                "ln_gdppc_lag": self.theta,
            }
        else:
            table = {
                "ln_slr": self.beta1,
                "ln_slr_sq": self.beta2,
                "penalty": self.beta3,
                "ln_gdppc_lag": self.theta,
            }
        if coefficient not in table:
            raise DataError(f"no true value for coefficient '{coefficient}'")
        return table[coefficient]


def generate_panel(dgp: SyntheticDGP) -> PanelDataset:
    """Draw one panel; identical seeds give identical panels."""
    grid = tuple(dgp.grid_start + dgp.grid_step * i for i in range(dgp.n_decades + 1))
    n_countries = max(2, (dgp.n_regions + dgp.regions_per_country - 1)
                      // dgp.regions_per_country)
    rows = []
    for r in range(dgp.n_regions):
        region = f"R{r:03d}"
        country = f"C{r % n_countries:02d}"
        base = dgp.sea_base_mm + dgp.sea_base_spread_mm * (
            2.0 * _rng(dgp.seed, r, 0, _TAG_BASE).random() - 1.0
        )
        slope = (dgp.sea_trend_mm / max(dgp.n_decades, 1)) * (
            0.5 + _rng(dgp.seed, r, 0, _TAG_SLOPE).random()
        )
        sea = [
            base + slope * i + dgp.sea_noise_mm * _rng(dgp.seed, r, i, _TAG_SEA).standard_normal()
            for i in range(dgp.n_decades + 1)
        ]
        if min(sea) <= 0:
            raise DataError("sea-level process produced a non-positive level")
        ln_sea = np.log(sea)
        mean_ln = float(ln_sea[1:].mean())
        alpha_r = dgp.region_fe_sd * _rng(dgp.seed, r, 0, _TAG_REGION_FE).standard_normal()
        eps_prev = 0.0
        ar = dgp.noise_ar
        innov_scale = dgp.noise_sd * (np.sqrt(1.0 - ar * ar) if abs(ar) < 1 else 1.0)
        for i in range(1, dgp.n_decades + 1):
            year = grid[i]
            ls = float(ln_sea[i])
            ls_lag = float(ln_sea[i - 1])
            lag_gdp = float(
                dgp.gdppc_log_mean
                + dgp.gdppc_log_sd * _rng(dgp.seed, r, i, _TAG_GDP).standard_normal()
            )
            cy = float(dgp.country_year_fe_sd * _rng(
                dgp.seed, r % n_countries, i, _TAG_CY_FE
            ).standard_normal())
            z = float(_rng(dgp.seed, r, i, _TAG_EPS).standard_normal())
            if i == 1:
                eps = dgp.noise_sd * z
            else:
                eps = ar * eps_prev + innov_scale * z
            eps_prev = eps
            penalty = (ls - mean_ln) ** 2
            active = dgp.effect_onset_year is None or year >= dgp.effect_onset_year
            if dgp.is_dynamic:
                g1 = dgp.gamma1 or 0.0
                g2 = dgp.gamma2 or 0.0
                signal = ((dgp.beta1 + g1) * ls + (dgp.beta2 + g2) * ls * ls
                          - dgp.beta1 * ls_lag - dgp.beta2 * ls_lag * ls_lag)
            else:
                signal = dgp.beta1 * ls + dgp.beta2 * ls * ls + dgp.beta3 * penalty
            y = float((signal if active else 0.0) + dgp.theta * lag_gdp + alpha_r + cy + eps)
            rows.append(
                PanelRow(
                    region_code=region,
                    country_code=country,
                    year=year,
                    d_ln_gdppc=y,
                    ln_gdppc_lag=lag_gdp,
                    ln_slr=ls,
                    ln_slr_sq=ls * ls,
                    ln_slr_lag=ls_lag,
                    ln_slr_lag_sq=ls_lag * ls_lag,
                    penalty=penalty,
                    country_year=f"{country}-{year}",
                )
            )
    return _finalize(tuple(rows), grid, ())


# ---------------------------------------------------------------------------
# dense-dummy oracle
# ---------------------------------------------------------------------------

MAX_DENSE_ROWS = 2000


@dataclass(frozen=True)
class DenseDummyResult:
    names: tuple[str, ...]
    coefficients: dict[str, float]
    vcov: np.ndarray
    residuals: np.ndarray
    k_model: int


def dense_dummy_ols(
    panel: PanelDataset,
    spec: ModelSpec,
    cluster_mode: str | None = None,
    drop_columns: Sequence[str] = (),
    compute_vcov: bool = True,
) -> DenseDummyResult:
    """Reference fit with explicit dummy columns and a pseudoinverse solve.

    Deliberately a different code path from the production estimator (no
    absorption, no QR); agreement between the two is the correctness check.
    Limited to small panels to keep the dummy matrix dense-friendly.
    """
    dm, _ = design_matrix(spec, panel)
    if dm.n_obs > MAX_DENSE_ROWS:
        raise DataError(f"dense oracle limited to {MAX_DENSE_ROWS} rows, got {dm.n_obs}")
    keep = [i for i, n in enumerate(dm.names) if n not in drop_columns]
    names = tuple(dm.names[i] for i in keep)
    blocks = [dm.x[:, keep], np.ones((dm.n_obs, 1))]
    for codes, levels in zip(dm.fe_codes, dm.fe_levels):
        dummies = np.zeros((dm.n_obs, levels - 1))
        for lvl in range(1, levels):
            dummies[:, lvl - 1] = codes == lvl
        blocks.append(dummies)
    x_full = np.hstack(blocks)
    # column equilibration: exact reparameterisation that keeps the dense
    # design numerically comparable to the absorbed path
    scale = np.linalg.norm(x_full, axis=0)
    scale[scale == 0] = 1.0
    xs = x_full / scale
    beta_s = np.linalg.pinv(xs) @ dm.y
    beta = beta_s / scale
    resid = dm.y - x_full @ beta
    k_model = int(np.linalg.matrix_rank(xs))
    k = len(names)
    if compute_vcov:
        mode = cluster_mode if cluster_mode is not None else spec.cluster_mode
        labels = [dm.cluster_codes[0], dm.cluster_codes[1]]
        vcov_s = cluster_vcov_direct(xs, resid, labels, mode, k_model, k_block=k)
        vcov = vcov_s / np.outer(scale[:k], scale[:k])
    else:
        vcov = np.zeros((k, k))
    return DenseDummyResult(
        names=names,
        coefficients={n: float(beta[i]) for i, n in enumerate(names)},
        vcov=vcov,
        residuals=resid,
        k_model=k_model,
    )


def cluster_vcov_direct(
    x: np.ndarray,
    resid: np.ndarray,
    cluster_codes: Sequence[np.ndarray],
    mode: str,
    k_model: int,
    k_block: int | None = None,
) -> np.ndarray:
    """Sandwich covariance by explicit per-cluster summation.

    Same estimand as :func:`searise.estimator.cluster_robust_vcov`, computed
    with python loops and a pseudoinverse bread; used only as an oracle.
    ``k_block`` restricts the reported matrix to the leading block (the named
    regressors of a dummy design) before the two-way eigenvalue repair, which
    is defined on the reported matrix, not the full dummy space.
    """
    n, k = x.shape
    kb = k if k_block is None else k_block
    bread = np.linalg.pinv(x.T @ x)

    def one(codes: np.ndarray) -> np.ndarray:
        order: dict[int, list[int]] = {}
        for i, c in enumerate(codes.tolist()):
            order.setdefault(c, []).append(i)
        g = len(order)
        if g < 2:
            raise DataError("direct oracle needs at least 2 clusters")
        factor = (g / (g - 1.0)) * ((n - 1.0) / (n - k_model))
        meat = np.zeros((k, k))
        for members in order.values():
            s = np.zeros(k)
            for i in members:
                s = s + x[i] * resid[i]
            meat = meat + np.outer(s, s)
        return (factor * (bread @ meat @ bread))[:kb, :kb]

    if mode == "one_way":
        v = one(cluster_codes[0])
    elif mode == "two_way":
        inter, _ = encode_labels(list(zip(cluster_codes[0].tolist(),
                                          cluster_codes[1].tolist())))
        v = one(cluster_codes[0]) + one(cluster_codes[1]) - one(inter)
        w, q = np.linalg.eigh((v + v.T) / 2.0)
        if w.min() < 0.0:
            v = (q * np.clip(w, 0.0, None)) @ q.T
    else:
        raise DataError(f"unknown cluster mode '{mode}'")
    return (v + v.T) / 2.0


# ---------------------------------------------------------------------------
# Monte Carlo drivers
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class McSummary:
    n_reps: int
    coef_means: dict[str, float]
    coef_sds: dict[str, float]
    true_values: dict[str, float]
    relative_bias: dict[str, float]
    coverage: dict[str, float]
    mean_r_squared: float


def mc_recovery(
    dgp: SyntheticDGP,
    spec_name: str,
    n_reps: int,
    tolerance: float = 1e-10,
) -> McSummary:
    """Repeated generate-and-fit; reports bias and 95% CI coverage per
    coefficient. Replication r uses seed ``dgp.seed + r``."""
    spec = build_spec(spec_name, cluster_mode="one_way")
    estimates: dict[str, list[float]] = {}
    covered: dict[str, list[bool]] = {}
    r2s = []
    for rep in range(n_reps):
        panel = generate_panel(replace(dgp, seed=dgp.seed + rep))
        res = fit_panel(spec, panel, tolerance=tolerance)
        ses = res.std_errors()
        for name, b in res.coefficients.items():
            truth = dgp.true_value(name)
            estimates.setdefault(name, []).append(b)
            lo, hi = b - Z_95 * ses[name], b + Z_95 * ses[name]
            covered.setdefault(name, []).append(lo <= truth <= hi)
        r2s.append(res.r_squared)
    names = list(estimates)
    means = {n: float(np.mean(estimates[n])) for n in names}
    sds = {n: float(np.std(estimates[n], ddof=1)) for n in names}
    truths = {n: dgp.true_value(n) for n in names}
    rel = {
        n: abs(means[n] - truths[n]) / abs(truths[n]) if truths[n] != 0 else abs(means[n])
        for n in names
    }
    cov = {n: float(np.mean(covered[n])) for n in names}
    return McSummary(n_reps, means, sds, truths, rel, cov, float(np.mean(r2s)))


def mc_break_detection(
    dgp: SyntheticDGP,
    spec_name: str,
    window_points: int,
    n_reps: int,
    coefficient: str = "ln_slr",
) -> dict:
    """Share of replications whose first significant rolling window lands
    within one grid step of the DGP's onset year."""
    if dgp.effect_onset_year is None:
        raise DataError("break detection needs a DGP with an onset year")
    spec = build_spec(spec_name, cluster_mode="one_way")
    hits = 0
    detections: list[int | None] = []
    for rep in range(n_reps):
        panel = generate_panel(replace(dgp, seed=dgp.seed + rep))
        roll = rolling_fit(spec, panel, window_points=window_points)
        found = roll.first_significant(coefficient)
        detections.append(found)
        if found is not None and abs(found - dgp.effect_onset_year) <= dgp.grid_step:
            hits += 1
    return {
        "n_reps": n_reps,
        "onset_year": dgp.effect_onset_year,
        "hit_rate": hits / n_reps,
        "detections": detections,
    }


# ---------------------------------------------------------------------------
# fixture corpus
# ---------------------------------------------------------------------------

FIXTURE_REGIONS = (("DE11", "DE"), ("DE12", "DE"), ("DK01", "DK"))
FIXTURE_STATIONS = (
    (101, "DE11"), (102, "DE11"), (201, "DE12"), (301, "DK01"), (401, None),
)


def write_fixture_corpus(directory, seed: int = 20_240_101) -> dict[str, str]:
    """Emit the deterministic raw-file corpus used by the test suite.

    Five RLR station files (one with three sentinel years), a station
    mapping with one unknown-station entry and one unmapped station,
    decadal economic series to 2015 with a 2016-2020 growth extension, a
    three-scenario projection CSV, and a synthetic estimation panel.
    Returns {relative path: description}.
    """
    base = Path(directory)
    (base / "stations").mkdir(parents=True, exist_ok=True)
    written: dict[str, str] = {}

    region_of = {sid: reg for sid, reg in FIXTURE_STATIONS}
    sentinel_years = {1903, 1957, 1999}
    filelist = []
    for idx, (sid, _region) in enumerate(FIXTURE_STATIONS):
        gen = _rng(seed, sid, 0, _TAG_SEA)
        base_level = 6900.0 + 40.0 * idx
        lines = []
        for j, year in enumerate(range(1900, 2021)):
            if sid == 101 and year in sentinel_years:
                lines.append(f"{year}; -99999; 0; 000")
                continue
            value = base_level + 1.8 * j + 25.0 * gen.standard_normal()
            lines.append(f"{year}; {value:.0f}; 0; 000")
        path = base / "stations" / f"{sid}.rlrdata"
        path.write_text("\n".join(lines) + "\n")
        written[f"stations/{sid}.rlrdata"] = "RLR annual file"
        filelist.append(f"{sid}; {50.0 + idx:.3f}; {8.0 + idx:.3f}; STATION {sid}")
    (base / "stations" / "filelist.txt").write_text("\n".join(filelist) + "\n")
    written["stations/filelist.txt"] = "station metadata"

    with open(base / "mapping.csv", "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["station_id", "region_code", "country_code"])
        for sid, region in FIXTURE_STATIONS:
            if region is None:
                continue
            country = dict(FIXTURE_REGIONS)[region]
            w.writerow([sid, region, country])
        w.writerow([999, "SE32", "SE"])  # refers to no station file
    written["mapping.csv"] = "station-to-region mapping"

    with open(base / "econ.csv", "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["region_code", "country_code", "year", "gdp", "population"])
        for ridx, (region, country) in enumerate(FIXTURE_REGIONS):
            gen = _rng(seed, ridx, 1, _TAG_GDP)
            gdp = 2000.0 * (1.0 + 0.2 * ridx)
            pop = 1.5e6 * (1.0 + 0.3 * ridx)
            years = list(range(1900, 2011, 10)) + [2015]
            for year in years:
                w.writerow([region, country, year, f"{gdp:.3f}", f"{pop:.0f}"])
                growth = 0.18 + 0.1 * gen.random()
                gdp *= 1.0 + growth
                pop *= 1.0 + 0.04 + 0.02 * gen.random()
    written["econ.csv"] = "regional GDP and population"

    with open(base / "extension.csv", "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["region_code", "year", "gdp_growth", "pop_growth"])
        for ridx, (region, _country) in enumerate(FIXTURE_REGIONS):
            gen = _rng(seed, ridx, 2, _TAG_GDP)
            for year in range(2016, 2021):
                w.writerow([region, year, f"{0.015 + 0.01 * gen.random():.6f}",
                            f"{0.004 + 0.004 * gen.random():.6f}"])
    written["extension.csv"] = "growth-rate extension to 2020"

    scenarios = (
        ("SSP1-RCP2.6-Low", 1, "2.6", "low", 260.0),
        ("SSP2-RCP4.5-Medium", 2, "4.5", "medium", 500.0),
        ("SSP5-RCP8.5-HighEnd", 5, "8.5", "high_end", 1770.0),
    )
    with open(base / "scenarios.csv", "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["scenario", "ssp", "rcp", "ice", "region_code", "year",
                    "slr_mm_vs_base", "population"])
        for label, ssp, rcp, ice, rise_2100 in scenarios:
            for ridx, (region, _country) in enumerate(FIXTURE_REGIONS):
                # DK01 is the uplift region: falling relative sea level
                sign = -0.25 if region == "DK01" else 1.0
                for year in (2025, 2050, 2075, 2100):
                    frac = (year - 2020) / 80.0
                    rise = sign * rise_2100 * frac
                    pop = 2.0e6 * (1.0 + 0.2 * ridx) * (1.0 + 0.1 * frac * ssp / 5.0)
                    w.writerow([label, ssp, rcp, ice, region, year,
                                f"{rise:.1f}", f"{pop:.0f}"])
    written["scenarios.csv"] = "three-scenario projection paths"

    panel = generate_panel(
        SyntheticDGP(
            n_regions=24,
            n_decades=11,
            beta1=600.0,
            beta2=-34.0,
            beta3=-30.0,
            theta=-0.45,
            noise_sd=0.05,
            grid_start=1900,
            seed=seed,
        )
    )
    write_panel_csv(panel, base / "panel_synthetic.csv")
    written["panel_synthetic.csv"] = "synthetic estimation panel"
    return written
