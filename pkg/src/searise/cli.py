"""Command-line interface.

Subcommands: ingest, estimate, effects, roll, project, validate. A key=value
config file can pre-set any flag (explicit flags win). All outputs carry a
provenance header with input digests and the package version, and identical
inputs produce byte-identical outputs. Exit codes: 0 success, 2 usage,
3 data error, 4 numerical error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import effects as fx
from . import projector as pj
from .errors import DataError, NumericalError, SeariseError, UsageError
from .estimator import FitResult, cluster_robust_vcov, injected_fit
from .ingest import (
    load_econ_csv,
    load_extension_csv,
    load_rlr_directory,
    load_station_mapping,
    map_stations_to_regions,
    splice_growth_extension,
)
from .panel import (
    build_region_sea_level,
    max_observed_rise,
    read_panel_csv,
    to_decadal_panel,
    write_panel_csv,
)
from .specs import SPEC_NAMES, build_spec, describe_spec, fit_panel, rolling_fit
from .validation import (
    SyntheticDGP,
    cluster_vcov_direct,
    dense_dummy_ols,
    generate_panel,
)

GRID_LIMIT_MM = 20000.0


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def _provenance_lines(inputs: dict[str, str], spec: str = "") -> list[str]:
    lines = [f"searise version={__version__}"]
    if spec:
        lines.append(f"model={spec}")
    for name in sorted(inputs):
        lines.append(f"input {name} sha256={_sha256(inputs[name])}")
    return lines


def _provenance_dict(inputs: dict[str, str], spec: str = "") -> dict:
    d = {"version": __version__, "inputs": {n: _sha256(p) for n, p in sorted(inputs.items())}}
    if spec:
        d["model"] = spec
    return d


def _write_json(path, payload: dict) -> None:
    with open(path, "w") as f:
        json.dump(payload, f, indent=2, sort_keys=True)
        f.write("\n")


def _load_config_file(path) -> dict[str, str]:
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise UsageError(f"{path} line {lineno}: expected 'key = value'")
        key, value = line.split("=", 1)
        out[key.strip().replace("-", "_")] = value.strip()
    return out


def _apply_config(args: argparse.Namespace, parser_defaults: dict) -> argparse.Namespace:
    """Fill unset flags from the config file, then hard defaults."""
    cfg = _load_config_file(args.config) if getattr(args, "config", None) else {}
    for key, value in cfg.items():
        if not hasattr(args, key):
            continue
        if getattr(args, key) is None:
            default = parser_defaults.get(key)
            caster = type(default) if default is not None else str
            if caster is bool:
                setattr(args, key, value.lower() in ("1", "true", "yes"))
            else:
                setattr(args, key, caster(value))
    for key, default in parser_defaults.items():
        if getattr(args, key, None) is None and default is not None:
            setattr(args, key, default)
    return args


def _parse_inject(pairs: list[str] | None) -> dict[str, float] | None:
    if not pairs:
        return None
    out = {}
    for pair in pairs:
        if "=" not in pair:
            raise UsageError(f"--inject expects name=value, got '{pair}'")
        name, value = pair.split("=", 1)
        try:
            out[name.strip()] = float(value)
        except ValueError:
            raise UsageError(f"--inject value for '{name}' is not numeric") from None
    return out


def _load_fit(fit_path: str | None, inject: dict[str, float] | None,
              spec_name: str) -> FitResult:
    if fit_path and inject:
        raise UsageError("supply either a fit JSON or injected coefficients, not both")
    if fit_path:
        with open(fit_path) as f:
            return FitResult.from_json_dict(json.load(f))
    if inject:
        return injected_fit(spec_name, inject)
    raise UsageError("a fit JSON (--fit) or injected coefficients (--inject) are required")


def _effect_grid(start: float, stop: float, step: float) -> np.ndarray:
    if not (0.0 < start < stop <= GRID_LIMIT_MM):
        raise UsageError(f"effect grid must lie within (0, {GRID_LIMIT_MM:.0f}) mm")
    if step <= 0:
        raise UsageError("grid step must be positive")
    return np.arange(start, stop + step / 2.0, step)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_ingest(args) -> int:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stations = load_rlr_directory(args.rlr_dir)
    if not stations:
        raise DataError(f"no stations found under {args.rlr_dir}")
    mapping = load_station_mapping(args.mapping)
    grouping = map_stations_to_regions(stations, mapping)
    if not grouping.groups:
        raise DataError("no coastal regions: every station is unmapped")
    econ = load_econ_csv(args.econ)
    inputs = {"mapping": args.mapping, "econ": args.econ}
    if args.extension:
        ext = load_extension_csv(args.extension)
        econ = {
            region: splice_growth_extension(series, ext[region]) if region in ext else series
            for region, series in econ.items()
        }
        inputs["extension"] = args.extension
    sea = build_region_sea_level(grouping.groups)
    panel = to_decadal_panel(
        sea,
        econ,
        grid_start=args.grid_start,
        grid_end=args.grid_end,
        grid_step=args.grid_step,
        sea_mode=args.sea_mode,
        sea_fallback_radius=args.sea_fallback_radius,
    )
    if panel.n_rows == 0:
        raise DataError("ingestion produced an empty panel")
    write_panel_csv(panel, out_dir / "panel.csv", _provenance_lines(inputs))
    rise = max_observed_rise(sea)
    report = {
        "provenance": _provenance_dict(inputs),
        "stations": len(stations),
        "stations_unmapped": list(grouping.unmapped),
        "mapping_warnings": list(grouping.warnings),
        "regions_used": sorted(panel.region_index),
        "regions_excluded": sorted(set(sea) - set(panel.region_index)),
        "n_rows": panel.n_rows,
        "decade_grid": list(panel.decade_grid),
        "max_observed_rise_mm": rise,
        "diagnostics": list(panel.diagnostics),
    }
    _write_json(out_dir / "ingest_report.json", report)
    print(f"panel: {panel.n_rows} rows over {len(panel.region_index)} regions")
    return 0


def _regression_table_rows(results: list[FitResult]) -> list[list[str]]:
    order = ["ln_slr", "ln_slr_lag", "ln_slr_sq", "ln_slr_lag_sq", "ln_gdppc_lag", "penalty"]
    rows = [["term"] + [r.spec_name for r in results]]
    for term in order:
        if not any(term in r.coefficients for r in results):
            continue
        est, se = [term], [f"se({term})"]
        for r in results:
            if term in r.coefficients:
                est.append(f"{r.coefficients[term]:.4g}")
                se.append(f"({r.std_errors()[term]:.4g})")
            else:
                est.append("")
                se.append("")
        rows.append(est)
        rows.append(se)
    rows.append(["constant"] + [
        f"{r.constant:.4g}" if r.constant is not None else "" for r in results
    ])
    rows.append(["country_year_fes"] + [
        "Yes" if "country_year" in r.fe_absorbed else "No" for r in results
    ])
    rows.append(["region_fes"] + [
        "Yes" if "region" in r.fe_absorbed else "No" for r in results
    ])
    rows.append(["observations"] + [str(r.n_obs) for r in results])
    rows.append(["r_squared"] + [f"{r.r_squared:.3f}" for r in results])
    rows.append(["r_squared_within"] + [f"{r.r_squared_within:.3f}" for r in results])
    return rows


def cmd_estimate(args) -> int:
    if args.list_models:
        listing = [describe_spec(build_spec(name)) for name in SPEC_NAMES]
        print(json.dumps(listing, indent=2))
        return 0
    if not args.panel or not args.out_dir:
        raise UsageError("estimate requires --panel and --out-dir")
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    panel = read_panel_csv(args.panel)
    names = [m.strip() for m in args.models.split(",") if m.strip()]
    if not names:
        raise UsageError("no models requested")
    inputs = {"panel": args.panel}
    results = []
    for name in names:
        spec = build_spec(name, cluster_mode=args.cluster_mode)
        try:
            res = fit_panel(spec, panel, tolerance=args.tolerance)
        except DataError as exc:
            raise DataError(f"model '{name}': {exc}") from exc
        results.append(res)
        payload = res.to_json_dict()
        payload["provenance"] = _provenance_dict(inputs, spec=name)
        _write_json(out_dir / f"fit_{name}.json", payload)
    header = _provenance_lines(inputs, spec=",".join(names))
    with open(out_dir / "regression_table.csv", "w", newline="") as f:
        for line in header:
            f.write(f"# {line}\n")
        for row in _regression_table_rows(results):
            f.write(",".join(row) + "\n")
    for res in results:
        print(f"{res.spec_name}: n={res.n_obs} r2={res.r_squared:.3f}")
    return 0


def cmd_effects(args) -> int:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    inputs = {}
    if args.fit:
        inputs["fit"] = args.fit
    fit = _load_fit(args.fit, _parse_inject(args.inject), "adaptation")
    grid = _effect_grid(args.grid_start_mm, args.grid_stop_mm, args.grid_step_mm)
    curve = fx.effect_curve(
        fit,
        grid,
        ref_mm=args.reference_mm,
        region_mean_ln_slr=args.region_mean_ln_slr,
        max_rise_mm=args.max_rise_mm,
    )
    curve.write_csv(out_dir / "effect_curve.csv", _provenance_lines(inputs, fit.spec_name))
    curve_json = curve.to_json_dict()
    curve_json["provenance"] = _provenance_dict(inputs, fit.spec_name)
    _write_json(out_dir / "effect_curve.json", curve_json)
    threshold = fx.significance_threshold(curve)
    _write_json(
        out_dir / "threshold.json",
        {
            "provenance": _provenance_dict(inputs, fit.spec_name),
            "threshold_mm": threshold,
            "found": threshold is not None,
            "reference_mm": args.reference_mm,
        },
    )
    dyn = None
    if args.dynamic_fit or args.inject_dynamic:
        if args.dynamic_fit:
            inputs["dynamic_fit"] = args.dynamic_fit
        dyn = _load_fit(args.dynamic_fit, _parse_inject(args.inject_dynamic), "dynamic")
        rows = fx.point_estimate_table(
            fit, dyn, ref_mm=args.reference_mm,
            region_mean_ln_slr=args.region_mean_ln_slr,
        )
        fx.write_point_estimates_csv(
            rows, out_dir / "point_estimates.csv", _provenance_lines(inputs, fit.spec_name)
        )
    found = f"{threshold:.0f} mm" if threshold is not None else "none-found"
    print(f"threshold: {found}; curve points: {len(curve.grid)}"
          + ("; point estimates written" if dyn else ""))
    return 0


def cmd_roll(args) -> int:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    panel = read_panel_csv(args.panel)
    spec = build_spec(args.model, cluster_mode=args.cluster_mode)
    roll = rolling_fit(spec, panel, window_points=args.window_points, step=args.step)
    inputs = {"panel": args.panel}
    coef = args.coefficient
    with open(out_dir / "rolling.csv", "w", newline="") as f:
        for line in _provenance_lines(inputs, spec=args.model):
            f.write(f"# {line}\n")
        f.write("end_year,coefficient,estimate,std_error,ci_low,ci_high,significant,n_obs\n")
        for end_year, res in roll.entries:
            if coef not in res.coefficients:
                continue
            b = res.coefficients[coef]
            se = res.std_errors()[coef]
            lo, hi = res.conf_int(coef)
            sig = int(lo > 0.0 or hi < 0.0)
            f.write(f"{end_year},{coef},{b!r},{se!r},{lo!r},{hi!r},{sig},{res.n_obs}\n")
    summary = {
        "provenance": _provenance_dict(inputs, spec=args.model),
        "coefficient": coef,
        "windows": len(roll.entries),
        "skipped": [[year, reason] for year, reason in roll.skipped],
        "first_significant_year": roll.first_significant(coef),
    }
    _write_json(out_dir / "rolling_summary.json", summary)
    first = summary["first_significant_year"]
    print(f"rolling: {len(roll.entries)} windows; first significant: {first}")
    return 0


def cmd_project(args) -> int:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    inputs = {"scenarios": args.scenarios}
    if args.fit:
        inputs["fit"] = args.fit
    fit = _load_fit(args.fit, _parse_inject(args.inject), "adaptation")
    paths = pj.load_scenario_csv(args.scenarios)
    base_levels = None
    if args.bases:
        inputs["bases"] = args.bases
        base_levels = pj.load_base_levels_csv(args.bases)
    projections, diags = pj.project_scenarios(fit, paths, base_levels,
                                              base_year=args.base_year)
    pj.write_projection_csv(projections, out_dir / "projections.csv",
                            _provenance_lines(inputs, fit.spec_name))
    by_scenario: dict = {}
    for p in projections:
        by_scenario.setdefault(p.scenario, []).append(p)
    aggregates = []
    with open(out_dir / "rankings.csv", "w", newline="") as f:
        for line in _provenance_lines(inputs, fit.spec_name):
            f.write(f"# {line}\n")
        f.write("scenario,group,rank,region_code,terminal_change_pct\n")
        for scenario in sorted(by_scenario, key=lambda s: s.key):
            projs = by_scenario[scenario]
            k = min(args.top_k, sum(1 for p in projs if p.terminal_2100 is not None))
            worst, best = pj.rank_regions(projs, k)
            for rank, (region, val) in enumerate(worst, start=1):
                f.write(f"{scenario.label},highest_loss,{rank},{region},{100 * val:.1f}\n")
            for rank, (region, val) in enumerate(best, start=1):
                f.write(f"{scenario.label},lowest_loss,{rank},{region},{100 * val:.1f}\n")
            agg = pj.aggregate_scenario(projs)
            aggregates.append(
                {
                    "scenario": scenario.label,
                    "ssp": scenario.ssp,
                    "rcp": scenario.rcp,
                    "ice": scenario.ice,
                    "n_regions": agg.n_regions,
                    "mean_population_weighted": agg.mean_population_weighted,
                    "mean_uniform": agg.mean_uniform,
                    "percentiles": {str(k): v for k, v in agg.percentiles.items()},
                    "skipped_regions": list(agg.skipped_regions),
                }
            )
    _write_json(
        out_dir / "aggregates.json",
        {"provenance": _provenance_dict(inputs, fit.spec_name),
         "diagnostics": diags, "scenarios": aggregates},
    )
    for a in aggregates:
        print(f"{a['scenario']}: mean {100 * a['mean_population_weighted']:.2f}% "
              f"over {a['n_regions']} regions")
    return 0


def cmd_validate(args) -> int:
    checks = []
    rng_seeds = [args.seed + i for i in range(args.fixtures)]
    worst_coef = 0.0
    for seed in rng_seeds:
        dgp = SyntheticDGP(
            n_regions=18, n_decades=9, beta1=600.0, beta2=-34.0, beta3=-30.0,
            theta=-0.45, noise_sd=0.05, grid_start=1930, seed=seed,
        )
        panel = generate_panel(dgp)
        for name in SPEC_NAMES:
            spec = build_spec(name)
            res = fit_panel(spec, panel, tolerance=1e-12)
            oracle = dense_dummy_ols(panel, spec)
            rel = max(
                abs(res.coefficients[n] - oracle.coefficients[n])
                / max(abs(oracle.coefficients[n]), 1e-12)
                for n in oracle.names
            )
            worst_coef = max(worst_coef, rel)
    checks.append({"check": "dense_dummy_equivalence",
                   "worst_relative_error": worst_coef, "pass": worst_coef < 1e-8})

    # direct-summation sandwich check on the canonical 60-row clustering fixture
    rng = np.random.default_rng(args.seed)
    region = np.repeat(np.arange(6), 10).astype(np.int64)
    year = np.tile(np.arange(10), 6).astype(np.int64)
    x = rng.normal(size=(60, 3))
    u = rng.normal(size=60)
    worst_v = 0.0
    for mode in ("one_way", "two_way"):
        v, _flag = cluster_robust_vcov(x, u, [region, year], [6, 10], mode, 3)
        v_direct = cluster_vcov_direct(x, u, [region, year], mode, 3)
        worst_v = max(worst_v, float(np.max(np.abs(v - v_direct))
                                     / max(np.max(np.abs(v_direct)), 1e-300)))
    checks.append({"check": "clustered_vcov_direct_summation",
                   "worst_relative_error": worst_v, "pass": worst_v < 1e-10})

    report = {"version": __version__, "seed": args.seed, "checks": checks}
    if args.out_dir:
        out_dir = Path(args.out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        _write_json(out_dir / "validation_report.json", report)
    ok = all(c["pass"] for c in checks)
    for c in checks:
        print(f"{'PASS' if c['pass'] else 'FAIL'} {c['check']} "
              f"(worst {c['worst_relative_error']:.2e})")
    if not ok:
        raise NumericalError("validation checks failed")
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> tuple[argparse.ArgumentParser, dict[str, dict]]:
    parser = argparse.ArgumentParser(
        prog="searise",
        description="Sea-level-rise effects on regional GDP per capita: "
                    "panel estimation, effect curves and scenario projection.",
    )
    parser.add_argument("--version", action="version", version=f"searise {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    defaults: dict[str, dict] = {}

    p = sub.add_parser("ingest", help="build the decadal panel from raw files")
    p.add_argument("--config")
    p.add_argument("--rlr-dir", required=True)
    p.add_argument("--mapping", required=True)
    p.add_argument("--econ", required=True)
    p.add_argument("--extension")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--grid-start", type=int)
    p.add_argument("--grid-end", type=int)
    p.add_argument("--grid-step", type=int)
    p.add_argument("--sea-mode", choices=["point", "decade_average"])
    p.add_argument("--sea-fallback-radius", type=int)
    defaults["ingest"] = {"grid_start": 1900, "grid_end": 2020, "grid_step": 10,
                          "sea_mode": "point", "sea_fallback_radius": 2}
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("estimate", help="fit model specifications on a panel CSV")
    p.add_argument("--config")
    p.add_argument("--panel")
    p.add_argument("--models")
    p.add_argument("--cluster-mode", choices=["one_way", "two_way"])
    p.add_argument("--tolerance", type=float)
    p.add_argument("--out-dir")
    p.add_argument("--list-models", action="store_true")
    defaults["estimate"] = {"models": "adaptation", "cluster_mode": "two_way",
                            "tolerance": 1e-10}
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("effects", help="effect curves, thresholds and point tables")
    p.add_argument("--config")
    p.add_argument("--fit")
    p.add_argument("--inject", action="append", metavar="NAME=VALUE")
    p.add_argument("--dynamic-fit")
    p.add_argument("--inject-dynamic", action="append", metavar="NAME=VALUE")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--grid-start-mm", type=float)
    p.add_argument("--grid-stop-mm", type=float)
    p.add_argument("--grid-step-mm", type=float)
    p.add_argument("--reference-mm", type=float)
    p.add_argument("--region-mean-ln-slr", type=float)
    p.add_argument("--max-rise-mm", type=float)
    defaults["effects"] = {"grid_start_mm": 6500.0, "grid_stop_mm": 9000.0,
                           "grid_step_mm": 50.0, "reference_mm": 7000.0,
                           "max_rise_mm": fx.DEFAULT_MAX_OBSERVED_RISE_MM}
    p.set_defaults(func=cmd_effects)

    p = sub.add_parser("roll", help="rolling-window coefficient paths")
    p.add_argument("--config")
    p.add_argument("--panel", required=True)
    p.add_argument("--model")
    p.add_argument("--window-points", type=int)
    p.add_argument("--step", type=int)
    p.add_argument("--coefficient")
    p.add_argument("--cluster-mode", choices=["one_way", "two_way"])
    p.add_argument("--out-dir", required=True)
    defaults["roll"] = {"model": "linear", "window_points": 6, "step": 1,
                        "coefficient": "ln_slr", "cluster_mode": "one_way"}
    p.set_defaults(func=cmd_roll)

    p = sub.add_parser("project", help="scenario projections of GDP change to 2100")
    p.add_argument("--config")
    p.add_argument("--scenarios", required=True)
    p.add_argument("--fit")
    p.add_argument("--inject", action="append", metavar="NAME=VALUE")
    p.add_argument("--bases")
    p.add_argument("--base-year", type=int)
    p.add_argument("--top-k", type=int)
    p.add_argument("--out-dir", required=True)
    defaults["project"] = {"base_year": 2020, "top_k": 5}
    p.set_defaults(func=cmd_project)

    p = sub.add_parser("validate", help="run estimator oracle checks")
    p.add_argument("--config")
    p.add_argument("--seed", type=int)
    p.add_argument("--fixtures", type=int)
    p.add_argument("--out-dir")
    defaults["validate"] = {"seed": 7, "fixtures": 3}
    p.set_defaults(func=cmd_validate)

    return parser, defaults


def main(argv: list[str] | None = None) -> int:
    parser, defaults = build_parser()
    args = parser.parse_args(argv)
    try:
        args = _apply_config(args, defaults.get(args.command, {}))
        return args.func(args)
    except UsageError as exc:
        _emit_error("usage", exc)
        return 2
    except DataError as exc:
        _emit_error("data", exc)
        return 3
    except OSError as exc:
        _emit_error("data", exc)
        return 3
    except NumericalError as exc:
        _emit_error("numerical", exc)
        return 4
    except SeariseError as exc:  # pragma: no cover - safety net
        _emit_error("error", exc)
        return 1


def _emit_error(kind: str, exc: Exception) -> None:
    print(json.dumps({"error": kind, "message": str(exc)}), file=sys.stderr)


if __name__ == "__main__":
    sys.exit(main())
