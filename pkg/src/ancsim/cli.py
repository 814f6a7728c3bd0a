"""Command line interface: run, analyze, sweep.

Exit codes: 0 success, 2 configuration error, 3 controller divergence,
4 I/O failure.
"""

from __future__ import annotations

import argparse
import copy
import json
import sys
from pathlib import Path

import numpy as np

from . import analysis, harness, presets
from .controllers import ALGORITHMS
from .errors import ConfigError, DataError, SingularMatrixError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DIVERGED = 3
EXIT_IO = 4

IN_BAND = (200.0, 800.0)
OUT_BANDS = ((0.0, 150.0), (1000.0, 8000.0))


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as err:
        print(f"configuration error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, SingularMatrixError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as err:
        print(f"i/o error: {err}", file=sys.stderr)
        return EXIT_IO


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ancsim",
        description="Output-constrained ANC simulation and analysis")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a preset or custom scenario")
    _scenario_args(run)
    run.add_argument("--algorithms", default=None,
                     help="comma-separated subset of "
                          f"{','.join(ALGORITHMS)} (default: all)")
    run.set_defaults(func=cmd_run)

    ana = sub.add_parser("analyze", help="stability bounds and optima")
    _scenario_args(ana)
    ana.set_defaults(func=cmd_analyze)

    sweep = sub.add_parser("sweep", help="run one algorithm over a parameter sweep")
    _scenario_args(sweep)
    sweep.add_argument("--parameter", required=True,
                       choices=["mu1_initial", "kappa", "gamma", "varsigma",
                                "rho_sq"])
    sweep.add_argument("--values", required=True,
                       help="comma-separated numeric values")
    sweep.add_argument("--algorithm", default="2gd-momentum-vss",
                       choices=ALGORITHMS)
    sweep.set_defaults(func=cmd_sweep)
    return parser


def _scenario_args(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("preset", nargs="?", default=None,
                     help=f"preset name: {', '.join(sorted(presets.PRESETS))}, "
                          "or 'custom' with --config")
    sub.add_argument("--config", default=None,
                     help="JSON scenario file (for 'custom')")
    sub.add_argument("--output-dir", default="out")
    sub.add_argument("--seed", type=int, default=None,
                     help="override the noise seed")
    sub.add_argument("--set", dest="overrides", action="append", default=[],
                     metavar="KEY=VALUE",
                     help="override a scenario field, e.g. algorithm.kappa=0.5")


def _load_scenario(args) -> harness.ScenarioConfig:
    if args.config is not None:
        try:
            data = json.loads(Path(args.config).read_text())
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {args.config}") from None
        except json.JSONDecodeError as err:
            raise ConfigError(f"config file is not valid JSON: {err}") from None
        config = harness.scenario_from_dict(data)
    elif args.preset and args.preset != "custom":
        config = presets.build_preset(args.preset, seed=args.seed)
    else:
        raise ConfigError("give a preset name or --config FILE")
    if args.seed is not None:
        config.noise.seed = args.seed
    overrides = {}
    for item in args.overrides:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        overrides[key] = value
    if overrides:
        presets.apply_overrides(config, overrides)
    return config


def _select_algorithms(args) -> list[str]:
    if getattr(args, "algorithms", None) is None:
        return list(ALGORITHMS)
    chosen = [a.strip() for a in args.algorithms.split(",") if a.strip()]
    for a in chosen:
        if a not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm {a!r}")
    if not chosen:
        raise ConfigError("--algorithms selected nothing")
    return chosen


def _scenario_for_algorithm(base: harness.ScenarioConfig,
                            algorithm: str) -> harness.ScenarioConfig:
    config = copy.deepcopy(base)
    config.algorithm.algorithm = algorithm
    config.name = f"{base.name}.{algorithm}"
    return config


def _predictions(config: harness.ScenarioConfig) -> dict:
    """Closed-form optima and bounds for the configured scenario.

    The eigendecomposition is cubic in the filter length, so `run` only
    includes predictions for short filters; `analyze` always computes.
    """
    probe_n = max(10 * config.n_taps, 65536)
    x = config.noise.generate(probe_n)
    d = config.primary_path.filter(x)
    model = analysis.build_correlation_model(x, d, config.secondary_model,
                                             config.n_taps)
    algo = config.algorithm
    w_opt = analysis.wiener_optimal(model)
    sigma_d_sq = float(np.mean(d ** 2))
    gain = config.secondary_model.power_gain()
    derived = None
    try:
        from .controllers import lagrangian_factor
        derived = lagrangian_factor(gain, sigma_d_sq, algo.rho_sq)
    except ConfigError:
        pass
    fixed = algo.varsigma if not isinstance(algo.varsigma, str) else derived
    report = analysis.stability_bounds(model, algo.kappa,
                                       varsigma=fixed, mu1=algo.mu1_initial)
    out = {
        "w_opt": w_opt.tolist(),
        "w_subopt_fixed": (analysis.wiener_suboptimal(model, fixed).tolist()
                           if fixed is not None else None),
        "w_subopt_derived": (analysis.wiener_suboptimal(model, derived).tolist()
                             if derived is not None else None),
        "varsigma_derived": derived,
        "sigma_d_sq": sigma_d_sq,
        "lambda_max": report.lambda_max,
        "lambda_min": report.lambda_min,
        "mu1_bound": report.mu1_bound,
        "mu2_bound": report.mu2_bound,
        "mu1_within_bound": bool(0 < algo.mu1_initial < report.mu1_bound),
        "varsigma_mu1_ok": report.varsigma_mu1_ok,
        "unconstrained_output_power": float(w_opt @ model.r_x @ w_opt),
    }
    if len(config.path_changes) == 1 and config.n_taps == 2:
        out["phase2"] = _phase2_predictions(config)
    return out


def _phase2_predictions(config: harness.ScenarioConfig) -> dict:
    change = config.path_changes[0]
    noise2 = copy.deepcopy(config.noise)
    if change.noise_variance is not None:
        noise2.variance = change.noise_variance
    x = noise2.generate(65536)
    d = change.primary_path.filter(x)
    model = analysis.build_correlation_model(x, d, config.secondary_model,
                                             config.n_taps)
    algo = config.algorithm
    sigma_d_sq = float(np.mean(d ** 2))
    from .controllers import lagrangian_factor
    gain = config.secondary_model.power_gain()
    derived = (lagrangian_factor(gain, sigma_d_sq, algo.rho_sq)
               if sigma_d_sq > 0 else 0.0)
    return {
        "w_opt": analysis.wiener_optimal(model).tolist(),
        "w_subopt_derived": analysis.wiener_suboptimal(model, derived).tolist(),
        "sigma_d_sq": sigma_d_sq,
        "noise_variance": noise2.variance,
    }


def _band_metrics(result: harness.RunResult) -> dict:
    """In-band attenuation and out-of-band excess of e relative to d."""
    fs = result.config.noise.sample_rate
    tail = result.summary.samples_run // 5 * 2
    err = result.errors[-tail:]
    dist = result.disturbance[-tail:]
    seg = min(4096, len(err) // 4)
    f_e, p_e = analysis.welch_psd(err, fs, segment_length=seg)
    f_d, p_d = analysis.welch_psd(dist, fs, segment_length=seg)
    in_e = analysis.band_power(f_e, p_e, *IN_BAND)
    in_d = analysis.band_power(f_d, p_d, *IN_BAND)
    out_e = sum(analysis.band_power(f_e, p_e, lo, hi) for lo, hi in OUT_BANDS)
    out_d = sum(analysis.band_power(f_d, p_d, lo, hi) for lo, hi in OUT_BANDS)
    # worst per-bin excess outside the band, for the boost check
    mask = np.zeros(f_e.size, dtype=bool)
    for lo, hi in OUT_BANDS:
        mask |= (f_e >= lo) & (f_e <= hi)
    floor = np.maximum(p_d, 1e-300)
    max_bin_boost = float(np.max(10.0 * np.log10(
        np.maximum(p_e[mask], 1e-300) / floor[mask])))
    return {
        "in_band_attenuation_db": 10.0 * np.log10(in_d / in_e),
        "out_band_excess_db": 10.0 * np.log10(out_e / out_d),
        "max_out_band_bin_boost_db": max_bin_boost,
    }


def _psd_table(results: dict[str, harness.RunResult]) -> tuple[list, list]:
    """PSD CSV rows for the error signals and the disturbance, in dB."""
    first = next(iter(results.values()))
    fs = first.config.noise.sample_rate
    tail = first.summary.samples_run // 5 * 2
    seg = min(4096, tail // 4)
    freqs, p_d = analysis.welch_psd(first.disturbance[-tail:], fs,
                                    segment_length=seg)
    header = ["frequency_hz", "disturbance_db"]
    cols = [freqs, 10.0 * np.log10(np.maximum(p_d, 1e-300))]
    for name, result in results.items():
        _, p_e = analysis.welch_psd(result.errors[-tail:], fs,
                                    segment_length=seg)
        header.append(f"{name}_db")
        cols.append(10.0 * np.log10(np.maximum(p_e, 1e-300)))
    return header, cols


def cmd_run(args) -> int:
    base = _load_scenario(args)
    algorithms = _select_algorithms(args)
    out_dir = Path(args.output_dir)
    preset_name = args.preset if args.preset else base.name

    results: dict[str, harness.RunResult] = {}
    comparison: dict = {
        "preset": preset_name,
        "notes": presets.PRESET_NOTES.get(preset_name, ""),
        "scenario": harness.scenario_to_dict(base),
        "algorithms": {},
    }
    if base.n_taps <= 64:
        try:
            comparison["predictions"] = _predictions(base)
        except (DataError, SingularMatrixError) as err:
            comparison["predictions"] = {"error": str(err)}
    else:
        comparison["predictions"] = {
            "skipped": "long filter; run `ancsim analyze` for bounds"}

    any_diverged = False
    for algo_name in algorithms:
        config = _scenario_for_algorithm(base, algo_name)
        result = harness.run_scenario(config)
        results[algo_name] = result
        paths = harness.persist(result, out_dir)
        entry = {
            "status": result.summary.status,
            "final_weights": result.summary.final_weights[:base.csv_weight_cap],
            "steady_state_error_power": result.summary.steady_state_error_power,
            "convergence_samples": result.summary.convergence_samples,
            "violations": result.summary.violations,
            "final_mu1": result.summary.final_mu1,
            "effective_varsigma": result.summary.effective_varsigma,
            "trajectory_file": paths["trajectory"].name,
            "summary_file": paths["summary"].name,
            "phases": [vars(p) for p in result.summary.phases],
        }
        if result.summary.status == "diverged":
            any_diverged = True
            print(f"{algo_name}: DIVERGED after "
                  f"{result.summary.samples_run} samples", file=sys.stderr)
        if (base.saturation is not None
                and result.summary.status == "completed"
                and base.noise.band is not None):
            entry["band_metrics"] = _band_metrics(result)
        comparison["algorithms"][algo_name] = entry

    _write_boundaries(base, out_dir, preset_name, comparison)

    completed = {n: r for n, r in results.items()
                 if r.summary.status == "completed"}
    if base.saturation is not None and base.noise.band is not None and completed:
        header, cols = _psd_table(completed)
        _write_csv(out_dir / f"{preset_name}.psd.csv", header, cols)
        comparison["psd_file"] = f"{preset_name}.psd.csv"

    (out_dir / f"{preset_name}.comparison.json").write_text(
        json.dumps(comparison, indent=2, sort_keys=True) + "\n")
    for name, result in results.items():
        print(f"{name}: {result.summary.status}, final weights "
              f"{np.round(result.summary.final_weights[:4], 4).tolist()}, "
              f"steady error power "
              f"{result.summary.steady_state_error_power:.4g}")
    return EXIT_DIVERGED if any_diverged else EXIT_OK


def _write_boundaries(base, out_dir: Path, preset_name: str,
                      comparison: dict) -> None:
    if base.n_taps != 2:
        return
    out_dir.mkdir(parents=True, exist_ok=True)
    r_x = harness.theoretical_r_x(base.noise, 2)
    pts = harness.boundary_points(r_x, base.algorithm.rho_sq)
    (out_dir / f"{preset_name}.boundary.csv").write_bytes(
        harness.boundary_csv_bytes(pts))
    comparison["boundary_file"] = f"{preset_name}.boundary.csv"
    for k, change in enumerate(base.path_changes, start=2):
        if change.noise_variance is None:
            continue
        noise2 = copy.deepcopy(base.noise)
        noise2.variance = change.noise_variance
        pts2 = harness.boundary_points(harness.theoretical_r_x(noise2, 2),
                                       base.algorithm.rho_sq)
        fname = f"{preset_name}.boundary{k}.csv"
        (out_dir / fname).write_bytes(harness.boundary_csv_bytes(pts2))
        comparison[f"boundary{k}_file"] = fname


def _write_csv(path: Path, header: list[str], cols: list[np.ndarray]) -> None:
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in zip(*cols):
            fh.write(",".join(harness.FLOAT_FMT % v for v in row) + "\n")


def cmd_analyze(args) -> int:
    config = _load_scenario(args)
    report = _predictions(config)
    algo = config.algorithm
    flags = []
    if not report["mu1_within_bound"]:
        flags.append("unstable-configuration")
    if report["varsigma_mu1_ok"] is False:
        flags.append("unstable-configuration-branch2")
    report["flags"] = flags
    report["configured_mu1"] = algo.mu1_initial
    report["kappa"] = algo.kappa

    out_dir = Path(args.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    out_path = out_dir / f"{config.name}.analysis.json"
    out_path.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")

    print(f"lambda_max = {report['lambda_max']:.6g}")
    print(f"lambda_min = {report['lambda_min']:.6g}")
    print(f"mu1 bound (1+kappa)/lambda_max = {report['mu1_bound']:.6g}")
    print(f"varsigma*mu1 bound 1/lambda_max = {report['mu2_bound']:.6g}")
    print(f"w_opt = {np.round(report['w_opt'][:8], 4).tolist()}")
    if report["w_subopt_derived"] is not None:
        print(f"w_subopt (derived varsigma) = "
              f"{np.round(report['w_subopt_derived'][:8], 4).tolist()}")
    if report["w_subopt_fixed"] is not None:
        print(f"w_subopt (configured varsigma) = "
              f"{np.round(report['w_subopt_fixed'][:8], 4).tolist()}")
    tau = analysis.time_constant(algo.mu1_initial, algo.kappa,
                                 report["lambda_min"]) \
        if report["lambda_min"] > 0 else float("inf")
    print(f"predicted slowest time constant = {tau:.6g} samples")
    status = "OK" if not flags else ",".join(flags)
    print(f"configured mu1 = {algo.mu1_initial:.3g} -> {status}")
    print(f"report written to {out_path}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    base = _load_scenario(args)
    try:
        values = [float(v) for v in args.values.split(",") if v.strip()]
    except ValueError:
        raise ConfigError("--values expects comma-separated numbers") from None
    if not values:
        raise ConfigError("--values selected nothing")
    out_dir = Path(args.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    rows = []
    for value in values:
        config = _scenario_for_algorithm(base, args.algorithm)
        config.name = f"{base.name}.sweep"
        setattr(config.algorithm, args.parameter, value)
        config.algorithm.__post_init__()
        result = harness.run_scenario(config)
        rows.append((value,
                     result.summary.steady_state_error_power,
                     result.summary.convergence_samples,
                     result.summary.violations,
                     result.summary.status))
    path = out_dir / f"{base.name}.sweep.{args.parameter}.csv"
    with open(path, "w") as fh:
        fh.write(f"{args.parameter},steady_state_error_power,"
                 "convergence_samples,violations,status\n")
        for value, power, conv, violations, status in rows:
            fh.write(f"{harness.FLOAT_FMT % value},{harness.FLOAT_FMT % power},"
                     f"{conv},{violations},{status}\n")
    for row in rows:
        print(f"{args.parameter}={row[0]:g}: steady error power {row[1]:.4g}, "
              f"convergence {row[2]}, violations {row[3]}, {row[4]}")
    print(f"sweep table written to {path}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
