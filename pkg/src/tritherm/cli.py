"""Batch front-end: simulate | estimate | montecarlo | sweep | calibrate.

Every command reads a strict JSON config (where it needs one), derives all
randomness from the master seed via named substreams, and writes plot-ready
CSV/JSON artifacts into one output directory.  Output location precedence:
--out flag, then TRITHERM_OUTPUT_DIR, then the config's output_dir, then
./runs.  Exit codes: 0 success, 1 runtime failure, 2 usage/config error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import os
import sys
from pathlib import Path
from typing import Dict, Optional

import numpy as np

from .config import ConfigError, ProtocolConfig, RunConfig, load_config, stream_seed
from .errorlab import (
    MonteCarloSpec,
    repeated_measurement_stats,
    slope_bias_study,
    temperature_discrepancy,
)
from .hilbert import LevelEnergies, diagonalize_transmon
from .pipeline import calibrate_transitions, estimate_from_result, run_protocol
from .pulses import SEQUENCE_LABELS
from .readout import ReadoutConfig, read_trace_csv, window, write_trace_csv
from .thermometry import EstimateReport, SequenceResponses, estimate_temperature

OUTPUT_ENV_VAR = "TRITHERM_OUTPUT_DIR"
CONSISTENCY_ALARM = 0.05
TEMPERATURE_SPREAD_ALARM = 0.25


def _resolve_output_dir(args, config: Optional[RunConfig]) -> Path:
    if getattr(args, "out", None):
        path = args.out
    elif os.environ.get(OUTPUT_ENV_VAR):
        path = os.environ[OUTPUT_ENV_VAR]
    elif config is not None and config.output_dir:
        path = config.output_dir
    else:
        path = "runs"
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_run_config(args) -> RunConfig:
    if not getattr(args, "config", None):
        raise ConfigError("this command needs --config pointing at a run config")
    config = load_config(args.config)
    if getattr(args, "seed", None) is not None:
        config = dataclasses.replace(config, seed=args.seed)
    if getattr(args, "quadratures", None):
        config = dataclasses.replace(
            config,
            protocol=dataclasses.replace(config.protocol, quadratures=args.quadratures),
        )
    return config


def _levels_from_args(args) -> LevelEnergies:
    """Levels for estimation-only commands: from a config's transmon when
    given, else from explicit --f-ge/--f-gf anchors."""
    if getattr(args, "config", None):
        config = load_config(args.config)
        levels, _ = diagonalize_transmon(config.system.transmon)
        return levels
    if args.f_ge is None or args.f_gf is None:
        raise ConfigError("need either --config or both --f-ge and --f-gf")
    try:
        return LevelEnergies.from_frequencies(args.f_ge, args.f_gf)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _print_report(report: EstimateReport) -> None:
    for est in report.estimates:
        lo, hi = est.t_ci95_mk
        print(f"  T_{est.source_coefficient} = {est.t_mk:7.2f} mK"
              f"  (lambda = {est.slope.value:.6f}, CI [{lo:.2f}, {hi:.2f}] mK)")
    print(f"  consistency |C - A*B|/C = {report.consistency:.3e}")


def _alarm_if_inconsistent(report: EstimateReport) -> bool:
    """Loud sanity check on the three estimates.

    Mislabeled traces can leave C = A*B intact (the swap maps every pair
    slope to a readout-geometry ratio and those obey the same identity), so
    the slope-level check is backed by cross-coefficient temperature
    agreement: geometry ratios invert to wildly different temperatures.
    """
    alarm = report.consistency > CONSISTENCY_ALARM
    if alarm:
        print(
            f"WARNING: consistency |C - A*B|/C = {report.consistency:.3f} exceeds "
            f"{CONSISTENCY_ALARM}; difference clouds are not collinear (swapped or "
            f"contaminated traces show up as ellipses)",
            file=sys.stderr,
        )
    ts = [est.t_mk for est in report.estimates]
    spread = (max(ts) - min(ts)) / (sum(ts) / len(ts))
    if spread > TEMPERATURE_SPREAD_ALARM:
        alarm = True
        print(
            f"WARNING: coefficient thermometers disagree: T_A/T_B/T_C = "
            f"{ts[0]:.1f}/{ts[1]:.1f}/{ts[2]:.1f} mK (relative spread "
            f"{spread:.2f} > {TEMPERATURE_SPREAD_ALARM}); check trace labels "
            f"and fit intercepts",
            file=sys.stderr,
        )
    return alarm


def cmd_simulate(args) -> int:
    config = _load_run_config(args)
    out = _resolve_output_dir(args, config)
    result = run_protocol(config, noiseless=args.noiseless)
    _write_json(out / "config.json", config.as_dict())
    for label in SEQUENCE_LABELS:
        write_trace_csv(out / f"{label}.csv", [result.traces[label]])
    write_trace_csv(out / "basis.csv", list(result.basis_traces.values()))
    _write_json(out / "calibration.json",
                {t: r.as_dict() for t, r in result.calibrations.items()})
    _write_json(out / "populations.json", {
        "steady": dataclasses.asdict(result.steady_populations),
        "prepared": {k: dataclasses.asdict(v) for k, v in result.prepared_populations.items()},
        "timings_s": result.timings_s,
        "norm_factor": result.norm_factor,
    })

    # estimate from the serialized traces, so a later `estimate` run on these
    # files reproduces this report bit for bit
    reloaded = {}
    for label in SEQUENCE_LABELS:
        reloaded.update(read_trace_csv(out / f"{label}.csv"))
    responses = SequenceResponses.from_dict(
        {lab: window(tr, config.readout) for lab, tr in reloaded.items()}
    )
    report = estimate_temperature(
        responses, result.levels,
        delta=config.protocol.delta,
        quadratures=config.protocol.quadratures,
        n_bootstrap=config.protocol.n_bootstrap,
        seed=stream_seed(config.seed, "bootstrap"),
        aggregation=config.protocol.aggregation,
        clamp=config.protocol.clamp_out_of_range,
    )
    payload = report.as_dict()
    payload["consistency_alarm"] = _alarm_if_inconsistent(report)
    payload["bath_t_mk"] = config.dissipation.bath_t_mk
    payload["noiseless"] = not result.noisy
    _write_json(out / "estimate.json", payload)
    print(f"simulate: bath {config.dissipation.bath_t_mk} mK "
          f"({'noiseless' if not result.noisy else f'noise {config.readout.noise_sigma}'}) "
          f"-> {out}")
    _print_report(report)
    return 0


def _collect_traces(path: Path) -> Dict:
    if not path.exists():
        raise ConfigError(f"trace path not found: {path}")
    files = sorted(path.glob("*.csv")) if path.is_dir() else [path]
    if not files:
        raise ConfigError(f"no CSV files under {path}")
    traces: Dict = {}
    for f in files:
        for label, trace in read_trace_csv(f).items():
            if label in traces and label in SEQUENCE_LABELS:
                raise ConfigError(f"duplicate trace label {label!r} (again in {f.name})")
            traces[label] = trace
    missing = [lab for lab in SEQUENCE_LABELS if lab not in traces]
    if missing:
        raise ConfigError(f"missing sequence trace(s) {', '.join(missing)} under {path}")
    return traces


def cmd_estimate(args) -> int:
    levels = _levels_from_args(args)
    traces = _collect_traces(Path(args.traces))
    config = load_config(args.config) if args.config else None
    if config is not None:
        readout = config.readout
        proto = config.protocol
    else:
        readout = ReadoutConfig(window_start_ns=args.window_start,
                                window_end_ns=args.window_end,
                                probe_duration_ns=max(args.window_end, 2000.0))
        proto = ProtocolConfig()
    try:
        responses = SequenceResponses.from_dict(
            {lab: window(traces[lab], readout) for lab in SEQUENCE_LABELS}
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    # flags override the config; omitted flags inherit it so a report built
    # from reloaded traces matches the in-process one exactly
    seed = args.seed if args.seed is not None else (config.seed if config else 0)
    report = estimate_temperature(
        responses, levels,
        delta=args.delta if args.delta is not None else proto.delta,
        quadratures=args.quadratures or proto.quadratures,
        n_bootstrap=args.bootstrap if args.bootstrap is not None else proto.n_bootstrap,
        seed=stream_seed(seed, "bootstrap"),
        clamp=args.clamp or proto.clamp_out_of_range,
    )
    out = _resolve_output_dir(args, None)
    payload = report.as_dict()
    payload["consistency_alarm"] = _alarm_if_inconsistent(report)
    _write_json(out / "estimate.json", payload)
    print(f"estimate: {args.traces} -> {out / 'estimate.json'}")
    _print_report(report)
    return 0


def cmd_montecarlo(args) -> int:
    config = load_config(args.config) if args.config else None
    if config is not None:
        levels, _ = diagonalize_transmon(config.system.transmon)
    else:
        levels = (args.f_ge or 6.74, args.f_gf or 13.14)
    seed = args.seed if args.seed is not None else (config.seed if config else 0)
    out = _resolve_output_dir(args, config)

    spec = MonteCarloSpec(
        true_slope=args.true_slope,
        n_experiments=args.experiments,
        x_span=args.span,
        noise_sigma=args.sigma,
        n_points=args.points,
        seed=stream_seed(seed, "montecarlo"),
        abscissa=args.abscissa,
        fit_method=args.fit_method,
    )
    grid = np.linspace(args.lambda_min, args.lambda_max, args.lambda_points)
    report = slope_bias_study(spec, grid)
    with open(out / "bias_curve.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["lambda", "mean_fit", "ci_low", "ci_high"])
        for row in zip(report.lambda_grid, report.mean_fit, report.ci_low, report.ci_high):
            w.writerow([f"{v:.12g}" for v in row])

    curves = temperature_discrepancy(report, levels)
    with open(out / "discrepancy.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["T_mK", "dT_A_mK", "dT_B_mK", "dT_C_mK"])
        for row in zip(curves.t_mk, curves.dt_a_mk, curves.dt_b_mk, curves.dt_c_mk):
            w.writerow([f"{v:.12g}" for v in row])

    stats = {
        "spec": dataclasses.asdict(spec),
        "n_failures": report.n_failures,
        "bias_at_true_slope": float(report.fitted_slope_at(spec.true_slope) - spec.true_slope)
        if grid[0] <= spec.true_slope <= grid[-1] else None,
        "n_skipped_inversions": curves.n_skipped,
    }

    if args.repeats > 0:
        if config is None:
            raise ConfigError("--repeats needs --config (full pipeline simulation)")
        result = run_protocol(config, noiseless=True)
        rep = repeated_measurement_stats(
            result.noiseless_responses, result.levels,
            n_runs=args.repeats,
            noise_sigma=config.readout.noise_sigma,
            seed=stream_seed(seed, "montecarlo", 1),
            quadratures=config.protocol.quadratures,
            delta=config.protocol.delta,
            clamp=config.protocol.clamp_out_of_range,
        )
        stats["repeated"] = rep.as_dict()
        with open(out / "repeated_cdf.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["coefficient", "T_mK", "cdf"])
            for c in ("A", "B", "C"):
                vals, levels_cdf = rep.cdf(c)
                for v, p in zip(vals, levels_cdf):
                    w.writerow([c, f"{v:.12g}", f"{p:.12g}"])

    _write_json(out / "mc_stats.json", stats)
    print(f"montecarlo: {len(grid)} slope points x {spec.n_experiments} experiments -> {out}")
    if stats["bias_at_true_slope"] is not None:
        print(f"  mean bias at lambda={spec.true_slope}: {stats['bias_at_true_slope']:+.3e}")
    return 0


def _parse_list(text: str) -> list:
    try:
        return [float(tok) for tok in text.split(",") if tok.strip()]
    except ValueError as exc:
        raise ConfigError(f"expected a comma-separated number list, got {text!r}") from exc


def cmd_sweep(args) -> int:
    config = _load_run_config(args)
    out = _resolve_output_dir(args, config)
    if bool(args.bath_mk) == bool(args.flux):
        raise ConfigError("sweep needs exactly one of --bath-mk or --flux")
    sweep_bath = bool(args.bath_mk)
    points = _parse_list(args.bath_mk if sweep_bath else args.flux)
    if not points:
        raise ConfigError("sweep list is empty")

    calibrations = None
    rows = []
    for i, value in enumerate(points):
        point_seed = stream_seed(config.seed, "noise", 100 + i)
        row = {"control": value}
        # bad points (negative bath, flux past the sweet spot) are recorded
        # and skipped, never fatal for the rest of the sweep
        try:
            if sweep_bath:
                cfg_i = dataclasses.replace(
                    config,
                    dissipation=dataclasses.replace(config.dissipation, bath_t_mk=value),
                    seed=point_seed,
                )
            else:
                cfg_i = dataclasses.replace(
                    config,
                    system=dataclasses.replace(
                        config.system,
                        transmon=dataclasses.replace(
                            config.system.transmon, flux_quantum_fraction=value
                        ),
                    ),
                    seed=point_seed,
                )
            if sweep_bath:
                if calibrations is None:
                    calibrations = calibrate_transitions(
                        cfg_i.system.build_operators(), cfg_i.protocol, cfg_i.dissipation
                    )
                result = run_protocol(cfg_i, noiseless=args.noiseless,
                                      calibrations=calibrations)
            else:
                result = run_protocol(cfg_i, noiseless=args.noiseless)
            report = estimate_from_result(result)
            for est in report.estimates:
                c = est.source_coefficient
                row[f"T_{c}_mK"] = est.t_mk
                row[f"T_{c}_ci_low_mK"] = est.t_ci95_mk[0]
                row[f"T_{c}_ci_high_mK"] = est.t_ci95_mk[1]
            row["consistency"] = report.consistency
            row["error"] = ""
            print(f"  point {value}: T_A={row['T_A_mK']:.2f} "
                  f"T_B={row['T_B_mK']:.2f} T_C={row['T_C_mK']:.2f} mK")
        except Exception as exc:
            row["error"] = f"{type(exc).__name__}: {exc}"
            print(f"  point {value}: FAILED ({row['error']})", file=sys.stderr)
        rows.append(row)

    columns = ["control"]
    for c in ("A", "B", "C"):
        columns += [f"T_{c}_mK", f"T_{c}_ci_low_mK", f"T_{c}_ci_high_mK"]
    columns += ["consistency", "error"]
    with open(out / "sweep.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(columns)
        for row in rows:
            w.writerow([
                f"{row[k]:.12g}" if isinstance(row.get(k), float) else row.get(k, "")
                for k in columns
            ])
    n_failed = sum(1 for r in rows if r["error"])
    print(f"sweep: {len(rows)} points ({n_failed} failed) -> {out / 'sweep.csv'}")
    return 0


def cmd_calibrate(args) -> int:
    config = _load_run_config(args)
    out = _resolve_output_dir(args, config)
    protocol = config.protocol
    if args.duration is not None:
        protocol = dataclasses.replace(protocol, pulse_duration_ns=args.duration)
    reports = calibrate_transitions(config.system.build_operators(), protocol,
                                    config.dissipation)
    _write_json(out / "calibration.json", {t: r.as_dict() for t, r in reports.items()})
    for t, r in reports.items():
        print(f"  pi_{t}: carrier {r.carrier_ghz:.6f} GHz, amplitude {r.amplitude:.6e}, "
              f"transfer {r.transfer_probability:.6f}")
    print(f"calibrate: duration {protocol.pulse_duration_ns} ns -> {out / 'calibration.json'}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tritherm",
        description="Three-level transmon thermometry: simulation and estimation toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_quadratures=True):
        p.add_argument("--config", help="path to a JSON run config")
        p.add_argument("--seed", type=int, default=None, help="master seed override")
        p.add_argument("--out", help="output directory (overrides env and config)")
        if needs_quadratures:
            p.add_argument("--quadratures", choices=["I", "IQ"], default=None,
                           help="fit I only or both quadratures")

    p_sim = sub.add_parser("simulate", help="run the full protocol and estimate T")
    common(p_sim)
    p_sim.add_argument("--noiseless", action="store_true",
                       help="skip measurement noise")
    p_sim.set_defaults(func=cmd_simulate)

    p_est = sub.add_parser("estimate", help="estimate T from existing trace files")
    common(p_est)
    p_est.add_argument("--traces", required=True,
                       help="directory with x0..y2 CSV traces (or one combined CSV)")
    p_est.add_argument("--f-ge", type=float, default=None, help="f_ge in GHz")
    p_est.add_argument("--f-gf", type=float, default=None, help="f_gf in GHz")
    p_est.add_argument("--window-start", type=float, default=100.0)
    p_est.add_argument("--window-end", type=float, default=450.0)
    p_est.add_argument("--delta", type=float, default=None,
                       help="Deming noise variance ratio (default: config or 1.0)")
    p_est.add_argument("--bootstrap", type=int, default=None,
                       help="bootstrap resamples for slope CIs (default: config or 0)")
    p_est.add_argument("--clamp", action="store_true",
                       help="clamp out-of-range slopes to the inversion bracket")
    p_est.set_defaults(func=cmd_estimate)

    p_mc = sub.add_parser("montecarlo", help="slope-bias study and repeated-run stats")
    common(p_mc, needs_quadratures=False)
    p_mc.add_argument("--true-slope", type=float, default=0.8834)
    p_mc.add_argument("--experiments", type=int, default=1000)
    p_mc.add_argument("--sigma", type=float, default=0.002)
    p_mc.add_argument("--span", type=float, default=0.042)
    p_mc.add_argument("--points", type=int, default=700)
    p_mc.add_argument("--abscissa", choices=["sinusoid", "uniform"], default="sinusoid")
    p_mc.add_argument("--fit-method", choices=["least_squares", "deming"],
                      default="least_squares")
    p_mc.add_argument("--lambda-min", type=float, default=0.01)
    p_mc.add_argument("--lambda-max", type=float, default=1.0)
    p_mc.add_argument("--lambda-points", type=int, default=25)
    p_mc.add_argument("--repeats", type=int, default=0,
                      help="end-to-end noisy re-estimates (needs --config)")
    p_mc.add_argument("--f-ge", type=float, default=None)
    p_mc.add_argument("--f-gf", type=float, default=None)
    p_mc.set_defaults(func=cmd_montecarlo)

    p_sweep = sub.add_parser("sweep", help="bath-temperature or flux sweep")
    common(p_sweep)
    p_sweep.add_argument("--bath-mk", help="comma-separated bath temperatures in mK")
    p_sweep.add_argument("--flux", help="comma-separated flux values (Phi/Phi_0)")
    p_sweep.add_argument("--noiseless", action="store_true")
    p_sweep.set_defaults(func=cmd_sweep)

    p_cal = sub.add_parser("calibrate", help="calibrate pi_ge and pi_ef only")
    common(p_cal, needs_quadratures=False)
    p_cal.add_argument("--duration", type=float, default=None,
                       help="pulse duration override in ns")
    p_cal.set_defaults(func=cmd_calibrate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
