"""Batch command-line front-end.

Subcommands: calibrate, simulate, optimize, sweep, benchmark.  Each reads a
JSON config, writes delimited payloads plus a JSON summary and a manifest
into the output directory, and renders matplotlib figures alongside them.

Exit codes: 0 success, 1 config error, 2 calibration error, 3 optimizer
stalled, 4 integration failure.
"""

import argparse
import sys
from pathlib import Path

from . import cqed, reports
from .bfgs import OptimizerConfig
from .config import MHZ, RunConfig, parse_config, serialize_config
from .errors import (
    CalibrationError,
    ConfigError,
    DivergenceError,
    IntegrationError,
)

UNITS_TABLE = """\
config units (all frequencies as cycles, f = omega / 2pi):
  chi_mhz, kappa_mhz, bandwidth_mhz, detuning_mhz   MHz
  kerr_khz                                          kHz
  horizon_ns, pixel_dt_ns, subpixel_dt_ns           ns
  beta_over_T                                       dimensionless (beta * T)
  p_norm                                            drive power / one-photon power
"""

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_CALIBRATION = 2
EXIT_STALLED = 3
EXIT_INTEGRATION = 4

REFERENCE_ONE_PHOTON_MHZ = 1.595  # published calibration point for comparison


def _add_common(sub):
    sub.add_argument("--config", required=True, help="JSON config file")
    sub.add_argument("--out", required=True, help="output directory")
    sub.add_argument("--seed", type=int, default=None, help="override the config seed")
    sub.add_argument("--jobs", type=int, default=1, help="parallel workers for sweeps")
    sub.add_argument("--quick", action="store_true",
                     help="scaled-down run for CI (fock_dim=20, subpixel 0.5 ns, 50 iters)")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="rkgrape",
        description="Open-system pulse optimization without Liouville-space exponentials.",
        epilog=UNITS_TABLE,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    subs = parser.add_subparsers(dest="command", required=True)
    for name, helptext in [
        ("calibrate", "find the one-photon drive amplitude"),
        ("simulate", "passive reset time series (no optimizer)"),
        ("optimize", "run the reset mode given in the config"),
        ("sweep", "speed-limit study over drive power and horizon"),
        ("benchmark", "expm-vs-RK propagation scaling table"),
    ]:
        _add_common(subs.add_parser(name, help=helptext))
    return parser


def _load(args, required):
    cfg = parse_config(args.config, required=required)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.quick:
        cfg = cfg.quick()
    return cfg


def _optimizer_config(cfg: RunConfig) -> OptimizerConfig:
    return OptimizerConfig(max_iters=cfg.max_iters)


def cmd_calibrate(args) -> int:
    from .config import MODEL_KEYS

    cfg = _load(args, required=MODEL_KEYS)
    out = Path(args.out)
    reports.write_manifest(out, "calibrate", args.config, cfg.seed)
    model = cfg.to_model()
    try:
        analytic = cqed.calibrate_one_photon(model, "analytic")
        numeric = cqed.calibrate_one_photon(model, "numeric")
    except CalibrationError as exc:
        print(f"calibration failed: {exc}", file=sys.stderr)
        return EXIT_CALIBRATION
    eps_num_mhz = numeric.eps_one_photon / MHZ
    payload = {
        "eps_analytic_mhz": analytic.eps_one_photon / MHZ,
        "eps_numeric_mhz": eps_num_mhz,
        "numeric_residual": numeric.residual,
        "agreement_numeric_vs_analytic": abs(
            numeric.eps_one_photon / analytic.eps_one_photon - 1.0
        ),
        "reference_mhz": REFERENCE_ONE_PHOTON_MHZ,
        "deviation_vs_reference": abs(eps_num_mhz / REFERENCE_ONE_PHOTON_MHZ - 1.0),
    }
    reports.write_json(out / "calibration.json", payload)
    print(f"one-photon amplitude: analytic {payload['eps_analytic_mhz']:.4f} MHz, "
          f"numeric {eps_num_mhz:.4f} MHz")
    return EXIT_OK


def _write_reset_outputs(report, out: Path):
    reports.write_photon_csv(out / "photon_vs_time.csv", report.times,
                             report.photons_ground, report.photons_excited)
    if report.mode != "passive":
        reports.write_pulse_csv(out / "pulse.csv", report.scenario.pixel_dt,
                                report.controls.values, prefix="u")
        reports.write_pulse_csv(out / "pulse_filtered.csv", report.scenario.subpixel_dt,
                                report.filtered, prefix="s")
    if report.history:
        reports.write_history_csv(out / "history.csv", report.history)
    reports.write_json(out / "report.json", reports.reset_report_summary(report))
    from . import plots

    plots.render_reset_figures(report, out)


def _run_reset_command(args, forced_mode=None) -> int:
    cfg = _load(args, required=("chi_mhz", "kerr_khz", "kappa_mhz", "p_norm", "horizon_ns"))
    out = Path(args.out)
    mode = forced_mode or cfg.mode
    reports.write_manifest(out, "simulate" if forced_mode else "optimize",
                           args.config, cfg.seed, extra={"mode": mode})
    scenario = cfg.to_scenario()
    try:
        report = cqed.run_reset(scenario, mode, _optimizer_config(cfg))
    except (IntegrationError, DivergenceError) as exc:
        print(f"integration failure: {exc}", file=sys.stderr)
        return EXIT_INTEGRATION
    _write_reset_outputs(report, out)
    print(f"mode={mode} final photons: ground {report.final_photon['ground']:.3e}, "
          f"excited {report.final_photon['excited']:.3e}"
          + (" [stalled]" if report.stalled else ""))
    return EXIT_STALLED if report.stalled else EXIT_OK


def cmd_simulate(args) -> int:
    return _run_reset_command(args, forced_mode="passive")


def cmd_optimize(args) -> int:
    return _run_reset_command(args)


def cmd_sweep(args) -> int:
    cfg = _load(args, required=("chi_mhz", "kerr_khz", "kappa_mhz",
                                "p_norm_list", "horizon_list_ns"))
    out = Path(args.out)
    reports.write_manifest(out, "sweep", args.config, cfg.seed)
    model = cfg.to_model()
    kwargs = {
        "pixel_dt": cfg.pixel_dt_ns,
        "subpixel_dt": cfg.subpixel_dt_ns,
        "bandwidth_3db": cfg.bandwidth_mhz * MHZ,
        "quadratures": cfg.quadratures,
        "seed": cfg.seed,
        "integrator": cfg.to_integrator(),
    }
    try:
        result = cqed.speed_limit_sweep(model, list(cfg.p_norm_list),
                                        list(cfg.horizon_list_ns),
                                        scenario_kwargs=kwargs,
                                        optimizer_cfg=_optimizer_config(cfg),
                                        jobs=args.jobs)
    except (IntegrationError, DivergenceError) as exc:
        print(f"integration failure: {exc}", file=sys.stderr)
        return EXIT_INTEGRATION
    reports.write_sweep_csv(out / "sweep.csv", result.rows)
    reports.write_json(out / "speed_limit.json", {
        "speed_limits_ns": {str(k): v for k, v in result.speed_limits.items()},
        "alpha": result.alpha,
        "alpha_stderr": result.alpha_stderr,
        "notes": result.notes,
    })
    from . import plots

    plots.render_sweep_figure(result, out)
    alpha = "n/a" if result.alpha is None else f"{result.alpha:.3f}"
    print(f"speed-limit exponent: {alpha}; limits: {result.speed_limits}")
    return EXIT_OK


def cmd_benchmark(args) -> int:
    from .liouville import benchmark_scaling

    cfg = _load(args, required=())
    out = Path(args.out)
    reports.write_manifest(out, "benchmark", args.config, cfg.seed)
    result = benchmark_scaling(list(cfg.dims), n_pixels=cfg.n_pixels,
                               repetitions=cfg.repetitions)
    reports.write_benchmark_csv(out / "benchmark.csv", result["rows"])
    reports.write_json(out / "benchmark.json", {
        "slope_expm": result["slope_expm"],
        "slope_rk": result["slope_rk"],
    })
    from . import plots

    plots.render_benchmark_figure(result, out)
    print(f"fitted slopes: expm {result['slope_expm']:.2f}, rk {result['slope_rk']:.2f}")
    return EXIT_OK


_COMMANDS = {
    "calibrate": cmd_calibrate,
    "simulate": cmd_simulate,
    "optimize": cmd_optimize,
    "sweep": cmd_sweep,
    "benchmark": cmd_benchmark,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
