"""Command-line pipeline: gen, clean, simulate, calibrate, analyze, validate.

Exit codes: 0 success, 1 input or parse error, 2 calibration did not converge.
Every command writes ``run_manifest.json`` next to its outputs.
"""
from __future__ import annotations

import argparse
import json
import logging
import re
import sys
from dataclasses import fields
from pathlib import Path

import numpy as np

from . import __version__, spectral
from .calibration import THETA_NAMES, CalibrationConfig, RmseObjective, calibrate
from .queue_sde import (SchemaError, SdeParams, SimConfig, SimulationError, VolParams, draw_noise,
                        load_params, params_from_dict, save_params, simulate)
from .seasonal import DAY, SeasonalTrend, diurnal_trend, extract_trend
from .timeseries import CleaningConfig, QueueSeries, aggregate, clean, load_csv, write_csv
from .validation import build_report

logger = logging.getLogger("queuesde")

EXIT_OK, EXIT_INPUT, EXIT_NOT_CONVERGED = 0, 1, 2

# Parameter set used when ``gen``/``simulate`` get no ``--params`` file.
REFERENCE_PARAMS = {"mu": 0.3, "hurst": 0.7, "mu_amp": 12.0, "mu_base": 15.0, "y0": 15.0,
                    "kappa": 0.1, "gamma_bar": 0.2, "sigma_gamma": 0.05, "gamma0": 0.1}

_UNITS = {"s": 1.0, "m": 60.0, "h": 3600.0, "d": DAY}


class InputError(Exception):
    """Bad command-line input; reported with exit code 1."""


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors, which would collide with the non-convergence code
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def duration(text: str) -> float:
    """Parse ``"7d"``, ``"12h"``, ``"30m"``, ``"90s"`` or plain seconds."""
    m = re.fullmatch(r"\s*([0-9]*\.?[0-9]+(?:[eE][-+]?[0-9]+)?)\s*([smhd]?)\s*", text)
    if not m:
        raise argparse.ArgumentTypeError(f"invalid duration {text!r}")
    val = float(m.group(1)) * _UNITS.get(m.group(2) or "s")
    if val <= 0:
        raise argparse.ArgumentTypeError("duration must be positive")
    return val


def _positive(text: str) -> float:
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text}")
    return v


def _seed(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


class Run:
    """Collects inputs and outputs for the manifest."""

    def __init__(self, args):
        self.args = args
        self.out = Path(args.out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.inputs: list[str] = []
        self.outputs: list[str] = []

    def input(self, path) -> Path:
        p = Path(path)
        if not p.is_file():
            raise InputError(f"input file not found: {path}")
        self.inputs.append(str(path))
        return p

    def output(self, name: str) -> Path:
        self.outputs.append(name)
        return self.out / name

    def manifest(self, command: str, options: dict) -> None:
        doc = {"command": command, "inputs": self.inputs, "params_file": self.args.params,
               "seed": self.args.seed, "outputs": sorted(self.outputs), "options": options,
               "version": __version__}
        (self.out / "run_manifest.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _params(run: Run) -> tuple[SdeParams, VolParams]:
    if run.args.params is None:
        return params_from_dict(REFERENCE_PARAMS)
    return load_params(run.input(run.args.params))


def _trend(run: Run, dt: float) -> SeasonalTrend:
    if getattr(run.args, "trend", None):
        path = run.input(run.args.trend)
        try:
            return SeasonalTrend.load(path)
        except (KeyError, TypeError, json.JSONDecodeError) as exc:
            raise InputError(f"{path}: not a trend document ({exc})") from exc
    return diurnal_trend(dt=dt)


def _load_series(run: Run, path) -> QueueSeries:
    series = load_csv(run.input(path))
    if run.args.dt is not None and len(series) > 1 and abs(series.dt - run.args.dt) > 1e-9 * run.args.dt:
        raise InputError(f"{path}: sampled every {series.dt:g} s, but --dt {run.args.dt:g} was given")
    return series


def _sim_config(args, horizon: float) -> SimConfig:
    dt = args.dt if args.dt is not None else 120.0
    if horizon < dt:
        raise InputError(f"--horizon ({horizon:g} s) must be at least --dt ({dt:g} s)")
    return SimConfig(dt=dt, horizon=horizon, seed=args.seed, replicates=getattr(args, "replicates", 1),
                     substeps=args.substeps, time_unit=args.time_unit, vol_diffusion=args.vol_diffusion)


def cmd_gen(args) -> int:
    run = Run(args)
    cfg = _sim_config(args, args.horizon)
    params, vol = _params(run)
    trend = _trend(run, cfg.dt)
    res = simulate(params, vol, trend, cfg)
    write_csv(res.queue, run.output("series.csv"))
    trend.save(run.output("trend.json"))
    save_params(params, vol, run.output("params.json"))
    run.manifest("gen", {"horizon": cfg.horizon, "dt": cfg.dt, "substeps": cfg.substeps,
                         "time_unit": cfg.time_unit, "vol_diffusion": cfg.vol_diffusion})
    logger.info("wrote %d samples to %s", len(res.queue), run.out / "series.csv")
    return EXIT_OK


def cmd_simulate(args) -> int:
    run = Run(args)
    cfg = _sim_config(args, args.horizon)
    params, vol = _params(run)
    trend = _trend(run, cfg.dt)
    t = np.arange(cfg.n_steps) * (cfg.dt / cfg.substeps)
    phi = params.mu_base + params.mu_amp * trend.normalized(t)
    paths = []
    for r in range(cfg.replicates):
        noise = draw_noise(cfg.n_steps, params.hurst, cfg.seed, r)
        paths.append(simulate(params, vol, trend, cfg, noise=noise, phi_fine=phi).queue)
    write_csv(paths[0], run.output("simulated.csv"))
    if cfg.replicates > 1:
        lines = ["timestamp," + ",".join(f"r{i}" for i in range(cfg.replicates))]
        for i, ti in enumerate(paths[0].times.tolist()):
            lines.append(f"{ti!r}," + ",".join(repr(float(p.values[i])) for p in paths))
        run.output("replicates.csv").write_text("\n".join(lines) + "\n")
    run.manifest("simulate", {"horizon": cfg.horizon, "dt": cfg.dt, "replicates": cfg.replicates,
                              "substeps": cfg.substeps, "time_unit": cfg.time_unit,
                              "vol_diffusion": cfg.vol_diffusion, "trend": args.trend})
    return EXIT_OK


def cmd_clean(args) -> int:
    run = Run(args)
    series = _load_series(run, args.data)
    out = clean(series, CleaningConfig(max_queue=args.max_queue, window=args.window))
    if args.aggregate is not None:
        out = aggregate(out, args.aggregate)
    write_csv(out, run.output("cleaned.csv"))
    run.manifest("clean", {"max_queue": args.max_queue, "window": args.window, "aggregate": args.aggregate})
    return EXIT_OK


def _calibration_config(run: Run) -> CalibrationConfig:
    a = run.args
    base = {}
    if a.config:
        try:
            base = json.loads(run.input(a.config).read_text())
        except json.JSONDecodeError as exc:
            raise InputError(f"{a.config}: not valid JSON ({exc})") from exc
        known = {f.name for f in fields(CalibrationConfig)}
        unknown = sorted(set(base) - known)
        if unknown:
            raise InputError(f"{a.config}: unknown calibration fields: {', '.join(unknown)}")
    for key in ("max_iter", "tol_fun", "tol_x", "hurst", "replicates", "time_unit", "substeps", "vol_diffusion",
                "restarts"):
        val = getattr(a, key)
        if val is not None:
            base[key] = val
    if a.hurst_grid:
        base["hurst_grid"] = tuple(a.hurst_grid)
    base["seed"] = a.seed
    if a.params:
        p, v = load_params(run.input(a.params))
        merged = {**p.__dict__, **v.__dict__}
        base["initial"] = tuple(merged[k] for k in THETA_NAMES)
        base.setdefault("hurst", p.hurst)
    for k in ("initial", "hurst_grid"):
        if base.get(k) is not None:
            base[k] = tuple(base[k])
    return CalibrationConfig(**base)


def cmd_calibrate(args) -> int:
    run = Run(args)
    series = _load_series(run, args.data)
    if len(series) < 2:
        raise InputError(f"{args.data}: calibration needs at least two samples")
    cfg = _calibration_config(run)
    trend = extract_trend(series, n_harmonics=cfg.n_harmonics)
    res = calibrate(series, cfg, trend=trend)
    res.save(run.output("calibration.json"))
    res.write_trace_csv(run.output("trace.csv"))
    trend.save(run.output("trend.json"))
    p, v = params_from_dict(dict(res.params, hurst=res.hurst, y0=float(series.values[0])))
    save_params(p, v, run.output("params.json"))
    fit = RmseObjective(series, trend, cfg, hurst=res.hurst).simulate(res.theta).queue
    write_csv(fit.replace(start_time=series.start_time), run.output("simulated.csv"))
    run.manifest("calibrate", {"max_iter": cfg.max_iter, "tol_fun": cfg.tol_fun, "tol_x": cfg.tol_x,
                               "hurst": cfg.hurst, "hurst_grid": cfg.hurst_grid, "replicates": cfg.replicates,
                               "time_unit": cfg.time_unit, "substeps": cfg.substeps, "restarts": cfg.restarts,
                               "config": args.config})
    logger.info("rmse %.6g -> %.6g in %d iterations", res.initial_rmse, res.rmse, res.iterations)
    if not res.converged:
        print(f"calibration did not converge within {cfg.max_iter} iterations", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def cmd_analyze(args) -> int:
    run = Run(args)
    series = _load_series(run, args.data)
    spec = spectral.analyze(series, band=tuple(args.band), bins_per_decade=args.bins_per_decade,
                            segments=args.segments, detrend=args.detrend, threshold=args.threshold)
    spectral.write_spectrum_csv(spec, run.output("psd.csv"))
    spectral.write_spectrum_csv(spec, run.output("psd_binned.csv"), binned=True)
    spectral.write_report(spec, run.output("spectrum.json"))
    run.manifest("analyze", {"band": list(args.band), "bins_per_decade": args.bins_per_decade,
                             "segments": args.segments, "detrend": args.detrend, "threshold": args.threshold})
    return EXIT_OK


def cmd_validate(args) -> int:
    run = Run(args)
    obs = _load_series(run, args.observed)
    sim = _load_series(run, args.simulated)
    rep = build_report(obs, sim, smooth_window=args.smooth_window, band=tuple(args.band), segments=args.segments)
    rep.save(run.output("validation.json"))
    rep.write_scatter_csv(run.output("scatter.csv"))
    run.manifest("validate", {"smooth_window": args.smooth_window, "band": list(args.band),
                              "segments": args.segments})
    return EXIT_OK


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=_seed, default=0, help="random seed (unsigned 64-bit)")
    p.add_argument("--out", default=".", help="output directory (created if missing)")
    p.add_argument("--params", help="flat JSON parameter file")
    p.add_argument("--dt", type=_positive, help="sampling interval in seconds")
    p.add_argument("-v", "--verbose", action="store_true")


def _model_flags(p: argparse.ArgumentParser, horizon: bool = True) -> None:
    if horizon:
        p.add_argument("--horizon", type=duration, default=7 * DAY, help="e.g. 7d, 60d, 12h (default 7d)")
    p.add_argument("--substeps", type=int, default=1, help="Euler steps per sample")
    p.add_argument("--time-unit", dest="time_unit", type=_positive, default=900.0,
                   help="seconds per model time unit")
    p.add_argument("--vol-diffusion", dest="vol_diffusion", choices=("additive", "sqrt"), default="additive")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="queuesde", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    band = list(spectral.DEFAULT_BAND)

    p = sub.add_parser("gen", help="generate a synthetic queue series")
    _common(p)
    _model_flags(p)
    p.add_argument("--trend", help="trend JSON (default: synthetic diurnal profile)")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("simulate", help="simulate replicates from a parameter file")
    _common(p)
    _model_flags(p)
    p.add_argument("--trend", help="trend JSON, e.g. from calibrate")
    p.add_argument("--replicates", type=int, default=1)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("clean", help="replace outliers and optionally aggregate to cycles")
    _common(p)
    p.add_argument("data")
    p.add_argument("--max-queue", dest="max_queue", type=_positive, default=40.0)
    p.add_argument("--window", type=int, default=5)
    p.add_argument("--aggregate", type=_positive, help="target interval in seconds (windowed max)")
    p.set_defaults(func=cmd_clean)

    p = sub.add_parser("calibrate", help="fit model parameters by RMSE")
    _common(p)
    p.add_argument("data")
    p.add_argument("--config", help="JSON with calibration settings")
    p.add_argument("--max-iter", dest="max_iter", type=int)
    p.add_argument("--tol-fun", dest="tol_fun", type=_positive)
    p.add_argument("--tol-x", dest="tol_x", type=_positive)
    p.add_argument("--hurst", type=float)
    p.add_argument("--hurst-grid", dest="hurst_grid", type=float, nargs="+")
    p.add_argument("--replicates", type=int)
    p.add_argument("--substeps", type=int)
    p.add_argument("--time-unit", dest="time_unit", type=_positive)
    p.add_argument("--vol-diffusion", dest="vol_diffusion", choices=("additive", "sqrt"))
    p.add_argument("--restarts", type=int, help="simplex restarts from the best vertex (default 10)")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("analyze", help="PSD, slope and periodic peaks")
    _common(p)
    p.add_argument("data")
    p.add_argument("--band", type=_positive, nargs=2, default=band, metavar=("F_LO", "F_HI"),
                   help="slope-fit band in Hz")
    p.add_argument("--segments", type=int, default=1, help="Welch segments (1 = plain periodogram)")
    p.add_argument("--bins-per-decade", dest="bins_per_decade", type=int, default=10)
    p.add_argument("--threshold", type=_positive, default=5.0, help="peak prominence factor")
    p.add_argument("--detrend", action="store_true", help="remove a linear trend first")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("validate", help="compare observed and simulated series")
    _common(p)
    p.add_argument("observed")
    p.add_argument("simulated")
    p.add_argument("--smooth-window", dest="smooth_window", type=int, default=10)
    p.add_argument("--band", type=_positive, nargs=2, default=band, metavar=("F_LO", "F_HI"))
    p.add_argument("--segments", type=int, default=1)
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (InputError, SchemaError, SimulationError, ValueError, OSError) as exc:
        print(f"queuesde {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
