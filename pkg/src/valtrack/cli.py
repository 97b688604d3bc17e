"""Command-line interface.

Subcommands: run, sweep, grid, impact, multival, estimate, analyze.
Every output file gets a JSON sidecar (<name>.meta.json) carrying the full
resolved configuration, the master seed, the package version and the RNG
identification, which is sufficient to reproduce the file byte-for-byte.

Exit codes: 0 success, 2 configuration error, 3 numeric error.
"""

import argparse
import csv
import json
import os
import sys
from dataclasses import asdict

from . import __version__, analysis, config as config_mod, experiments, metrics, svg
from .errors import ConfigError, NumericError, ValtrackError

OUTDIR_ENV = "VALTRACK_OUTDIR"

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3

# flag name -> dotted config key
_FLAG_KEYS = {
    "lam": "market.lambda",
    "eta": "market.eta",
    "mu": "market.mu",
    "rho": "market.rho",
    "impact": "market.impact",
    "zeta": "market.zeta",
    "liquidity": "market.liquidity",
    "settlement": "market.settlement",
    "horizon": "market.horizon",
    "kv_buy": "commit.kv_buy",
    "kv_sell": "commit.kv_sell",
    "km_buy": "commit.km_buy",
    "km_sell": "commit.km_sell",
    "kr_buy": "commit.kr_buy",
    "kr_sell": "commit.kr_sell",
    "val": "population.val_frac",
    "n_vals": "population.n_vals",
    "mo": "population.mo_frac",
    "rand": "population.rand_frac",
    "valuation": "population.valuation",
    "u": "population.u",
    "cash": "population.cash",
    "p0": "population.p0",
    "rand_mode": "population.rand_mode",
    "critical_frac": "population.critical_frac",
    "crash_kind": "crash.kind",
    "crash_value": "crash.value",
    "m0": "run.m0",
    "seed": "run.seed",
    "replicates": "run.replicates",
}


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="config file with dotted keys")
    parser.add_argument("--out", help=f"output directory (default ${OUTDIR_ENV} or .)")
    parser.add_argument("--workers", type=int, default=1)
    parser.add_argument("--preset", choices=("desk", "paper"), default="desk")
    parser.add_argument("--set", dest="sets", action="append", default=[],
                        metavar="KEY=VALUE", help="override any dotted config key")
    for flag, key in _FLAG_KEYS.items():
        option = "--lambda" if flag == "lam" else "--" + flag.replace("_", "-")
        parser.add_argument(option, dest=flag, default=None,
                            metavar="V", help=f"override {key}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="valtrack",
                                     description=__doc__.split("\n", 1)[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="single seeded simulation")
    p_run.add_argument("--svg", help="also write an SVG price chart to this name")
    p_sweep = sub.add_parser("sweep", help="ternary sweep over trader mixes")
    p_sweep.add_argument("--resolution", type=int, default=None)
    p_sweep.add_argument("--sweep-replicates", type=int, default=None)
    p_sweep.add_argument("--svg", help="also write an SVG ternary map to this name")
    p_sweep.add_argument("--metric", default="crash_freq",
                         choices=("crash_freq", "boom_freq", "mean_drop"))
    p_grid = sub.add_parser("grid", help="commitment grid: analytic vs simulated")
    p_grid.add_argument("--k-plus-min", type=float, default=0.02)
    p_grid.add_argument("--k-plus-max", type=float, default=0.30)
    p_grid.add_argument("--k-minus-min", type=float, default=0.02)
    p_grid.add_argument("--k-minus-max", type=float, default=0.30)
    p_grid.add_argument("--cells", type=int, default=10)
    sub.add_parser("impact", help="threshold comparison across impact functions")
    p_multi = sub.add_parser("multival", help="multi-valuation run with histogram")
    p_multi.add_argument("--multival-n-vals", type=int, default=10)
    p_multi.add_argument("--multival-horizon", type=int, default=1000)
    p_est = sub.add_parser("estimate", help="tracking-error estimator Monte Carlo")
    p_est.add_argument("--shape", type=float, default=8.0)
    p_est.add_argument("--rate", type=float, default=8.0)
    p_est.add_argument("--p", type=float, default=1.3)
    p_est.add_argument("--n", type=int, default=100)
    p_est.add_argument("--reps", type=int, default=10000)
    p_an = sub.add_parser("analyze",
                          help="fixed-point report and analytic threshold")
    p_an.add_argument("--csv", action="store_true",
                      help="also write analysis.csv with the report row")
    for p in sub.choices.values():
        _add_common(p)
    return parser


def _overrides(args: argparse.Namespace) -> dict:
    overrides: dict[str, str] = {}
    for flag, key in _FLAG_KEYS.items():
        value = getattr(args, flag, None)
        if value is not None:
            overrides[key] = value
    for item in args.sets:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        key, _, value = item.partition("=")
        overrides[key.strip()] = value.strip()
    return overrides


def _outdir(args: argparse.Namespace) -> str:
    out = args.out or os.environ.get(OUTDIR_ENV) or "."
    os.makedirs(out, exist_ok=True)
    return out


def _write_csv(path: str, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        for row in rows:
            writer.writerow(row)


def _write_sidecar(path: str, cfg, args: argparse.Namespace, extra=None) -> None:
    from .seeding import rng_info
    payload = {
        "output": os.path.basename(path),
        "command": args.command,
        "config": config_mod.config_values(cfg),
        "master_seed": cfg.seed,
        "code_version": __version__,
        "rng": rng_info(),
    }
    if extra:
        payload.update(extra)
    with open(path + ".meta.json", "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def cmd_run(args, cfg) -> int:
    result = experiments.run_once(cfg)
    out = os.path.join(_outdir(args), "run.csv")
    _write_csv(out, experiments.run_csv_rows(result))
    _write_sidecar(out, cfg, args)
    if args.svg:
        doc = svg.render_series_svg(result.prices, valuation=cfg.population.u)
        with open(os.path.join(_outdir(args), args.svg), "w", encoding="utf-8") as fh:
            fh.write(doc)
    status = "crash at step %s" % result.crash_step if result.crash_step is not None \
        else "no crash"
    boom = " boom at step %s" % result.boom_step if result.boom_step is not None else ""
    print(f"run: {len(result.prices) - 1} steps, final price "
          f"{result.final_state.price:.6g}, {status}{boom} -> {out}")
    return EXIT_OK


def cmd_sweep(args, cfg) -> int:
    preset = experiments.FULL_PRESET if args.preset == "paper" else experiments.DESK_PRESET
    resolution = args.resolution or preset["resolution"]
    replicates = args.sweep_replicates or preset["replicates"]
    grid = experiments.ternary_sweep(cfg, resolution, replicates,
                                     workers=args.workers)
    out = os.path.join(_outdir(args), "ternary.csv")
    _write_csv(out, experiments.ternary_csv_rows(grid))
    _write_sidecar(out, cfg, args, {"resolution": resolution, "replicates": replicates})
    if args.svg:
        doc = svg.render_ternary_svg(grid, metric=args.metric)
        with open(os.path.join(_outdir(args), args.svg), "w", encoding="utf-8") as fh:
            fh.write(doc)
    print(f"sweep: {len(grid.points)} points x {replicates} replicates -> {out}")
    return EXIT_OK


def cmd_grid(args, cfg) -> int:
    grid = experiments.commitment_grid(
        cfg, (args.k_plus_min, args.k_plus_max),
        (args.k_minus_min, args.k_minus_max), cells=args.cells,
        workers=args.workers)
    out = os.path.join(_outdir(args), "grid.csv")
    _write_csv(out, experiments.grid_csv_rows(grid))
    _write_sidecar(out, cfg, args, {"cells": args.cells})
    print(f"grid: {len(grid.cells)} cells ({cfg.market.settlement} settlement) -> {out}")
    return EXIT_OK


def cmd_impact(args, cfg) -> int:
    report = experiments.impact_comparison(cfg)
    out = os.path.join(_outdir(args), "impact.json")
    with open(out, "w", encoding="utf-8") as fh:
        json.dump(asdict(report), fh, indent=2, sort_keys=True)
        fh.write("\n")
    _write_sidecar(out, cfg, args)
    print(f"impact thresholds: ratio={report.ratio_threshold:.5f} "
          f"powerlaw(zeta=1)={report.powerlaw_linear_threshold:.5f} "
          f"powerlaw(zeta=0.8)={report.powerlaw_concave_threshold:.5f} -> {out}")
    return EXIT_OK


def cmd_multival(args, cfg) -> int:
    report = experiments.multival_run(cfg, n_vals=args.multival_n_vals,
                                      horizon=args.multival_horizon)
    outdir = _outdir(args)
    series_out = os.path.join(outdir, "multival_run.csv")
    _write_csv(series_out, experiments.run_csv_rows(report.result))
    _write_sidecar(series_out, cfg, args,
                   {"valuations": list(report.valuations)})
    hist_out = os.path.join(outdir, "multival_histogram.csv")
    _write_csv(hist_out, experiments.histogram_csv_rows(report.histogram))
    _write_sidecar(hist_out, cfg, args)
    print(f"multival: max tracking error vs mean valuation "
          f"{report.max_tau_vs_mean:.4f} Blacks; wealth variance "
          f"{report.val_wealth_var_start:.3g} -> {report.val_wealth_var_end:.3g}; "
          f"-> {series_out}, {hist_out}")
    return EXIT_OK


def cmd_estimate(args, cfg) -> int:
    report = metrics.estimator_mc(args.shape, args.rate, args.p, args.n,
                                  args.reps, cfg.seed)
    out = os.path.join(_outdir(args), "estimator.json")
    with open(out, "w", encoding="utf-8") as fh:
        json.dump(asdict(report), fh, indent=2, sort_keys=True)
        fh.write("\n")
    _write_sidecar(out, cfg, args,
                   {"estimator": {"shape": args.shape, "rate": args.rate,
                                  "p": args.p, "n": args.n, "reps": args.reps}})
    print(f"estimate: tau_true={report.tau_true:.5f} "
          f"tau_hat_mean={report.tau_hat_mean:.5f} bias={report.bias:.2e} "
          f"empirical std={report.empirical_std:.5f} "
          f"predicted std={report.predicted_std:.5f} "
          f"skewness={report.skewness:.3f} -> {out}")
    return EXIT_OK


def cmd_analyze(args, cfg) -> int:
    constants = analysis.AnalysisConstants.from_params(cfg.market, cfg.commitments,
                                                       u=cfg.population.u)
    alpha_report = analysis.alpha_fixed_points(constants)
    beta_report = analysis.beta_fixed_points(constants)
    theta = analysis.mo_crash_threshold_analytic(constants, cfg.market.rho)
    print(f"constants: A={constants.a_const:.6g} B={constants.b_const:.6g} "
          f"lambda={constants.lam} eta={constants.eta}")
    for name, report in (("alpha", alpha_report), ("beta", beta_report)):
        kind = "trivial" if report.trivial else "computed"
        print(f"{name} fixed points ({kind}): selected={report.selected:.6g} "
              f"exists={report.exists}")
        for root in report.roots:
            print(f"  {name} root {root.value:.10f} [{root.region}] "
                  f"residual={root.residual:.2e}")
    print(f"analytic momentum-wealth crash threshold: theta = {theta:.5f}")
    if args.csv:
        out = os.path.join(_outdir(args), "analysis.csv")
        rows = experiments.fixed_point_csv_rows(
            [(cfg.commitments.kv_buy, cfg.commitments.km_sell,
              alpha_report, theta)])
        _write_csv(out, rows)
        _write_sidecar(out, cfg, args)
        print(f"-> {out}")
    return EXIT_OK


_COMMANDS = {
    "run": cmd_run,
    "sweep": cmd_sweep,
    "grid": cmd_grid,
    "impact": cmd_impact,
    "multival": cmd_multival,
    "estimate": cmd_estimate,
    "analyze": cmd_analyze,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = config_mod.parse_config(path=args.config, overrides=_overrides(args))
        return _COMMANDS[args.command](args, cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValtrackError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
