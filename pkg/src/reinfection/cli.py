"""Command-line front end.

Subcommands::

    fit        observations + config -> posterior draws, trace, pseudo-R^2
    scenario   posterior draws -> predictive CSVs and overload ranges
    hellinger  predictive CSVs -> pairwise squared Hellinger matrices
    compare    observations + two model configs -> evidence report
    report     run directory -> fit bands, parameter table, run summary

Errors print ``ERROR <category>: <detail>`` on stderr and exit nonzero.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import data_io
from .density import common_grid, hellinger_matrix, kde
from .errors import InputError, ReinfectionError
from .evidence import bayes_factor, evidence_estimate, interpret_bayes_factor
from .inference import (SERIES, ObservationSeries, mh_sample, pseudo_r2_from_fitted,
                        trajectory_quantiles)
from .integrate import default_threads
from .predictive import get_scenario, summarize_scenario

log = logging.getLogger("reinfection")

FIT_PROBS = (0.025, 0.5, 0.975)
DRAWS_FILE = "posterior.csv"
OVERLOAD_FILE = "overload_ranges.csv"
EVIDENCE_FILE = "evidence.csv"


def _out_dir(args) -> Path:
    path = Path(args.out_dir)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _config(args, path: Optional[str] = None) -> data_io.StudyConfig:
    config = data_io.load_config(path if path is not None else args.config,
                                 strict=not args.lenient)
    if args.seed is not None:
        config = config.with_seed(args.seed)
    return config


def _observations(args, config) -> ObservationSeries:
    path = args.data or config.observations
    if not path:
        raise InputError("no observations: pass --data or set [data] observations")
    return data_io.load_observations(path)


def _progress(quiet: bool):
    if quiet:
        return None

    def report(phase, done, total):
        if done == total or done % max(total // 10, 1) == 0:
            print(f"{phase}: {done}/{total}", file=sys.stderr)
    return report


# -- subcommands ------------------------------------------------------------------

def cmd_fit(args) -> int:
    config = _config(args)
    if args.draws is not None:
        config = replace(config, sampler=replace(config.sampler, n_draws=args.draws))
    obs = _observations(args, config)
    out = _out_dir(args)
    data_io.write_config(out / "config.ini", config)
    initial, policy = config.initial_state(), config.policy()

    draws = mh_sample(obs, config.model, initial, policy, config.sampler,
                      config.parameters, _progress(args.quiet))
    bands, n_failed = trajectory_quantiles(draws, config.model, initial, policy,
                                           obs.horizon, (0.5,), threads=args.threads,
                                           step=config.sampler.step)
    r2 = pseudo_r2_from_fitted(obs, {n: bands[n][0][obs.days] for n in SERIES})

    data_io.write_draws(out / DRAWS_FILE, draws, config.model, initial, policy)
    data_io.write_trace(out / "trace.csv", draws, config.sampler.tuning_length)
    data_io.write_parameter_summary(out / "parameters.csv", draws, r2)
    print(f"model {config.model.value}: {len(draws)} draws, pseudo-R2 {r2:.5f}")
    if n_failed:
        print(f"{n_failed} thinned draws failed to integrate", file=sys.stderr)
    return 0


def cmd_scenario(args) -> int:
    config = _config(args)
    out = _out_dir(args)
    data_io.write_config(out / "config.ini", config)
    loaded = data_io.read_draws(args.draws or out / DRAWS_FILE)
    ids = ([int(s) for s in args.scenarios.split(",") if s.strip()]
           if args.scenarios else list(config.scenarios))
    threshold = config.predictive.threshold if args.threshold is None else args.threshold
    day = config.predictive.day if args.day is None else args.day
    max_draws = config.predictive.max_draws if args.max_draws is None else args.max_draws
    horizon = config.horizon

    rows = []
    for sid in ids:
        scenario = get_scenario(sid)
        summary = summarize_scenario(loaded.draws, scenario, loaded.model, loaded.initial,
                                     horizon, config.predictive.seed, threshold, day,
                                     args.threads, max_draws, config.sampler.step)
        data_io.write_predictive(out / f"predictive_scenario{sid}.csv", summary)
        lo, hi = summary.overload_range
        mlo, mhi = summary.overload_mean_range
        rows.append({
            "scenario": sid, "label": scenario.label, "threshold": threshold, "day": day,
            "n_draws": len(summary.draw_index), "n_failed": len(summary.failed),
            "overload_min": lo, "overload_max": hi,
            "overload_mean_min": mlo, "overload_mean_max": mhi,
            "median_cumulative_infected": float(np.median(summary.infected)),
            "median_cumulative_reinfected": float(np.median(summary.reinfected)),
            "median_cumulative_deaths": float(np.median(summary.deaths)),
        })
        print(f"scenario {sid}: overload days {lo}-{hi} (mean trajectory {mlo}-{mhi})")
    data_io.write_overload_table(out / OVERLOAD_FILE, rows)
    return 0


def cmd_hellinger(args) -> int:
    if len(args.files) < 2:
        raise InputError("hellinger needs at least two predictive CSVs")
    out = _out_dir(args)
    tables = [data_io.read_predictive(p) for p in args.files]
    labels = _labels(args.files)
    series = args.series.split(",") if args.series else list(data_io.HELLINGER_SERIES)
    for name in series:
        if name not in data_io.HELLINGER_SERIES:
            raise InputError(f"unknown series {name!r}")
        samples = {label: t[name] for label, t in zip(labels, tables)}
        names, matrix = hellinger_matrix(samples, args.grid_size)
        data_io.write_matrix(out / f"hellinger_{name}.csv", names, matrix)
        grid = common_grid(list(samples.values()), args.grid_size)
        for label, values in samples.items():
            data_io.write_density(out / f"density_{name}_{label}.csv", kde(values, grid))
        print(f"{name}:")
        for label, row in zip(names, matrix):
            print("  " + label + " " + " ".join(f"{v:.6f}" for v in row))
    return 0


def _labels(files: Sequence[str]) -> list[str]:
    labels = [Path(f).stem for f in files]
    if len(set(labels)) != len(labels):
        labels = [f"{i + 1}_{label}" for i, label in enumerate(labels)]
    return labels


def cmd_compare(args) -> int:
    configs = [_config(args, path) for path in args.configs]
    if len(configs) != 2:
        raise InputError("compare needs exactly two model configs")
    obs = _observations(args, configs[0])
    out = _out_dir(args)
    for i, config in enumerate(configs, start=1):
        data_io.write_config(out / f"config_{i}.ini", config)
    n = args.prior_draws
    estimates = []
    for config in configs:
        ev = config.evidence if n is None else replace(config.evidence, n_prior_draws=n)
        estimates.append(evidence_estimate(
            obs, config.model, config.initial_state(), config.policy(),
            config.parameters, ev.n_prior_draws, ev.seed, ev.sampled, args.threads))
    labels = [f"{c.model.value}" if configs[0].model != configs[1].model else f"config{i}"
              for i, c in enumerate(configs, start=1)]
    bf = bayes_factor(estimates[0].log_marginal, estimates[1].log_marginal)
    verdict = interpret_bayes_factor(bf).replace("model 1", labels[0]).replace(
        "model 2", labels[1])
    data_io.write_evidence(out / EVIDENCE_FILE, labels, estimates, bf, verdict)
    for label, e in zip(labels, estimates):
        print(f"{label}: log marginal likelihood {e.log_marginal:.6f}")
    log_bf = estimates[0].log_marginal - estimates[1].log_marginal
    print(f"Bayes factor {labels[0]}/{labels[1]}: {bf:.6g}, log {log_bf:.6f} ({verdict})")
    return 0


def cmd_report(args) -> int:
    config = _config(args)
    out = _out_dir(args)
    loaded = data_io.read_draws(args.draws or out / DRAWS_FILE)
    obs = None
    if args.data or config.observations:
        obs = _observations(args, config)
    horizon = obs.horizon if obs is not None else config.horizon
    bands, n_failed = trajectory_quantiles(loaded.draws, loaded.model, loaded.initial,
                                           loaded.policy, horizon, FIT_PROBS,
                                           threads=args.threads, step=config.sampler.step)
    data_io.write_fit_bands(out / "fit_bands.csv", bands, FIT_PROBS, obs)
    data_io.write_parameter_summary(out / "parameters.csv", loaded.draws)

    lines = [f"Model {loaded.model.value}, {len(loaded.draws)} posterior draws "
             f"(seed {loaded.draws.seed})", "", "Parameter estimates (mean, 2.5%, 97.5%):"]
    for row in loaded.draws.summary():
        lines.append(f"  {row['parameter']:10s} {row['mean']:.6g} "
                     f"[{row['q0.025']:.6g}, {row['q0.975']:.6g}]")
    if obs is not None:
        fitted = {n: bands[n][1][obs.days] for n in SERIES}
        lines.append(f"  pseudo-R2  {pseudo_r2_from_fitted(obs, fitted):.5f}")
    if n_failed:
        lines.append(f"  ({n_failed} thinned draws failed to integrate)")
    for title, path in (("Hospital overload", out / OVERLOAD_FILE),):
        if path.is_file():
            header, rows = data_io.read_table(path)
            lines += ["", f"{title} ({path.name}):", "  " + ",".join(header)]
            lines += ["  " + ",".join(r) for r in rows]
    for path in sorted(out.glob("hellinger_*.csv")):
        header, rows = data_io.read_table(path)
        lines += ["", f"Squared Hellinger distances ({path.name}):", "  " + ",".join(header)]
        lines += ["  " + ",".join(r) for r in rows]
    evidence_txt = (out / EVIDENCE_FILE).with_suffix(".txt")
    if evidence_txt.is_file():
        lines += ["", "Model comparison:"]
        lines += ["  " + line for line in evidence_txt.read_text().splitlines()]
    (out / "report.txt").write_text("\n".join(lines) + "\n")
    print("\n".join(lines))
    return 0


# -- argument parsing -----------------------------------------------------------------

def _common(suppress: bool) -> argparse.ArgumentParser:
    """Global flags; subcommand copies use SUPPRESS so they never clobber
    values given before the subcommand name."""
    def default(value):
        return argparse.SUPPRESS if suppress else value

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=default(None),
                        help="master seed; overrides every seed in the config")
    common.add_argument("--threads", type=int, default=default(default_threads()),
                        help="worker threads (results do not depend on this)")
    common.add_argument("--out-dir", default=default("."), help="output directory")
    common.add_argument("--config", default=default(None), help="INI run configuration")
    common.add_argument("--lenient", action="store_true", default=default(False),
                        help="warn about unknown config keys instead of failing")
    common.add_argument("--quiet", action="store_true", default=default(False),
                        help="no progress output")
    common.add_argument("-v", "--verbose", action="store_true", default=default(False),
                        help="debug logging")
    return common


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="reinfection", parents=[_common(False)],
        description="Calibrate, project and compare the reinfection models.")
    common = _common(True)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", parents=[common], help="calibrate a model to observations")
    p.add_argument("--data", help="observations CSV (overrides [data] observations)")
    p.add_argument("--draws", type=int, default=None, help="retained draws (overrides config)")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("scenario", parents=[common], help="posterior-predictive scenarios")
    p.add_argument("--draws", help=f"posterior draw CSV (default OUT_DIR/{DRAWS_FILE})")
    p.add_argument("--scenarios", help="comma-separated scenario ids, e.g. 1,2,3,4,5,6")
    p.add_argument("--threshold", type=float, default=None, help="bed capacity")
    p.add_argument("--day", type=int, default=None, help="summary day for cumulative counts")
    p.add_argument("--max-draws", type=int, default=None, help="thin to at most this many draws")
    p.set_defaults(func=cmd_scenario)

    p = sub.add_parser("hellinger", parents=[common], help="compare predictive CSVs")
    p.add_argument("files", nargs="+", help="predictive CSVs")
    p.add_argument("--series", help="comma-separated subset of " +
                   ",".join(data_io.HELLINGER_SERIES))
    p.add_argument("--grid-size", type=int, default=512)
    p.set_defaults(func=cmd_hellinger)

    p = sub.add_parser("compare", parents=[common], help="Bayes factor of two model configs")
    p.add_argument("configs", nargs=2, help="two model config files")
    p.add_argument("--data", help="observations CSV")
    p.add_argument("--prior-draws", type=int, default=None,
                   help="prior Monte Carlo draws per model (overrides config)")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("report", parents=[common], help="assemble a run summary")
    p.add_argument("--draws", help=f"posterior draw CSV (default OUT_DIR/{DRAWS_FILE})")
    p.add_argument("--data", help="observations CSV")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.threads < 1:
        parser.error("--threads must be >= 1")
    try:
        return args.func(args)
    except ReinfectionError as exc:
        print(f"ERROR {exc.category}: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"ERROR io: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
