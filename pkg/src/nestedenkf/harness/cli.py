"""Command-line entry point.

Subcommands: nature, twin, imperfect, exhaustive, residuals.  Each accepts
--config/--seed/--out/--replicates/--diag-rstar/--inflation; flag overrides
win over the config file.  Success exits 0; any failure prints a
machine-readable JSON error record to stderr and exits 1 (argparse usage
errors keep their conventional exit code 2).
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from .config import ExperimentConfig, apply_overrides, load_config
from .experiments import (exhaustive_search, residual_covariance_diagnostic,
                          run_imperfect_experiment, run_twin_experiment)
from .io import (error_record, package_version, write_grid_outputs,
                 write_nature_outputs, write_residual_outputs,
                 write_run_outputs)
from .observations import make_observations, nature_run
from .seeding import seed_stream

_KIND_BY_COMMAND = {
    "twin": "twin",
    "imperfect": "imperfect",
    "exhaustive": "exhaustive",
    "residuals": "residual-diag",
}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="nestedenkf",
        description=("Nested ensemble Kalman filters for inferring "
                     "stochastic model-error parameters"))
    parser.add_argument("--version", action="version",
                        version=package_version())
    sub = parser.add_subparsers(dest="command", required=True)
    descriptions = {
        "nature": "generate a nature run and synthetic observations",
        "twin": "run stochastic twin experiments",
        "imperfect": "run imperfect-model experiments (two-scale nature)",
        "exhaustive": "state-only RMSE over a fixed-parameter lattice",
        "residuals": "residual covariance diagnostic of the truncated model",
    }
    for name, help_text in descriptions.items():
        p = sub.add_parser(name, help=help_text, description=help_text)
        p.add_argument("--config", metavar="FILE",
                       help="YAML experiment config (defaults reproduce the "
                            "reference setup)")
        p.add_argument("--seed", type=int, metavar="U64",
                       help="master seed override")
        p.add_argument("--out", metavar="DIR",
                       help="output directory override")
        p.add_argument("--replicates", type=int, metavar="N",
                       help="replicate count override")
        p.add_argument("--diag-rstar", action="store_true", default=None,
                       help="keep only the diagonal of each window block of "
                            "the outer-cycle observation covariance")
        p.add_argument("--inflation", type=float, metavar="F",
                       help="multiplicative inflation override")
        if name == "residuals":
            p.add_argument("--duration", type=float, metavar="T",
                           help="integration length in time units")
    return parser


def _load(args):
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    kind = _KIND_BY_COMMAND.get(args.command)
    overrides = {
        "master_seed": args.seed,
        "out_dir": args.out,
        "replicates": args.replicates,
        "diag_shortcut": args.diag_rstar,
        "inflation": args.inflation,
    }
    if kind is not None and kind != cfg.kind:
        overrides["kind"] = kind
    if getattr(args, "duration", None) is not None:
        overrides["residual_duration"] = args.duration
    return apply_overrides(cfg, **overrides)


def _cmd_nature(cfg):
    n_cycles = cfg.n_outer * cfg.k_window
    traj = nature_run(cfg, n_cycles, seed_stream(cfg.master_seed, "nature", 0))
    observations = make_observations(traj, np.arange(cfg.n_vars), cfg.r_var,
                                     cfg.obs_interval,
                                     seed_stream(cfg.master_seed, "obs", 0))
    paths = write_nature_outputs(cfg.out_dir, cfg, traj, observations)
    print(f"nature run: {len(traj.xs)} states, {len(observations)} "
          f"observation cycles -> {paths['nature'].parent}")


def _cmd_twin(cfg):
    summaries = run_twin_experiment(cfg)
    paths = write_run_outputs(cfg.out_dir, cfg, summaries)
    finals = np.array([s.final_theta for s in summaries])
    print(f"twin: {len(summaries)} replicate(s), mean final theta = "
          f"{np.array2string(finals.mean(axis=0), precision=4)} "
          f"-> {paths['summary']}")


def _cmd_imperfect(cfg):
    summaries = run_imperfect_experiment(cfg)
    paths = write_run_outputs(cfg.out_dir, cfg, summaries)
    finals = np.array([s.final_theta for s in summaries])
    print(f"imperfect: {len(summaries)} replicate(s), mean final theta = "
          f"{np.array2string(finals.mean(axis=0), precision=4)} "
          f"-> {paths['summary']}")


def _cmd_exhaustive(cfg):
    result = exhaustive_search(cfg)
    paths = write_grid_outputs(cfg.out_dir, cfg, result)
    print(f"exhaustive: {len(result.points)} point(s) x "
          f"{result.rmse.shape[1]} replicate(s), best "
          f"{dict(zip(result.parameter_names, result.best_point.round(6)))} "
          f"(rmse {result.rmse_mean[result.best_index]:.4f}) "
          f"-> {paths['summary']}")


def _cmd_residuals(cfg):
    result = residual_covariance_diagnostic(cfg.residual_duration,
                                            cfg.master_seed, cfg)
    paths = write_residual_outputs(cfg.out_dir, cfg, result)
    print(f"residuals: variance {result.by_distance[0]:.4f}, "
          f"d1 {result.by_distance[1]:.4f}, d2 {result.by_distance[2]:.4f} "
          f"-> {paths['summary']}")


_HANDLERS = {
    "nature": _cmd_nature,
    "twin": _cmd_twin,
    "imperfect": _cmd_imperfect,
    "exhaustive": _cmd_exhaustive,
    "residuals": _cmd_residuals,
}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _load(args)
        _HANDLERS[args.command](cfg)
    except Exception as err:  # noqa: BLE001 - the CLI boundary reports all
        print(error_record(err, context={"command": args.command,
                                         "config": args.config}),
              file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
