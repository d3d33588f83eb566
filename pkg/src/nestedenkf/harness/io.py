"""Flat-file outputs: schema-versioned CSVs and a JSON run summary.

Every CSV starts with a magic header comment ``# nestedenkf-csv-v<N> <kind>``
followed by the column row; downstream consumers key their schema checks on
that line.  The JSON summary echoes the full config and records a
git-describe-style version string.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import subprocess
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .. import __version__

SCHEMA_VERSION = 1


def csv_magic(kind):
    return f"# nestedenkf-csv-v{SCHEMA_VERSION} {kind}"


def package_version():
    """git-describe of the source tree when available, else the wheel version."""
    try:
        out = subprocess.run(
            ["git", "describe", "--tags", "--always", "--dirty"],
            cwd=Path(__file__).resolve().parent, capture_output=True,
            text=True, timeout=10)
        if out.returncode == 0 and out.stdout.strip():
            return f"v{__version__}+g{out.stdout.strip()}"
    except OSError:
        pass
    return f"v{__version__}"


def to_jsonable(value):
    """Recursively convert numpy containers/scalars to plain Python."""
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, (np.bool_, bool)):  # before int: bool is an int
        return bool(value)
    if isinstance(value, (np.floating, float)):
        return float(value)
    if isinstance(value, (np.integer, int)):
        return int(value)
    return value


def _write_csv(path, kind, header, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        fh.write(csv_magic(kind) + "\n")
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)
    return path


def _write_json(path, payload):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        json.dump(to_jsonable(payload), fh, indent=2)
        fh.write("\n")
    return path


def read_csv(path, kind=None):
    """Read one of our CSVs back into (header, float ndarray).

    Checks the magic line (and the kind when given) so stale or foreign
    files fail loudly instead of parsing into garbage.
    """
    path = Path(path)
    with path.open("r", encoding="utf-8") as fh:
        magic = fh.readline().strip()
        if not magic.startswith("# nestedenkf-csv-v"):
            raise ValueError(f"{path}: missing nestedenkf csv magic line")
        got_version = magic.split()[1].rsplit("-v", 1)[1]
        if int(got_version) != SCHEMA_VERSION:
            raise ValueError(f"{path}: schema v{got_version}, "
                             f"expected v{SCHEMA_VERSION}")
        if kind is not None and magic.split()[2] != kind:
            raise ValueError(f"{path}: csv kind {magic.split()[2]!r}, "
                             f"expected {kind!r}")
        reader = csv.reader(fh)
        header = next(reader)
        data = np.array([[float(v) for v in row] for row in reader if row])
    if data.size == 0:
        data = data.reshape(0, len(header))
    return header, data


def _base_summary(cfg, wall_clock):
    return {
        "schema_version": SCHEMA_VERSION,
        "version": package_version(),
        "created_utc": datetime.now(timezone.utc).isoformat(),
        "config": dataclasses.asdict(cfg),
        "wall_clock_seconds": wall_clock,
        "seed_provenance": {
            "master_seed": cfg.master_seed,
            "scheme": ("SeedSequence(master_seed, spawn_key="
                       "sha256(purpose) + indices)"),
        },
    }


def write_run_outputs(out_dir, cfg, summaries):
    """Write inner_cycles.csv, outer_cycles.csv, and summary.json."""
    out = Path(out_dir)
    k = cfg.k_window
    inner_rows = []
    outer_rows = []
    names = summaries[0].parameter_names if summaries else ()
    for s in summaries:
        for i, (rmse, spread) in enumerate(zip(s.rmse, s.state_spread)):
            inner_rows.append((s.replicate, i // k, i % k,
                               repr(float(rmse)), repr(float(spread))))
        for l, (mean, spr) in enumerate(zip(s.theta_mean, s.theta_spread)):
            outer_rows.append((s.replicate, l,
                               *(repr(float(v)) for v in mean),
                               *(repr(float(v)) for v in spr)))
    inner_path = _write_csv(out / "inner_cycles.csv", "inner",
                            ("replicate", "outer", "k", "rmse",
                             "state_spread"), inner_rows)
    outer_header = (("replicate", "outer")
                    + tuple(f"{n}_mean" for n in names)
                    + tuple(f"{n}_spread" for n in names))
    outer_path = _write_csv(out / "outer_cycles.csv", "outer", outer_header,
                            outer_rows)

    total_wall = float(sum(s.wall_clock for s in summaries))
    payload = _base_summary(cfg, total_wall)
    payload["parameter_names"] = list(names)
    payload["replicates"] = [{
        "replicate": s.replicate,
        "final_theta": s.final_theta,
        "final_theta_std": s.final_theta_std,
        "final_spread": s.final_spread,
        "tail_rmse": s.tail_rmse,
        "wall_clock_seconds": s.wall_clock,
        "n_outer": len(s.theta_mean),
        "n_inner": len(s.rmse),
    } for s in summaries]
    if summaries:
        finals = np.array([s.final_theta for s in summaries])
        payload["aggregate"] = {
            "final_theta_mean": finals.mean(axis=0),
            "final_theta_std": (finals.std(axis=0, ddof=1)
                                if len(finals) > 1
                                else np.zeros(finals.shape[1])),
            "tail_rmse_mean": float(np.mean([s.tail_rmse
                                             for s in summaries])),
        }
    summary_path = _write_json(out / "summary.json", payload)
    return {"inner": inner_path, "outer": outer_path, "summary": summary_path}


def write_grid_outputs(out_dir, cfg, result):
    """Write grid.csv and summary.json for an exhaustive search."""
    out = Path(out_dir)
    header = (tuple(result.parameter_names)
              + ("rmse_mean", "rmse_std", "n_replicates"))
    rows = [(*(repr(float(v)) for v in point),
             repr(float(mean)), repr(float(std)), result.rmse.shape[1])
            for point, mean, std in zip(result.points, result.rmse_mean,
                                        result.rmse_std)]
    grid_path = _write_csv(out / "grid.csv", "grid", header, rows)
    payload = _base_summary(cfg, result.wall_clock)
    payload["parameter_names"] = list(result.parameter_names)
    payload["n_points"] = len(result.points)
    payload["best_point"] = result.best_point
    payload["best_rmse"] = float(result.rmse_mean[result.best_index])
    summary_path = _write_json(out / "summary.json", payload)
    return {"grid": grid_path, "summary": summary_path}


def write_residual_outputs(out_dir, cfg, result):
    """Write residual_cov.csv and residuals.json."""
    out = Path(out_dir)
    n = result.cov.shape[0]
    rows = [tuple(repr(float(v)) for v in row) for row in result.cov]
    cov_path = _write_csv(out / "residual_cov.csv", "residual_cov",
                          tuple(f"x{i}" for i in range(n)), rows)
    payload = _base_summary(cfg, result.wall_clock)
    payload.update({
        "a0": result.det.a0,
        "a1": result.det.a1,
        "duration": result.duration,
        "n_samples": result.n_samples,
        "variance": float(result.by_distance[0]),
        "covariance_by_distance": result.by_distance,
    })
    summary_path = _write_json(out / "residuals.json", payload)
    return {"cov": cov_path, "summary": summary_path}


def write_nature_outputs(out_dir, cfg, traj, observations):
    """Write nature.csv (truth states) and observations.csv."""
    out = Path(out_dir)
    n = traj.xs.shape[1] if len(traj.xs) else cfg.n_vars
    rows = [(repr(float(t)), *(repr(float(v)) for v in x))
            for t, x in zip(traj.times, traj.xs)]
    nature_path = _write_csv(out / "nature.csv", "nature",
                             ("time",) + tuple(f"x{i}" for i in range(n)),
                             rows)
    q = observations[0].n_obs if observations else cfg.n_vars
    obs_rows = [(i, *(repr(float(v)) for v in o.y))
                for i, o in enumerate(observations)]
    obs_path = _write_csv(out / "observations.csv", "observations",
                          ("cycle",) + tuple(f"y{i}" for i in range(q)),
                          obs_rows)
    return {"nature": nature_path, "observations": obs_path}


def error_record(err, context=None):
    """Machine-readable description of a failure, for stderr."""
    record = {"error": type(err).__name__, "message": str(err)}
    if context:
        record["context"] = to_jsonable(context)
    return json.dumps(record)
