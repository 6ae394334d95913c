"""Command-line entry point: ``crgrow simulate|experiment|raster``."""
from __future__ import annotations

import argparse
import dataclasses
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from .config import ConfigValidationError, RunConfig, load_config
from .coverage import EventLog, LogError, raster
from .dynamics import SpecError, run, run_coupled
from .experiments import (
    CouplingError,
    HypothesisError,
    check_escape_corridors,
    count_effective_outbursts,
    coupling_report,
    estimate_coexistence,
    estimate_shape,
    find_escape_corridors,
    reduced_spec,
    sandwich_runs,
    shrink_pair,
    verify_growth_along,
)
from .experiments.coupling import leaves_ball
from .geometry import GeometryError, Polyline, Segment, region_from_dict
from .pointproc import DistributionError, ResourceError

EXIT_OK, EXIT_INVALID, EXIT_RESOURCE = 0, 2, 3


class UsageError(ValueError):
    pass


def _threads(arg: int | None) -> int:
    if arg is not None:
        return max(1, arg)
    env = os.environ.get("CRGROW_THREADS")
    try:
        return max(1, int(env)) if env else 1
    except ValueError:
        raise UsageError(f"CRGROW_THREADS must be an integer, got {env!r}") from None


def _dump(doc, path: str | Path):
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def stats_path(out: str | Path) -> Path:
    out = Path(out)
    return out.with_name(out.stem + ".stats.json")


# -- simulate -----------------------------------------------------------------------


def cmd_simulate(config_path: str, out_path: str, seed_override: int | None = None) -> int:
    cfg = load_config(config_path, seed_override)
    res = run(cfg.spec)
    res.log.write(out_path)
    _dump(res.stats, stats_path(out_path))
    return EXIT_OK


# -- experiments ------------------------------------------------------------------


def _curve(doc):
    if "segment" in doc:
        a, b = doc["segment"]
        return Segment(np.asarray(a, float), np.asarray(b, float))
    if "polyline" in doc:
        return Polyline(np.asarray(doc["polyline"], float))
    if "points" in doc:
        return np.asarray(doc["points"], float)
    raise UsageError("curve needs one of segment, polyline, points")


def _log_at(cfg: RunConfig, t: float) -> EventLog:
    """Log of the configured run up to time t (activations only when t = 0)."""
    if t > 0:
        return run(dataclasses.replace(cfg.spec, t_max=t, r_stop=None)).log
    log = EventLog(cfg.spec.config)
    for j, p in enumerate(cfg.spec.config.pieces):
        if p.time == 0:
            log.insert_activation(j, 0.0)
    log.horizon = 0.0
    return log


def _exp_coexist(cfg, p, threads):
    rep = estimate_coexistence(cfg.spec, float(p["reachRadius"]), int(p["nRuns"]), float(p.get("stopFactor", 2.0)),
                               p.get("firstSeed"), workers=threads)
    return rep.to_dict()


def _exp_shape(cfg, p, threads):
    rep = estimate_shape(cfg.spec, int(p.get("directions", 16)), p.get("horizon"), int(p.get("series", 20)))
    return rep.to_dict()


def _exp_outbursts(cfg, p, threads):
    region = region_from_dict(p["region"])
    return count_effective_outbursts(cfg.spec, region, p["horizons"], int(p.get("samples", 64)), p.get("speed"),
                                     bool(p.get("virtual", False)))


def _exp_growth(cfg, p, threads):
    t1, t2 = float(p["T1"]), float(p["T2"])
    log = EventLog.read(p["log"]) if "log" in p else _log_at(cfg, t1)
    rep = verify_growth_along(_curve(p["curve"]), p["c0"], region_from_dict(p["B"]), float(p["d0"]), float(p["delta"]),
                              t1, t2, log, cfg.spec.betas)
    return rep.to_dict()


def _exp_corridors(cfg, p, threads):
    res = run(cfg.spec)
    rho = cfg.spec.rho
    d0 = float(p["d0"]) if "d0" in p else rho.choose_d0(float(p.get("r0ForD0", 0.5 * rho.quantile(0.5))))
    delta0 = float(p["delta0"])
    if "x1" in p:
        t = float(p["t"])
        ok = check_escape_corridors(res.log, t, p["x1"], p["x2"], float(p["r0"]), delta0, d0)
        return {"hasCorridors": ok, "t": t, "x1": p["x1"], "x2": p["x2"], "r0": p["r0"], "delta0": delta0, "d0": d0}
    times = p.get("times") or list(np.linspace(0.0, res.log.horizon, 9)[1:])
    witness = find_escape_corridors(res.log, [float(t) for t in times], delta0, d0,
                                    float(p.get("candidatePitch", 0.5)), int(p.get("top", 4)))
    return {"witness": witness, "found": witness is not None, "d0": d0, "delta0": delta0}


def _exp_couple(cfg, p, threads):
    relation = p.get("relation")
    spec = cfg.spec
    n = int(p.get("samplePoints", 1000))
    if relation == "shrink":
        results = run_coupled(list(shrink_pair(spec)))
        return {"relation": relation, "violations": coupling_report(results, relation, n, seed=spec.seed)}
    if relation == "sandwich":
        z, zt, t1, t2, _ = sandwich_runs(spec.config, spec.rho, spec.betas[0], spec.seed, spec.t_max,
                                         float(p.get("tildeFactor", 4.0)), sample_points=n)
        if not leaves_ball(zt.log, z.spec.config.bound_radius()):
            return {"relation": relation, "excluded": True, "violations": []}
        return {"relation": relation, "excluded": False, "T1": t1, "T2": t2, "tildeHorizon": zt.log.horizon,
                "violations": coupling_report([z, zt], relation, n, seed=spec.seed, t2=t2)}
    if relation == "reduced":
        b2 = float(p["b2Radius"])
        z = run(spec)
        zt = run(reduced_spec(z, b2), z.store)
        return {"relation": relation, "violations": coupling_report([z, zt], relation, n, seed=spec.seed, b2_radius=b2)}
    raise UsageError(f"unknown coupling relation {relation!r}")


EXPERIMENTS = {
    "coexist": _exp_coexist,
    "shape": _exp_shape,
    "outbursts": _exp_outbursts,
    "growth-verify": _exp_growth,
    "corridors": _exp_corridors,
    "couple": _exp_couple,
}


def cmd_experiment(config_path: str, out_path: str, seed_override: int | None = None, threads: int = 1) -> int:
    cfg = load_config(config_path, seed_override)
    if cfg.experiment is None:
        raise UsageError("config has no experiment block")
    kind = cfg.experiment["kind"]
    if kind not in EXPERIMENTS:
        raise UsageError(f"unknown experiment kind {kind!r}; expected one of {sorted(EXPERIMENTS)}")
    report = EXPERIMENTS[kind](cfg, cfg.experiment.get("params", {}), threads)
    _dump({"kind": kind, "seed": cfg.spec.seed, "report": report}, out_path)
    return EXIT_OK


# -- raster -------------------------------------------------------------------------


def write_pgm(grid: np.ndarray, path: str | Path):
    h, w = grid.shape
    Path(path).write_bytes(f"P5\n{w} {h}\n255\n".encode("ascii") + np.ascontiguousarray(grid).tobytes())


def write_csv(grid: np.ndarray, path: str | Path):
    Path(path).write_text("".join(",".join(str(int(v)) for v in row) + "\n" for row in grid))


def cmd_raster(log_path: str, t: float, resolution: int, out_path: str, fmt: str = "pgm") -> int:
    try:
        log = EventLog.read(log_path)
    except (OSError, json.JSONDecodeError, KeyError) as exc:
        raise UsageError(f"cannot read log {log_path}: {exc}") from exc
    grid, _, _ = raster(log, t, resolution)
    grid = grid[::-1]  # first row = largest x2
    (write_pgm if fmt == "pgm" else write_csv)(grid, out_path)
    return EXIT_OK


# -- entry point -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="crgrow", description="Multi-type continuum Richardson growth simulator")
    sub = parser.add_subparsers(dest="command", required=True)
    sim = sub.add_parser("simulate", help="run one configuration and write its event log")
    exp = sub.add_parser("experiment", help="run the experiment block of a configuration")
    for p in (sim, exp):
        p.add_argument("--config", required=True)
        p.add_argument("--out", required=True)
        p.add_argument("--seed-override", type=int, default=None)
        p.add_argument("--threads", type=int, default=None)
    ras = sub.add_parser("raster", help="rasterize an event log at a time")
    ras.add_argument("--log", required=True)
    ras.add_argument("--time", type=float, required=True)
    ras.add_argument("--resolution", type=int, default=256)
    ras.add_argument("--format", choices=("csv", "pgm"), default="pgm")
    ras.add_argument("--out", required=True)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "simulate":
            _threads(args.threads)
            return cmd_simulate(args.config, args.out, args.seed_override)
        if args.command == "experiment":
            return cmd_experiment(args.config, args.out, args.seed_override, _threads(args.threads))
        if not (args.resolution > 0 and math.isfinite(args.time)):
            raise UsageError("resolution must be positive and time finite")
        return cmd_raster(args.log, args.time, args.resolution, args.out, args.format)
    except ResourceError as exc:
        print(f"crgrow: resource limit: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except (ConfigValidationError, UsageError, LogError, SpecError, HypothesisError, CouplingError, GeometryError,
            DistributionError, KeyError) as exc:
        print(f"crgrow: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
