"""Reproducible experiment runner.

Each subcommand writes ``<out>/<subcommand>.csv`` and ``<out>/manifest.json``.
Exit status: 0 on success, 1 on a runtime failure (such as an undefined ratio),
2 on a configuration error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import io
import json
import logging
import math
import secrets
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from . import rng as _rng
from .analysis import box_count_dimension, escape_rate_scan
from .core import sample_realization
from .estimators import (
    UndefinedRatioError,
    _levels,
    _map,
    bootstrap_stderr,
    check_summary,
    estimate_f,
    estimate_joint_return,
    estimate_return_prob,
    hitting_prob_mc,
    lawler_gaps,
    second_moment_lower_bound,
    Tally,
)
from .schedule import Schedule, desk_schedule, paper_schedule, scan_E_M

log = logging.getLogger("dynwalk")

COMMANDS = (
    "scan-exc",
    "estimate-return",
    "estimate-joint",
    "estimate-em",
    "estimate-ratio",
    "check-summary",
    "hitting-prob",
    "second-moment",
    "escape-rate",
    "dimension",
)

HEADERS = {
    "scan-exc": ["realization", "seed", "start", "end"],
    "estimate-return": ["k", "x1", "x2", "window", "samples", "mean", "stderr", "ci_low", "ci_high"],
    "estimate-joint": ["k", "x1", "x2", "y1", "y2", "t", "samples", "mean", "stderr",
                       "ci_low", "ci_high"],
    "estimate-em": ["M", "samples", "mean", "stderr", "ci_low", "ci_high"],
    "estimate-ratio": ["M", "t", "samples", "numerator", "denominator", "ratio", "stderr",
                       "scaled"],
    "check-summary": ["k", "t", "n_single", "p_single", "se_single", "n_joint", "p_joint",
                      "se_joint", "single_ok", "joint_ok"],
    "hitting-prob": ["n", "x1", "x2", "exact", "mc_mean", "mc_stderr", "gap"],
    "second-moment": ["realization", "seed", "L"],
    "escape-rate": ["realization", "seed", "t", "survives", "reach"],
    "dimension": ["realization", "seed", "depth", "scale", "count"],
}

PRNG_IDENTITY = {
    "realizations": _rng.PRNG_ID,
    "estimators": "numpy PCG64 via SeedSequence([seed, stream, chunk])",
    "numpy": np.__version__,
}


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    command: str = "estimate-em"
    schedule: str = "desk 4 2"
    M: int = 3
    N: int | None = None
    t_max: float = 1.0
    window: tuple[float, float] | None = None
    seed: int | None = None
    samples: int = 10_000
    realizations: int = 1
    t: tuple[float, ...] = (0.25,)
    eps: float = 0.25
    alpha: float | None = None
    k: int = 1
    x: tuple[tuple[int, int], ...] = ((1, 0),)
    y: tuple[int, int] = (1, 0)
    radius: tuple[int, ...] = (64,)
    depths: tuple[int, ...] = tuple(range(1, 11))
    grid: float = 2.0**-10
    workers: int = 1
    out: str = "out"

    def to_dict(self) -> dict:
        return json.loads(json.dumps(dataclasses.asdict(self)))

    @classmethod
    def from_dict(cls, d: dict) -> ExperimentConfig:
        known = {f.name for f in dataclasses.fields(cls)}
        bad = set(d) - known
        if bad:
            raise ConfigError(f"unknown config keys: {sorted(bad)}")
        d = dict(d)
        for key in ("t", "radius", "depths", "y"):
            if key in d and d[key] is not None:
                d[key] = tuple(d[key])
        if d.get("window") is not None:
            d["window"] = tuple(d["window"])
        if "x" in d:
            d["x"] = tuple(tuple(p) for p in d["x"])
        return cls(**d)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, s: str) -> ExperimentConfig:
        return cls.from_dict(json.loads(s))


def parse_schedule(spec: str, M: int) -> Schedule:
    """``paper [M]``, ``desk [M] growth width`` or ``explicit s=... r=... R=...``."""
    parts = spec.split()
    if not parts:
        raise ConfigError("empty schedule")
    kind, args = parts[0], parts[1:]
    if kind == "paper":
        if len(args) > 1:
            raise ConfigError("paper schedule takes at most one argument")
        return paper_schedule(int(args[0]) if args else M)
    if kind == "desk":
        if len(args) == 3:
            return desk_schedule(int(args[0]), float(args[1]), float(args[2]))
        if len(args) == 2:
            return desk_schedule(M, float(args[0]), float(args[1]))
        raise ConfigError("desk schedule needs 'desk [M] growth width'")
    if kind == "explicit":
        kv = dict(a.split("=", 1) for a in args)
        try:
            s = tuple(int(v) for v in kv["s"].split(","))
            inner = tuple(float(v) for v in kv["r"].split(",")) if len(s) > 1 else ()
            outer = tuple(float(v) for v in kv["R"].split(",")) if len(s) > 1 else ()
        except KeyError as e:
            raise ConfigError(f"explicit schedule missing {e}") from None
        sched = Schedule(s, inner, outer)
        return sched.truncate(min(M, sched.M))
    raise ConfigError(f"unknown schedule kind {kind!r}")


def validate(cfg: ExperimentConfig) -> list[str]:
    v = []
    if cfg.command not in COMMANDS:
        v.append(f"unknown command {cfg.command!r}")
    if cfg.M < 0:
        v.append("M < 0")
    parts = cfg.schedule.split()
    if parts and parts[0] == "desk" and len(parts) in (3, 4):
        try:
            growth, width = float(parts[-2]), float(parts[-1])
            if growth < 2:
                v.append("growth < 2")
            if width < 1:
                v.append("width < 1")
        except ValueError:
            pass
    sched = None
    if not v:
        try:
            sched = parse_schedule(cfg.schedule, cfg.M)
        except (ValueError, OverflowError) as e:
            v.append(f"bad schedule: {e}")
    if cfg.samples < 1:
        v.append("samples < 1")
    if cfg.realizations < 1:
        v.append("realizations < 1")
    if cfg.workers < 1:
        v.append("workers < 1")
    if cfg.t_max < 0:
        v.append("t_max < 0")
    if any(t < 0 for t in cfg.t):
        v.append("t < 0")
    if not cfg.eps > 0:
        v.append("eps must be > 0")
    if cfg.grid <= 0:
        v.append("grid spacing must be > 0")
    if not cfg.depths or min(cfg.depths) < 1:
        v.append("depths must be >= 1")
    if cfg.window is not None:
        a, b = cfg.window
        if not 0 <= a <= b <= cfg.t_max:
            v.append("window outside [0, t_max]")
    if sched is not None and cfg.N is not None and cfg.N < sched.s[-1]:
        v.append(f"N < s_M = {sched.s[-1]}")
    if cfg.command == "hitting-prob":
        for n in cfg.radius:
            for x in cfg.x:
                r = math.hypot(*x)
                if r == 0:
                    v.append("start at origin")
                elif r >= n:
                    v.append(f"start {tuple(x)} outside radius {n}")
    if cfg.command in ("estimate-return", "estimate-joint"):
        if tuple(cfg.x[0]) == (0, 0):
            v.append("start at origin")
        if cfg.command == "estimate-joint" and tuple(cfg.y) == (0, 0):
            v.append("second start at origin")
        if sched is not None and not 1 <= cfg.k <= sched.M:
            v.append(f"k outside [1, {sched.M}]")
    return v


# ---------------------------------------------------------------------------


def _realization_seeds(seed: int, n: int) -> list[int]:
    return [int(s) for s in _rng.split_seed(seed, np.arange(n, dtype=np.uint64))]


def _scan_one(N, t_max, seed, sched, window):
    return scan_E_M(sample_realization(N, t_max, seed), sched, window)


def _run(cfg: ExperimentConfig, sched: Schedule, seed: int):
    """Rows for the command's CSV plus a summary dict for the manifest."""
    c = cfg.command
    N = cfg.N or sched.s[-1]
    window = cfg.window or (0.0, cfg.t_max)
    rows, summary = [], {}
    if c in ("scan-exc", "second-moment", "dimension"):
        n = cfg.samples if c == "second-moment" else cfg.realizations
        seeds = _realization_seeds(seed, n)
        inds = _map(_scan_one, [(N, cfg.t_max, s, sched, window) for s in seeds], cfg.workers)
        if c == "scan-exc":
            for i, (s, ind) in enumerate(zip(seeds, inds)):
                rows += [[i, s, a, b] for a, b in ind.intervals.tolist()]
            summary["measure"] = [ind.measure() for ind in inds]
        elif c == "second-moment":
            L = np.array([ind.measure() for ind in inds])
            rows = [[i, s, l] for i, (s, l) in enumerate(zip(seeds, L.tolist()))]
            summary.update(
                mean_L=float(L.mean()),
                bound=second_moment_lower_bound(L),
                empirical=float(np.mean(L > 0)),
                bootstrap_se=bootstrap_stderr(L, second_moment_lower_bound, 500, seed & 0xFFFF),
            )
        else:
            slopes = []
            for i, (s, ind) in enumerate(zip(seeds, inds)):
                rep = box_count_dimension(ind, cfg.depths)
                rows += [[i, s, int(d), float(sc), int(k)]
                         for d, sc, k in zip(rep.depths, rep.scales, rep.counts)]
                slopes.append(None if rep.empty else rep.slope)
            summary["slopes"] = slopes
    elif c == "escape-rate":
        seeds = _realization_seeds(seed, cfg.realizations)
        grid = np.arange(window[0], window[1] + cfg.grid / 2, cfg.grid)
        grid = grid[grid <= window[1]]
        gained = 0
        for i, s in enumerate(seeds):
            rep = escape_rate_scan(sample_realization(N, cfg.t_max, s), sched, cfg.eps, grid,
                                   cfg.alpha)
            rows += [[i, s, float(t), bool(ok), int(r)]
                     for t, ok, r in zip(rep.times, rep.survives, rep.reach)]
            gained += int(rep.survives.any() and not rep.survives[0])
        summary["surviving_realizations"] = len({r[0] for r in rows if r[3]})
        summary["gain_over_t0"] = gained
    elif c == "estimate-return":
        x = cfg.x[0]
        r = estimate_return_prob(sched, cfg.k, x, cfg.samples, seed, cfg.workers)
        a, b = sched.window(cfg.k)
        rows = [[cfg.k, x[0], x[1], b - a, r.n_samples, r.mean, r.stderr, r.ci_low, r.ci_high]]
    elif c == "estimate-joint":
        x, y = cfg.x[0], cfg.y
        for t in cfg.t:
            r = estimate_joint_return(sched, cfg.k, x, y, t, cfg.samples, seed, cfg.workers)
            rows.append([cfg.k, x[0], x[1], y[0], y[1], t, r.n_samples, r.mean, r.stderr,
                         r.ci_low, r.ci_high])
    elif c == "estimate-em":
        e0, _ = _levels(sched, sched.M, cfg.samples, seed, None, "auto", cfg.workers)
        for m in range(sched.M + 1):
            r = Tally.of(e0[:, m]).report()
            rows.append([m, r.n_samples, r.mean, r.stderr, r.ci_low, r.ci_high])
    elif c == "estimate-ratio":
        for t in cfg.t:
            r = estimate_f(sched, sched.M, t, cfg.samples, seed, "auto", cfg.workers)
            scaled = r.ratio / (1 + abs(math.log2(t))) ** 4 if t > 0 else float("nan")
            rows.append([sched.M, t, r.denominator.n_samples, r.numerator.mean,
                         r.denominator.mean, r.ratio, r.stderr, scaled])
        finite = [row[-1] for row in rows if not math.isnan(row[-1])]
        summary["fitted_C"] = max(finite) if finite else None
    elif c == "check-summary":
        t = cfg.t[0]
        tab = check_summary(sched, sched.M, t, cfg.samples, seed, "auto", cfg.workers)
        for r in tab.rows:
            rows.append([r.k, t, r.single.n_samples, r.single.mean, r.single.stderr,
                         r.joint.n_samples, r.joint.mean, r.joint.stderr, r.single_ok,
                         r.joint_ok])
        summary.update(K=tab.K, C_single=tab.C_single, C_joint=tab.C_joint)
    elif c == "hitting-prob":
        gaps = lawler_gaps(cfg.radius, cfg.x)
        for i, (n, x, h, gap) in enumerate(gaps):
            r = hitting_prob_mc(n, x, cfg.samples, seed + i, cfg.workers)
            rows.append([n, x[0], x[1], h, r.mean, r.stderr, gap])
        summary["fitted_C"] = max([0.0] + [abs(g[-1]) for g in gaps])
    return rows, summary


def _csv_bytes(header, rows) -> bytes:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(v) if isinstance(v, float) else v for v in r])
    return buf.getvalue().encode("utf-8")


def run(cfg: ExperimentConfig) -> int:
    """Run one configured experiment; returns the process exit status."""
    problems = validate(cfg)
    if problems:
        for p in problems:
            log.error("config: %s", p)
        return 2
    sched = parse_schedule(cfg.schedule, cfg.M)
    seed = cfg.seed if cfg.seed is not None else secrets.randbits(63)
    cfg = dataclasses.replace(cfg, seed=seed)
    start = time.perf_counter()
    try:
        rows, summary = _run(cfg, sched, seed)
    except UndefinedRatioError as e:
        log.error("%s", e)
        return 1
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    data = _csv_bytes(HEADERS[cfg.command], rows)
    name = f"{cfg.command}.csv"
    (out / name).write_bytes(data)
    manifest = {
        "config": cfg.to_dict(),
        "seed": seed,
        "schedule": {"spec": cfg.schedule, "s": list(sched.s), "inner": list(sched.inner),
                     "outer": list(sched.outer)},
        "prng": PRNG_IDENTITY,
        "code_version": __version__,
        "wall_time_s": time.perf_counter() - start,
        "outputs": {name: hashlib.sha256(data).hexdigest()},
        "summary": summary,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True, default=str))
    return 0


def _points(s: str) -> tuple[int, int]:
    a, b = s.split(",")
    return int(a), int(b)


def _floats(s: str) -> tuple[float, ...]:
    return tuple(float(v) for v in s.split(","))


def _ints(s: str) -> tuple[int, ...]:
    if ":" in s:
        a, b = s.split(":")
        return tuple(range(int(a), int(b) + 1))
    return tuple(int(v) for v in s.split(","))


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    common.add_argument("--config", help="JSON file with the same keys; flags override it")
    common.add_argument("--schedule", help="'paper [M]', 'desk [M] growth width' or 'explicit s=.. r=.. R=..'")
    common.add_argument("--M", type=int)
    common.add_argument("--N", type=int)
    common.add_argument("--t-max", dest="t_max", type=float)
    common.add_argument("--window", type=_floats)
    common.add_argument("--seed", type=int)
    common.add_argument("--samples", type=int)
    common.add_argument("--realizations", type=int)
    common.add_argument("--t", type=_floats, help="comma-separated times")
    common.add_argument("--eps", type=float)
    common.add_argument("--alpha", type=float)
    common.add_argument("--k", type=int)
    common.add_argument("--x", type=_points, nargs="+", help="points as 'x1,x2'")
    common.add_argument("--y", type=_points)
    common.add_argument("--radius", type=_ints)
    common.add_argument("--depths", type=_ints, help="'1:10' or '1,2,3'")
    common.add_argument("--grid", type=float)
    common.add_argument("--workers", type=int)
    common.add_argument("--out")
    p = argparse.ArgumentParser(prog="dynwalk", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for c in COMMANDS:
        sub.add_parser(c, parents=[common])
    return p


def config_from_args(argv=None) -> ExperimentConfig:
    ns = vars(build_parser().parse_args(argv))
    path = ns.pop("config", None)
    base = {}
    if path:
        try:
            base = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"cannot read config {path}: {e}") from None
    base.update(ns)
    if "window" in base and base["window"] is not None and len(base["window"]) != 2:
        raise ConfigError("window needs two values")
    return ExperimentConfig.from_dict(base)


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    try:
        cfg = config_from_args(argv)
    except (ConfigError, TypeError) as e:
        log.error("config: %s", e)
        return 2
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
