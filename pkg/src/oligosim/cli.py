"""Command-line interface.

Subcommands: simulate, steady, sweep, hc, mfa, bands, fit. Every run that
writes files also writes a JSON manifest next to its primary output with
the fully resolved configuration; ``--manifest run.manifest.json`` replays
that configuration (only --out, --force and --threads may be overridden)
and reproduces the CSV outputs byte for byte.

Scalar --h and --c0 select the symmetric-incumbent parametrization
(h, h, 1-2h) and (c0, c0, 1-2c0); comma triples give full control. Grid
flags accept start:stop:step with inclusive bounds. The seed comes from
--seed, else the OLIGOSIM_SEED environment variable, else 1.

Exit codes: 0 success, 2 usage or validation problems (including refusing
to overwrite without --force), 1 runtime failures.
"""

from __future__ import annotations

import argparse
import os
import sys
from datetime import datetime, timezone

import numpy as np

from . import outputs
from .calibration import (
    Adjustment,
    build_schedule,
    fit_conformity,
    load_series,
    simulate_bands,
)
from .engine import (
    DEFAULT_DELTA_T,
    DEFAULT_EPSILON,
    DEFAULT_EXTINCTION_THRESHOLD,
    DEFAULT_HC_TOLERANCE,
    DEFAULT_MAX_SWEEPS,
    SimConfig,
    _steady,
    derive_rng,
    find_hc,
    incumbent_share,
    run_trajectory,
    sweep,
)
from .mfa import DEFAULT_MAX_ITER, DEFAULT_TOL, fixed_point_scan, mfa_fixed_point
from .types import (
    AdvertisingField,
    ConfigError,
    DomainError,
    ModelKind,
    ParseError,
    ScanAmbiguityError,
    Shares,
)

SEED_ENV = "OLIGOSIM_SEED"
DEFAULT_SEED = 1
DEFAULT_BANDS_ADJUSTMENTS = [[2, 17, 24, 0.9]]


def parse_values(text: str) -> list:
    """A grid flag: scalar, or inclusive start:stop:step."""
    if ":" not in text:
        return [float(text)]
    parts = text.split(":")
    if len(parts) != 3:
        raise ConfigError(f"range {text!r} is not start:stop:step")
    start, stop, step = (float(x) for x in parts)
    if step <= 0 or stop < start:
        raise ConfigError(f"range {text!r} needs stop >= start and step > 0")
    n = int(np.floor((stop - start) / step + 1e-9)) + 1
    return [start + k * step for k in range(n)]


def parse_triple(text: str, symmetric) -> list:
    """A triple flag: 'a,b,c' verbatim, or a scalar fed to ``symmetric``."""
    if "," in text:
        parts = [float(x) for x in text.split(",")]
        if len(parts) != 3:
            raise ConfigError(f"{text!r} is not a comma triple")
        return parts
    t = symmetric(float(text))
    return [t.as_array()[0], t.as_array()[1], t.as_array()[2]]


def parse_adjustments(specs) -> list:
    """--adjust op:from:to:factor entries; a single 'none' clears the default."""
    if specs is None:
        return None
    if len(specs) == 1 and specs[0].strip().lower() == "none":
        return []
    parsed = []
    for spec in specs:
        parts = spec.split(":")
        if len(parts) != 4:
            raise ConfigError(f"--adjust {spec!r} is not op:from:to:factor")
        parsed.append([int(parts[0]), int(parts[1]), int(parts[2]), float(parts[3])])
    return parsed


def _require(args, *names) -> None:
    missing = [n for n in names if getattr(args, n.lstrip("-").replace("-", "_"), None) is None]
    if missing:
        raise ConfigError("missing required flags: " + ", ".join(missing))


def _resolve_seed(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get(SEED_ENV)
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise ConfigError(f"{SEED_ENV}={env!r} is not an integer") from None
    return DEFAULT_SEED


def _shares(triple) -> Shares:
    return Shares(float(triple[0]), float(triple[1]), float(triple[2]))


def _field(triple) -> AdvertisingField:
    return AdvertisingField(float(triple[0]), float(triple[1]), float(triple[2]))


def _fmt_triple(t) -> str:
    return "(" + ", ".join(outputs.fmt(v) for v in t) + ")"


# --- resolvers: argparse namespace -> fully materialized params dict -------

def _resolve_simulate(args) -> dict:
    _require(args, "--model", "--p", "--h", "--c0", "--updates")
    return {
        "model": args.model,
        "L": args.L,
        "p": args.p,
        "h": parse_triple(args.h, AdvertisingField.symmetric),
        "c0": parse_triple(args.c0, Shares.symmetric),
        "seed": _resolve_seed(args),
        "updates": args.updates,
        "record_every": args.record_every,
        "out": args.out,
    }


def _resolve_steady(args) -> dict:
    _require(args, "--model", "--p", "--h", "--c0")
    return {
        "model": args.model,
        "L": args.L,
        "p": args.p,
        "h": parse_triple(args.h, AdvertisingField.symmetric),
        "c0": parse_triple(args.c0, Shares.symmetric),
        "seed": _resolve_seed(args),
        "delta_T": args.delta_T,
        "epsilon": args.epsilon,
        "max_sweeps": args.max_sweeps,
        "out": args.out,
    }


def _resolve_sweep(args) -> dict:
    _require(args, "--model", "--p", "--h", "--c0", "--out")
    return {
        "model": args.model,
        "L": args.L,
        "p_values": parse_values(args.p),
        "h_values": parse_values(args.h),
        "c0_values": parse_values(args.c0),
        "n": args.n,
        "seed": _resolve_seed(args),
        "delta_T": args.delta_T,
        "epsilon": args.epsilon,
        "max_sweeps": args.max_sweeps,
        "threads": args.threads,
        "out": args.out,
    }


def _resolve_hc(args) -> dict:
    _require(args, "--model", "--p")
    return {
        "model": args.model,
        "L": args.L,
        "p": args.p,
        "c0": args.c0,
        "n": args.n,
        "seed": _resolve_seed(args),
        "extinction_threshold": args.extinction_threshold,
        "tolerance": args.tol,
        "delta_T": args.delta_T,
        "epsilon": args.epsilon,
        "max_sweeps": args.max_sweeps,
        "threads": args.threads,
        "out": args.out,
    }


def _resolve_mfa(args) -> dict:
    _require(args, "--model", "--p", "--h", "--c0")
    symmetric_scan = "," not in args.h
    params = {
        "model": args.model,
        "p_values": parse_values(args.p),
        "tol": args.tol,
        "max_iter": args.max_iter,
        "out": args.out,
    }
    if symmetric_scan:
        if "," in args.c0 or ":" in args.c0:
            raise ConfigError("symmetric mfa scan takes a scalar --c0")
        params["h_values"] = parse_values(args.h)
        params["c0"] = float(args.c0)
    else:
        if args.out is not None:
            raise ConfigError("mfa --out requires the symmetric parametrization "
                              "(scalar --h and --c0)")
        params["h_triple"] = parse_triple(args.h, AdvertisingField.symmetric)
        params["c0_triple"] = parse_triple(args.c0, Shares.symmetric)
    return params


def _resolve_calibration(args, default_p_key) -> dict:
    _require(args, "--model", "--data", "--out")
    series = load_series(args.data)
    if args.c0 is None:
        c0 = list(series.records[0].shares.as_array())
    else:
        c0 = parse_triple(args.c0, Shares.symmetric)
    adjustments = parse_adjustments(args.adjust)
    if adjustments is None:
        adjustments = [a for a in DEFAULT_BANDS_ADJUSTMENTS if a[2] <= series.T]
    for op, t_from, t_to, factor in adjustments:
        Adjustment(op, t_from, t_to, factor)  # validate eagerly
        if t_to > series.T:
            raise ConfigError(f"--adjust range [{t_from}, {t_to}] outside 1..{series.T}")
    if args.updates % series.T != 0:
        raise ConfigError(f"--updates {args.updates} is not divisible by T={series.T}")
    params = {
        "model": args.model,
        "L": args.L,
        "c0": c0,
        "n": args.n,
        "updates": args.updates,
        "adjustments": adjustments,
        "data": args.data,
        "seed": _resolve_seed(args),
        "threads": args.threads,
        "out": args.out,
    }
    params.update(default_p_key(args))
    return params


def _resolve_bands(args) -> dict:
    return _resolve_calibration(args, lambda a: {"p": a.p})


def _resolve_fit(args) -> dict:
    return _resolve_calibration(args, lambda a: {"p_grid": parse_values(a.p_grid)})


# --- runners: params dict -> outputs written + summary printed -------------

def _run_simulate(params, force) -> list:
    cfg = SimConfig(ModelKind.parse(params["model"]), params["L"], params["p"],
                    _field(params["h"]), _shares(params["c0"]), params["seed"])
    traj = run_trajectory(cfg, params["updates"], params["record_every"])
    written = []
    if params["out"]:
        outputs.write_csv(params["out"], outputs.TRAJECTORY_HEADER,
                          outputs.trajectory_rows(traj), force)
        written.append(params["out"])
    final = traj.shares[-1]
    print(f"final shares after {params['updates']} updates: {_fmt_triple(final)}")
    return written


def _run_steady(params, force) -> list:
    cfg = SimConfig(ModelKind.parse(params["model"]), params["L"], params["p"],
                    _field(params["h"]), _shares(params["c0"]), params["seed"],
                    params["max_sweeps"])
    if params["delta_T"] < 1:
        raise ConfigError(f"delta_T={params['delta_T']} < 1")
    if params["epsilon"] <= 0:
        raise ConfigError(f"epsilon={params['epsilon']!r} must be > 0")
    result, samples = _steady(cfg, derive_rng(cfg.seed), params["delta_T"],
                              params["epsilon"])
    written = []
    if params["out"]:
        rows = ((float(t), row[0], row[1], row[2]) for t, row in enumerate(samples))
        outputs.write_csv(params["out"], outputs.TRAJECTORY_HEADER, rows, force)
        written.append(params["out"])
    c = result.c_inf
    print(f"c_inf = {_fmt_triple((c.c1, c.c2, c.c3))}  t_T={result.t_T} "
          f"delta_T={result.delta_T} converged={result.converged}")
    return written


def _run_sweep(params, force) -> list:
    diagram = sweep(ModelKind.parse(params["model"]), params["p_values"],
                    params["h_values"], params["c0_values"], params["L"],
                    params["n"], params["seed"], params["delta_T"],
                    params["epsilon"], params["max_sweeps"], params["threads"])
    outputs.write_csv(params["out"], outputs.DIAGRAM_HEADER,
                      outputs.diagram_rows(diagram), force)
    print(f"swept {len(diagram.points)} nodes -> {params['out']}")
    return [params["out"]]


def _run_hc(params, force) -> list:
    result = find_hc(ModelKind.parse(params["model"]), params["p"], params["c0"],
                     params["L"], params["extinction_threshold"], params["tolerance"],
                     params["n"], params["seed"], params["delta_T"],
                     params["epsilon"], params["max_sweeps"], params["threads"])
    written = []
    if params["out"]:
        rows = ((params["p"], h, params["c0"], res.mean.c1, res.mean.c2,
                 res.mean.c3, res.se[0], res.se[1], res.se[2])
                for h, res in result.scan)
        outputs.write_csv(params["out"], outputs.DIAGRAM_HEADER, rows, force)
        written.append(params["out"])
    if result.h_c is None:
        print(f"h_c = none (p={outputs.fmt(params['p'])}; no critical advertising "
              "level on the scanned range)")
    else:
        lo, hi = result.bracket
        print(f"h_c = {outputs.fmt(result.h_c)}  bracket=({outputs.fmt(lo)}, "
              f"{outputs.fmt(hi)})  tolerance={outputs.fmt(result.tolerance)}")
    return written


def _run_mfa(params, force) -> list:
    model = ModelKind.parse(params["model"])
    if "h_triple" in params:
        h = _field(params["h_triple"])
        c0 = _shares(params["c0_triple"])
        for p in params["p_values"]:
            res = mfa_fixed_point(model, c0, p, h, params["tol"], params["max_iter"])
            c = res.c_inf
            print(f"p={outputs.fmt(p)}: c_inf = {_fmt_triple((c.c1, c.c2, c.c3))}  "
                  f"iterations={res.iterations} residual={outputs.fmt(res.residual)} "
                  f"clamped={int(res.clamped)}")
        return []
    scan = list(fixed_point_scan(model, params["p_values"], params["h_values"],
                                 params["c0"], params["tol"], params["max_iter"]))
    written = []
    if params["out"]:
        outputs.write_csv(params["out"], outputs.MFA_HEADER,
                          outputs.mfa_scan_rows(scan), force)
        written.append(params["out"])
    if len(scan) == 1:
        _, _, _, res = scan[0]
        c = res.c_inf
        print(f"c_inf = {_fmt_triple((c.c1, c.c2, c.c3))}  iterations={res.iterations} "
              f"residual={outputs.fmt(res.residual)} clamped={int(res.clamped)}")
    else:
        print(f"solved {len(scan)} fixed points" +
              (f" -> {params['out']}" if params["out"] else ""))
    return written


def _calibration_inputs(params):
    series = load_series(params["data"])
    adjustments = [Adjustment(*a) for a in params["adjustments"]]
    schedule = build_schedule(series, adjustments, params["updates"])
    return series, schedule, _shares(params["c0"])


def _run_bands(params, force) -> list:
    _, schedule, c0 = _calibration_inputs(params)
    bands = simulate_bands(ModelKind.parse(params["model"]), params["p"],
                           params["L"], c0, schedule, params["n"], params["seed"],
                           params["threads"])
    outputs.write_csv(params["out"], outputs.BANDS_HEADER,
                      outputs.bands_rows(bands), force)
    print(f"bands for {bands.quarters.size} quarters x 3 operators -> {params['out']}")
    return [params["out"]]


def _run_fit(params, force) -> list:
    series, schedule, c0 = _calibration_inputs(params)
    fit = fit_conformity(ModelKind.parse(params["model"]), series, schedule,
                         params["L"], c0, params["p_grid"], params["n"],
                         params["seed"], params["threads"])
    outputs.write_csv(params["out"], outputs.FIT_HEADER, outputs.fit_rows(fit), force)
    print(f"best_p = {outputs.fmt(fit.best_p)}  score={outputs.fmt(float(fit.scores.min()))} "
          f"({fit.score_tag}) -> {params['out']}")
    return [params["out"]]


RESOLVERS = {
    "simulate": _resolve_simulate,
    "steady": _resolve_steady,
    "sweep": _resolve_sweep,
    "hc": _resolve_hc,
    "mfa": _resolve_mfa,
    "bands": _resolve_bands,
    "fit": _resolve_fit,
}

RUNNERS = {
    "simulate": _run_simulate,
    "steady": _run_steady,
    "sweep": _run_sweep,
    "hc": _run_hc,
    "mfa": _run_mfa,
    "bands": _run_bands,
    "fit": _run_fit,
}


def _add_common(sub, model=True, seed=True, threads=False, out_required=False):
    if model:
        sub.add_argument("--model", choices=["cf", "cap"])
    if seed:
        sub.add_argument("--seed", type=int, default=None,
                         help=f"base RNG seed (fallback: ${SEED_ENV}, then {DEFAULT_SEED})")
    if threads:
        sub.add_argument("--threads", type=int, default=1,
                         help="replica workers; 1 is the serial audit mode")
    sub.add_argument("--out", default=None,
                     help="output CSV path" + (" (required)" if out_required else " (optional)"))
    sub.add_argument("--force", action="store_true",
                     help="overwrite existing outputs")
    sub.add_argument("--manifest", default=None, metavar="PATH",
                     help="replay a recorded run manifest")


def _add_steady_knobs(sub):
    sub.add_argument("--delta-T", dest="delta_T", type=int, default=DEFAULT_DELTA_T)
    sub.add_argument("--epsilon", type=float, default=DEFAULT_EPSILON)
    sub.add_argument("--max-sweeps", dest="max_sweeps", type=int,
                     default=DEFAULT_MAX_SWEEPS)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="oligosim",
        description="Three-brand market dynamics: lattice Monte Carlo, mean-field "
                    "maps, criticality search and conformity calibration.")
    subs = parser.add_subparsers(dest="command", required=True)

    sp = subs.add_parser("simulate", help="record one lattice trajectory")
    sp.add_argument("--p", type=float, default=None)
    sp.add_argument("--h", default=None, help="scalar (symmetric) or triple a,b,c")
    sp.add_argument("--c0", default=None, help="scalar (symmetric) or triple a,b,c")
    sp.add_argument("--L", type=int, default=100)
    sp.add_argument("--updates", type=int, default=None)
    sp.add_argument("--record-every", dest="record_every", type=int, default=None,
                    help="updates between samples (default: one sweep)")
    _add_common(sp)

    sp = subs.add_parser("steady", help="run one replica to its steady state")
    sp.add_argument("--p", type=float, default=None)
    sp.add_argument("--h", default=None)
    sp.add_argument("--c0", default=None)
    sp.add_argument("--L", type=int, default=100)
    _add_steady_knobs(sp)
    _add_common(sp)

    sp = subs.add_parser("sweep", help="ensemble phase diagram over (p, h, c0)")
    sp.add_argument("--p", default=None, help="scalar or start:stop:step")
    sp.add_argument("--h", default=None, help="scalar or start:stop:step (symmetric)")
    sp.add_argument("--c0", default=None, help="scalar or start:stop:step (symmetric)")
    sp.add_argument("--L", type=int, default=100)
    sp.add_argument("--n", type=int, default=1000, help="replicas per node")
    _add_steady_knobs(sp)
    _add_common(sp, threads=True, out_required=True)

    sp = subs.add_parser("hc", help="locate the critical advertising level")
    sp.add_argument("--p", type=float, default=None)
    sp.add_argument("--c0", type=float, default=0.4, help="incumbent initial share")
    sp.add_argument("--L", type=int, default=100)
    sp.add_argument("--n", type=int, default=1000, help="replicas per evaluation")
    sp.add_argument("--extinction-threshold", dest="extinction_threshold",
                    type=float, default=DEFAULT_EXTINCTION_THRESHOLD)
    sp.add_argument("--tol", type=float, default=DEFAULT_HC_TOLERANCE,
                    help="bracket width to bisect down to")
    _add_steady_knobs(sp)
    _add_common(sp, threads=True)

    sp = subs.add_parser("mfa", help="mean-field fixed points")
    sp.add_argument("--p", default=None, help="scalar or start:stop:step")
    sp.add_argument("--h", default=None,
                    help="triple a,b,c, or scalar / start:stop:step (symmetric)")
    sp.add_argument("--c0", default=None)
    sp.add_argument("--tol", type=float, default=DEFAULT_TOL)
    sp.add_argument("--max-iter", dest="max_iter", type=int, default=DEFAULT_MAX_ITER)
    _add_common(sp, seed=False)

    for name, help_text in (("bands", "quantile band envelopes from market data"),
                            ("fit", "grid-fit the conformity level to market data")):
        sp = subs.add_parser(name, help=help_text)
        sp.add_argument("--data", default=None, help="quarterly market CSV")
        if name == "bands":
            sp.add_argument("--p", type=float, default=0.4)
        else:
            sp.add_argument("--p-grid", dest="p_grid", default="0.1:0.9:0.05",
                            help="scalar or start:stop:step")
        sp.add_argument("--L", type=int, default=100)
        sp.add_argument("--c0", default=None,
                        help="initial shares (default: first observed row)")
        sp.add_argument("--n", type=int, default=1000, help="trajectories")
        sp.add_argument("--updates", type=int, default=4212,
                        help="total elementary updates over the horizon")
        sp.add_argument("--adjust", action="append", default=None,
                        metavar="OP:FROM:TO:FACTOR",
                        help="advertising adjustment; repeatable; 'none' clears "
                             "the default 2:17:24:0.9")
        _add_common(sp, threads=True, out_required=True)
    return parser


def dispatch(argv=None) -> int:
    """Parse argv, run the subcommand, write outputs plus manifest."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    started = datetime.now(timezone.utc)
    try:
        if args.manifest:
            doc = outputs.load_manifest(args.manifest)
            if doc["command"] != args.command:
                raise ConfigError(
                    f"manifest records a {doc['command']!r} run; invoked {args.command!r}")
            params = dict(doc["params"])
            if args.out is not None:
                params["out"] = args.out
            if "threads" in params and getattr(args, "threads", None) not in (None, 1):
                params["threads"] = args.threads
        else:
            params = RESOLVERS[args.command](args)
    except (DomainError, ConfigError, ParseError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    try:
        written = RUNNERS[args.command](params, args.force)
    except FileExistsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (DomainError, ConfigError, ParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ScanAmbiguityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        for h, inc in exc.scan:
            print(f"  h={outputs.fmt(h)} incumbent={outputs.fmt(inc)}", file=sys.stderr)
        return 1
    except Exception as exc:  # runtime failure
        print(f"error: {exc}", file=sys.stderr)
        return 1

    if written:
        outputs.write_manifest(written[0], args.command, params, written,
                               params.get("seed", 0), started, force=True)
    return 0


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
