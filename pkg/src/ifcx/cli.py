"""Command-line front end (``ifcx``).

All rates and exponents are in nats unless ``--bits`` is given, in which
case rates are read and every rate or exponent is written in bits.

Sweep CSV columns, in order::

    <variable>, E_R1, E_B1, E1, E12, E1g2, LB, rho_star, lambda_star, branch

where ``<variable>`` is ``r1`` or ``r2``.  With ``--maxmin`` the columns
``E_R2, maxmin, q1, q2`` follow, and E_R1/E_B1/... refer to the max-min
compositions of that row.  JSON output is an array of records with the
same keys.

Exit status: 0 on success, 1 on usage or input errors, 2 on numerical
failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .baseline import baseline_exponents
from .channel import ChannelError, ChannelSpec, CompositionPair, load_channel
from .feasible import EmptyFeasibleSetError
from .lower_bound import DEFAULT_THETA_GRID, lower_bound, region_contains
from .montecarlo import CodebookConfig, estimate_error
from .theorem1 import (
    InnerMinima,
    RatePair,
    exponent_optimized,
    exponent_user2,
    maxmin_over_comps,
)

__all__ = ["run", "main", "SWEEP_COLUMNS"]

SWEEP_COLUMNS = ("E_R1", "E_B1", "E1", "E12", "E1g2", "LB", "rho_star", "lambda_star", "branch")
MAXMIN_COLUMNS = ("E_R2", "maxmin", "q1", "q2")
_LN2 = math.log(2.0)


class UsageError(Exception):
    pass


def _default_seed() -> int:
    raw = os.environ.get("IFCX_SEED")
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"IFCX_SEED must be an integer, got {raw!r}") from None


def _vector(text: str) -> np.ndarray:
    try:
        return np.array([float(t) for t in text.split(",")])
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


class _Units:
    def __init__(self, bits: bool):
        self.scale = _LN2 if bits else 1.0

    def rate_in(self, v: float) -> float:
        return v * self.scale

    def out(self, v: float) -> float:
        return v / self.scale


def _comps(args, ch: ChannelSpec) -> CompositionPair:
    q1 = args.q1 if args.q1 is not None else np.full(ch.x1_size, 1.0 / ch.x1_size)
    q2 = args.q2 if args.q2 is not None else np.full(ch.x2_size, 1.0 / ch.x2_size)
    comps = CompositionPair(q1, q2)
    comps.check_against(ch)
    return comps


def _rates(args, u: _Units) -> RatePair:
    return RatePair(u.rate_in(args.r1), u.rate_in(args.r2))


def _emit(record: dict, as_json: bool, out) -> None:
    if as_json:
        out.write(json.dumps(record) + "\n")
    else:
        for k, v in record.items():
            out.write(f"{k}: {_fmt(v)}\n")


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.10g}"
    if isinstance(v, (list, tuple)):
        return ",".join(_fmt(x) for x in v)
    return str(v)


def _warn_unconverged(flags: list[bool]) -> None:
    if not all(flags):
        print("warning: some inner minimizations stopped before meeting the stationarity tolerance", file=sys.stderr)


# ---------------------------------------------------------------- subcommands


def cmd_validate(args, u, out) -> None:
    ch = load_channel(args.channel)
    _emit(
        {
            "channel": str(args.channel),
            "alphabets": [ch.x1_size, ch.x2_size, ch.y1_size, ch.y2_size],
            "has_q2": ch.q2 is not None,
            "status": "valid",
        },
        args.json,
        out,
    )


def _exponent_record(res, u: _Units) -> dict:
    _warn_unconverged([res.diagnostics.get("s1_converged", True), res.diagnostics.get("s2_converged", True)])
    return {
        "E": u.out(res.value),
        "rho_star": res.best_params.rho,
        "lambda_star": res.best_params.lam,
        "branch": res.branch,
    }


def cmd_exponent(args, u, out) -> None:
    ch = load_channel(args.channel)
    res = exponent_optimized(_rates(args, u), _comps(args, ch), ch)
    rec = _exponent_record(res, u)
    _emit({"E_R1": rec.pop("E"), **rec}, args.json, out)


def cmd_exponent2(args, u, out) -> None:
    ch = load_channel(args.channel)
    res = exponent_user2(_rates(args, u), _comps(args, ch), ch)
    rec = _exponent_record(res, u)
    _emit({"E_R2": rec.pop("E"), **rec}, args.json, out)


def cmd_baseline(args, u, out) -> None:
    ch = load_channel(args.channel)
    r = _rates(args, u)
    b = baseline_exponents(r.r1, r.r2, _comps(args, ch), ch)
    _warn_unconverged([b.converged])
    _emit(
        {"E12": u.out(b.e_12), "E1g2": u.out(b.e_1_given_2), "E1": u.out(b.e_1), "E_B1": u.out(b.e_b1)},
        args.json,
        out,
    )


def cmd_bound(args, u, out) -> None:
    ch = load_channel(args.channel)
    lb = lower_bound(_rates(args, u), _comps(args, ch), ch, args.theta_grid)
    _emit({"LB": u.out(lb), "theta_grid": args.theta_grid}, args.json, out)


def cmd_region(args, u, out) -> None:
    ch = load_channel(args.channel)
    v = region_contains(_rates(args, u), _comps(args, ch), ch)
    _emit(
        {"verdict": "inside" if v.inside else "outside", "margin_1": u.out(v.margins[0]), "margin_2": u.out(v.margins[1])},
        args.json,
        out,
    )


def cmd_maxmin(args, u, out) -> None:
    ch = load_channel(args.channel)
    r = maxmin_over_comps(_rates(args, u), ch, args.grid_step)
    _emit(
        {
            "maxmin": u.out(r.value),
            "E_R1": u.out(r.e_r1),
            "E_R2": u.out(r.e_r2),
            "q1": [float(x) for x in r.comps.q1_comp],
            "q2": [float(x) for x in r.comps.q2_comp],
            "evaluated": r.evaluated,
        },
        args.json,
        out,
    )


def cmd_simulate(args, u, out) -> None:
    ch = load_channel(args.channel)
    comps = _comps(args, ch)
    if args.m1 is not None or args.m2 is not None:
        if args.m1 is None or args.m2 is None:
            raise UsageError("give both --m1 and --m2, or neither (then rates set the codebook sizes)")
        cfg = CodebookConfig(args.n, args.m1, args.m2, comps, args.seed, args.trials)
    else:
        r = _rates(args, u)
        cfg = CodebookConfig.from_rates(args.n, r.r1, r.r2, comps, args.seed, args.trials)
    est = estimate_error(cfg, ch, workers=args.jobs)
    _emit(
        {
            "n": cfg.n,
            "m1": cfg.m1,
            "m2": cfg.m2,
            "trials": est.trials,
            "errors": est.errors,
            "error_rate": est.rate,
            "ci95_half_width": est.half_width,
            "seed": cfg.seed,
        },
        args.json,
        out,
    )


def _sweep_row(ch, comps, rates: RatePair, theta_grid: int, cache) -> dict:
    res = exponent_optimized(rates, comps, ch, cache=cache)
    b = baseline_exponents(rates.r1, rates.r2, comps, ch)
    lb = lower_bound(rates, comps, ch, theta_grid)
    return {
        "E_R1": res.value,
        "E_B1": b.e_b1,
        "E1": b.e_1,
        "E12": b.e_12,
        "E1g2": b.e_1_given_2,
        "LB": lb,
        "rho_star": res.best_params.rho,
        "lambda_star": res.best_params.lam,
        "branch": res.branch,
    }


def _sweep_chunk(payload) -> list[dict]:
    ch, comps_spec, variable, values, fixed, theta_grid, grid_step = payload
    rows = []
    cache = None
    for v in values:
        rates = RatePair(v, fixed) if variable == "r1" else RatePair(fixed, v)
        extra = {}
        if comps_spec is None:
            mm = maxmin_over_comps(rates, ch, grid_step)
            comps = mm.comps
            extra = {
                "E_R2": mm.e_r2,
                "maxmin": mm.value,
                "q1": [float(x) for x in comps.q1_comp],
                "q2": [float(x) for x in comps.q2_comp],
            }
            row_cache = None
        else:
            comps = comps_spec
            if variable == "r1":
                if cache is None:
                    cache = InnerMinima(fixed, comps, ch)
                row_cache = cache
            else:
                row_cache = None
        rows.append({**_sweep_row(ch, comps, rates, theta_grid, row_cache), **extra})
    return rows


def cmd_sweep(args, u, out) -> None:
    ch = load_channel(args.channel)
    if args.step <= 0 or args.stop < args.start:
        raise UsageError("sweep needs step > 0 and start <= stop")
    count = int(math.floor((args.stop - args.start) / args.step + 1e-9)) + 1
    # grid values computed from the index, never by accumulation
    shown = [args.start + k * args.step for k in range(count)]
    values = [u.rate_in(v) for v in shown]
    fixed = u.rate_in(args.fixed)
    comps = None if args.maxmin else _comps(args, ch)
    jobs = max(1, int(args.jobs))
    chunks = np.array_split(np.arange(count), min(jobs, count))
    payloads = [
        (ch, comps, args.variable, [values[k] for k in idx], fixed, args.theta_grid, args.grid_step)
        for idx in chunks
        if len(idx)
    ]
    if jobs > 1 and len(payloads) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            parts = list(pool.map(_sweep_chunk, payloads))
    else:
        parts = [_sweep_chunk(p) for p in payloads]
    rows = [r for part in parts for r in part]

    header = [args.variable, *SWEEP_COLUMNS, *(MAXMIN_COLUMNS if args.maxmin else ())]
    records = []
    for v, r in zip(shown, rows):
        rec = {args.variable: v}
        for k in header[1:]:
            val = r[k]
            if k in ("E_R1", "E_B1", "E1", "E12", "E1g2", "LB", "E_R2", "maxmin"):
                val = u.out(val)
            rec[k] = val
        records.append(rec)

    if args.format == "json":
        text = json.dumps(records, indent=1) + "\n"
    else:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for rec in records:
            w.writerow([_fmt(rec[k]) if not isinstance(rec[k], list) else _fmt(rec[k]) for k in header])
        text = buf.getvalue()
    if args.out:
        Path(args.out).write_text(text)
    else:
        out.write(text)


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="ifcx",
        description="Error exponents of the two-user discrete memoryless interference channel.",
    )
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def common(sp, rates=True, comps=True):
        sp.add_argument("--channel", required=True, type=Path, help="channel JSON file")
        if rates:
            sp.add_argument("--r1", type=float, default=0.0, help="rate of user 1")
            sp.add_argument("--r2", type=float, default=0.0, help="rate of user 2")
        if comps:
            sp.add_argument("--q1", type=_vector, default=None, help="composition Q1, e.g. 0.5,0.5 (default uniform)")
            sp.add_argument("--q2", type=_vector, default=None, help="composition Q2 (default uniform)")
        sp.add_argument("--bits", action="store_true", help="read and write rates and exponents in bits")
        sp.add_argument("--json", action="store_true", help="print one JSON record")

    sp = sub.add_parser("validate", help="check a channel file")
    common(sp, rates=False, comps=False)
    sp.set_defaults(func=cmd_validate)

    sp = sub.add_parser("exponent", help="optimum-decoding exponent of user 1")
    common(sp)
    sp.set_defaults(func=cmd_exponent)

    sp = sub.add_parser("exponent2", help="optimum-decoding exponent of user 2")
    common(sp)
    sp.set_defaults(func=cmd_exponent2)

    sp = sub.add_parser("baseline", help="suboptimal-decoder exponents of user 1")
    common(sp)
    sp.set_defaults(func=cmd_baseline)

    sp = sub.add_parser("bound", help="four-law lower bound on the exponent of user 1")
    common(sp)
    sp.add_argument("--theta-grid", type=int, default=DEFAULT_THETA_GRID)
    sp.set_defaults(func=cmd_bound)

    sp = sub.add_parser("region", help="test a rate pair against the positivity region")
    common(sp)
    sp.set_defaults(func=cmd_region)

    sp = sub.add_parser("maxmin", help="compositions maximizing min(E_R1, E_R2) on a grid")
    common(sp, comps=False)
    sp.add_argument("--grid-step", type=float, default=0.05)
    sp.set_defaults(func=cmd_maxmin)

    sp = sub.add_parser("sweep", help="tabulate exponents along a rate axis")
    common(sp, rates=False)
    sp.add_argument("--variable", choices=("r1", "r2"), default="r1")
    sp.add_argument("--start", type=float, required=True)
    sp.add_argument("--stop", type=float, required=True)
    sp.add_argument("--step", type=float, required=True)
    sp.add_argument("--fixed", type=float, required=True, help="value of the other rate")
    sp.add_argument("--maxmin", action="store_true", help="use max-min compositions for every row")
    sp.add_argument("--grid-step", type=float, default=0.05)
    sp.add_argument("--theta-grid", type=int, default=DEFAULT_THETA_GRID)
    sp.add_argument("--format", choices=("csv", "json"), default="csv")
    sp.add_argument("--out", type=Path, default=None, help="output file (default stdout)")
    sp.add_argument("--jobs", type=int, default=1)
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("simulate", help="Monte Carlo error rate of user 1 under ML decoding")
    common(sp)
    sp.add_argument("--n", type=int, required=True, help="blocklength")
    sp.add_argument("--m1", type=int, default=None)
    sp.add_argument("--m2", type=int, default=None)
    sp.add_argument("--trials", type=int, default=10_000)
    sp.add_argument("--seed", type=int, default=None, help="default: IFCX_SEED or 0")
    sp.add_argument("--jobs", type=int, default=1)
    sp.set_defaults(func=cmd_simulate)
    return p


def run(argv: list[str] | None = None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return 0 if e.code == 0 else 1
    try:
        if getattr(args, "seed", 0) is None:
            args.seed = _default_seed()
        args.func(args, _Units(args.bits), out)
    except (UsageError, ChannelError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except (EmptyFeasibleSetError, FloatingPointError, np.linalg.LinAlgError, RuntimeError, ArithmeticError) as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return 2
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    return 0


def main() -> None:
    sys.exit(run())
