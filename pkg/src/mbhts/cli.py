"""Command-line entry point: ``mbhts <command> [options]``.

Exit status is 0 on success, 1 when ``bench`` finds an invariant
violation and 2 on bad input or a library error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time

import numpy as np

from . import harness
from .allocators import ALLOCATORS
from .errors import MbhtsError
from .feasibility import assess
from .learned import build_dataset, fit_allocator, load_model, save_model, TrainConfig
from .precoding import coupling_matrix, make_precoder, read_coupling_csv, write_coupling_csv
from .scenario import (SystemParams, build_channel, draw_channel, generate_user_layout,
                       load_params, read_channel_csv, save_params, write_channel_csv)

ALL_METHODS = ("jointopt", "satisset", "sumopt", "equal")


def _floats(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _words(text):
    return [v.strip().lower() for v in text.split(",") if v.strip()]


def _params(args):
    params = load_params(args.config) if args.config else SystemParams()
    return params if args.seed is None else params.replace(rng_seed=args.seed)


def _demands(xi, K):
    """A single value is broadcast to every user; otherwise one value per user."""
    xi = np.asarray(xi, dtype=float)
    if xi.size == 1:
        return np.full(K, xi.item())
    if xi.size != K:
        raise MbhtsError(f"expected 1 or {K} demand values, got {xi.size}")
    return xi


def _fmt_vec(v):
    return " ".join(f"{x:.6f}" for x in v)


def _channel(args, params):
    if getattr(args, "channel", None):
        return None, read_channel_csv(args.channel)
    return draw_channel(params, params.rng_seed)


# -- commands -------------------------------------------------------------------

def cmd_scenario_init(args):
    save_params(SystemParams(), args.out)
    print(f"wrote {args.out}")


def cmd_scenario_dump(args):
    params = _params(args)
    layout = generate_user_layout(params, params.rng_seed)
    channel = build_channel(params, layout, params.rng_seed)
    write_channel_csv(channel, args.out, layout)
    print(f"wrote {args.out} ({channel.n_beams} feeds x {channel.n_users} users, "
          f"seed {params.rng_seed})")


def cmd_precode(args):
    params = _params(args)
    channel = read_channel_csv(args.channel)
    W = make_precoder(args.method, channel.H, params.noise_power, params.max_power_w)
    mu = coupling_matrix(channel.H, W)
    write_coupling_csv(mu, args.out)
    print(f"wrote {args.out} ({args.method} coupling, {mu.shape[0]} users)")


def cmd_feasibility(args):
    params = _params(args)
    mu = read_coupling_csv(args.coupling)
    xi = _demands(args.xi, mu.shape[0])
    max_power = params.max_power_w if args.max_power is None else args.max_power
    report = assess(mu, params.noise_power, params.bandwidth_mhz, xi, max_power)
    if args.json:
        print(json.dumps(report.as_dict(), indent=2))
        return
    print(f"spectral_radius = {report.spectral_radius:.12g}")
    print(f"required_power_w = {report.required_power:.12g}")
    print(f"power_lower_bound_w = {report.power_lower_bound:.12g}")
    print(f"max_power_w = {max_power:.12g}")
    print(f"feasible = {str(report.feasible).lower()}")
    if report.minimal_powers is not None:
        print(f"minimal_powers_w = {_fmt_vec(report.minimal_powers)}")


def _print_result(res, precoder, xi):
    print(f"method = {res.method}")
    print(f"precoder = {precoder}")
    print(f"xi_mbps = {_fmt_vec(xi)}")
    print(f"powers_w = {_fmt_vec(res.powers)}")
    print(f"total_power_w = {res.powers.sum():.6f}")
    print(f"rates_mbps = {_fmt_vec(res.rates)}")
    print(f"satisfied = {' '.join(str(k) for k in sorted(res.satisfied))}")
    print(f"n_satisfied = {res.n_satisfied}")
    print(f"sum_rate_mbps = {res.sum_rate:.6f}")
    print(f"iterations = {res.iterations}")
    print(f"wall_time_ms = {res.wall_time_ms:.3f}")


def _write_trace(trace, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["n", "n_satisfied", "sum_rate_mbps"])
        for n, q, rate in trace:
            writer.writerow([n, q, f"{rate:.6f}"])


def cmd_allocate(args):
    params = _params(args)
    _, channel = _channel(args, params)
    W = make_precoder(args.precoder, channel.H, params.noise_power, params.max_power_w)
    mu = coupling_matrix(channel.H, W)
    xi = _demands(args.xi, mu.shape[0])
    res = ALLOCATORS[args.method](mu, params.noise_power, params.bandwidth_mhz, xi,
                                  params.max_power_w)
    _print_result(res, args.precoder, xi)
    if args.trace_csv:
        _write_trace(res.trace, args.trace_csv)


def cmd_train(args):
    params = _params(args)
    start = time.perf_counter()
    data = build_dataset(args.samples, args.test, params, seed=params.rng_seed,
                         xi=args.xi, precoder=args.precoder)
    hyper = TrainConfig(epochs=args.epochs, seed=params.rng_seed)
    allocator, history = fit_allocator(data, seed=params.rng_seed, hyper=hyper)
    save_model(allocator, args.out)
    val = history["validation"]
    print(f"samples = {args.samples} train, {args.test} test")
    print(f"epochs = {len(val) - 1}")
    print(f"test_mse_epoch0 = {val[0]:.6g}")
    print(f"test_mse_best = {min(val):.6g}")
    print(f"elapsed_s = {time.perf_counter() - start:.2f}")
    print(f"wrote {args.out}")


def cmd_predict(args):
    params = _params(args)
    allocator = load_model(args.model)
    _, channel = _channel(args, params)
    precoder = args.precoder or allocator.precoder or "rzf"
    W = make_precoder(precoder, channel.H, params.noise_power, params.max_power_w)
    mu = coupling_matrix(channel.H, W)
    level = allocator.xi if args.xi is None else args.xi
    xi = _demands(level, mu.shape[0])
    res = allocator.allocate(channel, mu, params.noise_power, params.bandwidth_mhz, xi,
                             params.max_power_w)
    _print_result(res, precoder, xi)


def cmd_bench(args):
    params = _params(args)
    methods = list(ALL_METHODS) if args.methods == ["all"] else args.methods
    learned = {}
    for path in args.model or []:
        allocator = load_model(path)
        learned[allocator.precoder or "rzf"] = allocator
    if learned and "learned" not in methods:
        methods.append("learned")
    config = harness.CampaignConfig(params=params, n_trials=args.trials,
                                    xi_levels=tuple(args.xi), methods=tuple(methods),
                                    precoders=tuple(args.precoder), base_seed=params.rng_seed,
                                    learned=learned, n_jobs=args.jobs)
    rows, records = harness.run_campaign(config)
    harness.emit_csv(rows, args.out, timing=args.timing)
    if args.trace_csv:
        harness.emit_trace_csv(records, args.trace_csv, timing=args.timing)
    failed = sum(r.failed for r in records)
    print(f"wrote {args.out} ({len(rows)} rows, {args.trials} trials, {failed} failed runs)")
    problems = harness.check_invariants(records, rows)
    for msg in problems:
        print(f"invariant violated: {msg}", file=sys.stderr)
    return 1 if problems else 0


# -- parser ---------------------------------------------------------------------

def build_parser():
    parser = argparse.ArgumentParser(prog="mbhts",
                                     description="Multi-beam satellite downlink power allocation.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="system parameter file (INI); defaults if omitted")
        p.add_argument("--seed", type=int, help="override the configured rng_seed")
        return p

    scen = sub.add_parser("scenario", help="system configuration and channel drops")
    scen_sub = scen.add_subparsers(dest="action", required=True)
    p = scen_sub.add_parser("init", help="write the default configuration file")
    p.add_argument("--out", default="system.ini")
    p.set_defaults(func=cmd_scenario_init)
    p = common(scen_sub.add_parser("dump", help="draw a channel and write it as CSV"))
    p.add_argument("--out", default="channel.csv")
    p.set_defaults(func=cmd_scenario_dump)

    p = common(sub.add_parser("precode", help="coupling matrix from a channel CSV"))
    p.add_argument("--method", choices=("zf", "rzf"), default="rzf")
    p.add_argument("--channel", required=True)
    p.add_argument("--out", default="coupling.csv")
    p.set_defaults(func=cmd_precode)

    p = common(sub.add_parser("feasibility", help="can every demand be met?"))
    p.add_argument("--coupling", required=True)
    p.add_argument("--xi", type=_floats, required=True,
                   help="demand in Mbps, one value or one per user")
    p.add_argument("--max-power", type=float, help="override the power budget (W)")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_feasibility)

    p = common(sub.add_parser("allocate", help="run one allocator on one drop"))
    p.add_argument("--method", choices=sorted(ALLOCATORS), default="jointopt")
    p.add_argument("--precoder", choices=("zf", "rzf"), default="rzf")
    p.add_argument("--xi", type=_floats, default=[500.0])
    p.add_argument("--channel", help="channel CSV instead of a fresh drop")
    p.add_argument("--trace-csv", help="write the per-round trace here")
    p.set_defaults(func=cmd_allocate)

    p = common(sub.add_parser("train", help="fit the learned allocator"))
    p.add_argument("--samples", type=int, default=25000)
    p.add_argument("--test", type=int, default=10000)
    p.add_argument("--precoder", choices=("zf", "rzf"), default="rzf")
    p.add_argument("--xi", type=float, default=500.0, help="demand used for the labels")
    p.add_argument("--epochs", type=int, default=TrainConfig.epochs)
    p.add_argument("--out", default="model.mlp")
    p.set_defaults(func=cmd_train)

    p = common(sub.add_parser("predict", help="learned allocation for one drop"))
    p.add_argument("--model", required=True)
    p.add_argument("--precoder", choices=("zf", "rzf"))
    p.add_argument("--xi", type=_floats)
    p.add_argument("--channel")
    p.set_defaults(func=cmd_predict)

    p = common(sub.add_parser("bench", help="Monte Carlo comparison of allocators"))
    p.add_argument("--trials", type=int, default=500)
    p.add_argument("--xi", type=_floats, default=[100.0, 250.0, 400.0, 500.0, 650.0, 800.0])
    p.add_argument("--methods", type=_words, default=["all"],
                   help="'all' or a list from jointopt,satisset,sumopt,equal")
    p.add_argument("--precoder", type=_words, default=["zf", "rzf"])
    p.add_argument("--model", action="append",
                   help="learned model file, keyed by its precoder; repeatable")
    p.add_argument("--out", default="results.csv")
    p.add_argument("--trace-csv", help="per-trial records")
    p.add_argument("--timing", action="store_true",
                   help="fill the time_ms column (makes output run-dependent)")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args) or 0
    except (MbhtsError, OSError) as exc:
        print(f"mbhts: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
