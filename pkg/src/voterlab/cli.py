"""Command-line runner binding all modules.

Subcommands: simulate (one traced run from a config file), verify (named
verification suites), conductance (exact value or Cheeger interval),
oracle (direct small-instance queries), scaling (consensus-time exponent
fits). Every artifact embeds the resolved configuration, seed, and package
version. Exit codes: 0 success, 1 invalid config/arguments, 2 simulate hit
the round cap.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import __version__, dynamics, oracle, stats, suites
from .config import (
    ConfigInvalid,
    load_config,
    parse_family_string,
)
from .graphs import (
    Disconnected,
    GraphError,
    TooLargeForExact,
    conductance_cheeger_bounds,
    conductance_exact,
    read_edge_list,
)


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=None, help="seed override")
    p.add_argument("--out-dir", default=".", help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="voterlab",
        description="voter-model opinion dynamics laboratory",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="run one traced simulation")
    p_sim.add_argument("--config", required=True)
    p_sim.add_argument("--threads", type=int, default=0)
    _add_common(p_sim)

    p_ver = sub.add_parser("verify", help="run a named verification suite")
    p_ver.add_argument("suite", help=f"one of {sorted(suites.SUITES)}")
    p_ver.add_argument("--scale", type=float, default=1.0, help="budget scale factor")
    _add_common(p_ver)

    p_con = sub.add_parser("conductance", help="conductance of a graph")
    src = p_con.add_mutually_exclusive_group(required=True)
    src.add_argument("--graph", help="edge-list file (header 'n m')")
    src.add_argument("--family", help="family spec, e.g. cycle:8 or regular:64:3:7")
    p_con.add_argument("--tol", type=float, default=1e-9)

    p_or = sub.add_parser("oracle", help="exact small-instance queries")
    p_or.add_argument("query", choices=["fixation", "consensus-time", "drift-upper"])
    p_or.add_argument("--family", required=True)
    p_or.add_argument("--state-bits", type=int, default=1,
                      help="bitmask of nodes holding opinion 0")
    p_or.add_argument("--distinct", action="store_true",
                      help="consensus-time query: start from distinct opinions")
    p_or.add_argument("--out", default=None, help="write certificate rows here")

    p_sc = sub.add_parser("scaling", help="fit a consensus-time exponent")
    p_sc.add_argument("--family", default="cycle", choices=["cycle"])
    p_sc.add_argument("--sizes", default="32,64,128,256")
    p_sc.add_argument("--trials", type=int, default=500)
    _add_common(p_sc)
    return parser


def cmd_simulate(args) -> int:
    try:
        cfg = load_config(args.config)
        g = cfg.build_graph() if cfg.provider.get("kind", "static") == "static" else None
        provider = cfg.build_provider(g)
        seed = cfg.seed(args.seed)
        n = provider.degree_sequence.shape[0]
        init = cfg.initial_assignment(n, seed)
        bias = cfg.bias()
    except (ConfigInvalid, GraphError, KeyError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    monitors = tuple(k for k, v in cfg.monitors.items() if v)
    trace = dynamics.run_until_consensus(
        provider,
        init,
        model=cfg.model.get("kind", "standard"),
        bias=bias,
        max_rounds=int(cfg.run.get("max_rounds", 10**6)),
        seed=seed,
        monitors=monitors,
        regeneration=bool(cfg.run.get("regeneration", False)),
        record_trace=True,
    )
    out_dir = args.out_dir if args.out_dir != "." else cfg.output.get("out_dir", ".")
    os.makedirs(out_dir, exist_ok=True)
    prefix = cfg.output.get("prefix", "run")
    trace.to_csv(os.path.join(out_dir, f"{prefix}_trace.csv"))
    trace.write_summary(
        os.path.join(out_dir, f"{prefix}_summary.json"),
        extra={"config": cfg.resolved(), "resolved_seed": seed},
    )
    print(f"T = {trace.T}, outputs in {out_dir}/")
    return 2 if trace.max_rounds_exceeded else 0


def cmd_verify(args) -> int:
    try:
        verdict = suites.run_suite(
            args.suite, seed=args.seed if args.seed is not None else 0, scale=args.scale
        )
    except suites.UnknownSuite as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    path = suites.write_verdict(verdict, args.out_dir)
    status = "PASS" if verdict["passed"] else "FAIL"
    print(f"{args.suite}: {status} ({path})")
    return 0 if verdict["passed"] else 1


def cmd_conductance(args) -> int:
    try:
        g = read_edge_list(args.graph) if args.graph else parse_family_string(args.family)
    except (ConfigInvalid, GraphError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    try:
        res = conductance_exact(g)
        print(f"exact {res.value:.12g}")
        return 0
    except TooLargeForExact:
        print("exact enumeration too large; falling back to Cheeger bounds",
              file=sys.stderr)
        res = conductance_cheeger_bounds(g, tol=args.tol)
        print(f"cheeger [{res.lower:.12g}, {res.upper:.12g}]")
        return 0
    except Disconnected as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def cmd_oracle(args) -> int:
    try:
        g = parse_family_string(args.family)
    except (ConfigInvalid, GraphError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if args.query == "consensus-time":
        init = (
            np.arange(g.n)
            if args.distinct
            else np.array(
                [0 if (args.state_bits >> u) & 1 else 1 for u in range(g.n)],
                dtype=np.int64,
            )
        )
        sol = oracle.exact_expected_consensus_time(g, init)
        print(f"E[T] = {sol.expected_absorption_time:.12g} "
              f"(states: {sol.state_space_size})")
        return 0
    state = np.array(
        [0 if (args.state_bits >> u) & 1 else 1 for u in range(g.n)], dtype=np.int64
    )
    if args.query == "fixation":
        sol = oracle.exact_fixation_probability(g, state)
        print(f"P(opinion 0 prevails) = {sol.absorption_probabilities[0]:.12g} "
              f"E[absorption] = {sol.expected_absorption_time:.12g}")
        return 0
    certs = []
    if args.state_bits:
        certs.append(oracle.verify_drift_upper(g, state))
    else:
        for bits in range(1, 2**g.n - 1):
            s = np.array([0 if (bits >> u) & 1 else 1 for u in range(g.n)])
            certs.append(oracle.verify_drift_upper(g, s))
    ok = all(c.satisfied for c in certs)
    print(f"drift-upper: {'PASS' if ok else 'FAIL'} over {len(certs)} state(s)")
    if args.out:
        with open(args.out, "w") as fh:
            json.dump([c.row() for c in certs], fh, indent=2)
            fh.write("\n")
    return 0 if ok else 1


def cmd_scaling(args) -> int:
    sizes = [int(s) for s in args.sizes.split(",")]
    seed = args.seed if args.seed is not None else 0
    medians = []
    rows = []
    for n in sizes:
        from .graphs import cycle_graph

        ts = stats.mc_consensus_times(cycle_graph(n), np.arange(n), args.trials, seed + n)
        med = float(np.median(ts))
        medians.append(med)
        rows.append((n, med, float(ts.mean())))
    try:
        fit = stats.fit_scaling(sizes, medians)
    except stats.InsufficientSizes as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    os.makedirs(args.out_dir, exist_ok=True)
    csv_path = os.path.join(args.out_dir, "scaling.csv")
    with open(csv_path, "w") as fh:
        fh.write("n,median_T,mean_T\n")
        for n, med, mean in rows:
            fh.write(f"{n},{med:.17g},{mean:.17g}\n")
    summary = fit.summary()
    summary.update({"seed": seed, "trials": args.trials, "version": __version__})
    with open(os.path.join(args.out_dir, "scaling.json"), "w") as fh:
        json.dump(summary, fh, indent=2)
        fh.write("\n")
    print(f"exponent = {fit.exponent:.4f} +/- {fit.stderr:.4f} ({csv_path})")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "simulate":
        return cmd_simulate(args)
    if args.command == "verify":
        return cmd_verify(args)
    if args.command == "conductance":
        return cmd_conductance(args)
    if args.command == "oracle":
        return cmd_oracle(args)
    if args.command == "scaling":
        return cmd_scaling(args)
    raise AssertionError("unreachable")


if __name__ == "__main__":
    sys.exit(main())
