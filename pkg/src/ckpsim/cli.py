"""Command-line entry points.

Subcommands: simulate (trials at one parameter point, artifacts to a
directory), sweep (grid of points, phase.csv), drift (exact one-step
certificates on harvested states), oracle-validate (sampler against the
exact horizon law), urn (growth-urn sampler against closed-form
moments).

Exit codes: 0 success, 2 configuration error, 3 resource refusal (the
exact enumeration would exceed its branch budget).
"""

from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from .analysis import (drift_certificate, harvest_states, polya_urn_oracle,
                       standard_bound)
from .harness import (ConfigError, RunConfig, SweepGrid, make_init,
                      run_sweep, run_trials, write_run)
from .oracle import BudgetExceededError, compare, enumerate_horizon
from .rng import split
from .state import GeneralRootCT, Params, SimpleRootCF, new_state

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_BUDGET = 3


def _add_model_args(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--epsilon", default="0",
                    help="error probability (float or a/b)")
    sp.add_argument("--p", required=True,
                    help="check probability (float or a/b)")
    sp.add_argument("--k", required=True,
                    help="check depth (integer or 'inf')")
    sp.add_argument("--seed", type=int, default=1)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="ckp",
        description="Simulation and exact verification of cumulative "
                    "knowledge processes on preferential-attachment trees.")
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("simulate", help="run independent trials")
    _add_model_args(sp)
    sp.add_argument("--init", default="simple",
                    choices=["simple", "general", "univalent"])
    sp.add_argument("--t-max", type=int, required=True)
    sp.add_argument("--trials", type=int, default=100)
    sp.add_argument("--threads", type=int, default=None)
    sp.add_argument("--out", type=Path, required=True)

    sp = sub.add_parser("sweep", help="grid of parameter points")
    sp.add_argument("--epsilon", default="0",
                    help="comma-separated error probabilities")
    sp.add_argument("--p", required=True,
                    help="comma-separated check probabilities")
    sp.add_argument("--k", required=True,
                    help="comma-separated check depths")
    sp.add_argument("--init", default="simple",
                    choices=["simple", "general", "univalent"])
    sp.add_argument("--t-max", type=int, required=True)
    sp.add_argument("--trials", type=int, default=100)
    sp.add_argument("--seed", type=int, default=1)
    sp.add_argument("--out", type=Path, required=True)

    sp = sub.add_parser("drift",
                        help="exact one-step drift certificates")
    _add_model_args(sp)
    sp.add_argument("--init", default="simple",
                    choices=["simple", "general"])
    sp.add_argument("--potential", default="exp",
                    choices=["exp", "lc", "combined", "reliability"])
    sp.add_argument("--states", type=int, default=100,
                    help="number of harvested states to certify")
    sp.add_argument("--t-cap", type=int, default=64)

    sp = sub.add_parser("oracle-validate",
                        help="sampler vs exact horizon distribution")
    _add_model_args(sp)
    sp.add_argument("--init", default="simple",
                    choices=["simple", "general"])
    sp.add_argument("--horizon", type=int, default=6)
    sp.add_argument("--samples", type=int, default=100000)
    sp.add_argument("--budget", type=int, default=100_000_000)

    sp = sub.add_parser("urn", help="growth urn sampler vs closed forms")
    sp.add_argument("--t0", type=int, required=True)
    sp.add_argument("--t", type=int, required=True)
    sp.add_argument("--trials", type=int, default=100000)
    sp.add_argument("--seed", type=int, default=1)
    return ap


def cmd_simulate(args) -> int:
    config = RunConfig.make(args.epsilon, args.p, args.k, args.init,
                            args.t_max, args.trials, args.seed,
                            threads=args.threads)
    results = run_trials(config)
    summary = write_run(args.out, config, results)
    print(json.dumps({k: summary[k] for k in
                      ("trials", "survived", "survival_frequency",
                       "survival_wilson95", "regime")}))
    print(f"artifacts written to {args.out}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    grid = SweepGrid.make(
        [s for s in args.epsilon.split(",") if s],
        [s for s in args.p.split(",") if s],
        [s for s in args.k.split(",") if s],
        args.init, args.t_max, args.trials, args.seed)
    rows = run_sweep(grid, args.out)
    for row in rows:
        c = row["config"]
        print(f"eps={c['eps']} p={c['p']} k={c['k']}: "
              f"survival {row['survival_frequency']:.4f} ({row['regime']})")
    print(f"artifacts written to {args.out}")
    return EXIT_OK


def cmd_drift(args) -> int:
    params = Params.make(args.epsilon, args.p, args.k)
    init = SimpleRootCF() if args.init == "simple" else GeneralRootCT()
    bound = standard_bound(args.potential, params)
    require = None
    if args.potential in ("exp", "lc"):
        from . import potentials
        fn = potentials.phi_exp if args.potential == "exp" \
            else potentials.phi_lc
        require = lambda st: fn(st) > 0
    states = harvest_states(params, init, args.states, args.seed,
                            t_cap=args.t_cap, require=require)
    ok = 0
    worst = None
    for st in states:
        cert = drift_certificate(st, args.potential, claimed_bound=bound)
        ok += cert.satisfied
        if worst is None or (cert.exact_expected_delta - bound) < worst:
            worst = cert.exact_expected_delta - bound
    print(f"potential={args.potential} bound={bound} "
          f"satisfied {ok}/{len(states)} "
          f"(worst margin {float(worst):.6g})")
    return EXIT_OK if ok == len(states) else EXIT_CONFIG


def cmd_oracle_validate(args) -> int:
    params = Params.make(args.epsilon, args.p, args.k)
    init = SimpleRootCF() if args.init == "simple" else GeneralRootCT()
    dist = enumerate_horizon(params, init, args.horizon, budget=args.budget)
    counts: dict = {}
    for i in range(args.samples):
        rng = split(args.seed, i)
        st = new_state(params, init, capacity=args.horizon + 4)
        from .evolution import MetricsPlan, run
        run(st, args.horizon, rng, stop_on_extinction=True,
            plan=MetricsPlan(times=[]), record=lambda s: None)
        dg = st.digest()
        counts[dg] = counts.get(dg, 0) + 1
    report = compare(counts, dist)
    print(f"atoms={report.n_atoms} samples={report.n_samples} "
          f"TV={report.total_variation:.5f} "
          f"chi2 p={report.chi2_pvalue:.4f} "
          f"({report.chi2_cells} cells)")
    return EXIT_OK


def cmd_urn(args) -> int:
    oracle = polya_urn_oracle(args.t0, args.t)
    vals = np.empty(args.trials, dtype=np.int64)
    for i in range(args.trials):
        vals[i] = oracle.sample(split(args.seed, i))
    mean = float(vals.mean())
    m2 = float((vals.astype(np.float64) ** 2).mean())
    print(f"t0={args.t0} t={args.t} trials={args.trials}")
    print(f"mean {mean:.4f} (exact {float(oracle.mean):.4f}); "
          f"second moment {m2:.4f} "
          f"(exact {float(oracle.second_moment):.4f})")
    return EXIT_OK


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code not in (0, None) else 0
    try:
        if args.command == "simulate":
            return cmd_simulate(args)
        if args.command == "sweep":
            return cmd_sweep(args)
        if args.command == "drift":
            return cmd_drift(args)
        if args.command == "oracle-validate":
            return cmd_oracle_validate(args)
        if args.command == "urn":
            return cmd_urn(args)
        return EXIT_CONFIG
    except BudgetExceededError as exc:
        print(f"refused: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (ConfigError, ValueError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
