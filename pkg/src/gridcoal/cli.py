"""Command-line entry points: run experiments, inspect policies and chains."""

import argparse
import csv
import sys

import numpy as np

from .dynamics import absorbing_states, ergodic_sets, stationary_distribution
from .harness import SCHEMES, run_experiment, write_report
from .policy import solve_pricing_policy
from .scenario import load_scenario

_SCHEME_ALIASES = {"icg": "ICG", "cent": "CENT", "nocoop": "NoCoop"}


def _add_scenario_args(parser):
    parser.add_argument("--scenario", required=True,
                        help="scenario file path or the built-in name 'paper6'")
    parser.add_argument("--seed", type=int, default=None,
                        help="override the scenario seed")


def _cmd_run(args):
    scenario = load_scenario(args.scenario, seed=args.seed)
    schemes = []
    for token in args.schemes.split(","):
        token = token.strip().lower()
        if token not in _SCHEME_ALIASES:
            raise SystemExit(f"unknown scheme '{token}' (expected icg, cent, nocoop)")
        schemes.append(_SCHEME_ALIASES[token])

    def progress(slot, scheme, rec):
        print(f"slot {slot:2d}  {scheme:<6}  sg_profit {rec.sg_profit:12.2f}")

    report = run_experiment(scenario, schemes,
                            progress=progress if not args.quiet else None)
    paths = write_report(report, args.out)
    for p in paths:
        print(f"wrote {p}")


def _cmd_policy(args):
    scenario = load_scenario(args.scenario, seed=args.seed)
    model = scenario.slot_model(args.slot)
    policy = solve_pricing_policy(model)
    labels = model.action_grid.labels
    print(f"slot {args.slot}: per-state action distribution "
          f"(actions scale the billing reference by {', '.join(labels)})")
    header = "state  partition" + " " * 14 + "".join(f"  a{a}({lab})" for a, lab in enumerate(labels))
    print(header)
    for k, p in enumerate(model.space.states):
        row = "  ".join(f"{policy.varphi[k, a]:.4f}" for a in range(len(labels)))
        flag = " *" if k in policy.fallback_states else ""
        print(f"{k:5d}  {str(p):<22} {row}{flag}")
    if policy.fallback_states:
        print("(* zero occupancy mass; fallback to the best immediate-utility action)")
    print(f"expected utility {policy.expected_utility:.4f}")
    for j, price in sorted(policy.expected_prices.items()):
        print(f"expected price provider {j}: {price:.4f} $/kWh")


def _cmd_analyze(args):
    scenario = load_scenario(args.scenario, seed=args.seed)
    model = scenario.slot_model(args.slot)
    if not (0 <= args.delta < len(model.action_grid)):
        raise SystemExit(
            f"action id {args.delta} outside grid of size {len(model.action_grid)}"
        )
    T = model.transition_matrix(args.delta)
    p = stationary_distribution(T)
    print(f"slot {args.slot}, action {args.delta} "
          f"(scale {model.action_grid.labels[args.delta]}):")
    absorbing = sorted(absorbing_states(T))
    print(f"absorbing states: {[str(model.space.states[k]) for k in absorbing]}")
    for e_set in ergodic_sets(T):
        print(f"ergodic set: {sorted(e_set)}")
    order = np.argsort(-p)
    print("stationary distribution (top 10):")
    for k in order[:10]:
        if p[k] <= 0:
            break
        print(f"  {p[k]:.6f}  {model.space.states[k]}")
    if args.dump_matrix:
        with open(args.dump_matrix, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["state"] + list(range(len(model.space))))
            for k in range(len(model.space)):
                w.writerow([k] + [repr(x) for x in T[k]])
        print(f"wrote {args.dump_matrix}")


def _cmd_baseline(args):
    scenario = load_scenario(args.scenario, seed=args.seed)
    from .policy import nocoop_solve
    print("slot  sg_profit      total_cp_profit")
    for slot in range(scenario.horizon):
        model = scenario.slot_model(slot)
        _, utility, profits, _ = nocoop_solve(model)
        print(f"{slot:4d}  {utility:13.2f}  {sum(profits.values()):15.2f}")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="gridcoal",
        description="Smart grid vs. cooperative cloud federations simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run schemes over the horizon and write CSVs")
    _add_scenario_args(p_run)
    p_run.add_argument("--schemes", default="icg,cent,nocoop")
    p_run.add_argument("--out", required=True, help="output directory")
    p_run.add_argument("--quiet", action="store_true")
    p_run.set_defaults(func=_cmd_run)

    p_pol = sub.add_parser("policy", help="print the pricing policy of one slot")
    _add_scenario_args(p_pol)
    p_pol.add_argument("--slot", type=int, required=True)
    p_pol.set_defaults(func=_cmd_policy)

    p_an = sub.add_parser("analyze", help="inspect the coalition chain of one action")
    _add_scenario_args(p_an)
    p_an.add_argument("--slot", type=int, required=True)
    p_an.add_argument("--delta", type=int, required=True, help="action id")
    p_an.add_argument("--dump-matrix", default=None,
                      help="write the dense transition matrix to this CSV path")
    p_an.set_defaults(func=_cmd_analyze)

    p_base = sub.add_parser("baseline", help="NoCoop results per slot")
    _add_scenario_args(p_base)
    p_base.set_defaults(func=_cmd_baseline)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
