"""Batch command-line front end.

Subcommands: generate | solve | lp-solve | cycle-round | verify | bench.
Every command is file based and deterministic given its arguments; exit
codes are 0 on success, 2 on an infeasible or invalid input, 1 on usage
errors.
"""

import argparse
import json
import sys
from fractions import Fraction

from .congest import CSV_HEADER, CongestNetwork, RoundStats, aggregate, bfs_tree, elect_leader
from .generators import gen_path, gen_random, gen_scn, gen_sparsification_example
from .instance import (
    format_assignment,
    format_instance,
    parse_assignment,
    parse_instance,
)
from .mpclp import normalize, parse_lp_text, recheck_feasible, solve_feasibility, solve_max
from .oracles import verify_assignment
from .pipeline import SolveConfig, solve
from .rounding import norm_edge, round_cycles


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"error: {message}\n")
        sys.exit(1)


def _write(path, text):
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def _emit(args, payload: dict, stats_rows=None):
    if args.format == "json":
        _write(args.out, json.dumps(payload, indent=2, default=str) + "\n")
    else:
        lines = [f"{k},{v}" for k, v in payload.items()]
        if stats_rows:
            lines.append(CSV_HEADER)
            lines.extend(stats_rows)
        _write(args.out, "\n".join(lines) + "\n")


def cmd_generate(args) -> int:
    if args.family == "random":
        inst = gen_random(args.children, args.gifts, density=args.density,
                          value_range=(args.min_value, args.max_value),
                          seed=args.seed)
        frac = None
    elif args.family == "path":
        inst = gen_path(args.variant, args.n)
        frac = None
    elif args.family == "scn":
        inst = gen_scn(args.n, args.a, args.b)
        frac = None
    else:
        inst, frac = gen_sparsification_example(args.k, args.big_value)
    _write(args.out, format_instance(inst, frac))
    return 0


def cmd_solve(args) -> int:
    with open(args.instance) as fh:
        inst, _ = parse_instance(fh.read())
    cfg = SolveConfig(eps=args.eps, beta_const=args.beta_const,
                      strict_bits=args.strict_bits, mode=args.mode)
    res = solve(inst, seed=args.seed, config=cfg)
    if args.assignment_out:
        _write(args.assignment_out, format_assignment(res.assignment))
    payload = {
        "value": str(res.value), "T": str(res.T), "alpha": res.alpha,
        "beta": res.beta, "retries": res.retries, "valid": res.valid,
        "assigned_gifts": len(res.assignment),
    }
    _emit(args, payload, [res.stats.csv_row(f"solve-{args.seed}", "pipeline")])
    return 0 if res.valid else 2


def cmd_lp_solve(args) -> int:
    with open(args.lp_file) as fh:
        lp = parse_lp_text(fh.read())
    nlp = normalize(lp)
    if args.max_form:
        res = solve_max(lp, args.eps, mode=args.mode, strict_bits=args.strict_bits,
                        seed=args.seed)
        payload = {"gamma": res.gamma, "probes": res.probes}
        if res.x is not None:
            payload["x"] = " ".join(f"{v:.12g}" for v in res.x)
        _emit(args, payload, [res.stats.csv_row("lp-max", "solver")])
        return 0
    res = solve_feasibility(nlp, args.eps, mode=args.mode,
                            strict_bits=args.strict_bits, seed=args.seed)
    payload = {"verdict": "feasible" if res.feasible else "infeasible",
               "reason": res.reason, "iterations": res.iterations}
    if res.feasible:
        payload["x"] = " ".join(f"{v:.12g}" for v in res.x)
        payload["recheck"] = recheck_feasible(nlp, res.x, args.eps)
    _emit(args, payload, [res.stats.csv_row("lp-feas", "solver")])
    return 0 if res.feasible else 2


def cmd_cycle_round(args) -> int:
    with open(args.graph_file) as fh:
        inst, frac = parse_instance(fh.read())
    if not frac:
        sys.stderr.write("error: input carries no frac lines to round\n")
        return 2
    edges = [(c, inst.gift_node(g)) for (c, g) in frac]
    w0 = {norm_edge(c, inst.gift_node(g)): (Fraction(v) if args.mode == "rational" else float(v))
          for (c, g), v in frac.items()}
    w1, report = round_cycles(edges, w0, mode=args.mode, seed=args.seed)
    rounded = {(c, g): w1[norm_edge(c, inst.gift_node(g))] for (c, g) in frac}
    out_lines = [format_instance(inst, rounded).rstrip()]
    payload = {"outer_iterations": report.outer_iterations,
               "rounded_cycles": report.rounded_cycles,
               "charged_rounds": report.total_rounds()}
    if args.format == "json":
        payload["instance"] = out_lines[0]
        _write(args.out, json.dumps(payload, indent=2, default=str) + "\n")
    else:
        _write(args.out, out_lines[0] + "\n" +
               "\n".join(f"{k},{v}" for k, v in payload.items()) + "\n")
    return 0


def cmd_verify(args) -> int:
    with open(args.instance) as fh:
        inst, _ = parse_instance(fh.read())
    try:
        with open(args.assignment) as fh:
            assignment = parse_assignment(fh.read())
    except ValueError as exc:
        _emit(args, {"min_value": "0", "valid": False, "problems": str(exc)})
        return 2
    value, valid, problems = verify_assignment(inst, assignment)
    payload = {"min_value": str(value), "valid": valid}
    if problems:
        payload["problems"] = "; ".join(problems)
    _emit(args, payload)
    return 0 if valid else 2


def cmd_bench(args) -> int:
    rows = []
    results = []
    for n in args.sizes:
        k = max(1, int(n ** 0.5))
        inst = gen_scn(n, "1" * k, "0" * k)
        net = CongestNetwork(inst.network_nodes(), inst.network_edges(), seed=args.seed)
        leader = elect_leader(net, mode="fast")
        rows.append(net.stats.csv_row(f"scn{n}", "elect"))
        r_elect = net.stats.rounds_elapsed
        net.stats = RoundStats()
        tree = bfs_tree(net, leader, mode="fast")
        rows.append(net.stats.csv_row(f"scn{n}", "bfs"))
        r_bfs = net.stats.rounds_elapsed
        net.stats = RoundStats()
        aggregate(net, tree, {u: 1 for u in net.nodes}, lambda a, b: a + b, mode="fast")
        rows.append(net.stats.csv_row(f"scn{n}", "aggregate"))
        results.append({"n": n, "nodes": len(net.nodes), "bfs_rounds": r_bfs,
                        "elect_rounds": r_elect,
                        "aggregate_rounds": net.stats.rounds_elapsed})
    if args.format == "json":
        _write(args.out, json.dumps(results, indent=2) + "\n")
    else:
        _write(args.out, CSV_HEADER + "\n" + "\n".join(rows) + "\n")
    return 0


def build_parser() -> _Parser:
    p = _Parser(prog="santa", description=__doc__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--out", default="-", help="output path (default stdout)")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="emit an instance file")
    gs = g.add_subparsers(dest="family", required=True)
    gr = gs.add_parser("random", parents=[common])
    gr.add_argument("children", type=int)
    gr.add_argument("gifts", type=int)
    gr.add_argument("--density", type=float, default=0.3)
    gr.add_argument("--min-value", type=int, default=1)
    gr.add_argument("--max-value", type=int, default=8)
    gr.add_argument("--seed", type=int, required=True)
    gp = gs.add_parser("path", parents=[common])
    gp.add_argument("variant", choices=("I1", "I2", "I3"))
    gp.add_argument("n", type=int)
    gn = gs.add_parser("scn", parents=[common])
    gn.add_argument("n", type=int)
    gn.add_argument("a")
    gn.add_argument("b")
    gx = gs.add_parser("sparsify-example", parents=[common])
    gx.add_argument("k", type=int)
    gx.add_argument("big_value", type=int)
    g.set_defaults(func=cmd_generate)

    s = sub.add_parser("solve", parents=[common], help="run the allocation pipeline")
    s.add_argument("instance")
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--eps", type=float, default=0.5)
    s.add_argument("--beta-const", type=float, default=1.0)
    s.add_argument("--strict-bits", action="store_true")
    s.add_argument("--mode", choices=("sequential", "simulated"), default="sequential")
    s.add_argument("--assignment-out")
    s.set_defaults(func=cmd_solve)

    L = sub.add_parser("lp-solve", parents=[common], help="mixed packing-covering feasibility")
    L.add_argument("lp_file")
    L.add_argument("--eps", type=float, default=0.5)
    L.add_argument("--seed", type=int, default=0)
    L.add_argument("--strict-bits", action="store_true")
    L.add_argument("--max-form", action="store_true")
    L.add_argument("--mode", choices=("sequential", "simulated"), default="sequential")
    L.set_defaults(func=cmd_lp_solve)

    cr = sub.add_parser("cycle-round", parents=[common], help="round fractional edge weights")
    cr.add_argument("graph_file")
    cr.add_argument("--seed", type=int, default=0)
    mode = cr.add_mutually_exclusive_group()
    mode.add_argument("--rational", dest="mode", action="store_const",
                      const="rational", default="float")
    mode.add_argument("--float", dest="mode", action="store_const", const="float")
    cr.set_defaults(func=cmd_cycle_round)

    v = sub.add_parser("verify", parents=[common], help="check an assignment file")
    v.add_argument("instance")
    v.add_argument("assignment")
    v.set_defaults(func=cmd_verify)

    b = sub.add_parser("bench", parents=[common], help="rounds-vs-size sweeps on the stress family")
    b.add_argument("--sizes", type=lambda s: [int(x) for x in s.split(",")],
                   default=[16, 64, 256])
    b.add_argument("--seed", type=int, default=0)
    b.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
