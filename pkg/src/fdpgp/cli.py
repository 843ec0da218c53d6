"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 data error, 3 self-test failure.
"""

import argparse
import csv
import os
import sys

from .evolution import (EvolutionAborted, GenStats, RunConfig, run_evolution, stats_row,
                        STATS_HEADER, tuning_experiment, write_opcode_csv, write_tune_csv,
                        TuneRow)
from .fdp import PerturbKind, classify_stop_statistics, run_fdp
from .report import (emit_plots, format_summary, make_summary, write_fdp_summary_csv,
                     write_summary_csv, heavy_points_in_box, lattice_layout)
from .tree import SexprError, parse_sexpr, write_population

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_SELFTEST = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _positive(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def _pop_size(text):
    v = _positive(text)
    if v < 2:
        raise argparse.ArgumentTypeError(f"population must be >= 2, got {v}")
    return v


def _nonneg(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {v}")
    return v


def _seed(text):
    v = _nonneg(text)
    if v >= 1 << 64:
        raise argparse.ArgumentTypeError("seed must fit in 64 bits")
    return v


def _pop_list(text):
    try:
        sizes = [int(t) for t in text.split(",") if t]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad population list {text!r}") from None
    if not sizes or min(sizes) < 2:
        raise argparse.ArgumentTypeError("population sizes must be >= 2")
    return sizes


def build_parser():
    p = _Parser(prog="fdpgp", description="Fibonacci GP and failed disruption propagation.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    e = sub.add_parser("evolve", help="run one generational GP run")
    e.add_argument("--pop", type=_pop_size, default=2000, help="population size (full scale: 50000)")
    e.add_argument("--gens", type=_nonneg, default=50, help="generations (full scale: 1000)")
    e.add_argument("--seed", type=_seed, default=1)
    e.add_argument("--tournament", type=_positive, default=7)
    e.add_argument("--incremental", choices=["on", "off"], default="on")
    e.add_argument("--jobs", type=_positive, default=1)
    e.add_argument("--timing", action="store_true",
                   help="fill the wall-clock gpops column (output no longer reproducible)")
    e.add_argument("--out", required=True)

    f = sub.add_parser("fdp", help="disrupt every node of a tree on every test case")
    f.add_argument("--tree", required=True, help="file holding one s-expression")
    f.add_argument("--kind", choices=["plus1", "randint", "both"], default="both")
    f.add_argument("--seed", type=_seed, default=1, help="RANDINT draw seed")
    f.add_argument("--memo", choices=["baseline", "sequential"], default="baseline")
    f.add_argument("--jobs", type=_positive, default=1)
    f.add_argument("--out", required=True)

    t = sub.add_parser("tune", help="success rate against population size")
    t.add_argument("--pops", type=_pop_list, default=[500, 2000, 8000])
    t.add_argument("--runs", type=_positive, default=10)
    t.add_argument("--gens", type=_nonneg, default=50)
    t.add_argument("--seed", type=_seed, default=1)
    t.add_argument("--jobs", type=_positive, default=1)
    t.add_argument("--out", required=True)

    r = sub.add_parser("report", help="regenerate plot scripts from existing CSV output")
    r.add_argument("--in", dest="inp", required=True)
    r.add_argument("--out", required=True)

    sub.add_parser("selftest", help="run the embedded oracle checks")
    return p


def _makedirs(path):
    try:
        os.makedirs(path, exist_ok=True)
    except OSError as exc:
        raise _DataError(f"cannot create output directory {path}: {exc}") from None


class _DataError(Exception):
    pass


def cmd_evolve(args):
    _makedirs(args.out)
    cfg = RunConfig(pop_size=args.pop, generations=args.gens, tournament_k=args.tournament,
                    seed=args.seed, incremental=args.incremental == "on", jobs=args.jobs)
    stats_path = os.path.join(args.out, "stats.csv")
    with open(stats_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(STATS_HEADER)

        def flush(s):
            w.writerow(stats_row(s, args.timing))
            fh.flush()

        try:
            result = run_evolution(cfg, on_generation=flush)
        except EvolutionAborted as exc:
            print(f"aborted: {exc}", file=sys.stderr)
            return EXIT_DATA
    write_opcode_csv(os.path.join(args.out, "opcodes.csv"), result.stats)
    write_population(os.path.join(args.out, "population.sexpr"),
                     [ind.tree for ind in result.population])
    best = min(result.population, key=lambda ind: ind.fitness)
    write_population(os.path.join(args.out, "best.sexpr"), [best.tree])
    if result.solution is not None:
        write_population(os.path.join(args.out, "solution.sexpr"), [result.solution])
        print(f"solution found at generation {result.solution_generation}")
    else:
        print("no solution found")
    last = result.stats[-1]
    print(f"best fitness {best.fitness}, size {best.tree.size}, depth {best.tree.depth}; "
          f"mean size {last.mean_size:.1f}")
    return EXIT_OK


def _read_tree(path):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise _DataError(f"cannot read tree file {path}: {exc}") from None
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise _DataError(f"{path} holds no tree")
    try:
        return parse_sexpr(lines[0])
    except SexprError as exc:
        raise _DataError(f"{path}: {exc}") from None


def cmd_fdp(args):
    tree = _read_tree(args.tree)
    _makedirs(args.out)
    kinds = {"plus1": [PerturbKind.plus1()], "randint": [PerturbKind.randint(args.seed)],
             "both": [PerturbKind.plus1(), PerturbKind.randint(args.seed)]}[args.kind]
    reports = {k.label: run_fdp(tree, k, memo_mode=args.memo, jobs=args.jobs) for k in kinds}
    row = make_summary(tree, reports.get("plus1"), reports.get("randint"))
    write_fdp_summary_csv(os.path.join(args.out, "fdp_summary.csv"), row)
    write_summary_csv(os.path.join(args.out, "summary.csv"), [row])
    emit_plots(args.out, reports=list(reports.values()), tree=tree)
    print(format_summary(row))
    for label, rep in reports.items():
        b = classify_stop_statistics(rep)
        fr = ", ".join(f"{c.name} {v:.1%}" for c, v in b.fractions.items())
        inside = heavy_points_in_box(lattice_layout(tree, rep.lattice_counts))
        print(f"{label}: {rep.injections} injections, "
              f"{rep.disrupted_output_fraction:.3%} of outputs changed; "
              f"uniform stops on {b.sites} sites: {fr}; "
              f"fully disrupted sites inside (-10,10)^2: {'yes' if inside else 'no'}")
    return EXIT_OK


def cmd_tune(args):
    _makedirs(args.out)
    rows = tuning_experiment(args.pops, args.runs, args.gens, args.seed, jobs=args.jobs)
    write_tune_csv(os.path.join(args.out, "tune.csv"), rows)
    emit_plots(args.out, tune_rows=rows)
    for r in rows:
        print(f"pop {r.pop_size}: {r.successes}/{r.runs} successful")
    return EXIT_OK


def _read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def cmd_report(args):
    if not os.path.isdir(args.inp):
        raise _DataError(f"{args.inp} is not a directory")
    _makedirs(args.out)
    stats = tune = None
    stats_path = os.path.join(args.inp, "stats.csv")
    try:
        if os.path.exists(stats_path):
            stats = [GenStats(int(r["gen"]), float(r["mean_size"]), float(r["mean_fitness"]),
                              int(r["best_fitness"]),
                              float(r["frac_diff"]) if r["frac_diff"] else float("nan"),
                              int(r["opcodes_full"]), int(r["opcodes_eval"]),
                              float(r["gpops"]) if r["gpops"] else 0.0)
                     for r in _read_csv(stats_path)]
        tune_path = os.path.join(args.inp, "tune.csv")
        if os.path.exists(tune_path):
            tune = [TuneRow(int(r["pop_size"]), int(r["successes"]), int(r["runs"]))
                    for r in _read_csv(tune_path)]
    except (KeyError, ValueError) as exc:
        raise _DataError(f"malformed CSV in {args.inp}: {exc}") from None
    written = emit_plots(args.out, stats=stats, tune_rows=tune)
    for path in written:
        print(path)
    return EXIT_OK


def cmd_selftest(args):
    from .selftest import run_selftest

    failed = 0
    for name, ok, detail in run_selftest():
        print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
        failed += not ok
    return EXIT_SELFTEST if failed else EXIT_OK


COMMANDS = {"evolve": cmd_evolve, "fdp": cmd_fdp, "tune": cmd_tune,
            "report": cmd_report, "selftest": cmd_selftest}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except _DataError as exc:
        print(f"fdpgp: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
