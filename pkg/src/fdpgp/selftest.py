"""Oracle checks run by ``fdpgp selftest``.

Each check compares the fast path against an independent slow one and
returns ``(name, passed, detail)``.
"""

import math

import numpy as np

from . import oracles
from .evaluator import fib_target, fitness, incremental_fitness, outputs
from .fdp import PerturbKind, fit_decay_slope, run_fdp, randint_draws
from .tree import parse_sexpr, random_tree, splice

REFERENCE_SOLUTION = "(ADD (SRF (SUB J 1) 1) (SRF (SUB J 2) 0))"


def _small_trees(rng, count, max_depth=5):
    return [random_tree("grow" if rng.random() < 0.5 else "full",
                        int(rng.integers(0, max_depth + 1)), rng)
            for _ in range(count)]


def check_targets():
    got = [fib_target(j) for j in (0, 5, 19)]
    return "fibonacci targets", got == [1, 8, 6765], f"fib(0,5,19) = {got}"


def check_reference_solution():
    tree = parse_sexpr(REFERENCE_SOLUTION)
    f, _ = fitness(tree)
    out = outputs(tree)
    ok = f == 0 and out == oracles.FIB and oracles.reference_fitness(tree) == 0
    return "reference solution", ok, f"fitness {f}, outputs[19] = {out[19]}"


def check_srf():
    out = outputs(parse_sexpr("(SRF 1 0)"))
    ok = out[0] == 0 and out[1] == 0 and all(v == out[1] for v in out[2:])
    return "SRF default/memo", ok, f"outputs {out[:4]}..."


def check_evaluator(rng, count=200):
    bad = []
    for tree in _small_trees(rng, count, max_depth=6):
        f, _ = fitness(tree)
        expected = oracles.reference_fitness(tree)
        if f != expected:
            bad.append((str(tree), f, expected))
    return "evaluator vs recursive oracle", not bad, f"{len(bad)} mismatches of {count}"


def check_incremental(rng, count=200):
    trees = _small_trees(rng, 40, max_depth=6)
    bad = 0
    for _ in range(count):
        mum = trees[rng.integers(len(trees))]
        dad = trees[rng.integers(len(trees))]
        child, edit = splice(mum, int(rng.integers(mum.size)), dad, int(rng.integers(dad.size)))
        _, trace = fitness(mum, record_trace=True)
        inc, _ = incremental_fitness(child, trace, edit)
        if inc != fitness(child)[0]:
            bad += 1
    return "incremental vs full fitness", bad == 0, f"{bad} mismatches of {count}"


def fdp_mismatches(tree, kind):
    """Disagreements between run_fdp and whole-tree perturbed re-evaluation."""
    report = run_fdp(tree, kind)
    memo, table = oracles.run_all_cases(tree)
    draws = randint_draws(kind.rand_seed, np.arange(tree.size))
    bad = []
    for site in range(tree.size):
        for j in range(20):
            if kind.label == "plus1":
                new = oracles.wrap_oracle(table[j][site] + 1)
            else:
                new = int(draws[site, j])
            root, changed, ovf = oracles.brute_force_perturbation(tree, site, j, new, memo)
            reached = root != memo[j]
            if (bool(report.reached_root[site, j]) != reached
                    or int(report.distance[site, j]) != changed
                    or int(report.overflow_events[site, j]) != ovf):
                bad.append((site, j))
    return bad


def check_fdp(rng, count=30):
    total = 0
    for tree in _small_trees(rng, count):
        for kind in (PerturbKind.plus1(), PerturbKind.randint(int(rng.integers(1 << 31)))):
            total += len(fdp_mismatches(tree, kind))
    return "FDP vs brute-force re-evaluation", total == 0, f"{total} mismatched injections"


def check_slope():
    d = np.arange(11)
    counts = np.round(1000 * np.exp(-d / 3))
    slope, _ = fit_decay_slope(np.tile(counts, (20, 1)))
    ok = math.isclose(slope, -1 / 3, abs_tol=0.01)
    return "decay slope regression", ok, f"slope {slope:.4f} (expected -0.3333)"


def run_selftest(seed=20220709):
    rng = np.random.default_rng(seed)
    return [
        check_targets(),
        check_reference_solution(),
        check_srf(),
        check_evaluator(rng),
        check_incremental(rng),
        check_fdp(rng),
        check_slope(),
    ]
