"""Generational tree GP for the Fibonacci benchmark.

Panmictic, non-elitist, generational: every child comes from one subtree
crossover of two tournament-selected parents and the whole population is
replaced each generation.  No mutation, no size or depth limit.

All random numbers are drawn in the breeding phase from a single stream;
child evaluation consumes none, so runs are reproducible for any number of
evaluation workers.
"""

import csv
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .evaluator import N_CASES, EvalTrace, fitness, incremental_fitness
from .tree import Tree, ramped_half_and_half, splice
from .validation import check_positive_int, check_random_state


@dataclass
class Individual:
    tree: Tree
    fitness: int
    trace: EvalTrace = None


@dataclass
class RunConfig:
    """Run parameters; defaults are desk scale (full scale is 50,000 x 1000)."""

    pop_size: int = 2000
    generations: int = 50
    tournament_k: int = 7
    seed: int = 0
    init_depth_range: tuple = (2, 6)
    incremental: bool = True
    jobs: int = 1
    # re-check this many random members per generation against a full evaluation
    verify_sample: int = 0

    def __post_init__(self):
        check_positive_int(self.pop_size, "pop_size", minimum=2)
        check_positive_int(self.generations, "generations", minimum=0)
        check_positive_int(self.tournament_k, "tournament_k")
        check_positive_int(self.jobs, "jobs")
        check_positive_int(self.verify_sample, "verify_sample", minimum=0)
        lo, hi = self.init_depth_range
        if not 0 <= lo <= hi:
            raise ValueError(f"bad init_depth_range {self.init_depth_range}")


@dataclass
class GenStats:
    generation: int
    mean_size: float
    mean_fitness: float
    best_fitness: int
    frac_child_fitness_differs: float
    opcodes_full: int
    opcodes_evaluated: int
    wallclock_gpops: float
    max_depth: int = 0

    @property
    def evaluated_ratio(self):
        return self.opcodes_evaluated / self.opcodes_full if self.opcodes_full else 0.0


@dataclass
class EvolutionResult:
    population: list
    stats: list
    solution: Tree = None
    solution_generation: int = None
    initial_best_fitness: int = None


class EvolutionAborted(RuntimeError):
    """Raised when a run cannot continue; ``stats`` holds what was recorded."""

    def __init__(self, message, stats):
        super().__init__(message)
        self.stats = stats


def _fitness_array(pop):
    if isinstance(pop, np.ndarray):
        return pop
    if pop and not isinstance(pop[0], Individual):
        return np.asarray(pop)
    return np.fromiter((ind.fitness for ind in pop), dtype=np.int64, count=len(pop))


def tournament_select_many(fitnesses, k, m, rng):
    """``m`` independent size-``k`` tournaments (lower fitness wins).

    Candidates are drawn uniformly with replacement; ties between sampled
    candidates are broken uniformly at random.
    """
    fitnesses = np.asarray(fitnesses)
    idx = rng.integers(0, fitnesses.size, size=(m, k))
    f = fitnesses[idx]
    keys = rng.random((m, k))
    keys[f != f.min(axis=1, keepdims=True)] = 2.0
    return idx[np.arange(m), keys.argmin(axis=1)]


def tournament_select(pop, k=7, rng=None):
    """Index of the winner of one tournament over ``pop``.

    ``pop`` holds Individuals or plain fitness values.
    """
    rng = check_random_state(rng)
    fit = _fitness_array(pop)
    if fit.size == 0:
        raise ValueError("cannot select from an empty population")
    return int(tournament_select_many(fit, k, 1, rng)[0])


def _evaluate_full(tree, keep_trace):
    f, trace = fitness(tree, record_trace=keep_trace)
    return Individual(tree, f, trace), tree.size * N_CASES


def _map(executor, fn, items):
    if executor is None:
        return [fn(x) for x in items]
    return list(executor.map(fn, items))


def breed_generation(pop, cfg, rng, generation=1, executor=None):
    """Produce the next generation and its statistics.

    Returns ``(new_pop, GenStats)``.  The root-donating parent ("mum") is the
    first tournament winner; ``frac_child_fitness_differs`` compares each
    child against its mum.
    """
    start = time.perf_counter()
    n = cfg.pop_size
    fit = _fitness_array(pop)
    winners = tournament_select_many(fit, cfg.tournament_k, 2 * n, rng).reshape(n, 2)
    sizes = np.fromiter((ind.tree.size for ind in pop), dtype=np.int64, count=len(pop))
    mum_pts = rng.integers(0, sizes[winners[:, 0]])
    dad_pts = rng.integers(0, sizes[winners[:, 1]])

    jobs = []
    for (m, d), mp, dp in zip(winners, mum_pts, dad_pts):
        child, edit = splice(pop[m].tree, int(mp), pop[d].tree, int(dp))
        jobs.append((pop[m], child, edit))

    if cfg.incremental:
        def work(job):
            mum, child, edit = job
            f, trace = incremental_fitness(child, mum.trace, edit)
            return Individual(child, f, trace), trace.opcount
    else:
        def work(job):
            return _evaluate_full(job[1], False)

    results = _map(executor, work, jobs)
    new_pop = [ind for ind, _ in results]
    evaluated = sum(c for _, c in results)
    differs = sum(ind.fitness != job[0].fitness for ind, job in zip(new_pop, jobs))
    elapsed = time.perf_counter() - start
    stats = _population_stats(new_pop, generation, differs / n, evaluated, elapsed)
    return new_pop, stats


def _population_stats(pop, generation, frac_diff, evaluated, elapsed):
    sizes = np.fromiter((ind.tree.size for ind in pop), dtype=np.int64, count=len(pop))
    fit = _fitness_array(pop)
    full = int(sizes.sum()) * N_CASES
    return GenStats(
        generation=generation,
        mean_size=float(sizes.mean()),
        mean_fitness=float(fit.astype(np.float64).mean()),
        best_fitness=int(fit.min()),
        frac_child_fitness_differs=frac_diff,
        opcodes_full=full,
        opcodes_evaluated=int(evaluated),
        wallclock_gpops=evaluated / elapsed if elapsed > 0 else 0.0,
        max_depth=max(ind.tree.depth for ind in pop),
    )


def _first_solution(pop):
    for ind in pop:
        if ind.fitness == 0:
            return ind.tree
    return None


def run_evolution(cfg, on_generation=None, stop_on_solution=False):
    """Run ``cfg.generations`` generations from a ramped half-and-half start.

    The run continues past the first solution (unless ``stop_on_solution``,
    which only the tuning experiment uses).  ``on_generation`` is called
    with each :class:`GenStats` as soon as it is available.
    """
    rng = check_random_state(cfg.seed)
    verify_rng = np.random.default_rng([cfg.seed, 0x5EED])
    executor = ThreadPoolExecutor(cfg.jobs) if cfg.jobs > 1 else None
    stats = []
    try:
        start = time.perf_counter()
        trees = ramped_half_and_half(cfg.pop_size, rng, cfg.init_depth_range)
        results = _map(executor, lambda t: _evaluate_full(t, cfg.incremental), trees)
        pop = [ind for ind, _ in results]
        evaluated = sum(c for _, c in results)
        s = _population_stats(pop, 0, math.nan, evaluated, time.perf_counter() - start)
        stats.append(s)
        if on_generation:
            on_generation(s)
        solution = _first_solution(pop)
        solution_gen = 0 if solution is not None else None
        initial_best = s.best_fitness
        for g in range(1, cfg.generations + 1):
            if stop_on_solution and solution is not None:
                break
            pop, s = breed_generation(pop, cfg, rng, generation=g, executor=executor)
            stats.append(s)
            if on_generation:
                on_generation(s)
            if cfg.verify_sample:
                _spot_check(pop, cfg.verify_sample, verify_rng)
            if solution is None:
                solution = _first_solution(pop)
                if solution is not None:
                    solution_gen = g
    except MemoryError:
        raise EvolutionAborted(
            f"out of memory after {len(stats)} recorded generations", stats) from None
    finally:
        if executor is not None:
            executor.shutdown()
    return EvolutionResult(pop, stats, solution, solution_gen, initial_best)


def _spot_check(pop, k, rng):
    for i in rng.choice(len(pop), size=min(k, len(pop)), replace=False):
        expected, _ = fitness(pop[i].tree)
        if expected != pop[i].fitness:
            raise AssertionError(
                f"member {i} carries fitness {pop[i].fitness}, full evaluation gives {expected}")


def deepest_improved(result):
    """Deepest final-population member fitter than the initial best.

    Ties on depth go to the lower fitness, then the lower index.  Returns
    None if nothing improved on the initial population.
    """
    best = None
    for i, ind in enumerate(result.population):
        if ind.fitness >= result.initial_best_fitness:
            continue
        key = (-ind.tree.depth, ind.fitness, i)
        if best is None or key < best[0]:
            best = (key, ind)
    return None if best is None else best[1]


@dataclass
class TuneRow:
    pop_size: int
    successes: int
    runs: int
    success_generations: list = field(default_factory=list)


def run_seed(seed, *parts):
    """Deterministic 64-bit seed for a sub-run."""
    return int(np.random.SeedSequence([seed, *parts]).generate_state(1, np.uint64)[0])


def tuning_experiment(pop_sizes, runs_per_size, generations, seed, jobs=1):
    """Count runs finding a zero-error program by ``generations``, per size."""
    check_positive_int(runs_per_size, "runs_per_size")
    rows = []
    for pop_size in pop_sizes:
        row = TuneRow(pop_size, 0, runs_per_size)
        for r in range(runs_per_size):
            cfg = RunConfig(pop_size=pop_size, generations=generations,
                            seed=run_seed(seed, pop_size, r), incremental=False, jobs=jobs)
            res = run_evolution(cfg, stop_on_solution=True)
            if res.solution is not None:
                row.successes += 1
                row.success_generations.append(res.solution_generation)
        rows.append(row)
    return rows


STATS_HEADER = ["gen", "mean_size", "mean_fitness", "best_fitness", "frac_diff",
                "opcodes_full", "opcodes_eval", "gpops"]


def stats_row(s, timing=False):
    """CSV fields for one generation.

    ``gpops`` is wall-clock derived, so it is left blank unless ``timing``
    is requested; that keeps the default output byte-reproducible.
    """
    frac = "" if math.isnan(s.frac_child_fitness_differs) else f"{s.frac_child_fitness_differs:.6f}"
    return [s.generation, f"{s.mean_size:.4f}", f"{s.mean_fitness:.4f}", s.best_fitness,
            frac, s.opcodes_full, s.opcodes_evaluated,
            f"{s.wallclock_gpops:.0f}" if timing else ""]


def write_stats_csv(path, stats, timing=False):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(STATS_HEADER)
        for s in stats:
            w.writerow(stats_row(s, timing))


def write_tune_csv(path, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["pop_size", "successes", "runs"])
        for r in rows:
            w.writerow([r.pop_size, r.successes, r.runs])


def write_opcode_csv(path, stats):
    """Incremental-evaluation savings per generation."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["generation", "full_opcodes", "evaluated_opcodes", "ratio"])
        for s in stats:
            w.writerow([s.generation, s.opcodes_full, s.opcodes_evaluated,
                        f"{s.evaluated_ratio:.6f}"])
