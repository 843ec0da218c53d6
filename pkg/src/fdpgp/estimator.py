"""scikit-learn style front ends.

The Fibonacci benchmark fixes its own 20 test cases, so ``fit`` takes no
training data; the estimators exist for the parameter handling
(``get_params``/``set_params``/``clone``) and the familiar fitted-attribute
conventions.
"""

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .evaluator import N_CASES, TARGETS, outputs
from .evolution import RunConfig, run_evolution
from .fdp import PerturbKind, classify_stop_statistics, run_fdp
from .report import make_summary
from .validation import check_random_state, check_tree


def _seed_from(random_state):
    if random_state is None or isinstance(random_state, np.random.Generator):
        return int(check_random_state(random_state).integers(2**63))
    return int(random_state)


class FibonacciGP(BaseEstimator):
    """Evolve programs for Koza's recursive Fibonacci problem.

    Parameters
    ----------
    population_size : int, default=2000
    generations : int, default=50
    tournament_size : int, default=7
    init_depth : tuple of two ints, default=(2, 6)
        Depth range for ramped half-and-half initialisation.
    incremental : bool, default=True
        Evaluate children from their root-donating parent's trace.
    n_jobs : int, default=1
        Evaluation threads.  Results do not depend on it.
    random_state : int, Generator or None

    Attributes
    ----------
    population_ : list of Individual
        Final generation.
    stats_ : list of GenStats
        One entry per generation, starting with the initial population.
    best_program_ : Tree
        Lowest-error member of the final generation.
    best_fitness_ : int
    solution_ : Tree or None
        First zero-error program found, if any.
    solution_generation_ : int or None
    """

    def __init__(self, population_size=2000, generations=50, tournament_size=7,
                 init_depth=(2, 6), incremental=True, n_jobs=1, random_state=None):
        self.population_size = population_size
        self.generations = generations
        self.tournament_size = tournament_size
        self.init_depth = init_depth
        self.incremental = incremental
        self.n_jobs = n_jobs
        self.random_state = random_state

    def fit(self, X=None, y=None):
        cfg = RunConfig(pop_size=self.population_size, generations=self.generations,
                        tournament_k=self.tournament_size, seed=_seed_from(self.random_state),
                        init_depth_range=tuple(self.init_depth),
                        incremental=self.incremental, jobs=self.n_jobs)
        result = run_evolution(cfg)
        self.run_config_ = cfg
        self.result_ = result
        self.population_ = result.population
        self.stats_ = result.stats
        best = min(range(len(result.population)), key=lambda i: result.population[i].fitness)
        self.best_program_ = result.population[best].tree
        self.best_fitness_ = result.population[best].fitness
        self.solution_ = result.solution
        self.solution_generation_ = result.solution_generation
        return self

    def predict(self, X=None):
        """Outputs of the best program for test-case indices ``X`` (all 20 by
        default).  Cases always run in order so SRF sees earlier outputs."""
        check_is_fitted(self, "best_program_")
        out = np.array(outputs(self.best_program_), dtype=np.int64)
        if X is None:
            return out
        idx = np.asarray(X, dtype=np.int64).ravel()
        if idx.size and (idx.min() < 0 or idx.max() >= N_CASES):
            raise ValueError(f"test case indices must lie in 0..{N_CASES - 1}")
        return out[idx]

    def score(self, X=None, y=None):
        """Negative sum of absolute errors (higher is better)."""
        pred = self.predict(X)
        target = TARGETS if X is None else TARGETS[np.asarray(X, dtype=np.int64).ravel()]
        return -float(np.abs(pred - target).sum())


class FdpAnalyzer(BaseEstimator):
    """Disrupt every node of a fixed tree on every test case.

    Parameters
    ----------
    kind : {'plus1', 'randint'}, default='plus1'
    random_state : int, default=0
        Seed of the counter-based RANDINT draws.
    memo_mode : {'baseline', 'sequential'}, default='baseline'
    n_jobs : int, default=1

    Attributes
    ----------
    tree_ : Tree
    report_ : FdpReport
    stop_breakdown_ : StopBreakdown
    """

    def __init__(self, kind="plus1", random_state=0, memo_mode="baseline", n_jobs=1):
        self.kind = kind
        self.random_state = random_state
        self.memo_mode = memo_mode
        self.n_jobs = n_jobs

    def _perturb_kind(self):
        if self.kind == "plus1":
            return PerturbKind.plus1()
        if self.kind == "randint":
            return PerturbKind.randint(int(self.random_state))
        raise ValueError(f"kind must be 'plus1' or 'randint', got {self.kind!r}")

    def fit(self, X, y=None):
        tree = check_tree(X)
        self.tree_ = tree
        self.report_ = run_fdp(tree, self._perturb_kind(), memo_mode=self.memo_mode,
                               jobs=self.n_jobs)
        self.stop_breakdown_ = classify_stop_statistics(self.report_)
        return self

    def transform(self, X=None):
        """Per-site count of disrupted cases (the lattice colouring)."""
        check_is_fitted(self, "report_")
        return self.report_.lattice_counts

    def summary(self):
        check_is_fitted(self, "report_")
        if self.kind == "plus1":
            return make_summary(self.tree_, fdp_plus1=self.report_)
        return make_summary(self.tree_, fdp_randint=self.report_)
