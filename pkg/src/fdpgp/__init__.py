"""Tree GP for Koza's recursive Fibonacci problem and a harness measuring
failed disruption propagation (FDP) in the evolved trees."""

from .estimator import FdpAnalyzer, FibonacciGP
from .evaluator import (EvalTrace, MemoTable, eval_node, eval_tree, fib_target, fitness,
                        incremental_fitness)
from .evolution import (GenStats, Individual, RunConfig, breed_generation, run_evolution,
                        tournament_select, tuning_experiment)
from .fdp import (FdpRecord, FdpReport, PerturbKind, StopCause, classify_stop_statistics,
                  fit_decay_slope, perturb_propagate, run_fdp)
from .report import LatticePoint, SummaryRow, emit_plots, lattice_layout, make_summary
from .tree import (Opcode, Tree, ancestors, crossover, depth, expected_random_tree_depth,
                   parse_sexpr, print_sexpr, ramped_half_and_half, random_tree,
                   subtree_span)

__version__ = "0.1.0"
