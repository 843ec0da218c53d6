"""Exact 32-bit semantics for Koza's Fibonacci primitive set.

Test cases run in order ``J = 0..19``.  After each case the root output is
stored in the tree's memo so that ``(SRF i d)`` can return the output of an
earlier case ``i < J``; any other index makes SRF return its default ``d``.
ADD, SUB and MUL wrap modulo 2**32 (two's complement).  Every argument is
always evaluated, including the other operand of a multiply by zero.
"""

import csv
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .tree import Opcode, Splice, Tree
from .validation import check_case_index

N_CASES = 20
INT32_MIN = -(1 << 31)
INT32_MAX = (1 << 31) - 1
INT64_MAX = (1 << 63) - 1


def _fibonacci(n):
    seq = [1, 1]
    while len(seq) < n:
        seq.append(seq[-1] + seq[-2])
    return seq[:n]


TARGETS = np.array(_fibonacci(N_CASES), dtype=np.int64)
TARGETS.setflags(write=False)


def fib_target(j):
    """Fibonacci member ``j`` with ``fib(0) = fib(1) = 1``."""
    return int(TARGETS[check_case_index(j)])


def wrap32(x):
    """Reduce an integer into ``[-2**31, 2**31)`` modulo 2**32."""
    return ((int(x) - INT32_MIN) & 0xFFFFFFFF) + INT32_MIN


class MemoTable:
    """Root outputs of the cases run so far; read by SRF."""

    def __init__(self, n_cases=N_CASES):
        self.answers = [None] * n_cases

    def store(self, j, value):
        self.answers[j] = int(value)

    def filled(self):
        """Number of leading cases with a stored answer."""
        k = 0
        while k < len(self.answers) and self.answers[k] is not None:
            k += 1
        return k

    def as_array(self):
        return np.array([0 if a is None else a for a in self.answers], dtype=np.int64)


def eval_node(op, a, b, j, memo):
    """One opcode's output given its argument values ``a`` (left) and ``b``."""
    op = Opcode(op)
    if op is Opcode.J:
        return j
    if op >= Opcode.C0:
        return op - Opcode.C0
    if op is Opcode.ADD:
        return wrap32(a + b)
    if op is Opcode.SUB:
        return wrap32(a - b)
    if op is Opcode.MUL:
        return wrap32(a * b)
    answers = memo.answers if isinstance(memo, MemoTable) else memo
    if 0 <= a < j:
        return answers[a]
    return b


class OpcodeCounter:
    """Accumulates opcode and overflow counts across evaluations."""

    def __init__(self):
        self.opcodes = 0
        self.overflow = {Opcode.ADD: 0, Opcode.SUB: 0, Opcode.MUL: 0}

    def add(self, opcodes, ovf):
        self.opcodes += int(opcodes)
        for op, n in zip((Opcode.ADD, Opcode.SUB, Opcode.MUL), ovf):
            self.overflow[op] += int(n)


@dataclass
class EvalTrace:
    """Per-node outputs of a full evaluation.

    ``values[j, i]`` is node ``i``'s output on case ``j``; column 0 is the
    root, so ``values[:, 0]`` equals ``memo``.  ``opcount`` is the number of
    opcodes actually evaluated to produce the trace.
    """

    values: np.ndarray
    memo: np.ndarray
    opcount: int
    overflow: dict = field(default_factory=dict)

    @property
    def size(self):
        return self.values.shape[1]


def eval_tree(tree, j, memo, counter=None):
    """Evaluate ``tree`` on one test case given the memo of earlier cases."""
    j = check_case_index(j)
    if isinstance(memo, MemoTable):
        memo_arr = memo.as_array()
    else:
        memo_arr = np.asarray(memo, dtype=np.int64)
    ovf = np.zeros(3, np.int64)
    stack = np.empty(tree.size + 1, np.int64)
    root = _kernels.eval_range(tree.ops, 0, tree.size, j, memo_arr,
                               np.empty(0, np.int32), False, stack, ovf,
                               -1, _kernels.NO_OVERRIDE, 0)
    if counter is not None:
        counter.add(tree.size, ovf)
    return int(root)


def _overflow_dict(ovf):
    return {Opcode.ADD: int(ovf[0]), Opcode.SUB: int(ovf[1]), Opcode.MUL: int(ovf[2])}


def fitness(tree, record_trace=False):
    """Sum of ``|GP(J) - fib(J)|`` over the 20 cases.

    Returns ``(fitness, trace)``; ``trace`` is None unless ``record_trace``.
    Errors are taken in 64-bit before the absolute value and the sum
    saturates at the int64 maximum.
    """
    total, vals, memo, ovf, ops = _kernels.full_eval(tree.ops, TARGETS, bool(record_trace))
    if not record_trace:
        return int(total), None
    return int(total), EvalTrace(vals, memo, int(ops), _overflow_dict(ovf))


def outputs(tree):
    """The tree's root output on each of the 20 cases, in order."""
    _, _, memo, _, _ = _kernels.full_eval(tree.ops, TARGETS, False)
    return [int(v) for v in memo]


def incremental_fitness(child, mum_trace, splice):
    """Fitness of a crossover child computed from its root donor's trace.

    ``splice`` is the :class:`~fdpgp.tree.Splice` returned by
    :func:`fdpgp.tree.splice`.  Returns ``(fitness, trace)`` where
    ``trace.opcount`` counts only the opcodes actually evaluated.  The result
    is bit-identical to :func:`fitness`.
    """
    mum_point, mum_last, new_len = Splice(*splice)
    mum_size = mum_trace.values.shape[1]
    if mum_trace.values.shape[0] != N_CASES:
        raise ValueError("trace must cover all 20 test cases")
    if not 0 <= mum_point <= mum_last < mum_size or new_len < 1:
        raise ValueError(f"splice {tuple(splice)} does not fit a parent of size {mum_size}")
    if child.size != mum_size - (mum_last - mum_point + 1) + new_len:
        raise ValueError(
            f"child of size {child.size} is inconsistent with splice {tuple(splice)} "
            f"on a parent of size {mum_size}")
    total, vals, memo, ovf, evaluated, parent, dep, end = _kernels.incremental_eval(
        child.ops, mum_trace.values, mum_point, mum_last, new_len, TARGETS)
    if "_structure" not in child.__dict__:
        child.__dict__["_structure"] = (parent, dep, end)
    return int(total), EvalTrace(vals, memo, int(evaluated), _overflow_dict(ovf))


def write_trace_csv(path, trace):
    """Debug dump with columns ``case,node,value``."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["case", "node", "value"])
        for j in range(trace.values.shape[0]):
            for i, v in enumerate(trace.values[j]):
                w.writerow([j, i, int(v)])
