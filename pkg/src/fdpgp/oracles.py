"""Slow, independent reference implementations used by the self-test and
the test suite.

These deliberately avoid the compiled kernels: trees are walked by plain
recursion over the prefix array and 32-bit wrapping is done with Python
integers.  Keep them simple rather than fast.
"""

import sys

from .tree import Opcode

FIB = [1, 1]
while len(FIB) < 20:
    FIB.append(FIB[-1] + FIB[-2])


def wrap_oracle(x):
    x %= 1 << 32
    return x - (1 << 32) if x >= 1 << 31 else x


def _eval(ops, i, j, memo, override, values):
    """Evaluate the subtree at ``i``; returns ``(value, next_index)``."""
    op = ops[i]
    if op == Opcode.J:
        v, nxt = j, i + 1
    elif op >= Opcode.C0:
        v, nxt = op - Opcode.C0, i + 1
    else:
        a, k = _eval(ops, i + 1, j, memo, override, values)
        b, nxt = _eval(ops, k, j, memo, override, values)
        if op == Opcode.ADD:
            v = wrap_oracle(a + b)
        elif op == Opcode.SUB:
            v = wrap_oracle(a - b)
        elif op == Opcode.MUL:
            v = wrap_oracle(a * b)
        else:
            v = memo[a] if 0 <= a < j else b
    if override is not None and override[0] == i:
        v = override[1](v)
    values[i] = v
    return v, nxt


def evaluate_case(tree, j, memo, override=None):
    """Per-node values of ``tree`` on case ``j``.

    ``override`` is ``(site, fn)``; ``fn`` maps the site's computed value to
    the value passed on to its parent.
    """
    ops = [int(o) for o in tree.ops]
    values = [None] * len(ops)
    limit = sys.getrecursionlimit()
    sys.setrecursionlimit(max(limit, 4 * len(ops) + 100))
    try:
        _eval(ops, 0, j, memo, override, values)
    finally:
        sys.setrecursionlimit(limit)
    return values


def run_all_cases(tree):
    """Root outputs and per-node values for all 20 cases, memo fed in order."""
    memo = []
    table = []
    for j in range(20):
        values = evaluate_case(tree, j, memo)
        table.append(values)
        memo.append(values[0])
    return memo, table


def reference_fitness(tree):
    memo, _ = run_all_cases(tree)
    return sum(abs(out - target) for out, target in zip(memo, FIB))


def brute_force_perturbation(tree, site, j, new_value, baseline_memo):
    """Re-evaluate the whole tree on case ``j`` with ``site``'s output
    replaced by ``new_value`` and SRF reading the unperturbed memo.

    Returns ``(root_value, changed_ancestor_count, overflow_count)`` where the
    overflow count covers every function whose inputs differ from baseline.
    """
    base = evaluate_case(tree, j, baseline_memo)
    pert = evaluate_case(tree, j, baseline_memo, override=(site, lambda _v: new_value))
    ops = [int(o) for o in tree.ops]
    changed_ancestors = 0
    overflow = 0
    # children are found by re-scanning; fine for oracle-sized trees
    for i, op in enumerate(ops):
        if op >= Opcode.J:
            continue
        left = i + 1
        right = _subtree_end(ops, left) + 1
        if (pert[left], pert[right]) != (base[left], base[right]):
            a, b = pert[left], pert[right]
            wide = {Opcode.ADD: a + b, Opcode.SUB: a - b, Opcode.MUL: a * b}.get(op)
            if wide is not None and wrap_oracle(wide) != wide:
                overflow += 1
            if pert[i] != base[i]:
                changed_ancestors += 1
    return pert[0], changed_ancestors, overflow


def _subtree_end(ops, i):
    need = 1
    while True:
        need += (2 if ops[i] < Opcode.J else 0) - 1
        if need == 0:
            return i
        i += 1
