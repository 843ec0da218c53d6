"""Compiled inner loops: the 32-bit interpreter, incremental evaluation and
the disruption propagation walk.

Everything here works on raw int8 opcode arrays in prefix order and int32
value matrices shaped ``(n_cases, n_nodes)``.  The public wrappers live in
:mod:`fdpgp.evaluator` and :mod:`fdpgp.fdp`.
"""

import numpy as np
from numba import njit

ADD, SUB, MUL, SRF, J, C0 = 0, 1, 2, 3, 4, 5

INT32_MIN = -(1 << 31)
MASK32 = (1 << 32) - 1
INT64_MAX = (1 << 63) - 1

# stop causes, mirrored by fdpgp.fdp.StopCause
ROOT, MUL_ZERO, SRF_DEFAULT, SRF_OTHER, VALUE_COINCIDENCE = 0, 1, 2, 3, 4

# perturbation override modes
NO_OVERRIDE, OVERRIDE_PLUS1, OVERRIDE_REPLACE = 0, 1, 2


@njit(cache=True, nogil=True)
def wrap32(x):
    return ((x - INT32_MIN) & MASK32) + INT32_MIN


@njit(cache=True, nogil=True)
def apply_op(op, a, b, j, memo):
    """Return ``(value, overflowed)`` for a binary opcode.

    ``a`` is the first (left) argument; for SRF it is the test-case index and
    ``b`` the default.
    """
    if op == SRF:
        if a >= 0 and a < j:
            return memo[a], False
        return b, False
    if op == ADD:
        w = a + b
    elif op == SUB:
        w = a - b
    else:
        w = a * b
    r = wrap32(w)
    return r, r != w


@njit(cache=True, nogil=True)
def sat_add(total, x):
    if total > INT64_MAX - x:
        return INT64_MAX
    return total + x


@njit(cache=True, nogil=True)
def structure(ops):
    """Parent, depth (edges from root) and last-index-of-subtree arrays."""
    n = ops.shape[0]
    parent = np.full(n, -1, np.int32)
    depth = np.zeros(n, np.int32)
    end = np.empty(n, np.int32)
    for i in range(n - 1, -1, -1):
        if ops[i] >= J:
            end[i] = i
        else:
            end[i] = end[end[i + 1] + 1]
    for i in range(n):
        if ops[i] < J:
            left = i + 1
            right = end[left] + 1
            parent[left] = i
            parent[right] = i
            depth[left] = depth[i] + 1
            depth[right] = depth[i] + 1
    return parent, depth, end


@njit(cache=True, nogil=True)
def eval_range(ops, lo, hi, j, memo, row, record, stack, ovf,
               site, mode, replacement):
    """Evaluate the subtree stored in ``ops[lo:hi]`` on test case ``j``.

    Every node is evaluated (no short-circuit).  When ``record`` is set each
    node's output is written to ``row``.  ``site``/``mode`` optionally
    override one node's output (used by the sequential-memo FDP mode).
    """
    sp = 0
    for i in range(hi - 1, lo - 1, -1):
        op = ops[i]
        if op >= J:
            if op == J:
                v = np.int64(j)
            else:
                v = np.int64(op - C0)
        else:
            a = stack[sp - 1]
            b = stack[sp - 2]
            sp -= 2
            v, o = apply_op(op, a, b, j, memo)
            if o:
                ovf[op] += 1
        if i == site:
            if mode == OVERRIDE_PLUS1:
                v = wrap32(v + 1)
            elif mode == OVERRIDE_REPLACE:
                v = replacement
        stack[sp] = v
        sp += 1
        if record:
            row[i] = v
    return stack[0]


@njit(cache=True, nogil=True)
def full_eval(ops, targets, record):
    """Run all test cases in order, feeding root outputs back into the memo.

    Returns ``(fitness, values, memo, overflow_by_op, opcodes)``.
    """
    n = ops.shape[0]
    ncase = targets.shape[0]
    vals = np.empty((ncase if record else 0, n), np.int32)
    dummy = np.empty(0, np.int32)
    memo = np.zeros(ncase, np.int64)
    ovf = np.zeros(3, np.int64)
    stack = np.empty(n + 1, np.int64)
    total = np.int64(0)
    for j in range(ncase):
        row = vals[j] if record else dummy
        root = eval_range(ops, 0, n, j, memo, row, record, stack, ovf,
                          -1, NO_OVERRIDE, 0)
        memo[j] = root
        total = sat_add(total, abs(root - targets[j]))
    return total, vals, memo, ovf, n * ncase


@njit(cache=True, nogil=True)
def incremental_eval(child, mum_vals, mum_point, mum_last, new_len, targets):
    """Evaluate a crossover child reusing its root-donating parent's trace.

    While the child's root output matches the parent's on every case so far,
    only the inserted subtree and the changed part of its ancestor path are
    evaluated.  From the first case whose root output differs the memo read
    by SRF has changed, so the remaining cases are evaluated in full.
    """
    n = child.shape[0]
    ncase = targets.shape[0]
    parent, depth, end = structure(child)
    vals = np.empty((ncase, n), np.int32)
    memo = np.zeros(ncase, np.int64)
    ovf = np.zeros(3, np.int64)
    stack = np.empty(n + 1, np.int64)
    total = np.int64(0)
    evaluated = 0
    tail = mum_last + 1
    ins_end = mum_point + new_len
    diverged = False
    for j in range(ncase):
        row = vals[j]
        if diverged:
            root = eval_range(child, 0, n, j, memo, row, True, stack, ovf,
                              -1, NO_OVERRIDE, 0)
            evaluated += n
        else:
            row[:mum_point] = mum_vals[j, :mum_point]
            row[ins_end:] = mum_vals[j, tail:]
            v = eval_range(child, mum_point, ins_end, j, memo, row, True,
                           stack, ovf, -1, NO_OVERRIDE, 0)
            evaluated += new_len
            if v != mum_vals[j, mum_point]:
                cur = mum_point
                while cur != 0:
                    p = parent[cur]
                    left = p + 1
                    right = end[left] + 1
                    nv, o = apply_op(child[p], np.int64(row[left]),
                                     np.int64(row[right]), j, memo)
                    evaluated += 1
                    if o:
                        ovf[child[p]] += 1
                    if nv == row[p]:
                        break
                    row[p] = nv
                    cur = p
            root = np.int64(row[0])
            if root != mum_vals[j, 0]:
                diverged = True
        memo[j] = root
        total = sat_add(total, abs(root - targets[j]))
    return total, vals, memo, ovf, evaluated, parent, depth, end


@njit(cache=True, nogil=True)
def classify_stop(op, changed_is_left, old_changed, new_changed, other, j):
    if op == MUL:
        if other == 0:
            return MUL_ZERO
        return VALUE_COINCIDENCE
    if op == SRF:
        if changed_is_left:
            old_ok = old_changed >= 0 and old_changed < j
            new_ok = new_changed >= 0 and new_changed < j
            if not old_ok and not new_ok:
                return SRF_DEFAULT
        return SRF_OTHER
    return VALUE_COINCIDENCE


@njit(cache=True, nogil=True)
def propagate(ops, parent, end, vals, memo, site, j, newv, op_seen, op_ovf):
    """Walk a disrupted value up from ``site`` against the cached baseline.

    Returns ``(distance, reached_root, stop_cause, stop_node, overflows)``.
    ``op_seen``/``op_ovf`` accumulate per-opcode recomputation and overflow
    counts for the nodes recomputed on the way.
    """
    if newv == vals[j, site]:
        # a replacement draw equal to the baseline is no disruption at all
        return 0, False, VALUE_COINCIDENCE, site, 0
    cur = site
    cur_val = newv
    distance = 0
    overflows = 0
    while True:
        p = parent[cur]
        if p < 0:
            return distance, True, ROOT, -1, overflows
        left = p + 1
        right = end[left] + 1
        op = ops[p]
        if cur == left:
            a = cur_val
            b = np.int64(vals[j, right])
            other = b
        else:
            a = np.int64(vals[j, left])
            b = cur_val
            other = a
        nv, o = apply_op(op, a, b, j, memo)
        op_seen[op] += 1
        if o:
            op_ovf[op] += 1
            overflows += 1
        if nv == vals[j, p]:
            cause = classify_stop(op, cur == left, np.int64(vals[j, cur]),
                                  cur_val, other, j)
            return distance, False, cause, p, overflows
        distance += 1
        cur = p
        cur_val = nv


@njit(cache=True, nogil=True)
def fdp_block(ops, parent, end, vals, newvals, lo, hi,
              distance, reached, cause, stop, overflow):
    """Baseline-memo perturbation of every case at sites ``lo..hi-1``."""
    ncase = vals.shape[0]
    memo = np.empty(ncase, np.int64)
    for j in range(ncase):
        memo[j] = vals[j, 0]
    op_seen = np.zeros(4, np.int64)
    op_ovf = np.zeros(4, np.int64)
    for site in range(lo, hi):
        for j in range(ncase):
            d, r, c, s, o = propagate(ops, parent, end, vals, memo, site, j,
                                      np.int64(newvals[site, j]),
                                      op_seen, op_ovf)
            distance[site, j] = d
            reached[site, j] = r
            cause[site, j] = c
            stop[site, j] = s
            overflow[site, j] = o
    return op_seen, op_ovf


@njit(cache=True, nogil=True)
def fdp_block_sequential(ops, parent, end, vals, targets, newvals, mode,
                         lo, hi, distance, reached, cause, stop, overflow):
    """Alternative reading: the perturbation is applied on every case of one
    run, so the memo accumulates disrupted root outputs.

    Each site costs a full re-evaluation of the tree.
    """
    n = ops.shape[0]
    ncase = vals.shape[0]
    pvals = np.empty((ncase, n), np.int32)
    pmemo = np.zeros(ncase, np.int64)
    stack = np.empty(n + 1, np.int64)
    ovf = np.zeros(3, np.int64)
    op_seen = np.zeros(4, np.int64)
    op_ovf = np.zeros(4, np.int64)
    for site in range(lo, hi):
        ovf[:] = 0
        for j in range(ncase):
            root = eval_range(ops, 0, n, j, pmemo, pvals[j], True, stack, ovf,
                              site, mode, np.int64(newvals[site, j]))
            pmemo[j] = root
        for j in range(ncase):
            reached[site, j] = pvals[j, 0] != vals[j, 0]
            overflow[site, j] = 0
            d = 0
            cur = site
            stopped = -1
            if pvals[j, site] == vals[j, site]:
                stopped = site
            else:
                while parent[cur] >= 0:
                    p = parent[cur]
                    op = ops[p]
                    op_seen[op] += 1
                    left = p + 1
                    right = end[left] + 1
                    w, o = apply_op(op, np.int64(pvals[j, left]),
                                    np.int64(pvals[j, right]), j, pmemo)
                    if o:
                        op_ovf[op] += 1
                        overflow[site, j] += 1
                    if pvals[j, p] == vals[j, p]:
                        stopped = p
                        break
                    d += 1
                    cur = p
            distance[site, j] = d
            stop[site, j] = stopped
            if reached[site, j]:
                cause[site, j] = ROOT
            elif stopped == site:
                cause[site, j] = VALUE_COINCIDENCE
            else:
                left = stopped + 1
                right = end[left] + 1
                if cur == left:
                    other = np.int64(pvals[j, right])
                else:
                    other = np.int64(pvals[j, left])
                cause[site, j] = classify_stop(
                    ops[stopped], cur == left, np.int64(vals[j, cur]),
                    np.int64(pvals[j, cur]), other, j)
    return op_seen, op_ovf
