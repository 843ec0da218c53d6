"""Linear prefix-order genome for the Fibonacci primitive set.

A tree is an int8 array of opcodes in depth-first pre-order (GPquick style).
All functions are binary, so a tree of ``n`` internal nodes has ``2n + 1``
nodes and a subtree always occupies a contiguous slice of the array.

Depth convention: depth counts *edges* from the root, so a single terminal
has depth 0 and the root sits at depth 0.  The same convention is used for
site depths in the disruption experiments.
"""

import math
import re
from enum import IntEnum
from functools import cached_property
from typing import NamedTuple

import numpy as np

from . import _kernels
from .validation import check_random_state


class Opcode(IntEnum):
    ADD = 0
    SUB = 1
    MUL = 2
    SRF = 3
    J = 4
    C0 = 5
    C1 = 6
    C2 = 7
    C3 = 8

    @property
    def arity(self):
        return 2 if self < Opcode.J else 0

    @property
    def token(self):
        return _TOKENS[self]


FUNCTIONS = (Opcode.ADD, Opcode.SUB, Opcode.MUL, Opcode.SRF)
TERMINALS = (Opcode.J, Opcode.C0, Opcode.C1, Opcode.C2, Opcode.C3)
PRIMITIVES = FUNCTIONS + TERMINALS

_TOKENS = {
    Opcode.ADD: "ADD", Opcode.SUB: "SUB", Opcode.MUL: "MUL", Opcode.SRF: "SRF",
    Opcode.J: "J", Opcode.C0: "0", Opcode.C1: "1", Opcode.C2: "2", Opcode.C3: "3",
}
_BY_TOKEN = {tok: op for op, tok in _TOKENS.items()}
_ARITY = np.array([op.arity for op in Opcode], dtype=np.int64)


class SexprError(ValueError):
    """Raised for malformed s-expression text; ``position`` is a char offset."""

    def __init__(self, message, position):
        super().__init__(f"{message} at position {position}")
        self.position = position


class Tree:
    """Immutable prefix-order expression tree.

    Parameters
    ----------
    ops : sequence of int or Opcode
        Opcodes in pre-order.  Must be well formed: scanning left to right
        with a counter starting at 1, each node subtracts one and adds its
        arity, and the counter first reaches 0 at the last element.
    """

    def __init__(self, ops):
        arr = np.array(ops, dtype=np.int8)
        if arr.ndim != 1 or arr.size == 0:
            raise ValueError("a tree needs at least one opcode")
        if arr.min() < 0 or arr.max() > Opcode.C3:
            raise ValueError("unknown opcode in tree")
        open_slots = 1 + np.cumsum(_ARITY[arr] - 1)
        if open_slots[-1] != 0 or (arr.size > 1 and open_slots[:-1].min() <= 0):
            raise ValueError("opcode sequence is not a well-formed prefix tree")
        arr.setflags(write=False)
        self.ops = arr

    @classmethod
    def _trusted(cls, arr, structure=None):
        # skips the well-formedness scan; used for crossover output
        tree = cls.__new__(cls)
        arr.setflags(write=False)
        tree.ops = arr
        if structure is not None:
            tree.__dict__["_structure"] = structure
        return tree

    @property
    def size(self):
        return int(self.ops.size)

    def __len__(self):
        return self.size

    def __eq__(self, other):
        if not isinstance(other, Tree):
            return NotImplemented
        return np.array_equal(self.ops, other.ops)

    def __hash__(self):
        return hash(self.ops.tobytes())

    def __repr__(self):
        text = print_sexpr(self)
        if len(text) > 60:
            text = text[:57] + "..."
        return f"Tree({text!r}, size={self.size})"

    def __str__(self):
        return print_sexpr(self)

    @cached_property
    def _structure(self):
        return _kernels.structure(self.ops)

    @property
    def parents(self):
        """Parent index of every node (-1 for the root)."""
        return self._structure[0]

    @property
    def node_depths(self):
        """Depth in edges of every node."""
        return self._structure[1]

    @property
    def span_ends(self):
        """Index of the last node of the subtree rooted at each node."""
        return self._structure[2]

    @property
    def depth(self):
        return int(self.node_depths.max())


class DepthStats(NamedTuple):
    mean_depth: float
    std_depth: float


def parse_sexpr(text):
    """Parse ``(ADD (SRF (SUB J 1) 1) ...)`` style text into a Tree."""
    ops = []
    remaining = []  # argument slots still open for each '(' on the stack
    done = False
    pending_open = None
    for m in re.finditer(r"\(|\)|[^\s()]+", text):
        tok, pos = m.group(), m.start()
        if pending_open is not None:
            op = _BY_TOKEN.get(tok)
            if op is None or op.arity != 2:
                raise SexprError(f"expected a function name after '(' but got {tok!r}", pos)
            ops.append(op)
            remaining.append(2)
            pending_open = None
            continue
        if tok == "(":
            if done:
                raise SexprError("trailing text after complete expression", pos)
            if remaining:
                if remaining[-1] == 0:
                    raise SexprError("too many arguments", pos)
                remaining[-1] -= 1
            pending_open = pos
        elif tok == ")":
            if not remaining:
                raise SexprError("unbalanced ')'", pos)
            if remaining[-1] != 0:
                raise SexprError("too few arguments", pos)
            remaining.pop()
            done = not remaining
        else:
            op = _BY_TOKEN.get(tok)
            if op is None:
                raise SexprError(f"unknown token {tok!r}", pos)
            if op.arity:
                raise SexprError(f"function {tok} must be parenthesised", pos)
            if done:
                raise SexprError("trailing text after complete expression", pos)
            if remaining:
                if remaining[-1] == 0:
                    raise SexprError("too many arguments", pos)
                remaining[-1] -= 1
            else:
                done = True
            ops.append(op)
    if pending_open is not None:
        raise SexprError("'(' not followed by a function", pending_open)
    if remaining:
        raise SexprError("unclosed '('", len(text))
    if not ops:
        raise SexprError("empty expression", 0)
    return Tree(ops)


def print_sexpr(tree):
    """Canonical single-space separated s-expression."""
    parts = []
    pending_close = []  # number of ')' owed after each function's args
    for op in tree.ops:
        op = Opcode(op)
        if op.arity:
            parts.append("(" + op.token)
            pending_close.append(2)
            continue
        parts.append(op.token)
        closes = ""
        while pending_close:
            pending_close[-1] -= 1
            if pending_close[-1]:
                break
            pending_close.pop()
            closes += ")"
        parts[-1] += closes
    return " ".join(parts)


def depth(tree):
    """Longest root-to-leaf path in edges; a lone terminal has depth 0."""
    return tree.depth


def subtree_span(tree, at):
    """Closed index range ``(first, last)`` of the subtree rooted at ``at``."""
    _check_index(tree, at)
    return int(at), int(tree.span_ends[at])


def ancestors(tree, at):
    """Indices from the parent of ``at`` up to the root, bottom-up."""
    _check_index(tree, at)
    parents = tree.parents
    out = []
    p = parents[at]
    while p >= 0:
        out.append(int(p))
        p = parents[p]
    return out


def _check_index(tree, at):
    if not 0 <= at < tree.size:
        raise IndexError(f"node index {at} outside tree of size {tree.size}")


def random_tree(method, max_depth, rng=None):
    """Koza's grow or full random tree.

    ``full`` places functions (chosen uniformly among the four) everywhere
    above ``max_depth`` and terminals exactly at it.  ``grow`` picks uniformly
    from all nine primitives above the limit and forces a terminal at it.
    """
    if method not in ("grow", "full"):
        raise ValueError(f"method must be 'grow' or 'full', got {method!r}")
    if max_depth < 0:
        raise ValueError("max_depth must be >= 0")
    rng = check_random_state(rng)
    ops = []
    stack = [0]  # depths of nodes still to generate, in pre-order
    while stack:
        d = stack.pop()
        if d >= max_depth:
            op = TERMINALS[rng.integers(len(TERMINALS))]
        elif method == "full":
            op = FUNCTIONS[rng.integers(len(FUNCTIONS))]
        else:
            op = PRIMITIVES[rng.integers(len(PRIMITIVES))]
        ops.append(op)
        if op.arity:
            stack.extend((d + 1, d + 1))
    return Tree(ops)


def ramped_half_and_half(n, rng=None, depth_range=(2, 6)):
    """Initial population cycling max depths over ``depth_range``.

    Each depth bucket gets an equal share (the remainder goes to the first
    buckets) and alternates grow/full within the bucket, starting with grow.
    No duplicate removal is done.
    """
    if n < 1:
        raise ValueError("population size must be >= 1")
    rng = check_random_state(rng)
    lo, hi = depth_range
    depths = list(range(lo, hi + 1))
    base, extra = divmod(n, len(depths))
    trees = []
    for b, d in enumerate(depths):
        count = base + (1 if b < extra else 0)
        for i in range(count):
            trees.append(random_tree("grow" if i % 2 == 0 else "full", d, rng))
    return trees


class Splice(NamedTuple):
    """Where a crossover edited the root-donating parent.

    ``mum_point..mum_last`` is the replaced span in the parent and
    ``new_len`` the length of the inserted subtree, which starts at
    ``mum_point`` in the child.
    """

    mum_point: int
    mum_last: int
    new_len: int


def splice(mum, mum_point, dad, dad_point):
    """Replace mum's subtree at ``mum_point`` with dad's at ``dad_point``."""
    mum_last = int(mum.span_ends[mum_point])
    dad_last = int(dad.span_ends[dad_point])
    child = np.concatenate(
        (mum.ops[:mum_point], dad.ops[dad_point:dad_last + 1], mum.ops[mum_last + 1:])
    )
    return Tree._trusted(child), Splice(int(mum_point), mum_last, dad_last - dad_point + 1)


def crossover(mum, dad, rng=None):
    """Unbiased subtree crossover, uniform over all nodes of both parents.

    Returns ``(child, mum_point, dad_point)``.  No size or depth limit.
    """
    rng = check_random_state(rng)
    mum_point = int(rng.integers(mum.size))
    dad_point = int(rng.integers(dad.size))
    child, _ = splice(mum, mum_point, dad, dad_point)
    return child, mum_point, dad_point


def expected_random_tree_depth(size):
    """Leading-order mean and std of the height of a random binary tree.

    Flajolet-Odlyzko asymptotics for ``n = (size - 1) / 2`` internal nodes:
    mean ``2 sqrt(pi n)`` and variance ``4 pi (pi - 3) n / 3``.  Inaccurate
    for small trees.
    """
    if size < 3 or size % 2 == 0:
        raise ValueError(f"size must be odd and >= 3, got {size}")
    n = (size - 1) // 2
    return DepthStats(2.0 * math.sqrt(math.pi * n),
                      math.sqrt(4.0 * math.pi * (math.pi - 3.0) / 3.0 * n))


def read_population(path):
    """Read one s-expression per non-blank line."""
    with open(path, encoding="utf-8") as fh:
        return [parse_sexpr(line) for line in fh if line.strip()]


def write_population(path, trees):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for t in trees:
            fh.write(print_sexpr(t))
            fh.write("\n")
