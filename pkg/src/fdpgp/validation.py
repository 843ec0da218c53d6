"""Input validation helpers shared by the estimators and the CLI."""

import numbers

import numpy as np


def check_random_state(seed):
    """Turn ``seed`` into a :class:`numpy.random.Generator`.

    ``None`` gives fresh OS entropy, an int seeds a new PCG64 stream and an
    existing Generator is passed through unchanged.
    """
    if isinstance(seed, np.random.Generator):
        return seed
    if seed is None or isinstance(seed, (numbers.Integral, np.integer)):
        return np.random.default_rng(seed)
    if isinstance(seed, np.random.SeedSequence):
        return np.random.default_rng(seed)
    raise ValueError(f"{seed!r} cannot be used to seed a numpy Generator")


def check_tree(tree):
    """Accept a Tree or an s-expression string and return a Tree."""
    from .tree import Tree, parse_sexpr

    if isinstance(tree, Tree):
        return tree
    if isinstance(tree, str):
        return parse_sexpr(tree)
    raise TypeError(f"expected Tree or s-expression string, got {type(tree).__name__}")


def check_positive_int(value, name, minimum=1):
    if isinstance(value, bool) or not isinstance(value, (numbers.Integral, np.integer)):
        raise TypeError(f"{name} must be an integer, got {value!r}")
    if value < minimum:
        raise ValueError(f"{name} must be >= {minimum}, got {value}")
    return int(value)


def check_case_index(j, n_cases=20):
    if isinstance(j, bool) or not isinstance(j, (numbers.Integral, np.integer)):
        raise TypeError(f"test case index must be an integer, got {j!r}")
    if not 0 <= j < n_cases:
        raise ValueError(f"test case index {j} outside 0..{n_cases - 1}")
    return int(j)
