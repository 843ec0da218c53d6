"""Runtime disruption of every node on every test case.

For each (site, case) pair the site's baseline output is replaced, either by
``value + 1`` (wrapping) or by a uniformly random 32-bit value, and the
change is pushed up the ancestor path.  Off-path siblings keep their
baseline values and SRF reads the baseline memo, i.e. earlier cases are
unaffected by the disruption.  Propagation stops at the first ancestor whose
output is unchanged; the record notes how many ancestors changed, whether
the root (program output) changed, and what stopped it.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum, IntEnum

import numpy as np

from . import _kernels
from .evaluator import N_CASES, TARGETS, fitness
from .tree import Opcode
from .validation import check_case_index

# splitmix64 constants
_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)


class StopCause(IntEnum):
    ROOT = _kernels.ROOT
    MUL_ZERO = _kernels.MUL_ZERO
    SRF_DEFAULT = _kernels.SRF_DEFAULT
    SRF_OTHER = _kernels.SRF_OTHER
    VALUE_COINCIDENCE = _kernels.VALUE_COINCIDENCE


class Kind(Enum):
    PLUS1 = "plus1"
    RANDINT = "randint"


@dataclass(frozen=True)
class PerturbKind:
    kind: Kind = Kind.PLUS1
    rand_seed: int = 0

    @classmethod
    def plus1(cls):
        return cls(Kind.PLUS1)

    @classmethod
    def randint(cls, seed=0):
        return cls(Kind.RANDINT, int(seed))

    @property
    def label(self):
        return self.kind.value


def _splitmix64(z):
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


def randint_draws(seed, sites, cases=N_CASES):
    """Counter-based uniform int32 draws, shape ``(len(sites), cases)``.

    Draw ``(site, case)`` depends only on ``(seed, site, case)``, so any
    subset of sites or any worker split gives the same values.
    """
    sites = np.asarray(sites, dtype=np.uint64).reshape(-1, 1)
    with np.errstate(over="ignore"):
        key = _splitmix64(np.uint64(seed & 0xFFFFFFFFFFFFFFFF) + _GAMMA)
        counter = sites * np.uint64(cases) + np.arange(cases, dtype=np.uint64)
        z = _splitmix64(key + (counter + np.uint64(1)) * _GAMMA)
    return (z & np.uint64(0xFFFFFFFF)).astype(np.uint32).view(np.int32)


def _replacement_values(trace, kind, sites):
    if kind.kind is Kind.PLUS1:
        base = trace.values[:, sites].T.astype(np.int64)
        return (((base + 1) - _kernels.INT32_MIN) & 0xFFFFFFFF) + _kernels.INT32_MIN
    return randint_draws(kind.rand_seed, sites).astype(np.int64)


@dataclass(frozen=True)
class FdpRecord:
    site: int
    site_depth: int
    case: int
    distance: int
    reached_root: bool
    stop_cause: StopCause
    stop_node: int
    overflow_events: int


def _check_trace(tree, trace):
    if trace.values.shape != (N_CASES, tree.size):
        raise ValueError(
            f"trace of shape {trace.values.shape} does not belong to a tree of size {tree.size}")


def perturb_propagate(tree, trace, site, j, kind=PerturbKind()):
    """Disrupt ``site`` on case ``j`` and follow the change towards the root."""
    _check_trace(tree, trace)
    if not 0 <= site < tree.size:
        raise IndexError(f"site {site} outside tree of size {tree.size}")
    j = check_case_index(j)
    newv = int(_replacement_values(trace, kind, [site])[0, j])
    memo = trace.values[:, 0].astype(np.int64)
    seen = np.zeros(4, np.int64)
    ovf = np.zeros(4, np.int64)
    d, r, c, s, o = _kernels.propagate(tree.ops, tree.parents, tree.span_ends,
                                       trace.values, memo, site, j, newv, seen, ovf)
    return FdpRecord(int(site), int(tree.node_depths[site]), j, int(d), bool(r),
                     StopCause(c), int(s), int(o))


@dataclass
class FdpReport:
    """Aggregate outcome of disrupting every node of one tree on every case.

    The per-record arrays are indexed ``[site, case]``.
    """

    kind: PerturbKind
    tree_size: int
    tree_depth: int
    fitness: int
    injections: int
    distance: np.ndarray
    reached_root: np.ndarray
    stop_cause: np.ndarray
    stop_node: np.ndarray
    overflow_events: np.ndarray
    site_depths: np.ndarray
    op_recomputed: dict
    op_overflow: dict
    memo_mode: str = "baseline"
    median_slope: float = math.nan
    per_case_slopes: list = field(default_factory=list)

    @property
    def lattice_counts(self):
        """Number of cases (0..20) on which disrupting each site changes the output."""
        return self.reached_root.sum(axis=1)

    @property
    def disruptive_sites(self):
        return self.lattice_counts > 0

    @property
    def disrupted_any_case_fraction(self):
        return float(self.disruptive_sites.mean())

    @property
    def disrupted_output_fraction(self):
        """Fraction of all (site, case) injections that changed the output."""
        return float(self.reached_root.mean())

    @property
    def per_case_distance_histogram(self):
        """``hist[case, d]``: disruptions that died after ``d`` changed ancestors.

        Injections that reached the root are left out.
        """
        stopped = ~self.reached_root
        width = int(self.distance[stopped].max()) + 1 if stopped.any() else 1
        hist = np.zeros((N_CASES, width), dtype=np.int64)
        for j in range(N_CASES):
            sel = stopped[:, j]
            hist[j] = np.bincount(self.distance[sel, j], minlength=width)
        return hist

    @property
    def site_depth_histogram(self):
        """Depth -> number of sites disruptive on at least one case."""
        depths = self.site_depths[self.disruptive_sites]
        values, counts = np.unique(depths, return_counts=True)
        return {int(d): int(c) for d, c in zip(values, counts)}

    def records(self):
        for site in range(self.tree_size):
            for j in range(N_CASES):
                yield FdpRecord(site, int(self.site_depths[site]), j,
                                int(self.distance[site, j]), bool(self.reached_root[site, j]),
                                StopCause(self.stop_cause[site, j]),
                                int(self.stop_node[site, j]),
                                int(self.overflow_events[site, j]))

    def overflow_summary(self):
        """Per-opcode counts of recomputed nodes and of those that overflowed."""
        return {op.name: (self.op_recomputed[op], self.op_overflow[op])
                for op in (Opcode.ADD, Opcode.SUB, Opcode.MUL)}


def run_fdp(tree, kind=PerturbKind(), memo_mode="baseline", jobs=1, trace=None):
    """Disrupt every node of ``tree`` on all 20 cases.

    ``memo_mode="sequential"`` switches to the alternative reading in which
    a site is disrupted on every case of a single run, so later cases see
    disrupted memo entries.  That mode re-evaluates the whole tree per site.
    """
    if memo_mode not in ("baseline", "sequential"):
        raise ValueError(f"memo_mode must be 'baseline' or 'sequential', got {memo_mode!r}")
    if trace is None:
        fit, base = fitness(tree, record_trace=True)
    else:
        _check_trace(tree, trace)
        base = trace
        fit = int(np.abs(trace.memo.astype(np.int64) - TARGETS).sum())
    n = tree.size
    sites = np.arange(n)
    newvals = _replacement_values(base, kind, sites)
    distance = np.zeros((n, N_CASES), np.int64)
    reached = np.zeros((n, N_CASES), np.bool_)
    cause = np.zeros((n, N_CASES), np.int8)
    stop = np.zeros((n, N_CASES), np.int64)
    overflow = np.zeros((n, N_CASES), np.int64)
    parent, _, end = tree._structure

    if memo_mode == "baseline":
        def block(bounds):
            return _kernels.fdp_block(tree.ops, parent, end, base.values, newvals,
                                      bounds[0], bounds[1], distance, reached, cause,
                                      stop, overflow)
    else:
        mode = (_kernels.OVERRIDE_PLUS1 if kind.kind is Kind.PLUS1
                else _kernels.OVERRIDE_REPLACE)

        def block(bounds):
            return _kernels.fdp_block_sequential(tree.ops, parent, end, base.values,
                                                 TARGETS, newvals, mode, bounds[0],
                                                 bounds[1], distance, reached, cause,
                                                 stop, overflow)

    edges = np.linspace(0, n, min(jobs, n) + 1).astype(int)
    chunks = list(zip(edges[:-1], edges[1:]))
    if jobs > 1:
        with ThreadPoolExecutor(jobs) as ex:
            parts = list(ex.map(block, chunks))
    else:
        parts = [block(c) for c in chunks]
    seen = sum(p[0] for p in parts)
    ovf = sum(p[1] for p in parts)

    report = FdpReport(
        kind=kind, tree_size=n, tree_depth=tree.depth, fitness=fit,
        injections=n * N_CASES, distance=distance, reached_root=reached,
        stop_cause=cause, stop_node=stop, overflow_events=overflow,
        site_depths=np.asarray(tree.node_depths, dtype=np.int64),
        op_recomputed={Opcode(i): int(seen[i]) for i in range(4)},
        op_overflow={Opcode(i): int(ovf[i]) for i in range(4)},
        memo_mode=memo_mode,
    )
    try:
        report.median_slope, report.per_case_slopes = fit_decay_slope(
            report.per_case_distance_histogram)
    except ValueError:
        report.per_case_slopes = [math.nan] * N_CASES
    return report


def fit_decay_slope(histograms):
    """Least-squares slope of ``ln(count)`` against distance, per case.

    Only non-zero bins are used.  Cases with fewer than two non-zero bins have
    no slope (NaN) and are left out of the median.  Returns
    ``(median_slope, per_case_slopes)`` in natural-log units per level.
    """
    slopes = []
    for counts in np.atleast_2d(np.asarray(histograms)):
        d = np.flatnonzero(counts > 0)
        if d.size < 2:
            slopes.append(math.nan)
            continue
        slope, _ = np.polyfit(d.astype(float), np.log(counts[d].astype(float)), 1)
        slopes.append(float(slope))
    valid = [s for s in slopes if not math.isnan(s)]
    if not valid:
        raise ValueError("every histogram has fewer than two non-zero bins")
    return float(np.median(valid)), slopes


@dataclass
class StopBreakdown:
    sites: int
    records: int
    counts: dict

    @property
    def fractions(self):
        total = sum(self.counts.values())
        return {c: (n / total if total else 0.0) for c, n in self.counts.items()}


def classify_stop_statistics(report):
    """Stop causes among sites whose disruption stops at the same node on all
    20 cases.

    Sites whose disruption reaches the root on any case are excluded.  Counts
    are per record (20 per qualifying site).
    """
    stop = report.stop_node
    uniform = (stop == stop[:, :1]).all(axis=1) & ~report.reached_root.any(axis=1)
    causes = report.stop_cause[uniform].ravel()
    counts = {c: int((causes == c).sum()) for c in StopCause if c is not StopCause.ROOT}
    return StopBreakdown(int(uniform.sum()), int(causes.size), counts)
