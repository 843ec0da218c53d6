import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats as sps

from fdpgp import oracles
from fdpgp.evaluator import fitness
from fdpgp.evolution import RunConfig, deepest_improved, run_evolution
from fdpgp.fdp import (PerturbKind, StopCause, classify_stop_statistics, fit_decay_slope,
                       perturb_propagate, randint_draws, run_fdp)
from fdpgp.selftest import fdp_mismatches
from fdpgp.tree import ancestors, parse_sexpr, random_tree

from conftest import REFERENCE, small_trees

PLUS1 = PerturbKind.plus1()


def _record(text, site, j, kind=PLUS1):
    t = parse_sexpr(text)
    _, trace = fitness(t, record_trace=True)
    return perturb_propagate(t, trace, site, j, kind)


@pytest.mark.parametrize("j", [0, 7, 19])
def test_root_site(j):
    r = _record(REFERENCE, 0, j)
    assert r.reached_root and r.distance == 0 and r.stop_cause is StopCause.ROOT


def test_mul_zero():
    r = _record("(MUL 0 J)", 2, 5)
    assert not r.reached_root and r.distance == 0
    assert r.stop_cause is StopCause.MUL_ZERO and r.stop_node == 0


def test_srf_default():
    # index (SUB 0 2) = -2; +1 gives -1, still invalid
    for site in (1, 2, 3):
        for j in range(20):
            r = _record("(SRF (SUB 0 2) 3)", site, j)
            assert r.stop_cause is StopCause.SRF_DEFAULT and not r.reached_root
            assert r.distance == (0 if site == 1 else 1)


def test_srf_default_argument_at_case_zero():
    r = _record("(SRF 1 0)", 2, 0)
    assert r.reached_root and r.distance == 1
    # from case 2 on SRF returns the memo, so its default is ignored
    r = _record("(SRF 1 0)", 2, 5)
    assert not r.reached_root and r.stop_cause is StopCause.SRF_OTHER


def test_single_terminal():
    rep = run_fdp(parse_sexpr("J"))
    assert rep.injections == 20
    assert rep.disrupted_any_case_fraction == 1.0
    assert list(rep.lattice_counts) == [20]


def test_mul_zero_tree_fraction():
    t = parse_sexpr("(MUL 0 J)")
    rep = run_fdp(t)
    assert rep.disrupted_any_case_fraction == pytest.approx(2 / 3)
    # the constant 0 becomes 1, so the product is J: unchanged only when J = 0
    assert list(rep.lattice_counts) == [20, 19, 0]
    assert fdp_mismatches(t, PLUS1) == []
    b = classify_stop_statistics(rep)
    assert b.sites == 1 and b.fractions[StopCause.MUL_ZERO] == 1.0


def test_no_srf_no_zero_causes():
    t = parse_sexpr("(ADD (SUB J 3) (ADD 1 (SUB 2 J)))")
    for kind in (PLUS1, PerturbKind.randint(3)):
        causes = set(np.unique(run_fdp(t, kind).stop_cause))
        assert causes <= {StopCause.VALUE_COINCIDENCE, StopCause.ROOT}


def test_brute_force_agreement(rng):
    for i, t in enumerate(small_trees(rng, 25)):
        assert fdp_mismatches(t, PLUS1) == []
        assert fdp_mismatches(t, PerturbKind.randint(i)) == []


def test_reference_tree_vs_oracle_root_value():
    t = parse_sexpr(REFERENCE)
    memo, table = oracles.run_all_cases(t)
    rep = run_fdp(t)
    for site in range(t.size):
        for j in range(20):
            root, _, _ = oracles.brute_force_perturbation(
                t, site, j, oracles.wrap_oracle(table[j][site] + 1), memo)
            assert rep.reached_root[site, j] == (root != memo[j])


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_record_invariants(seed):
    rng = np.random.default_rng(seed)
    t = random_tree("grow", 8, rng)
    _, trace = fitness(t, record_trace=True)
    for kind in (PLUS1, PerturbKind.randint(seed)):
        rep = run_fdp(t, kind, trace=trace)
        path_len = rep.site_depths[:, None]
        assert np.all(rep.distance <= path_len)
        root = rep.stop_cause == StopCause.ROOT
        assert np.array_equal(root, rep.reached_root)
        assert np.all(rep.distance[rep.reached_root] == np.broadcast_to(
            path_len, rep.distance.shape)[rep.reached_root])
        assert np.all(rep.lattice_counts[0] == 20)
        # monotone extinction: the stop node is the ancestor `distance` levels up
        for site in range(t.size):
            up = ancestors(t, site)
            for j in range(20):
                if not rep.reached_root[site, j] and rep.stop_node[site, j] != site:
                    assert rep.stop_node[site, j] == up[rep.distance[site, j]]


def test_injection_count(rng):
    for t in small_trees(rng, 10):
        assert run_fdp(t).injections == 20 * t.size


def test_randint_reproducible():
    t = random_tree("full", 5, np.random.default_rng(1))
    a = run_fdp(t, PerturbKind.randint(42))
    b = run_fdp(t, PerturbKind.randint(42), jobs=3)
    c = run_fdp(t, PerturbKind.randint(43))
    for field in ("distance", "reached_root", "stop_cause", "stop_node", "overflow_events"):
        assert np.array_equal(getattr(a, field), getattr(b, field))
    assert not np.array_equal(randint_draws(42, range(t.size)), randint_draws(43, range(t.size)))
    assert a.op_recomputed == b.op_recomputed
    assert c.injections == a.injections


def test_randint_draws_uniform():
    d = randint_draws(5, np.arange(5000)).astype(np.int64).ravel()
    assert d.min() < -2**31 + 2**26 and d.max() > 2**31 - 2**26
    # top byte should be uniform over 256 values
    _, p = sps.chisquare(np.bincount((d + 2**31) >> 24, minlength=256))
    assert p > 1e-3
    # a site's draws do not depend on which other sites are requested
    assert np.array_equal(randint_draws(5, [7, 3])[0], randint_draws(5, np.arange(8))[7])


def _sequential_oracle(tree, kind):
    base_memo, table = oracles.run_all_cases(tree)
    draws = randint_draws(kind.rand_seed, np.arange(tree.size))
    reached = np.zeros((tree.size, 20), bool)
    for site in range(tree.size):
        memo = []
        for j in range(20):
            if kind.label == "plus1":
                fn = lambda v: oracles.wrap_oracle(v + 1)  # noqa: E731
            else:
                fn = lambda v, x=int(draws[site, j]): x  # noqa: E731
            root = oracles.evaluate_case(tree, j, memo, override=(site, fn))[0]
            memo.append(root)
            reached[site, j] = root != base_memo[j]
    return reached


def test_sequential_mode(rng):
    for t in small_trees(rng, 15) + [parse_sexpr(REFERENCE)]:
        for kind in (PLUS1, PerturbKind.randint(8)):
            rep = run_fdp(t, kind, memo_mode="sequential")
            assert rep.memo_mode == "sequential"
            assert np.array_equal(rep.reached_root, _sequential_oracle(t, kind))
    with pytest.raises(ValueError):
        run_fdp(parse_sexpr("J"), memo_mode="other")


def test_sequential_differs_on_reference():
    # disrupting SRF's default at case 0 feeds the changed output into later cases
    t = parse_sexpr(REFERENCE)
    base = run_fdp(t)
    seq = run_fdp(t, memo_mode="sequential")
    assert seq.reached_root.sum() > base.reached_root.sum()


def test_overflow_counts_agree_with_wide_oracle():
    # baseline values stay small; random draws make the multiplies overflow
    t = parse_sexpr("(MUL (ADD J (MUL 3 (MUL 3 (MUL 3 (MUL 3 3))))) "
                    "(MUL 3 (MUL 3 (MUL 3 (MUL 3 (MUL 3 (MUL 3 (MUL 3 (MUL 3 (MUL 3 3))))))))))")
    for kind in (PLUS1, PerturbKind.randint(1)):
        assert fdp_mismatches(t, kind) == []
    rep = run_fdp(t, PerturbKind.randint(1))
    assert rep.overflow_events.sum() > 0
    s = rep.overflow_summary()
    assert s["MUL"][1] > 0 and s["MUL"][0] >= s["MUL"][1]


def test_overflow_never_flips_plus1_outcome(rng):
    trees = [random_tree("full", 6, rng) for _ in range(10)]
    for t in trees:
        memo, table = oracles.run_all_cases(t)
        rep = run_fdp(t)
        for site in range(t.size):
            for j in range(20):
                root, _, _ = oracles.brute_force_perturbation(
                    t, site, j, oracles.wrap_oracle(table[j][site] + 1), memo)
                assert rep.reached_root[site, j] == (root != memo[j])


def test_slope_synthetic():
    d = np.arange(11)
    counts = np.round(1000 * np.exp(-d / 3))
    median, per_case = fit_decay_slope(np.tile(counts, (20, 1)))
    assert median == pytest.approx(-1 / 3, abs=0.01)
    oracle = sps.linregress(d, np.log(counts)).slope
    assert per_case[0] == pytest.approx(oracle, rel=1e-9)


def test_slope_flat_and_degenerate():
    flat = np.full((20, 6), 50)
    assert fit_decay_slope(flat)[0] == pytest.approx(0, abs=1e-12)
    hist = np.zeros((20, 4), int)
    hist[:, 0] = 9
    hist[3] = [100, 40, 0, 5]
    median, per_case = fit_decay_slope(hist)
    assert sum(not math.isnan(s) for s in per_case) == 1
    expected = sps.linregress([0, 1, 3], np.log([100, 40, 5])).slope
    assert median == pytest.approx(expected)
    hist[3] = [1, 0, 0, 0]
    with pytest.raises(ValueError):
        fit_decay_slope(hist)


def test_histogram_excludes_root_reaching():
    t = parse_sexpr("(MUL 0 J)")
    rep = run_fdp(t)
    hist = rep.per_case_distance_histogram
    assert hist.shape[0] == 20
    assert hist.sum() == (~rep.reached_root).sum()


def test_perturb_propagate_errors():
    t = parse_sexpr("(ADD J 1)")
    _, trace = fitness(t, record_trace=True)
    with pytest.raises(IndexError):
        perturb_propagate(t, trace, 3, 0)
    with pytest.raises(ValueError):
        perturb_propagate(t, trace, 0, 20)
    _, other = fitness(parse_sexpr("J"), record_trace=True)
    with pytest.raises(ValueError):
        perturb_propagate(t, other, 0, 0)


def test_records_match_arrays():
    t = parse_sexpr(REFERENCE)
    _, trace = fitness(t, record_trace=True)
    rep = run_fdp(t, trace=trace)
    recs = list(rep.records())
    assert len(recs) == 220
    for r in recs[::7]:
        assert r == perturb_propagate(t, trace, r.site, r.case)


@pytest.fixture(scope="module")
def evolved_report():
    res = run_evolution(RunConfig(pop_size=1000, generations=60, seed=2, incremental=False))
    tree = deepest_improved(res).tree
    return run_fdp(tree)


def test_depth_count_correlation_negative(evolved_report):
    rep = evolved_report
    hist = rep.site_depth_histogram
    assert hist
    depths = sorted(hist)
    rho, _ = sps.spearmanr(depths, [hist[d] for d in depths])
    assert rho < 0
    # per-case distance counts fall off with distance too
    assert rep.median_slope < 0
