import math
import os

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fdpgp.evolution import RunConfig, TuneRow, deepest_improved, run_evolution
from fdpgp.fdp import PerturbKind, run_fdp
from fdpgp.report import (colour, emit_plots, glyph, heavy_points_in_box, lattice_layout,
                          make_summary, node_angles, read_hist_csv, read_lattice_csv,
                          write_fdp_summary_csv)
from fdpgp.tree import Opcode, parse_sexpr, random_tree

from conftest import REFERENCE


@st.composite
def trees(draw, max_depth=9):
    rng = np.random.default_rng(draw(st.integers(0, 2**32 - 1)))
    return random_tree(draw(st.sampled_from(["grow", "full"])),
                       draw(st.integers(0, max_depth)), rng)


def test_single_node_layout():
    t = parse_sexpr("J")
    (p,) = lattice_layout(t, run_fdp(t).lattice_counts)
    assert (p.x, p.y, p.ring, p.disrupted_cases) == (0.0, 0.0, 0, 20)


def test_three_node_layout():
    pts = lattice_layout(parse_sexpr("(SRF 1 0)"))
    angles, _, _ = node_angles(parse_sexpr("(SRF 1 0)"))
    assert angles[1] == pytest.approx(math.pi / 2)
    assert angles[2] == pytest.approx(3 * math.pi / 2)
    assert (pts[1].x, pts[1].y) == pytest.approx((0.0, 1.0), abs=1e-12)
    assert (pts[2].x, pts[2].y) == pytest.approx((0.0, -1.0), abs=1e-12)
    assert [p.ring for p in pts] == [0, 1, 1]


def test_glyphs():
    assert glyph(Opcode.SRF) == "="
    assert glyph(Opcode.MUL) == "*"
    assert glyph(Opcode.ADD) == "A"
    assert glyph(Opcode.J) == "J"
    assert glyph(Opcode.C2) == "2"


@settings(max_examples=60, deadline=None)
@given(trees())
def test_angular_nesting(t):
    angles, lo, hi = node_angles(t)
    for i in range(1, t.size):
        p = t.parents[i]
        assert lo[p] < angles[i] < hi[p]
    pts = lattice_layout(t)
    assert all(p.ring == d for p, d in zip(pts, t.node_depths))
    assert all(math.hypot(p.x, p.y) == pytest.approx(p.ring) for p in pts)


@settings(max_examples=60, deadline=None)
@given(trees(max_depth=16))
def test_layout_injective(t):
    angles, _, _ = node_angles(t)
    keys = {(int(d), round(float(a), 12)) for d, a in zip(t.node_depths, angles)}
    assert len(keys) == t.size


def test_heavy_points_flag():
    t = parse_sexpr(REFERENCE)
    pts = lattice_layout(t, run_fdp(t).lattice_counts)
    assert heavy_points_in_box(pts)
    far = lattice_layout(t, np.full(t.size, 20))
    assert heavy_points_in_box(far, box=0.5) is False


def test_colour_scale():
    assert colour(0) == "#a0a0a0"
    shades = {colour(c) for c in range(1, 21)}
    assert len(shades) == 20


def test_summary_row():
    t = parse_sexpr("(MUL 0 J)")
    p1 = run_fdp(t, PerturbKind.plus1())
    ri = run_fdp(t, PerturbKind.randint(3))
    row = make_summary(t, p1, ri)
    assert row.size == 3 and row.depth == 1
    assert row.fitness == p1.fitness
    recount = 100 * sum(any(p1.reached_root[s]) for s in range(3)) / 3
    assert row.plus1_pct == pytest.approx(recount)
    assert 0 <= row.randint_pct <= 100
    assert row.expected_depth == pytest.approx(2 * math.sqrt(math.pi))
    half = make_summary(t, fdp_plus1=p1)
    assert math.isnan(half.randint_pct)
    with pytest.raises(ValueError):
        make_summary(parse_sexpr(REFERENCE), p1)


def test_summary_large_tree_expected_depth():
    t = random_tree("full", 11, np.random.default_rng(0))
    row = make_summary(t)
    assert row.size == 4095 and row.expected_depth > 150


def test_fdp_summary_csv(tmp_path):
    t = parse_sexpr(REFERENCE)
    row = make_summary(t, run_fdp(t), run_fdp(t, PerturbKind.randint(1)))
    path = tmp_path / "fdp_summary.csv"
    write_fdp_summary_csv(path, row)
    head, line = path.read_text().splitlines()
    assert head == "size,depth,fitness,plus1_pct,plus1_slope,randint_pct,randint_slope"
    assert line.startswith("11,3,0,")


def test_emit_empty_stats(tmp_path):
    written = emit_plots(tmp_path, stats=[], tune_rows=[])
    assert (tmp_path / "stats.csv").read_text().count("\n") == 1
    assert (tmp_path / "tune.csv").read_text() == "pop_size,successes,runs\n"
    assert all(os.path.exists(p) for p in written)


def test_emit_full(tmp_path):
    res = run_evolution(RunConfig(pop_size=200, generations=8, seed=1))
    tree = deepest_improved(res).tree
    reports = [run_fdp(tree), run_fdp(tree, PerturbKind.randint(2))]
    emit_plots(tmp_path, reports=reports, stats=res.stats,
               tune_rows=[TuneRow(10, 0, 2)], tree=tree)
    names = set(os.listdir(tmp_path))
    for kind in ("plus1", "randint"):
        for stem in ("fdp_hist", "fdp_depth", "fdp_lattice"):
            assert f"{stem}_{kind}.csv" in names and f"{stem}_{kind}.gp" in names
    assert {"stats.csv", "stats.gp", "tune.csv", "tune.gp", "lattice.svg"} <= names

    blocks = (tmp_path / "fdp_hist_plus1.csv").read_text().split("\n\n\n")
    assert len(blocks) == 20
    hist = read_hist_csv(tmp_path / "fdp_hist_plus1.csv")
    want = reports[0].per_case_distance_histogram
    for j, rows in hist.items():
        assert rows == [(d, int(want[j, d])) for d in range(len(rows))]

    pts = read_lattice_csv(tmp_path / "fdp_lattice_plus1.csv")
    assert [p.disrupted_cases for p in pts] == list(reports[0].lattice_counts)
    gp = (tmp_path / "fdp_lattice_plus1.gp").read_text()
    assert "set xrange [-10:10]" in gp and "set yrange [-10:10]" in gp

    svg = (tmp_path / "lattice.svg").read_text()
    assert svg.startswith("<svg") or svg.startswith("<?xml")
    assert "clipPath" in svg and "http" in svg  # namespace only, nothing external
    assert "<image" not in svg and "font-face" not in svg


def test_emit_unwritable(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(OSError):
        emit_plots(blocker / "sub", stats=[])


def test_evolved_lattice_flag():
    res = run_evolution(RunConfig(pop_size=500, generations=20, seed=3))
    tree = deepest_improved(res).tree
    rep = run_fdp(tree)
    pts = lattice_layout(tree, rep.lattice_counts)
    assert pts[0].disrupted_cases == 20
    # reported, not required: heavy sites inside the clipping window
    assert isinstance(heavy_points_in_box(pts), bool)
