"""Tables, plot data and lattice drawings built from FDP reports and run
statistics.

All data files are CSV.  Each plot gets a small gnuplot script next to its
data; ``lattice.svg`` is a self-contained drawing of the circular lattice.
"""

import csv
import math
import os
from dataclasses import dataclass, fields

import numpy as np

from .evaluator import N_CASES
from .evolution import STATS_HEADER, stats_row
from .tree import Opcode, expected_random_tree_depth

CLIP = 10.0
_GLYPHS = {Opcode.SRF: "=", Opcode.MUL: "*"}


@dataclass
class LatticePoint:
    site: int
    x: float
    y: float
    ring: int
    disrupted_cases: int
    glyph: str


def glyph(op):
    op = Opcode(op)
    return _GLYPHS.get(op, op.token[0])


def lattice_layout(tree, counts=None):
    """Root-centred circular lattice: ring = depth, angles halve per level.

    The root owns ``[0, 2*pi)``; each function splits its span in half, left
    child first.  A node sits at its span's midpoint at radius = ring.
    """
    if counts is None:
        counts = np.zeros(tree.size, dtype=np.int64)
    angles, _, _ = node_angles(tree)
    points = []
    for i, (angle, ring) in enumerate(zip(angles, tree.node_depths)):
        r = int(ring)
        x, y = (0.0, 0.0) if r == 0 else (r * math.cos(angle), r * math.sin(angle))
        points.append(LatticePoint(i, x, y, r, int(counts[i]), glyph(tree.ops[i])))
    return points


def node_angles(tree):
    """Angle (span midpoint) and angular span ``[lo, hi)`` of every node."""
    n = tree.size
    lo = np.zeros(n)
    hi = np.zeros(n)
    hi[0] = 2.0 * math.pi
    parents = tree.parents
    for i in range(1, n):
        p = parents[i]
        mid = 0.5 * (lo[p] + hi[p])
        if i == p + 1:
            lo[i], hi[i] = lo[p], mid
        else:
            lo[i], hi[i] = mid, hi[p]
    return 0.5 * (lo + hi), lo, hi


def heavy_points_in_box(points, box=CLIP):
    """True if every site disrupted on all 20 cases is inside the clip box."""
    return all(abs(p.x) <= box and abs(p.y) <= box
               for p in points if p.disrupted_cases == N_CASES)


@dataclass
class SummaryRow:
    size: int
    depth: int
    expected_depth: float
    expected_depth_std: float
    fitness: int
    plus1_pct: float
    plus1_slope: float
    randint_pct: float
    randint_slope: float


def make_summary(tree, fdp_plus1=None, fdp_randint=None):
    """One summary row; a missing report leaves its columns NaN."""
    try:
        mean, std = expected_random_tree_depth(tree.size)
    except ValueError:
        mean = std = math.nan
    fit = None
    for r in (fdp_plus1, fdp_randint):
        if r is not None:
            if r.tree_size != tree.size:
                raise ValueError("report was computed on a different tree")
            fit = r.fitness
    if fit is None:
        from .evaluator import fitness
        fit, _ = fitness(tree)

    def pct(r):
        return math.nan if r is None else 100.0 * r.disrupted_any_case_fraction

    def slope(r):
        return math.nan if r is None else r.median_slope

    return SummaryRow(tree.size, tree.depth, mean, std, fit,
                      pct(fdp_plus1), slope(fdp_plus1), pct(fdp_randint), slope(fdp_randint))


def _fmt(v, spec):
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return ""
    return format(v, spec)


def summary_fields(row):
    return [row.size, row.depth, _fmt(row.expected_depth, ".1f"),
            _fmt(row.expected_depth_std, ".1f"), row.fitness,
            _fmt(row.plus1_pct, ".3f"), _fmt(row.plus1_slope, ".3f"),
            _fmt(row.randint_pct, ".3f"), _fmt(row.randint_slope, ".3f")]


def format_summary(row):
    """One human-readable summary line."""
    names = [f.name for f in fields(SummaryRow)]
    return "  ".join(f"{n}={v}" for n, v in zip(names, summary_fields(row)))


def _writer(fh):
    return csv.writer(fh, lineterminator="\n")


def write_summary_csv(path, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = _writer(fh)
        w.writerow([f.name for f in fields(SummaryRow)])
        for row in rows:
            w.writerow(summary_fields(row))


def write_fdp_summary_csv(path, row):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = _writer(fh)
        w.writerow(["size", "depth", "fitness", "plus1_pct", "plus1_slope",
                    "randint_pct", "randint_slope"])
        w.writerow([row.size, row.depth, row.fitness, _fmt(row.plus1_pct, ".3f"),
                    _fmt(row.plus1_slope, ".3f"), _fmt(row.randint_pct, ".3f"),
                    _fmt(row.randint_slope, ".3f")])


def write_hist_csv(path, report):
    """``case,distance,count``: one block per case, blocks split by two blank
    lines so gnuplot can address them with ``index``."""
    hist = report.per_case_distance_histogram
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = _writer(fh)
        w.writerow(["case", "distance", "count"])
        for j in range(N_CASES):
            if j:
                fh.write("\n\n")
            nz = np.flatnonzero(hist[j])
            last = int(nz[-1]) if nz.size else -1
            for d in range(last + 1):
                w.writerow([j, d, int(hist[j, d])])


def read_hist_csv(path):
    rows = {}
    with open(path, newline="", encoding="utf-8") as fh:
        for rec in csv.DictReader(fh):
            if rec.get("case") in (None, ""):
                continue
            rows.setdefault(int(rec["case"]), []).append((int(rec["distance"]), int(rec["count"])))
    return rows


def write_depth_csv(path, report):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = _writer(fh)
        w.writerow(["site_depth", "count"])
        for d, c in sorted(report.site_depth_histogram.items()):
            w.writerow([d, c])


def write_lattice_csv(path, points):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = _writer(fh)
        w.writerow(["site", "x", "y", "disrupted_case_count", "glyph"])
        for p in points:
            w.writerow([p.site, f"{p.x:.6f}", f"{p.y:.6f}", p.disrupted_cases, p.glyph])


def read_lattice_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return [LatticePoint(int(r["site"]), float(r["x"]), float(r["y"]),
                             int(round(math.hypot(float(r["x"]), float(r["y"])))),
                             int(r["disrupted_case_count"]), r["glyph"])
                for r in csv.DictReader(fh)]


# 20-step gradient from dark blue through green to bright yellow
_ANCHORS = [(0.0, (40, 20, 120)), (0.5, (30, 150, 130)), (1.0, (250, 230, 30))]


def colour(count):
    if count <= 0:
        return "#a0a0a0"
    t = (count - 1) / (N_CASES - 1)
    for (t0, c0), (t1, c1) in zip(_ANCHORS, _ANCHORS[1:]):
        if t <= t1:
            u = (t - t0) / (t1 - t0)
            rgb = [round(a + u * (b - a)) for a, b in zip(c0, c1)]
            return "#{:02x}{:02x}{:02x}".format(*rgb)
    return "#{:02x}{:02x}{:02x}".format(*_ANCHORS[-1][1])


def lattice_svg(panels, parents=None, box=CLIP, px=360):
    """SVG with one clipped lattice panel per ``(title, points)`` pair.

    ``parents`` (the tree's parent array) adds edges; edges into sites that
    never disrupt the output are drawn grey and dotted.
    """
    scale = px / (2 * box)
    width = px * len(panels)
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{px + 24}" '
           f'viewBox="0 0 {width} {px + 24}" font-family="monospace" font-size="9">']
    for k, (title, points) in enumerate(panels):
        ox = k * px
        cid = f"clip{k}"
        out.append(f'<clipPath id="{cid}"><rect x="{ox}" y="24" width="{px}" height="{px}"/></clipPath>')
        out.append(f'<text x="{ox + 4}" y="14">{title}</text>')
        out.append(f'<rect x="{ox}" y="24" width="{px}" height="{px}" fill="white" stroke="black"/>')
        out.append(f'<g clip-path="url(#{cid})">')

        def pos(p):
            return ox + (p.x + box) * scale, 24 + (box - p.y) * scale

        visible = [abs(p.x) <= box + 1 and abs(p.y) <= box + 1 for p in points]
        if parents is not None:
            for p, vis in zip(points, visible):
                q = parents[p.site]
                if q < 0 or not (vis or visible[q]):
                    continue
                x1, y1 = pos(points[q])
                x2, y2 = pos(p)
                dash = ' stroke-dasharray="1,2"' if p.disrupted_cases == 0 else ""
                out.append(f'<line x1="{x1:.2f}" y1="{y1:.2f}" x2="{x2:.2f}" y2="{y2:.2f}" '
                           f'stroke="{colour(p.disrupted_cases)}" stroke-width="0.8"{dash}/>')
        for p, vis in zip(points, visible):
            if not vis or p.disrupted_cases == 0:
                continue
            x, y = pos(p)
            out.append(f'<text x="{x:.2f}" y="{y + 3:.2f}" text-anchor="middle" '
                       f'fill="{colour(p.disrupted_cases)}">{p.glyph}</text>')
        out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"


_GP_HEADER = "set datafile separator ','\nset key off\n"


def _write(path, text):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    return path


def emit_plots(out_dir, reports=(), stats=None, tune_rows=None, tree=None):
    """Write gnuplot-ready data files and script stubs into ``out_dir``.

    ``reports`` are FDP reports on ``tree`` (needed for the lattice files).
    Returns the list of paths written.
    """
    os.makedirs(out_dir, exist_ok=True)
    written = []
    j = os.path.join
    if stats is not None:
        path = j(out_dir, "stats.csv")
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = _writer(fh)
            w.writerow(STATS_HEADER)
            for s in stats:
                w.writerow(stats_row(s))
        written.append(path)
        written.append(_write(j(out_dir, "stats.gp"), _GP_HEADER + (
            "set logscale y\nset xlabel 'generation'\n"
            "set output 'size.png'\nset ylabel 'mean size'\n"
            "plot 'stats.csv' every ::1 using 1:2 with lines\n"
            "set output 'fitness.png'\nset ylabel 'mean sum |error|'\n"
            "plot 'stats.csv' every ::1 using 1:3 with lines\n"
            "set output 'diff.png'\nset ylabel 'fraction of children differing from mum'\n"
            "plot 'stats.csv' every ::2 using 1:5 with lines\n"
            "set output 'evals.png'\nset ylabel 'evaluated / full opcodes'\n"
            "plot 'stats.csv' every ::1 using 1:($7/$6) with lines\n")))
    if tune_rows is not None:
        path = j(out_dir, "tune.csv")
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = _writer(fh)
            w.writerow(["pop_size", "successes", "runs"])
            for r in tune_rows:
                w.writerow([r.pop_size, r.successes, r.runs])
        written.append(path)
        written.append(_write(j(out_dir, "tune.gp"), _GP_HEADER + (
            "set logscale x\nset xlabel 'population'\nset ylabel 'successful runs'\n"
            "set output 'tune.png'\nplot 'tune.csv' every ::1 using 1:2 with linespoints\n")))
    panels = []
    for r in reports:
        label = r.kind.label
        hist = j(out_dir, f"fdp_hist_{label}.csv")
        write_hist_csv(hist, r)
        dep = j(out_dir, f"fdp_depth_{label}.csv")
        write_depth_csv(dep, r)
        written += [hist, dep]
        written.append(_write(j(out_dir, f"fdp_hist_{label}.gp"), _GP_HEADER + (
            "set logscale y\nset xlabel 'functions disruption passes through'\n"
            f"set ylabel 'count'\nset output 'fdp_{label}.png'\n"
            f"plot for [c=0:19] 'fdp_hist_{label}.csv' index c every ::0 "
            "using 2:3 with linespoints\n")))
        written.append(_write(j(out_dir, f"fdp_depth_{label}.gp"), _GP_HEADER + (
            "set logscale y\nset xlabel 'site depth'\nset ylabel 'disruptive sites'\n"
            f"set output 'depth_{label}.png'\n"
            f"plot 'fdp_depth_{label}.csv' every ::1 using 1:2 with impulses\n")))
        if tree is not None:
            points = lattice_layout(tree, r.lattice_counts)
            lat = j(out_dir, f"fdp_lattice_{label}.csv")
            write_lattice_csv(lat, points)
            written.append(lat)
            written.append(_write(j(out_dir, f"fdp_lattice_{label}.gp"), _GP_HEADER + (
                f"set xrange [-{CLIP:g}:{CLIP:g}]\nset yrange [-{CLIP:g}:{CLIP:g}]\n"
                "set size square\nset cbrange [0:20]\n"
                "set palette defined (0 'grey', 1 '#281478', 10 '#1e9682', 20 '#fae61e')\n"
                f"set output 'lattice_{label}.png'\n"
                f"plot 'fdp_lattice_{label}.csv' every ::1 using 2:3:5:4 "
                "with labels tc palette\n")))
            panels.append((label, points))
    if panels:
        written.append(_write(j(out_dir, "lattice.svg"), lattice_svg(panels, tree.parents)))
    return written
