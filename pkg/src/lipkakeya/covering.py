"""Executable covering-lemma constructions and numeric checks of their estimates.

The pipeline is

    select_covering -> classify_pairs -> build_U (per host) -> build_I_intervals (per rep)
    -> verify_estimates / check_lemma_*

Every check reports; nothing here raises on a failed inequality.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
import shapely

from lipkakeya import _kernels
from lipkakeya.geometry import (ARC_EPS, TWO_PI, Rect, Segment, UnitVec, angle_dist,
                                angle_dist_array, box, ex_interval, project_onto_segment,
                                rect_array)
from lipkakeya.maximal import RectFamily
from lipkakeya.vectorfield import GridUnion, Sampler, VectorField, vset_projection

CONTAIN_LATTICE = (64, 8)  # along, across
PAIR_DILATION = 10.0


# --------------------------------------------------------------- selection

@dataclass
class CoveringResult:
    selected: list[int]
    discarded: list[int]
    kappa: int
    log: list[str] = field(default_factory=list)
    pairs: list[tuple[int, int]] = field(default_factory=list)
    sR: dict[int, list[int]] = field(default_factory=dict)
    tRho: dict[int, list[int]] = field(default_factory=dict)
    diagnostics: dict[str, float] = field(default_factory=dict)

    def order(self) -> dict[int, int]:
        return {rid: k for k, rid in enumerate(self.selected)}

    def to_dict(self) -> dict:
        return {
            "kappa": self.kappa,
            "selected": list(self.selected),
            "discarded": list(self.discarded),
            "pairs": [list(p) for p in self.pairs],
            "sR": {str(k): v for k, v in sorted(self.sR.items())},
            "tRho": {str(k): v for k, v in sorted(self.tRho.items())},
            "diagnostics": dict(sorted(self.diagnostics.items())),
        }


def selection_key(R: Rect):
    """Greedy order: longest first, then smallest eccentricity arc, then id."""
    return (-R.length, R.width / R.length, R.id)


def containment_lattice(R: Rect) -> tuple[np.ndarray, np.ndarray]:
    a, b = CONTAIN_LATTICE
    u = ((np.arange(a) + 0.5) / a - 0.5) * R.length
    w = ((np.arange(b) + 0.5) / b - 0.5) * R.width
    uu, ww = np.meshgrid(u, w, indexing="ij")
    uu, ww = uu.ravel(), ww.ravel()
    c, s = R.dir.cos, R.dir.sin
    return R.center[0] + uu * c - ww * s, R.center[1] + uu * s + ww * c


def kappa_directions(kappa: int) -> tuple[np.ndarray, np.ndarray]:
    ang = 2.0 * math.pi * np.arange(kappa) / kappa
    return np.cos(ang), np.sin(ang)


def covering_scales(rows: np.ndarray, kappa: int) -> np.ndarray:
    """Dyadic scales from below the thinnest width up to where no average can reach 1/kappa."""
    if rows.shape[0] == 0:
        return np.zeros(0)
    s_min = 2.0 ** math.floor(math.log2(rows[:, 5].min()))
    L, W = kappa * rows[:, 4], kappa * rows[:, 5]
    s_max = max(math.sqrt(kappa * float(np.sum(L * W))),
                0.5 * kappa * float(np.sum(np.hypot(L, W))), s_min)
    n = int(math.ceil(math.log2(s_max / s_min)))
    return s_min * 2.0 ** np.arange(n + 1)


def _dilated(rows: np.ndarray, kappa: float) -> np.ndarray:
    big = np.array(rows, dtype=float, copy=True)
    big[:, 4:6] *= kappa
    return big


def select_covering(fam: RectFamily, kappa: int = 100) -> CoveringResult:
    """Greedy split of ``fam`` into selected and discarded rectangles.

    A stock rectangle is discarded once every point of its 64 x 8 interior
    lattice satisfies ``M_kappa(sum of 1_{kappa R}, R selected) >= 1/kappa``.
    The superlevel set only grows, so each rectangle resumes its lattice
    scan where the previous step stopped.
    """
    if kappa < 8:
        raise ValueError("kappa must be at least 8")
    rects = fam.rects
    n = len(rects)
    order = sorted(range(n), key=lambda k: selection_key(rects[k]))
    big = _dilated(fam.rows, kappa)
    radii = 0.5 * np.hypot(big[:, 4], big[:, 5])
    oc, os_ = kappa_directions(kappa)
    scales = covering_scales(fam.rows, kappa)
    thr = 1.0 / kappa
    lattices = [containment_lattice(R) for R in rects]
    npts = CONTAIN_LATTICE[0] * CONTAIN_LATTICE[1]
    progress = np.zeros(n, dtype=np.int64)
    alive = np.ones(n, dtype=bool)
    sel: list[int] = []
    selected, discarded, log = [], [], []
    for k in order:
        if not alive[k]:
            continue
        alive[k] = False
        sel.append(k)
        selected.append(rects[k].id)
        log.append(f"select {rects[k].id}")
        sel_rows = np.ascontiguousarray(big[sel])
        sel_radii = np.ascontiguousarray(radii[sel])
        for k2 in order:
            if not alive[k2]:
                continue
            xs, ys = lattices[k2]
            progress[k2] = _kernels.superlevel_scan(xs, ys, progress[k2], sel_rows, sel_radii,
                                                    oc, os_, scales, thr)
            if progress[k2] == npts:
                alive[k2] = False
                discarded.append(rects[k2].id)
                log.append(f"discard {rects[k2].id} after {rects[k].id}")
    return CoveringResult(selected, discarded, kappa, log,
                          diagnostics={"n_scales": float(scales.size)})


def _reference_mkappa(xs, ys, big_rects, oc, os_, scales) -> np.ndarray:
    """Full M_kappa of a sum of rectangle indicators; squares via shapely, segments by slabs."""
    best = np.zeros(xs.size)
    polys = [shapely.Polygon(r_corners(r)) for r in big_rects]
    for s in scales:
        sq = shapely.box(xs - 0.5 * s, ys - 0.5 * s, xs + 0.5 * s, ys + 0.5 * s)
        acc = np.zeros(xs.size)
        for r, poly in zip(big_rects, polys):
            rad = 0.5 * math.hypot(r[4], r[5])
            near = np.hypot(xs - r[0], ys - r[1]) <= rad + s
            if near.any():
                part = np.zeros(xs.size)
                part[near] = shapely.area(shapely.intersection(sq[near], poly))
                acc = acc + part
        best = np.maximum(best, acc / (s * s))
        for wx, wy in zip(oc, os_):
            acc = np.zeros(xs.size)
            for r in big_rects:
                acc = acc + _slab_chords(r, xs, ys, wx, wy, s)
            best = np.maximum(best, acc / (2.0 * s))
    return best


def r_corners(r) -> np.ndarray:
    cx, cy, c, s, L, W = r
    out = []
    for su, sw in ((-1, -1), (1, -1), (1, 1), (-1, 1)):
        out.append((cx + su * 0.5 * L * c - sw * 0.5 * W * s, cy + su * 0.5 * L * s + sw * 0.5 * W * c))
    return np.array(out)


def _slab_chords(r, px, py, wx, wy, half):
    cx, cy, c, s, L, W = r
    dx = px - cx
    dy = py - cy
    u0 = dx * c + dy * s
    v0 = -dx * s + dy * c
    du = wx * c + wy * s
    dv = -wx * s + wy * c
    lo = np.full(px.shape, -half)
    hi = np.full(px.shape, half)
    dead = np.zeros(px.shape, dtype=bool)
    for p0, d, h in ((u0, du, 0.5 * L), (v0, dv, 0.5 * W)):
        if abs(d) < 1e-15:
            dead |= np.abs(p0) > h
        else:
            t1 = (-h - p0) / d
            t2 = (h - p0) / d
            lo = np.maximum(lo, np.minimum(t1, t2))
            hi = np.minimum(hi, np.maximum(t1, t2))
    out = np.where(hi > lo, hi - lo, 0.0)
    out[dead] = 0.0
    return out


def select_covering_reference(fam: RectFamily, kappa: int = 100) -> CoveringResult:
    """Slow twin of :func:`select_covering`: no caching, pruning or early exit."""
    rects = fam.rects
    order = sorted(range(len(rects)), key=lambda k: selection_key(rects[k]))
    big = _dilated(fam.rows, kappa)
    oc, os_ = kappa_directions(kappa)
    scales = covering_scales(fam.rows, kappa)
    stock = list(order)
    selected, discarded, log, sel = [], [], [], []
    while stock:
        k = stock.pop(0)
        sel.append(k)
        selected.append(rects[k].id)
        log.append(f"select {rects[k].id}")
        keep = []
        for k2 in stock:
            xs, ys = containment_lattice(rects[k2])
            vals = _reference_mkappa(xs, ys, big[sel], oc, os_, scales)
            if np.all(vals >= 1.0 / kappa):
                discarded.append(rects[k2].id)
                log.append(f"discard {rects[k2].id} after {rects[k].id}")
            else:
                keep.append(k2)
        stock = keep
    return CoveringResult(selected, discarded, kappa, log)


def write_log(cr: CoveringResult) -> str:
    return "".join(line + "\n" for line in cr.log)


def replay_log(text: str, kappa: int) -> CoveringResult:
    selected, discarded, log = [], [], []
    for line in text.splitlines():
        parts = line.split()
        if not parts:
            continue
        if parts[0] == "select" and len(parts) == 2:
            selected.append(int(parts[1]))
        elif parts[0] == "discard" and len(parts) == 4 and parts[2] == "after":
            discarded.append(int(parts[1]))
        else:
            raise ValueError(f"malformed selection log line: {line!r}")
        log.append(line)
    return CoveringResult(selected, discarded, kappa, log)


# ----------------------------------------------------------- pair classes

def classify_pairs(cr: CoveringResult, fam: RectFamily, v: VectorField | None = None,
                   ) -> CoveringResult:
    """Split intersecting (earlier, later) selected pairs into S_R and T_rho."""
    by_id = {R.id: R for R in fam.rects}
    sel = [by_id[i] for i in cr.selected]
    rows = rect_array(sel)
    hit = _kernels.pairwise_overlap(rows, rows)
    pairs, sR, tRho = [], {R.id: [] for R in sel}, {R.id: [] for R in sel}
    tile_bad = 0
    for a in range(len(sel)):
        rho = sel[a]
        for b in range(a + 1, len(sel)):
            if not hit[a, b]:
                continue
            R = sel[b]
            pairs.append((rho.id, R.id))
            if ex_interval(R).dilate(PAIR_DILATION).contains_arc(ex_interval(rho)):
                sR[R.id].append(rho.id)
            else:
                tRho[rho.id].append(R.id)
            if v is not None and math.isfinite(v.lip):
                gap = ex_interval(rho).distance(ex_interval(R))
                if gap > 2.0 * v.lip * rho.length + 1e-12:
                    tile_bad += 1
    cr.pairs = pairs
    cr.sR = sR
    cr.tRho = tRho
    cr.diagnostics.update({
        "n_pairs": float(len(pairs)),
        "n_S": float(sum(len(x) for x in sR.values())),
        "n_T": float(sum(len(x) for x in tRho.values())),
        "ex_gap_violations": float(tile_bad),
    })
    return cr


# ------------------------------------------------------- random instances

def random_field(rng: np.random.Generator, domain, lip: float = 1.0) -> VectorField:
    """Composite sinusoidal field with Lipschitz constant exactly ``lip``."""
    share = rng.uniform(0.2, 0.8)
    k1, k2 = rng.uniform(20.0, 80.0, 2)
    a1 = lip * math.sqrt(share) / k1
    a2 = lip * math.sqrt(1.0 - share) / k2
    return VectorField("composite", {
        "theta": float(rng.uniform(0, 2 * math.pi)), "a1": a1, "k1": k1,
        "p1": float(rng.uniform(0, 2 * math.pi)), "a2": a2, "k2": k2,
        "p2": float(rng.uniform(0, 2 * math.pi))}, domain)


def random_admissible_family(rng: np.random.Generator, v: VectorField, n: int, delta: float,
                             region, s: Sampler = Sampler(), j_max: int = 2, m_max: int = 13,
                             max_tries: int = 50) -> RectFamily:
    """Up to ``n`` rectangles with length <= nu and sampled density >= delta.

    Directions are drawn near v(center); eccentricities are log-uniform
    so very thin and nearly square rectangles both occur.
    """
    from lipkakeya.vectorfield import densities

    nu = v.nu
    x0, y0, x1, y1 = region
    rows_out, ang_out, dens_out = [], [], []
    got = 0
    for _ in range(max_tries):
        if got >= n:
            break
        m = 4 * (n - got)
        L = nu * 2.0 ** -rng.integers(0, j_max + 1, m)
        W = L * 2.0 ** -rng.uniform(0, m_max, m)
        cx = rng.uniform(x0, x1, m)
        cy = rng.uniform(y0, y1, m)
        spread = 0.5 * W / L + 0.5 * v.lip * L
        ang = np.mod(v.angles(cx, cy) + rng.uniform(-1, 1, m) * spread, 2 * math.pi)
        rows = np.column_stack([cx, cy, np.cos(ang), np.sin(ang), L, W])
        rad = 0.5 * np.hypot(L, W)
        fx0, fy0, fx1, fy1 = v.domain
        ok = (cx - rad >= fx0) & (cx + rad <= fx1) & (cy - rad >= fy0) & (cy + rad <= fy1)
        for k in np.flatnonzero(ok):
            d = densities(rows[k:k + 1], v, s)[0]
            if d >= delta:
                rows_out.append(rows[k])
                ang_out.append(ang[k])
                dens_out.append(d)
                got += 1
                if got >= n:
                    break
    rows = np.array(rows_out).reshape(-1, 6)
    return RectFamily(rows, np.array(ang_out), np.arange(rows.shape[0], dtype=np.int64),
                      np.array(dens_out), delta, nu, {"generator": "random_admissible"})


# ------------------------------------------------------------- U(R) groups

@dataclass
class UDecomposition:
    """Grouping of the rectangles crossing a host by overlap of projected V-sets."""

    rho: Rect
    segment: Segment
    reps: list[int]
    members: dict[int, list[int]]
    vsets: dict[int, GridUnion]
    shadows: dict[int, tuple[float, float] | None]
    theta: dict[int, float]
    rects: dict[int, Rect]
    flagged: list[int] = field(default_factory=list)
    intervals: dict[int, list[tuple[float, float]]] = field(default_factory=dict)
    interval_members: dict[int, list[list[int]]] = field(default_factory=dict)
    residual: dict[int, list[int]] = field(default_factory=dict)

    @property
    def pitch(self) -> float:
        return self.segment.halfwidth / GridUnion.CELLS_PER_HALF

    def to_dict(self) -> dict:
        return {
            "rho": self.rho.id,
            "rho_length": self.rho.length,
            "reps": list(self.reps),
            "members": {str(k): v for k, v in self.members.items()},
            "vset_lengths": {str(k): u.length for k, u in sorted(self.vsets.items())},
            "theta": {str(k): t for k, t in self.theta.items()},
            "flagged": list(self.flagged),
            "intervals": {str(k): [list(i) for i in v] for k, v in self.intervals.items()},
            "interval_members": {str(k): v for k, v in self.interval_members.items()},
            "residual": {str(k): v for k, v in self.residual.items()},
        }


def host_segment(rho: Rect) -> Segment:
    """The line segment 2I x {alpha}: doubled long side, on the lower long edge of rho."""
    n = rho.dir.perp()
    origin = (rho.center[0] - 0.5 * rho.width * n.cos, rho.center[1] - 0.5 * rho.width * n.sin)
    return Segment(origin, rho.dir, rho.length)


def build_U(rho: Rect, t_rho: list[Rect], v: VectorField, s: Sampler | None = None) -> UDecomposition:
    """Greedy grouping: longest remaining R becomes a rep and absorbs every
    remaining R' whose projected V-set meets its own."""
    s = s or Sampler(strategy="grid")
    S = host_segment(rho)
    vsets = {R.id: vset_projection(R, S, v, s) for R in t_rho}
    shadows = {R.id: project_onto_segment(R, S) for R in t_rho}
    stock = sorted(t_rho, key=lambda R: (-R.length, R.id))
    reps, members, theta, flagged = [], {}, {}, []
    while stock:
        R = stock[0]
        VR = vsets[R.id]
        if VR.empty():
            group = [R]
            flagged.append(R.id)
        else:
            group = [Rp for Rp in stock if vsets[Rp.id].overlaps(VR)]
        gid = {Rp.id for Rp in group}
        reps.append(R.id)
        members[R.id] = [Rp.id for Rp in group]
        theta[R.id] = angle_dist(rho.dir, R.dir)
        stock = [Rp for Rp in stock if Rp.id not in gid]
    return UDecomposition(rho, S, reps, members, vsets, shadows, theta,
                          {R.id: R for R in t_rho}, flagged)


def dyadic_candidates(lo: float, hi: float, finest: float) -> tuple[np.ndarray, np.ndarray]:
    """All dyadic subintervals of [lo, hi] down to length >= finest, coarse to fine, left to right."""
    los, his = [], []
    k = 0
    length = hi - lo
    while True:
        n = 2 ** k
        piece = length / n
        if k > 0 and piece < finest:
            break
        edges = lo + piece * np.arange(n + 1)
        los.append(edges[:-1])
        his.append(edges[1:])
        k += 1
        if k > 24:
            break
    return np.concatenate(los), np.concatenate(his)


def band_tables(ud: UDecomposition, ids: list[int], t_lo, t_hi, scale: float = 1.0):
    """(area, hit) matrices of members against boxes (scale * I) x J along the host."""
    rho = ud.rho
    rows = rect_array([ud.rects[i] for i in ids])
    sh = [ud.shadows[i] or (np.inf, -np.inf) for i in ids]
    shadow_lo = np.array([a for a, _ in sh], dtype=float)
    shadow_hi = np.array([b for _, b in sh], dtype=float)
    # box centers are measured from rho's center, whose segment coordinate is 0
    return _kernels.band_areas(rows, shadow_lo, shadow_hi, rho.center[0], rho.center[1],
                               rho.dir.cos, rho.dir.sin, rho.width,
                               np.ascontiguousarray(t_lo, dtype=float),
                               np.ascontiguousarray(t_hi, dtype=float), 0.0, scale)


def rep_candidates(ud: UDecomposition, rep: int):
    sh = ud.shadows[rep]
    if sh is None or sh[1] <= sh[0]:
        return np.zeros(0), np.zeros(0)
    return dyadic_candidates(sh[0], sh[1], ud.pitch)


def build_I_intervals(ud: UDecomposition, rep: int, w_rho: float | None = None) -> UDecomposition:
    """Peel maximal dyadic intervals I of I_R carrying
    sum_{L(R') >= 8|I|} |R' ∩ I x J| >= 10 |I| W(rho) off the group of ``rep``."""
    w_rho = ud.rho.width if w_rho is None else w_rho
    ids = list(ud.members[rep])
    lo, hi = rep_candidates(ud, rep)
    chosen, chosen_members = [], []
    if lo.size and ids:
        area, hit = band_tables(ud, ids, lo, hi)
        lengths = np.array([ud.rects[i].length for i in ids])
        ilen = hi - lo
        eligible = lengths[:, None] >= 8.0 * ilen[None, :]
        weight = np.where(eligible, area, 0.0)
        stock = np.ones(len(ids), dtype=bool)
        need = 10.0 * ilen * w_rho
        while stock.any():
            sums = stock.astype(float) @ weight
            ok = np.flatnonzero(sums >= need)
            if ok.size == 0:
                break
            # coarse-to-fine, left-to-right order: the first hit is the longest, leftmost one
            c = int(ok[0])
            take = stock & eligible[:, c] & hit[:, c]
            chosen.append((float(lo[c]), float(hi[c])))
            chosen_members.append([ids[k] for k in np.flatnonzero(take)])
            stock &= ~take
        residual = [ids[k] for k in np.flatnonzero(stock)]
    else:
        residual = ids
    ud.intervals[rep] = chosen
    ud.interval_members[rep] = chosen_members
    ud.residual[rep] = residual
    return ud


# ---------------------------------------------------------------- checks

@dataclass
class EstimateReport:
    name: str
    measured: float
    bound: str
    ratio: float
    instances: int
    violations: int = 0
    slack: float = 0.0

    def to_dict(self) -> dict:
        return asdict(self)


def _report(name, bound, ratios, violations=0, slack=0.0, measured=None) -> EstimateReport:
    ratios = [float(r) for r in ratios]
    top = max(ratios) if ratios else 0.0
    return EstimateReport(name, top if measured is None else float(measured), bound, top,
                          len(ratios), int(violations), float(slack))


def check_lemma_samedirection(ud: UDecomposition) -> EstimateReport:
    """angle(R', R) <= angle(rho, R) / 2 + slack for every R' grouped under R."""
    slack = 2.0 * ud.pitch / ud.rho.length
    ratios, bad = [], 0
    for rep in ud.reps:
        R = ud.rects[rep]
        half_theta = 0.5 * ud.theta[rep]
        for rid in ud.members[rep]:
            lhs = angle_dist(ud.rects[rid].dir, R.dir)
            rhs = half_theta + slack
            ratios.append(lhs / rhs)
            if lhs > rhs:
                bad += 1
    return _report("samedirection", "angle(e_R', e_R) <= angle(e_rho, e_R)/2 + slack",
                   ratios, bad, slack)


def check_lemma_geo(ud: UDecomposition, rep: int) -> EstimateReport:
    """Where the long members fill I x J, no short member may touch 4I x J."""
    ids = list(ud.members[rep])
    lo, hi = rep_candidates(ud, rep)
    if lo.size == 0 or not ids:
        return _report("geo", "no short R'' meets 4I x J under hypothesis (1)", [], 0)
    area, _ = band_tables(ud, ids, lo, hi)
    _, hit4 = band_tables(ud, ids, lo, hi, scale=4.0)
    lengths = np.array([ud.rects[i].length for i in ids])
    ilen = hi - lo
    long_ = lengths[:, None] >= 8.0 * ilen[None, :]
    fill = np.where(long_, area, 0.0).sum(axis=0)
    hyp = fill >= ilen * ud.rho.width
    short_hit = (lengths[:, None] < ilen[None, :]) & hit4
    bad = int(np.sum(short_hit[:, hyp]))
    ratios = (fill / (ilen * ud.rho.width))[hyp]
    return _report("geo", "no short R'' meets 4I x J under hypothesis (1)", ratios, bad,
                   measured=float(np.sum(hyp)))


def check_lemma_stromberg(ud: UDecomposition, rep: int, kappa: int = 100) -> EstimateReport:
    """Members with L(R') <= |I| <= sqrt(kappa) L(R') cover I x J at most 5 times over."""
    ids = list(ud.members[rep])
    lo, hi = rep_candidates(ud, rep)
    slack = 2.0 * ud.pitch * ud.rho.width
    if lo.size == 0 or not ids:
        return _report("stromberg", "<= 5 |I| W(rho) + slack", [], 0, slack)
    area, _ = band_tables(ud, ids, lo, hi)
    lengths = np.array([ud.rects[i].length for i in ids])
    ilen = hi - lo
    window = (lengths[:, None] <= ilen[None, :]) & (ilen[None, :] <= math.sqrt(kappa) * lengths[:, None])
    sums = np.where(window, area, 0.0).sum(axis=0)
    ratios = sums / (5.0 * ilen * ud.rho.width + slack)
    return _report("stromberg", "<= 5 |I| W(rho) + slack", ratios, int(np.sum(ratios > 1.0)), slack)


def interval_combinatorics(intervals: list[tuple[float, float]], kappa: int) -> tuple[int, int]:
    """(points in three intervals, close pairs without the sqrt(kappa) length gap)."""
    triple = 0
    events = sorted([(a, 0) for a, _ in intervals] + [(b, 1) for _, b in intervals])
    depth = 0
    for _, kind in events:
        if kind == 0:
            depth += 1
            if depth >= 3:
                triple += 1
        else:
            depth -= 1
    close = 0
    root = math.sqrt(kappa)
    for i in range(len(intervals)):
        for j in range(i + 1, len(intervals)):
            a0, a1 = intervals[i]
            b0, b1 = intervals[j]
            ma, mb = 0.5 * (a0 + a1), 0.5 * (b0 + b1)
            la, lb = a1 - a0, b1 - b0
            if abs(ma - mb) <= la + lb:  # doubled intervals meet
                if not root * min(la, lb) < max(la, lb):
                    close += 1
    return triple, close


def _areas(a: list[Rect], b: list[Rect]) -> np.ndarray:
    if not a or not b:
        return np.zeros((len(a), len(b)))
    return _kernels.pairwise_areas(rect_array(a), rect_array(b))


def union_area(rects: list[Rect]) -> float:
    if not rects:
        return 0.0
    return float(shapely.area(shapely.union_all([shapely.Polygon(R.corners()) for R in rects])))


HOST_SCALES = (0.25, 0.5, 1.0, 4.0, 16.0, 64.0)


def host_family(cr: CoveringResult, fam: RectFamily,
                scales=(1.0,)) -> list[tuple[Rect, list[Rect]]]:
    """Hosts I x J_rho (rho selected, |I| = c L(rho)) with their crossing classes.

    For c = 1 the class is exactly T_rho.  Other hosts keep rho's width,
    center and axis; their class holds the other selected rectangles that
    meet the host, are no longer than it, and whose tenfold arc misses the
    host's arc.
    """
    by_id = {R.id: R for R in fam.rects}
    sel = [by_id[i] for i in cr.selected]
    rows = rect_array(sel)
    out = []
    for rid in cr.selected:
        rho = by_id[rid]
        for c in scales:
            L = c * rho.length
            if L < rho.width:
                continue
            if c == 1.0:
                host = rho
                cls = [by_id[i] for i in cr.tRho.get(rid, [])]
            else:
                host = Rect(rho.center, rho.dir, L, rho.width, rho.id)
                hit = _kernels.pairwise_overlap(rect_array([host]), rows)[0]
                ex_h = ex_interval(host)
                cls = [R for R, h in zip(sel, hit)
                       if h and R.id != rid and R.length <= L
                       and not ex_interval(R).dilate(PAIR_DILATION).contains_arc(ex_h)]
            if cls:
                out.append((host, cls))
    return out


def stress_hosts(fam: RectFamily, n_hosts: int = 8,
                 max_class: int = 200) -> list[tuple[Rect, list[Rect]]]:
    """Crossing classes drawn from the whole family, ignoring the selection.

    Every rectangle is a candidate host; the ``n_hosts`` with the largest
    classes are kept (ties by id).  The lemmas lean on the covering, so
    checks on these classes are diagnostics.
    """
    rects = fam.rects
    n = len(rects)
    if n == 0:
        return []
    hit = _kernels.pairwise_overlap(fam.rows, fam.rows)
    lengths = fam.rows[:, 4]
    ecc = fam.rows[:, 5] / lengths
    ang = np.array([R.dir.angle for R in rects])
    gap = angle_dist_array(ang[:, None], ang[None, :])
    # EX(rho) inside 10 EX(R) iff gap + ecc_rho / 2 <= 5 ecc_R
    inside = (gap + 0.5 * ecc[:, None] <= 0.5 * PAIR_DILATION * ecc[None, :] + ARC_EPS) \
        | (PAIR_DILATION * ecc[None, :] >= TWO_PI)
    member = hit & (lengths[None, :] <= lengths[:, None]) & ~inside
    np.fill_diagonal(member, False)
    size = member.sum(axis=1)
    hosts = sorted((k for k in range(n) if size[k] > 0), key=lambda k: (-size[k], rects[k].id))
    return [(rects[k], [rects[j] for j in np.flatnonzero(member[k])[:max_class]])
            for k in hosts[:n_hosts]]


def decompose(hosts, v: VectorField, s: Sampler | None = None) -> list[UDecomposition]:
    uds = []
    for host, cls in hosts:
        ud = build_U(host, cls, v, s)
        for rep in ud.reps:
            build_I_intervals(ud, rep)
        uds.append(ud)
    return uds


def verify_estimates(cr: CoveringResult, uds: list[UDecomposition], fam: RectFamily,
                     delta: float | None = None) -> list[EstimateReport]:
    delta = fam.delta if delta is None else delta
    by_id = {R.id: R for R in fam.rects}
    sel = [by_id[i] for i in cr.selected]
    dis = [by_id[i] for i in cr.discarded]
    reports = []

    # S_R packing against |R|
    r1 = []
    for R in sel:
        rhos = [by_id[i] for i in cr.sR.get(R.id, [])]
        if rhos:
            r1.append(float(_areas([R], rhos).sum()) / R.area)
    reports.append(_report("uni1", "sum_{rho in S_R} |R ∩ rho| <= |R|", r1))

    r2, rU, r3, rV, rB_lo, rB_hi, rB_v = [], [], [], [], [], [], []
    triple = close = 0
    for ud in uds:
        rho = ud.rho
        members = [ud.rects[i] for i in ud.rects]
        r2.append(float(_areas([rho], members).sum()) / (rho.area / delta))
        rU.append(sum(ud.rects[i].length for i in ud.reps) / (rho.length / delta))
        for rid, R in ud.rects.items():
            sh = ud.shadows[rid]
            if sh is not None:
                rB_lo.append(R.length / max(sh[1] - sh[0], 1e-300))
                rB_hi.append((sh[1] - sh[0]) / (2.0 * R.length))
            rB_v.append(delta * R.length / max(ud.vsets[rid].length, 1e-300)
                        if not ud.vsets[rid].empty() else math.inf)
        for rep in ud.reps:
            grp = [ud.rects[i] for i in ud.members[rep]]
            r3.append(float(_areas([rho], grp).sum()) / (ud.rects[rep].length * rho.width))
            for (a, b), mem in zip(ud.intervals.get(rep, []), ud.interval_members.get(rep, [])):
                area = float(_areas([rho], [ud.rects[i] for i in mem]).sum())
                rV.append(area / (20.0 * (b - a) * rho.width))
            t3, c2 = interval_combinatorics(ud.intervals.get(rep, []), cr.kappa)
            triple += t3
            close += c2
    reports.append(_report("uni2", "sum_{R in T_rho} |R ∩ rho| <~ |rho| / delta", r2))
    reports.append(_report("U", "sum_{R in U} L(R) <~ L(rho) / delta", rU))
    reports.append(_report("uni3", "sum_{R' in U(R)} |R' ∩ rho| <~ L(R) W(rho)", r3))
    reports.append(_report("V", "sum_{R' in V(I)} |R' ∩ rho| <= 20 |I| W(rho)", rV,
                           violations=sum(r > 1.0 for r in rV)))
    finite_v = [r for r in rB_v if math.isfinite(r)]
    reports.append(_report("B_length_lower", "L(R) <= |I_R|", rB_lo))
    reports.append(_report("B_length_upper", "|I_R| <= 2 L(R)", rB_hi,
                           violations=sum(r > 1.0 + 1e-12 for r in rB_hi)))
    reports.append(_report("B_vset", "delta L(R) <~ |V_R|", finite_v,
                           violations=len(rB_v) - len(finite_v)))
    reports.append(EstimateReport("interval_triple", float(triple), "no point in three intervals",
                                  float(triple), len(uds), triple))
    reports.append(EstimateReport("interval_gap", float(close),
                                  "2I ∩ 2I' != 0 => sqrt(kappa)|I'| < |I|", float(close),
                                  len(uds), close))

    l1 = sum(R.area for R in sel)
    l2sq = float(_areas(sel, sel).sum())
    reports.append(_report("2<1", "||sum 1_R'||_2^2 <~ ||sum 1_R'||_1 / delta",
                           [l2sq / (l1 / delta)] if l1 > 0 else []))
    reports.append(_report("bigcup", "|U R''| <~ ||sum 1_R'||_1",
                           [union_area(dis) / l1] if l1 > 0 else []))

    sd = [check_lemma_samedirection(ud) for ud in uds]
    reports.append(_merge("samedirection", sd))
    reports.append(_merge("geo", [check_lemma_geo(ud, rep) for ud in uds for rep in ud.reps]))
    reports.append(_merge("stromberg", [check_lemma_stromberg(ud, rep, cr.kappa)
                                        for ud in uds for rep in ud.reps]))
    return reports


def _merge(name: str, parts: list[EstimateReport]) -> EstimateReport:
    if not parts:
        return EstimateReport(name, 0.0, "", 0.0, 0)
    return EstimateReport(name, max(p.measured for p in parts), parts[0].bound,
                          max(p.ratio for p in parts), sum(p.instances for p in parts),
                          sum(p.violations for p in parts), max(p.slack for p in parts))


def run_pipeline(fam: RectFamily, v: VectorField, kappa: int = 100,
                 scales=HOST_SCALES, s: Sampler | None = None):
    """select -> classify -> U per host -> I per rep -> reports."""
    cr = select_covering(fam, kappa)
    cr = classify_pairs(cr, fam, v)
    uds = decompose(host_family(cr, fam, scales), v, s)
    return cr, uds, verify_estimates(cr, uds, fam)


def bundle(cr: CoveringResult, uds: list[UDecomposition], reports: list[EstimateReport]) -> dict:
    return {"covering": cr.to_dict(), "hosts": [ud.to_dict() for ud in uds],
            "reports": [r.to_dict() for r in reports]}


def dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=1, allow_nan=True)
