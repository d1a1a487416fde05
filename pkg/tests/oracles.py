"""Independent reference computations used by the tests."""

import math

import numpy as np
from scipy.stats import qmc

from lipkakeya.geometry import Rect, contains_point


def sobol(n, seed=0):
    m = math.ceil(math.log2(n))
    return qmc.Sobol(d=2, scramble=True, seed=seed).random_base2(m)[:n]


def mc_intersection_area(R1: Rect, R2: Rect, n=10 ** 6, seed=0) -> float:
    """Fraction of quasi-random points of the smaller rectangle that fall in the other."""
    A, B = (R1, R2) if R1.area <= R2.area else (R2, R1)
    u = (sobol(n, seed) - 0.5)
    p = np.column_stack([u[:, 0] * A.length, u[:, 1] * A.width])
    c, s = A.dir.cos, A.dir.sin
    x = A.center[0] + p[:, 0] * c - p[:, 1] * s
    y = A.center[1] + p[:, 0] * s + p[:, 1] * c
    dx, dy = x - B.center[0], y - B.center[1]
    bu = dx * B.dir.cos + dy * B.dir.sin
    bw = -dx * B.dir.sin + dy * B.dir.cos
    inside = (np.abs(bu) <= 0.5 * B.length) & (np.abs(bw) <= 0.5 * B.width)
    return float(inside.mean()) * A.area


def brute_force_max(points, rects, avgs, ids):
    """Per point, per rectangle double loop: max average, ties to the smallest id."""
    vals = np.zeros(len(points))
    wit = np.full(len(points), -1, dtype=np.int64)
    for k, p in enumerate(points):
        best, who = 0.0, -1
        for R, a, i in zip(rects, avgs, ids):
            if contains_point(R, (p[0], p[1])):
                if who < 0 or a > best or (a == best and i < who):
                    best, who = a, i
        vals[k], wit[k] = best, who
    return vals, wit


def quadratic_grouping(ids, lengths, vsets):
    """Greedy grouping that tests every pair of projections directly."""
    stock = sorted(ids, key=lambda i: (-lengths[i], i))
    reps, members = [], {}
    while stock:
        r = stock[0]
        grp = [i for i in stock if vsets[r].overlaps(vsets[i]) or i == r]
        reps.append(r)
        members[r] = sorted(grp)
        stock = [i for i in stock if i not in grp]
    return reps, members


def chord_quadrature(indicator, p, w, s, m=20000):
    """Mean of ``indicator`` over the segment p + t w, |t| <= s (midpoint rule)."""
    t = ((np.arange(m) + 0.5) / m - 0.5) * 2 * s
    return float(np.mean(indicator(p[0] + t * w[0], p[1] + t * w[1])))


def bilinear(values, pitch, x, y, origin=(0.0, 0.0)):
    """Bilinear interpolant of grid samples, zero outside the grid."""
    nx, ny = values.shape
    u = (np.asarray(x) - origin[0]) / pitch
    w = (np.asarray(y) - origin[1]) / pitch
    i0, j0 = np.floor(u).astype(int), np.floor(w).astype(int)
    fu, fw = u - i0, w - j0
    out = np.zeros(np.shape(u))
    for di, a in ((0, 1 - fu), (1, fu)):
        for dj, b in ((0, 1 - fw), (1, fw)):
            i, j = i0 + di, j0 + dj
            ok = (i >= 0) & (i < nx) & (j >= 0) & (j < ny)
            out[ok] += values[i[ok], j[ok]] * a[ok] * b[ok]
    return out


def mc_rect_mean(values, pitch, R: Rect, n=10 ** 6, seed=3, origin=(0.0, 0.0)):
    u = sobol(n, seed) - 0.5
    c, s = R.dir.cos, R.dir.sin
    du, dw = u[:, 0] * R.length, u[:, 1] * R.width
    x = R.center[0] + du * c - dw * s
    y = R.center[1] + du * s + dw * c
    return float(bilinear(values, pitch, x, y, origin).mean())


def refined_density(row, angle_fn, n, seed=11):
    """|V(R)|/|R| by n scrambled Sobol points, the direction test done from scratch."""
    cx, cy, c, s, L, W = row
    u = sobol(n, seed) - 0.5
    x = cx + u[:, 0] * L * c - u[:, 1] * W * s
    y = cy + u[:, 0] * L * s + u[:, 1] * W * c
    diff = np.angle(np.exp(1j * (angle_fn(x, y) - math.atan2(s, c))))
    return float(np.mean(np.abs(diff) <= 0.5 * W / L + 1e-12))


def _corners(r):
    cx, cy, c, s, L, W = r
    return [(cx + a * 0.5 * L * c - b * 0.5 * W * s, cy + a * 0.5 * L * s + b * 0.5 * W * c)
            for a, b in ((-1, -1), (1, -1), (1, 1), (-1, 1))]


def _chords(r, px, py, wx, wy, half):
    """Length of {t in [-half, half] : p + t w in r}, by slab clipping."""
    cx, cy, c, s, L, W = r
    lo = np.full(px.shape, -half)
    hi = np.full(px.shape, half)
    for p0, d, h in ((((px - cx) * c + (py - cy) * s), wx * c + wy * s, 0.5 * L),
                     ((-(px - cx) * s + (py - cy) * c), -wx * s + wy * c, 0.5 * W)):
        if abs(d) < 1e-15:
            lo = np.where(np.abs(p0) > h, np.inf, lo)
            continue
        t1, t2 = (-h - p0) / d, (h - p0) / d
        lo = np.maximum(lo, np.minimum(t1, t2))
        hi = np.minimum(hi, np.maximum(t1, t2))
    return np.clip(hi - lo, 0.0, None)


def clip_areas(r, px, py, h):
    """|[px-h, px+h] x [py-h, py+h] ∩ r| for every point: Sutherland-Hodgman, vectorized."""
    n = px.size
    V = np.zeros((n, 8, 2))
    V[:, :4] = np.array(_corners(r))[None]
    cnt = np.full(n, 4)
    rows = np.arange(n)
    for axis, sign, bound in ((0, 1, px - h), (0, -1, px + h), (1, 1, py - h), (1, -1, py + h)):
        out = np.zeros_like(V)
        oc = np.zeros(n, dtype=int)
        for i in range(8):
            live = i < cnt
            if not live.any():
                break
            j = np.where(cnt > 0, (i + 1) % np.maximum(cnt, 1), 0)
            cur, nxt = V[rows, i], V[rows, j]
            dc = sign * (cur[:, axis] - bound)
            dn = sign * (nxt[:, axis] - bound)
            cin, nin = dc >= 0, dn >= 0
            cross = live & (cin != nin)
            t = np.where(cross, dc / np.where(cross, dc - dn, 1.0), 0.0)
            pt = cur + t[:, None] * (nxt - cur)
            out[rows[cross], oc[cross]] = pt[cross]
            oc = oc + cross
            keep = live & nin
            out[rows[keep], oc[keep]] = nxt[keep]
            oc = oc + keep
        V, cnt = out, oc
    x, y = V[:, :, 0], V[:, :, 1]
    idx = np.arange(8)[None, :]
    nx_ = np.where(cnt[:, None] > 0, (idx + 1) % np.maximum(cnt, 1)[:, None], 0)
    xn, yn = np.take_along_axis(x, nx_, 1), np.take_along_axis(y, nx_, 1)
    term = np.where(idx < cnt[:, None], x * yn - xn * y, 0.0)
    return 0.5 * np.abs(term.sum(axis=1))


def mkappa_direct(px, py, big_rows, kappa, scales):
    """M_kappa of a sum of rectangle indicators at the given points, every term computed."""
    best = np.zeros(px.size)
    ang = 2 * np.pi * np.arange(kappa) / kappa
    for s in scales:
        tot = np.zeros(px.size)
        for r in big_rows:
            tot += clip_areas(r, px, py, 0.5 * s)
        best = np.maximum(best, tot / (s * s))
        for a in ang:
            tot = np.zeros(px.size)
            for r in big_rows:
                tot += _chords(r, px, py, math.cos(a), math.sin(a), s)
            best = np.maximum(best, tot / (2 * s))
    return best


def greedy_selection(fam, kappa, scales):
    """The selection loop, M_kappa recomputed from scratch at every step."""
    rects = fam.rects
    order = sorted(range(len(rects)), key=lambda k: (-rects[k].length,
                                                     rects[k].width / rects[k].length, rects[k].id))
    big = np.array(fam.rows, dtype=float)
    big[:, 4:6] *= kappa
    lat = {}
    for k, R in enumerate(rects):
        u = ((np.arange(64) + 0.5) / 64 - 0.5) * R.length
        w = ((np.arange(8) + 0.5) / 8 - 0.5) * R.width
        uu, ww = np.meshgrid(u, w, indexing="ij")
        uu, ww = uu.ravel(), ww.ravel()
        lat[k] = (R.center[0] + uu * R.dir.cos - ww * R.dir.sin,
                  R.center[1] + uu * R.dir.sin + ww * R.dir.cos)
    stock, sel, selected, discarded = list(order), [], [], []
    while stock:
        k = stock.pop(0)
        sel.append(k)
        selected.append(rects[k].id)
        if not stock:
            break
        px = np.concatenate([lat[j][0] for j in stock])
        py = np.concatenate([lat[j][1] for j in stock])
        ok = (mkappa_direct(px, py, big[sel], kappa, scales) >= 1.0 / kappa).reshape(len(stock), -1)
        gone = ok.all(axis=1)
        discarded += [rects[j].id for j, g in zip(stock, gone) if g]
        stock = [j for j, g in zip(stock, gone) if not g]
    return selected, discarded
