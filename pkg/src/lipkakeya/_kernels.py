"""Numba kernels shared by the geometry, maximal and covering modules.

Rectangles are passed as flat float arrays ``(cx, cy, cos, sin, length, width)``.
Trigonometric values are always precomputed by the caller so that the
Python-level predicates and the kernels see identical inputs.
"""

import numpy as np
from numba import njit

CLIP_EPS = 1e-12
AREA_FLOOR = 1e-14
_MAXV = 16


@njit(cache=True)
def contains(cx, cy, c, s, L, W, px, py):
    dx = px - cx
    dy = py - cy
    u = dx * c + dy * s
    w = -dx * s + dy * c
    return abs(u) <= 0.5 * L and abs(w) <= 0.5 * W


@njit(cache=True)
def _clip(xs, ys, n, axis, sign, h, ox, oy):
    # keep sign * coord <= h
    m = 0
    if n == 0:
        return 0
    for i in range(n):
        j = (i + 1) % n
        ai = sign * (xs[i] if axis == 0 else ys[i])
        aj = sign * (xs[j] if axis == 0 else ys[j])
        ini = ai <= h + CLIP_EPS
        inj = aj <= h + CLIP_EPS
        if ini:
            ox[m] = xs[i]
            oy[m] = ys[i]
            m += 1
        if ini != inj:
            den = aj - ai
            if abs(den) > CLIP_EPS:
                t = (h - ai) / den
                ox[m] = xs[i] + t * (xs[j] - xs[i])
                oy[m] = ys[i] + t * (ys[j] - ys[i])
                m += 1
    return m


@njit(cache=True)
def rect_rect_area(ax, ay, ac, as_, aL, aW, bx, by, bc, bs, bL, bW):
    """Area of A ∩ B: corners of A, expressed in B's frame, clipped to B's box."""
    xs = np.empty(_MAXV)
    ys = np.empty(_MAXV)
    tx = np.empty(_MAXV)
    ty = np.empty(_MAXV)
    hl = 0.5 * aL
    hw = 0.5 * aW
    su = (-1.0, 1.0, 1.0, -1.0)
    sw = (-1.0, -1.0, 1.0, 1.0)
    for k in range(4):
        px = ax + su[k] * hl * ac - sw[k] * hw * as_
        py = ay + su[k] * hl * as_ + sw[k] * hw * ac
        dx = px - bx
        dy = py - by
        xs[k] = dx * bc + dy * bs
        ys[k] = -dx * bs + dy * bc
    n = 4
    n = _clip(xs, ys, n, 0, 1.0, 0.5 * bL, tx, ty)
    n = _clip(tx, ty, n, 0, -1.0, 0.5 * bL, xs, ys)
    n = _clip(xs, ys, n, 1, 1.0, 0.5 * bW, tx, ty)
    n = _clip(tx, ty, n, 1, -1.0, 0.5 * bW, xs, ys)
    if n < 3:
        return 0.0
    area = 0.0
    for i in range(n):
        j = (i + 1) % n
        area += xs[i] * ys[j] - xs[j] * ys[i]
    area = 0.5 * abs(area)
    if area < AREA_FLOOR:
        return 0.0
    return area


@njit(cache=True)
def rects_overlap(ax, ay, ac, as_, aL, aW, bx, by, bc, bs, bL, bW):
    """Closed-set intersection test by separating axes."""
    dx = bx - ax
    dy = by - ay
    axes_c = (ac, -as_, bc, -bs)
    axes_s = (as_, ac, bs, bc)
    for k in range(4):
        ux = axes_c[k]
        uy = axes_s[k]
        ra = 0.5 * aL * abs(ac * ux + as_ * uy) + 0.5 * aW * abs(-as_ * ux + ac * uy)
        rb = 0.5 * bL * abs(bc * ux + bs * uy) + 0.5 * bW * abs(-bs * ux + bc * uy)
        if abs(dx * ux + dy * uy) > ra + rb + CLIP_EPS:
            return False
    return True


@njit(cache=True)
def pairwise_areas(a, b):
    """Matrix of intersection areas between rect arrays ``a`` (n,6) and ``b`` (m,6)."""
    n = a.shape[0]
    m = b.shape[0]
    out = np.zeros((n, m))
    for i in range(n):
        ri = 0.5 * np.hypot(a[i, 4], a[i, 5])
        for j in range(m):
            rj = 0.5 * np.hypot(b[j, 4], b[j, 5])
            if np.hypot(a[i, 0] - b[j, 0], a[i, 1] - b[j, 1]) > ri + rj:
                continue
            out[i, j] = rect_rect_area(a[i, 0], a[i, 1], a[i, 2], a[i, 3], a[i, 4], a[i, 5],
                                       b[j, 0], b[j, 1], b[j, 2], b[j, 3], b[j, 4], b[j, 5])
    return out


# ---------------------------------------------------------------- sampling

@njit(cache=True)
def bilinear(values, ox, oy, pitch, px, py):
    nx = values.shape[0]
    ny = values.shape[1]
    u = (px - ox) / pitch
    w = (py - oy) / pitch
    i0 = int(np.floor(u))
    j0 = int(np.floor(w))
    fu = u - i0
    fw = w - j0
    acc = 0.0
    for di in range(2):
        i = i0 + di
        if i < 0 or i >= nx:
            continue
        wu = fu if di == 1 else 1.0 - fu
        if wu == 0.0:
            continue
        for dj in range(2):
            j = j0 + dj
            if j < 0 or j >= ny:
                continue
            ww = fw if dj == 1 else 1.0 - fw
            if ww == 0.0:
                continue
            acc += values[i, j] * (wu * ww)
    return acc


@njit(cache=True)
def rect_averages(values, ox, oy, pitch, rects, n_len, n_wid):
    """Mean of bilinear-interpolated values over a midpoint lattice in each rect."""
    n = rects.shape[0]
    out = np.empty(n)
    for r in range(n):
        cx = rects[r, 0]
        cy = rects[r, 1]
        c = rects[r, 2]
        s = rects[r, 3]
        L = rects[r, 4]
        W = rects[r, 5]
        acc = 0.0
        for a in range(n_len):
            u = ((a + 0.5) / n_len - 0.5) * L
            for b in range(n_wid):
                w = ((b + 0.5) / n_wid - 0.5) * W
                px = cx + u * c - w * s
                py = cy + u * s + w * c
                acc += bilinear(values, ox, oy, pitch, px, py)
        out[r] = acc / (n_len * n_wid)
    return out


@njit(cache=True)
def paint_max(nx, ny, ox, oy, pitch, rects, avgs, ids, values, witness):
    """Pointwise sup of ``avgs[r] * 1_{rect r}`` over grid points, ties to smallest id."""
    for r in range(rects.shape[0]):
        cx = rects[r, 0]
        cy = rects[r, 1]
        c = rects[r, 2]
        s = rects[r, 3]
        L = rects[r, 4]
        W = rects[r, 5]
        ex = 0.5 * (L * abs(c) + W * abs(s))
        ey = 0.5 * (L * abs(s) + W * abs(c))
        i0 = max(0, int(np.floor((cx - ex - ox) / pitch)) - 1)
        i1 = min(nx - 1, int(np.ceil((cx + ex - ox) / pitch)) + 1)
        j0 = max(0, int(np.floor((cy - ey - oy) / pitch)) - 1)
        j1 = min(ny - 1, int(np.ceil((cy + ey - oy) / pitch)) + 1)
        a = avgs[r]
        rid = ids[r]
        for i in range(i0, i1 + 1):
            px = ox + i * pitch
            for j in range(j0, j1 + 1):
                py = oy + j * pitch
                if contains(cx, cy, c, s, L, W, px, py):
                    cur = values[i, j]
                    wid_ = witness[i, j]
                    if wid_ < 0 or a > cur or (a == cur and rid < wid_):
                        values[i, j] = a
                        witness[i, j] = rid


@njit(cache=True)
def paint_points(pxs, pys, rects, avgs, ids, values, witness):
    """Same as :func:`paint_max` for an arbitrary point list (no spatial index)."""
    for r in range(rects.shape[0]):
        a = avgs[r]
        rid = ids[r]
        for k in range(pxs.shape[0]):
            if contains(rects[r, 0], rects[r, 1], rects[r, 2], rects[r, 3],
                        rects[r, 4], rects[r, 5], pxs[k], pys[k]):
                cur = values[k]
                wid_ = witness[k]
                if wid_ < 0 or a > cur or (a == cur and rid < wid_):
                    values[k] = a
                    witness[k] = rid


# ------------------------------------------------------- M_kappa on polygons

@njit(cache=True)
def chord_length(cx, cy, c, s, L, W, px, py, wx, wy, half):
    """Length of {p + t w : |t| <= half} inside the rectangle."""
    dx = px - cx
    dy = py - cy
    u0 = dx * c + dy * s
    v0 = -dx * s + dy * c
    du = wx * c + wy * s
    dv = -wx * s + wy * c
    lo = -half
    hi = half
    for k in range(2):
        p0 = u0 if k == 0 else v0
        d = du if k == 0 else dv
        h = 0.5 * L if k == 0 else 0.5 * W
        if abs(d) < 1e-15:
            if abs(p0) > h:
                return 0.0
        else:
            t1 = (-h - p0) / d
            t2 = (h - p0) / d
            if t1 > t2:
                t1, t2 = t2, t1
            if t1 > lo:
                lo = t1
            if t2 < hi:
                hi = t2
    if hi > lo:
        return hi - lo
    return 0.0


PRUNE_MARGIN = 1.0 + 1e-9


@njit(cache=True)
def point_rect_distance(px, py, cx, cy, c, s, L, W):
    dx = px - cx
    dy = py - cy
    u = abs(dx * c + dy * s) - 0.5 * L
    w = abs(-dx * s + dy * c) - 0.5 * W
    return np.hypot(max(u, 0.0), max(w, 0.0))


@njit(cache=True)
def mkappa_point(px, py, rects, radii, omega_c, omega_s, scales, threshold):
    """M_kappa of sum of indicators of ``rects`` at one point.

    With ``threshold > 0`` this only decides ``value >= threshold``: scales
    are visited in decreasing order of a crude upper bound, scales whose
    bound is below the threshold are skipped, and the scan stops at the
    first window reaching it.  Each window's value is the same float sum
    (rects in array order) as in an exhaustive scan, because rects farther than the window's reach add exactly zero and
    are skipped.
    With ``threshold <= 0`` the exact maximum over all windows is returned.
    """
    n = rects.shape[0]
    ns = scales.shape[0]
    dist = np.empty(n)
    for r in range(n):
        dist[r] = point_rect_distance(px, py, rects[r, 0], rects[r, 1], rects[r, 2],
                                      rects[r, 3], rects[r, 4], rects[r, 5])
    bound = np.empty(ns)
    for si in range(ns):
        sc = scales[si]
        reach = sc * 0.7072
        seg_bound = 0.0
        area_bound = 0.0
        for r in range(n):
            if dist[r] <= sc * PRUNE_MARGIN:
                # a line through an outside point meets a convex set on one side only
                cap = 2.0 * sc if dist[r] == 0.0 else sc - dist[r] * (2.0 - PRUNE_MARGIN)
                seg_bound += max(min(cap, 2.0 * radii[r]), 0.0)
            if dist[r] <= reach * PRUNE_MARGIN:
                area_bound += min(rects[r, 4] * rects[r, 5], sc * sc)
        bound[si] = max(seg_bound / (2.0 * sc), area_bound / (sc * sc)) * (1.0 + 1e-9)
    if threshold > 0.0:
        visit = np.argsort(-bound, kind="mergesort")
    else:
        visit = np.arange(ns)
    best = 0.0
    nk = omega_c.shape[0]
    for q in range(ns):
        si = visit[q]
        if threshold > 0.0 and bound[si] < threshold:
            break
        sc = scales[si]
        reach = sc * 0.7072
        acc = 0.0
        for r in range(n):
            if dist[r] > reach * PRUNE_MARGIN:
                continue
            acc += rect_rect_area(px, py, 1.0, 0.0, sc, sc,
                                  rects[r, 0], rects[r, 1], rects[r, 2], rects[r, 3],
                                  rects[r, 4], rects[r, 5])
        val = acc / (sc * sc)
        if val > best:
            best = val
        if threshold > 0.0 and best >= threshold:
            return best
        for k in range(nk):
            acc = 0.0
            for r in range(n):
                if dist[r] > sc * PRUNE_MARGIN:
                    continue
                acc += chord_length(rects[r, 0], rects[r, 1], rects[r, 2], rects[r, 3],
                                    rects[r, 4], rects[r, 5], px, py,
                                    omega_c[k], omega_s[k], sc)
            val = acc / (2.0 * sc)
            if val > best:
                best = val
            if threshold > 0.0 and best >= threshold:
                return best
    return best


@njit(cache=True)
def superlevel_scan(pxs, pys, start, rects, radii, omega_c, omega_s, scales, threshold):
    """Index of the first point from ``start`` with M_kappa < threshold, or len."""
    for k in range(start, pxs.shape[0]):
        if mkappa_point(pxs[k], pys[k], rects, radii, omega_c, omega_s,
                        scales, threshold) < threshold:
            return k
    return pxs.shape[0]


# ----------------------------------------------------- M_kappa on a grid

@njit(cache=True)
def mkappa_grid(values, pitch, n_dirs, scales, pi_, pj_, prefix):
    """M_kappa at grid sites (pi_, pj_): square counts via ``prefix``, segments by quadrature."""
    nx = values.shape[0]
    ny = values.shape[1]
    out = np.zeros(pi_.shape[0])
    for k in range(pi_.shape[0]):
        i = pi_[k]
        j = pj_[k]
        px = i * pitch
        py = j * pitch
        best = 0.0
        for si in range(scales.shape[0]):
            s = scales[si]
            h = int(np.floor(0.5 * s / pitch + 1e-9))
            a0 = max(i - h, 0)
            a1 = min(i + h, nx - 1)
            b0 = max(j - h, 0)
            b1 = min(j + h, ny - 1)
            tot = prefix[a1 + 1, b1 + 1] - prefix[a0, b1 + 1] - prefix[a1 + 1, b0] + prefix[a0, b0]
            val = tot / ((2 * h + 1) * (2 * h + 1))
            if val > best:
                best = val
            m = max(8, 2 * int(np.ceil(2.0 * s / pitch)))
            for d in range(n_dirs):
                ang = 2.0 * np.pi * d / n_dirs
                wx = np.cos(ang)
                wy = np.sin(ang)
                acc = 0.0
                for q in range(m):
                    sig = ((q + 0.5) / m - 0.5) * 2.0 * s
                    acc += bilinear(values, 0.0, 0.0, pitch, px + sig * wx, py + sig * wy)
                val = acc / m
                if val > best:
                    best = val
        out[k] = best
    return out


@njit(cache=True)
def pairwise_overlap(a, b):
    n = a.shape[0]
    m = b.shape[0]
    out = np.zeros((n, m), dtype=np.bool_)
    for i in range(n):
        for j in range(m):
            out[i, j] = rects_overlap(a[i, 0], a[i, 1], a[i, 2], a[i, 3], a[i, 4], a[i, 5],
                                      b[j, 0], b[j, 1], b[j, 2], b[j, 3], b[j, 4], b[j, 5])
    return out


@njit(cache=True)
def band_areas(rows, shadow_lo, shadow_hi, hx, hy, hc, hs, hw, t_lo, t_hi, t_ref, scale):
    """Areas and overlaps of rects with boxes ``[t_lo, t_hi] x J`` along a host.

    Boxes are centered at ``(hx, hy) + (t_mid - t_ref) * e`` with extent
    ``scale * (t_hi - t_lo)`` along ``e = (hc, hs)`` and ``hw`` across.
    ``shadow_lo/hi`` are each rect's projection on the same coordinate,
    used to skip boxes that cannot meet the rect.
    """
    n = rows.shape[0]
    m = t_lo.shape[0]
    area = np.zeros((n, m))
    hit = np.zeros((n, m), dtype=np.bool_)
    for c in range(m):
        mid = 0.5 * (t_lo[c] + t_hi[c])
        ln = scale * (t_hi[c] - t_lo[c])
        a = mid - 0.5 * ln
        b = mid + 0.5 * ln
        bx = hx + (mid - t_ref) * hc
        by = hy + (mid - t_ref) * hs
        for r in range(n):
            if shadow_hi[r] < a - CLIP_EPS or shadow_lo[r] > b + CLIP_EPS:
                continue
            if ln >= hw:
                ar = rect_rect_area(rows[r, 0], rows[r, 1], rows[r, 2], rows[r, 3],
                                    rows[r, 4], rows[r, 5], bx, by, hc, hs, ln, hw)
                ov = rects_overlap(rows[r, 0], rows[r, 1], rows[r, 2], rows[r, 3],
                                   rows[r, 4], rows[r, 5], bx, by, hc, hs, ln, hw)
            else:
                ar = rect_rect_area(rows[r, 0], rows[r, 1], rows[r, 2], rows[r, 3],
                                    rows[r, 4], rows[r, 5], bx, by, -hs, hc, hw, ln)
                ov = rects_overlap(rows[r, 0], rows[r, 1], rows[r, 2], rows[r, 3],
                                   rows[r, 4], rows[r, 5], bx, by, -hs, hc, hw, ln)
            area[r, c] = ar
            hit[r, c] = ov
    return area, hit
