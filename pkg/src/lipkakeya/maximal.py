"""Discretized maximal operators: M_{v,delta}, Kakeya M_{K,eps}, M_kappa and M_v."""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from lipkakeya import _kernels
from lipkakeya.geometry import TWO_PI, Rect, UnitVec, angle_dist_array, rect_array
from lipkakeya.vectorfield import Sampler, VectorField, densities

AVG_LATTICE = (32, 8)  # samples along, across: 256 per rectangle
_HEADER = struct.Struct("<iid")


# ------------------------------------------------------------ scalar fields

@dataclass
class ScalarField:
    """Nonnegative samples ``values[i, j]`` at ``origin + (i, j) * pitch``."""

    origin: tuple[float, float]
    pitch: float
    values: np.ndarray
    prefix: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.values = np.ascontiguousarray(self.values, dtype=float)
        if self.values.ndim != 2:
            raise ValueError("values must be a 2-D array")
        if not self.pitch > 0:
            raise ValueError("pitch must be positive")
        if np.any(self.values < 0) or not np.all(np.isfinite(self.values)):
            raise ValueError("values must be finite and nonnegative")
        self.origin = (float(self.origin[0]), float(self.origin[1]))
        p = np.zeros((self.values.shape[0] + 1, self.values.shape[1] + 1))
        p[1:, 1:] = self.values.cumsum(0).cumsum(1)
        self.prefix = p

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    @property
    def l1(self) -> float:
        return float(self.values.sum()) * self.pitch ** 2

    @property
    def l2(self) -> float:
        return math.sqrt(float(np.sum(self.values ** 2))) * self.pitch

    def box_sum(self, i0: int, i1: int, j0: int, j1: int) -> float:
        """Sum of values[i0:i1+1, j0:j1+1] from the prefix table."""
        p = self.prefix
        return float(p[i1 + 1, j1 + 1] - p[i0, j1 + 1] - p[i1 + 1, j0] + p[i0, j0])

    def grid_points(self) -> np.ndarray:
        nx, ny = self.shape
        xs = self.origin[0] + np.arange(nx) * self.pitch
        ys = self.origin[1] + np.arange(ny) * self.pitch
        X, Y = np.meshgrid(xs, ys, indexing="ij")
        return np.stack([X, Y], axis=-1)

    @property
    def box(self) -> tuple[float, float, float, float]:
        nx, ny = self.shape
        return (self.origin[0], self.origin[1],
                self.origin[0] + (nx - 1) * self.pitch, self.origin[1] + (ny - 1) * self.pitch)

    def scaled(self, c: float) -> "ScalarField":
        return ScalarField(self.origin, self.pitch, self.values * c)


def disc_indicator(n: int, pitch: float, radius_cells: float, center=None,
                   origin=(0.0, 0.0), normalize: bool = True) -> ScalarField:
    """Indicator of a disc on an n x n grid, optionally scaled to unit L2 norm."""
    i = np.arange(n)
    ci, cj = ((n - 1) / 2.0, (n - 1) / 2.0) if center is None else center
    I, J = np.meshgrid(i, i, indexing="ij")
    vals = ((I - ci) ** 2 + (J - cj) ** 2 <= radius_cells ** 2).astype(float)
    f = ScalarField(origin, pitch, vals)
    if normalize and f.l2 > 0:
        f = ScalarField(origin, pitch, vals / f.l2)
    return f


def save_scalar_field(path, f: ScalarField):
    nx, ny = f.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(nx, ny, f.pitch))
        fh.write(np.ascontiguousarray(f.values, dtype="<f8").tobytes())


def load_scalar_field(path, origin=(0.0, 0.0)) -> ScalarField:
    data = Path(path).read_bytes()
    nx, ny, pitch = _HEADER.unpack_from(data)
    vals = np.frombuffer(data, dtype="<f8", offset=_HEADER.size)
    if vals.size != nx * ny:
        raise ValueError(f"grid file holds {vals.size} values, header says {nx}x{ny}")
    return ScalarField(origin, pitch, vals.reshape(nx, ny).copy())


def load_csv_field(path, pitch: float, origin=(0.0, 0.0)) -> ScalarField:
    vals = np.loadtxt(path, delimiter=",", ndmin=2)
    return ScalarField(origin, pitch, vals)


# ----------------------------------------------------------- rect families

@dataclass(frozen=True)
class EnumSpec:
    """Rectangle enumeration: dyadic lengths and widths, orientation and center lattices.

    Lengths are ``max_length * 2**-j`` for ``j <= j_max``; widths
    ``L * 2**-m`` for ``m <= m_max``.  Orientation pitch is
    ``orient_factor * W / L`` and center pitch ``center_factor * W``,
    floored at ``min_center_pitch``.
    """

    j_max: int = 2
    m_max: int = 4
    max_length: float | None = None
    orient_factor: float = 0.5
    center_factor: float = 0.5
    min_center_pitch: float = 0.0
    max_rects: int = 20_000_000


@dataclass
class RectFamily:
    rows: np.ndarray  # (n, 6): cx, cy, cos, sin, length, width
    angles: np.ndarray
    ids: np.ndarray
    densities: np.ndarray
    delta: float
    nu: float
    provenance: dict = field(default_factory=dict)

    def __len__(self):
        return self.rows.shape[0]

    def rect(self, k: int) -> Rect:
        r = self.rows[k]
        return Rect((r[0], r[1]), UnitVec(self.angles[k]), r[4], r[5], int(self.ids[k]))

    @property
    def rects(self) -> list[Rect]:
        return [self.rect(k) for k in range(len(self))]

    def density_of(self) -> dict[int, float]:
        return {int(i): float(d) for i, d in zip(self.ids, self.densities)}

    def subset(self, mask) -> "RectFamily":
        return RectFamily(self.rows[mask], self.angles[mask], self.ids[mask],
                          self.densities[mask], self.delta, self.nu, dict(self.provenance))

    @classmethod
    def from_rects(cls, rects, densities=None, delta=1.0, nu=math.inf, provenance=None):
        ids = np.array([r.id for r in rects], dtype=np.int64)
        if len(set(ids.tolist())) != len(ids):
            raise ValueError("rectangle ids must be unique")
        dens = np.ones(len(rects)) if densities is None else np.asarray(densities, float)
        return cls(rect_array(rects), np.array([r.dir.angle for r in rects]), ids, dens,
                   delta, nu, provenance or {})


def _lattice(lo: float, hi: float, pitch: float) -> np.ndarray:
    n = int(math.floor((hi - lo) / pitch + 1e-9)) + 1
    return lo + np.arange(max(n, 0)) * pitch


def enumerate_candidates(box, spec: EnumSpec, v: VectorField | None = None,
                         orient_range: float = TWO_PI, roi=None, field_domain=None):
    """Yield ``(rows, angles, group)`` blocks for every (L, W) group, in id order.

    With a field, orientations farther than ``W/2L`` plus the field's
    oscillation over the half diagonal from v(center) are never generated:
    their density is exactly zero.
    """
    if spec.max_length is not None:
        Lmax = spec.max_length
    elif v is not None and math.isfinite(v.nu):
        Lmax = v.nu
    else:
        raise ValueError("enumeration needs max_length when the field gives no length cap")
    # fields with no Lipschitz bound only enter sharpness probes, uncapped
    if v is not None and math.isfinite(v.lip) and Lmax > v.nu * (1 + 1e-12):
        raise ValueError("max_length exceeds the field's length cap")
    x0, y0, x1, y1 = box
    for j in range(spec.j_max + 1):
        L = Lmax * 2.0 ** -j
        for m in range(spec.m_max + 1):
            W = L * 2.0 ** -m
            half = 0.5 * W / L
            n_or = max(1, int(math.ceil(orient_range / (spec.orient_factor * W / L) - 1e-9)))
            opitch = orient_range / n_or
            cp = max(spec.center_factor * W, spec.min_center_pitch)
            xs = _lattice(x0, x1, cp)
            ys = _lattice(y0, y1, cp)
            rad = 0.5 * math.hypot(L, W)
            if roi is not None:
                rx0, ry0, rx1, ry1 = roi
                xs = xs[(xs >= rx0 - rad) & (xs <= rx1 + rad)]
                ys = ys[(ys >= ry0 - rad) & (ys <= ry1 + rad)]
            if field_domain is not None:
                fx0, fy0, fx1, fy1 = field_domain
                xs = xs[(xs - rad >= fx0) & (xs + rad <= fx1)]
                ys = ys[(ys - rad >= fy0) & (ys + rad <= fy1)]
            X, Y = np.meshgrid(xs, ys, indexing="ij")
            cx, cy = X.ravel(), Y.ravel()
            if cx.size == 0:
                continue
            osc = v.oscillation(rad) if v is not None else math.inf
            if osc < math.pi:
                reach = half + osc + 1e-9
                a0 = v.angles(cx, cy)
                kk = int(math.ceil(reach / opitch)) + 1
                offs = np.arange(-kk, kk + 1)
                k = (np.round(a0 / opitch).astype(np.int64)[:, None] + offs[None, :]) % n_or
                ang = k * opitch
                keep = angle_dist_array(ang, a0[:, None]) <= reach
                # dedupe wrap-around duplicates when the window covers the circle
                if 2 * kk + 1 > n_or:
                    keep &= np.arange(2 * kk + 1)[None, :] < n_or
                ci = np.repeat(np.arange(cx.size), keep.sum(axis=1))
                ang = ang[keep]
                ks = k[keep]
                order = np.lexsort((ks, ci))
                ci, ang = ci[order], ang[order]
            else:
                ci = np.repeat(np.arange(cx.size), n_or)
                ang = np.tile(np.arange(n_or) * opitch, cx.size)
            rows = np.empty((ci.size, 6))
            rows[:, 0] = cx[ci]
            rows[:, 1] = cy[ci]
            rows[:, 2] = np.cos(ang)
            rows[:, 3] = np.sin(ang)
            rows[:, 4] = L
            rows[:, 5] = W
            yield rows, ang, (j, m)


@dataclass
class DensityTable:
    """All enumerated candidates with their sampled densities; families filter it by delta."""

    rows: np.ndarray
    angles: np.ndarray
    densities: np.ndarray
    nu: float
    provenance: dict

    def family(self, delta: float) -> RectFamily:
        if not 0 < delta <= 1:
            raise ValueError(f"delta must lie in (0, 1], got {delta}")
        keep = self.densities >= delta
        ids = np.flatnonzero(keep).astype(np.int64)
        return RectFamily(self.rows[keep], self.angles[keep], ids, self.densities[keep],
                          delta, self.nu, dict(self.provenance, delta=delta))


def density_table(v: VectorField, box, s: Sampler, spec: EnumSpec = EnumSpec(),
                  roi=None) -> DensityTable:
    rows_l, ang_l, dens_l = [], [], []
    total = 0
    for rows, ang, _ in enumerate_candidates(box, spec, v, roi=roi, field_domain=v.domain):
        total += rows.shape[0]
        if total > spec.max_rects:
            raise ValueError(f"enumeration exceeds {spec.max_rects} rectangles")
        rows_l.append(rows)
        ang_l.append(ang)
        dens_l.append(densities(rows, v, s))
    rows = np.concatenate(rows_l) if rows_l else np.zeros((0, 6))
    ang = np.concatenate(ang_l) if ang_l else np.zeros(0)
    dens = np.concatenate(dens_l) if dens_l else np.zeros(0)
    prov = {"box": list(box), "spec": spec.__dict__.copy(), "field": v.kind,
            "params": dict(v.params), "sampler": s.__dict__.copy(),
            "roi": None if roi is None else list(roi)}
    return DensityTable(rows, ang, dens, v.nu if spec.max_length is None else spec.max_length, prov)


def build_rect_family(v: VectorField, delta: float, box, s: Sampler,
                      spec: EnumSpec = EnumSpec(), roi=None) -> RectFamily:
    if not 0 < delta <= 1:
        raise ValueError(f"delta must lie in (0, 1], got {delta}")
    return density_table(v, box, s, spec, roi).family(delta)


def kakeya_family(box, eps: float, spec: EnumSpec, roi=None) -> RectFamily:
    """All enumerated rectangles with W/L >= eps, orientations over a half turn."""
    if not 0 < eps <= 1:
        raise ValueError("eps must lie in (0, 1]")
    m_max = min(spec.m_max, int(math.floor(math.log2(1.0 / eps) + 1e-9)))
    sub = EnumSpec(**{**spec.__dict__, "m_max": m_max})
    rows_l, ang_l = [], []
    for rows, ang, (j, m) in enumerate_candidates(box, sub, None, roi=roi,
                                                  orient_range=math.pi):
        if m == 0:
            keep = ang < 0.5 * math.pi - 1e-12
            rows, ang = rows[keep], ang[keep]
        rows_l.append(rows)
        ang_l.append(ang)
    rows = np.concatenate(rows_l) if rows_l else np.zeros((0, 6))
    ang = np.concatenate(ang_l) if ang_l else np.zeros(0)
    n = rows.shape[0]
    return RectFamily(rows, ang, np.arange(n, dtype=np.int64), np.ones(n), 1.0,
                      sub.max_length, {"kakeya_eps": eps})


# ------------------------------------------------------------- evaluation

@dataclass
class MaxField:
    """Operator output on a grid (``points`` is None) or on a point list."""

    origin: tuple[float, float] | None
    pitch: float | None
    values: np.ndarray
    argmax: np.ndarray
    points: np.ndarray | None = None

    def same_as(self, other: "MaxField") -> bool:
        return (np.array_equal(self.values, other.values)
                and np.array_equal(self.argmax, other.argmax))


def rect_average(f: ScalarField, R: Rect) -> float:
    return float(rect_averages(f, np.array([R.as_row()]))[0])


def rect_averages(f: ScalarField, rows: np.ndarray) -> np.ndarray:
    return _kernels.rect_averages(f.values, f.origin[0], f.origin[1], f.pitch,
                                  np.ascontiguousarray(rows, dtype=float), *AVG_LATTICE)


def _sup_over_family(f: ScalarField, rows, ids, avgs, points) -> MaxField:
    rows = np.ascontiguousarray(rows, dtype=float)
    ids = np.ascontiguousarray(ids, dtype=np.int64)
    if points is None:
        nx, ny = f.shape
        vals = np.zeros((nx, ny))
        wit = np.full((nx, ny), -1, dtype=np.int64)
        _kernels.paint_max(nx, ny, f.origin[0], f.origin[1], f.pitch, rows, avgs, ids, vals, wit)
        return MaxField(f.origin, f.pitch, vals, wit)
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    vals = np.zeros(pts.shape[0])
    wit = np.full(pts.shape[0], -1, dtype=np.int64)
    _kernels.paint_points(np.ascontiguousarray(pts[:, 0]), np.ascontiguousarray(pts[:, 1]),
                          rows, avgs, ids, vals, wit)
    return MaxField(None, None, vals, wit, pts)


def eval_M_v_delta(f: ScalarField, fam: RectFamily, points=None, skip_zero: bool = False) -> MaxField:
    """sup of |R|^-1 int_R f over family members containing each point (0 if none).

    ``skip_zero`` drops rectangles whose average is exactly 0: values are
    unchanged, but points covered only by such rectangles get witness -1.
    """
    if len(fam) == 0:
        raise ValueError("rectangle family is empty")
    avgs = rect_averages(f, fam.rows)
    rows, ids = fam.rows, fam.ids
    if skip_zero:
        keep = avgs > 0
        rows, ids, avgs = rows[keep], ids[keep], avgs[keep]
    return _sup_over_family(f, rows, ids, avgs, points)


def eval_M_K_eps(f: ScalarField, eps: float, points=None, spec: EnumSpec | None = None) -> MaxField:
    spec = spec or EnumSpec(max_length=16 * f.pitch, j_max=2, m_max=4, min_center_pitch=f.pitch)
    fam = kakeya_family(f.box, eps, spec)
    return eval_M_v_delta(f, fam, points)


def kappa_scales(pitch: float, extent: float) -> np.ndarray:
    n = max(0, int(math.ceil(math.log2(extent / pitch) - 1e-9)))
    return pitch * 2.0 ** np.arange(n + 1)


def eval_M_kappa(g: ScalarField, kappa: int, points=None) -> MaxField:
    """M_kappa at grid sites: max of centered square means and kappa segment means.

    Square means count lattice sites of the infinite grid, with g = 0
    outside the sampled window; segment means use midpoint quadrature of
    the bilinear interpolant.  ``points`` is an (n, 2) array of grid indices.
    """
    if kappa < 8:
        raise ValueError("kappa must be at least 8")
    nx, ny = g.shape
    if points is None:
        I, J = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
        pi_, pj_ = I.ravel(), J.ravel()
    else:
        idx = np.asarray(points, dtype=np.int64).reshape(-1, 2)
        pi_, pj_ = idx[:, 0], idx[:, 1]
    scales = kappa_scales(g.pitch, max(nx, ny) * g.pitch)
    vals = _kernels.mkappa_grid(g.values, g.pitch, int(kappa), scales,
                                np.ascontiguousarray(pi_), np.ascontiguousarray(pj_), g.prefix)
    wit = np.full(vals.shape, -1, dtype=np.int64)
    if points is None:
        return MaxField(g.origin, g.pitch, vals.reshape(nx, ny), wit.reshape(nx, ny))
    return MaxField(None, None, vals, wit,
                    np.asarray(g.origin) + np.column_stack([pi_, pj_]) * g.pitch)


def eval_M_v(f: ScalarField, v: VectorField, points=None, max_t: float | None = None) -> MaxField:
    """Zygmund's maximal function along v: sup over dyadic t in (pitch, nu] of segment means."""
    nu = v.nu if max_t is None else max_t
    if not math.isfinite(nu):
        raise ValueError("constant fields need an explicit max_t")
    pts = f.grid_points().reshape(-1, 2) if points is None else np.asarray(points, float).reshape(-1, 2)
    for p in (pts.min(axis=0), pts.max(axis=0)):
        if not v.in_domain(p):
            raise ValueError("evaluation points leave the field domain")
    ang = v.angles(pts[:, 0], pts[:, 1])
    wx, wy = np.cos(ang), np.sin(ang)
    best = np.zeros(pts.shape[0])
    t = nu
    while t > f.pitch * (1 + 1e-12):
        m = max(16, int(math.ceil(4 * t / f.pitch)))
        sig = ((np.arange(m) + 0.5) / m - 0.5) * 2 * t
        acc = np.zeros(pts.shape[0])
        for sg in sig:
            acc += _bilinear_many(f, pts[:, 0] - sg * wx, pts[:, 1] - sg * wy)
        best = np.maximum(best, acc / m)
        t *= 0.5
    wit = np.full(best.shape, -1, dtype=np.int64)
    if points is None:
        nx, ny = f.shape
        return MaxField(f.origin, f.pitch, best.reshape(nx, ny), wit.reshape(nx, ny))
    return MaxField(None, None, best, wit, pts)


def _bilinear_many(f: ScalarField, x, y) -> np.ndarray:
    nx, ny = f.shape
    u = (x - f.origin[0]) / f.pitch
    w = (y - f.origin[1]) / f.pitch
    i0 = np.floor(u).astype(np.int64)
    j0 = np.floor(w).astype(np.int64)
    fu, fw = u - i0, w - j0
    out = np.zeros_like(u)
    for di, wu in ((0, 1 - fu), (1, fu)):
        for dj, ww in ((0, 1 - fw), (1, fw)):
            i, j = i0 + di, j0 + dj
            ok = (i >= 0) & (i < nx) & (j >= 0) & (j < ny)
            out[ok] += f.values[i[ok], j[ok]] * (wu[ok] * ww[ok])
    return out
