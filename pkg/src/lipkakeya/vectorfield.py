"""Unit vector fields on a planar box and the density sets V(R)."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np
from scipy.stats import qmc

from lipkakeya.geometry import ARC_EPS, TWO_PI, Rect, Segment, UnitVec, angle_dist_array

LENGTH_CAP_FACTOR = 100.0
KINDS = ("constant", "linear", "sinusoidal", "holder", "composite")


def _tri(t):
    # 1-periodic triangle wave, slope +-1, values in [-1/4, 1/4]
    return np.abs(t - np.floor(t) - 0.5) - 0.25


@dataclass(frozen=True)
class VectorField:
    """Map from the plane to the unit circle, given by its angle function.

    Parameters per kind (all default to 0 unless noted):

    * ``constant``: ``theta``
    * ``linear``: ``theta + c * x``
    * ``sinusoidal``: ``theta + a * sin(k * x + phase)``, ``k`` defaults to 1
    * ``holder``: ``theta + amp * sum_j 2**(-j*alpha) * tri(2**j * x / base)``
      over the j with ``base * 2**-j >= finest``
    * ``composite``: ``theta + a1 * sin(k1 * x + p1) + a2 * sin(k2 * y + p2)``
    """

    kind: str
    params: dict = field(default_factory=dict)
    domain: tuple[float, float, float, float] = (0.0, 0.0, 1.0, 1.0)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown field kind {self.kind!r}")
        if self.kind == "holder":
            a = self.p("alpha")
            if not 0 < a <= 1:
                raise ValueError("holder exponent must lie in (0, 1]")
            if self.p("base", 1.0) <= 0 or self.p("finest", 1.0) <= 0:
                raise ValueError("holder scales must be positive")

    def p(self, name, default=0.0) -> float:
        return float(self.params.get(name, default))

    # ------------------------------------------------------------ evaluation
    def angles(self, x, y=None):
        """Angle of v at points; ``x`` may be an (..., 2) array if ``y`` is None."""
        if y is None:
            pts = np.asarray(x, dtype=float)
            x, y = pts[..., 0], pts[..., 1]
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        th = self.p("theta")
        if self.kind == "constant":
            out = np.full(np.broadcast(x, y).shape, th)
        elif self.kind == "linear":
            out = th + self.p("c") * x + 0.0 * y
        elif self.kind == "sinusoidal":
            out = th + self.p("a") * np.sin(self.p("k", 1.0) * x + self.p("phase")) + 0.0 * y
        elif self.kind == "composite":
            out = (th + self.p("a1") * np.sin(self.p("k1", 1.0) * x + self.p("p1"))
                   + self.p("a2") * np.sin(self.p("k2", 1.0) * y + self.p("p2")))
        else:
            acc = np.zeros(np.broadcast(x, y).shape)
            base, alpha = self.p("base", 1.0), self.p("alpha")
            for j in range(self.n_terms):
                acc = acc + 2.0 ** (-j * alpha) * _tri((2.0 ** j) * x / base)
            out = th + self.p("amp", 1.0) * acc
        return np.mod(out, TWO_PI)

    @property
    def n_terms(self) -> int:
        if self.kind != "holder":
            return 0
        base, finest = self.p("base", 1.0), self.p("finest", 1.0)
        return max(1, int(math.floor(math.log2(base / finest) + 1e-9)) + 1)

    def in_domain(self, p) -> bool:
        x0, y0, x1, y1 = self.domain
        return x0 <= p[0] <= x1 and y0 <= p[1] <= y1

    def eval(self, x) -> UnitVec:
        if not self.in_domain(x):
            raise ValueError(f"point {tuple(x)} outside field domain {self.domain}")
        return UnitVec(float(self.angles(x[0], x[1])))

    @property
    def lip(self) -> float:
        k = self.kind
        if k == "constant":
            return 0.0
        if k == "linear":
            return abs(self.p("c"))
        if k == "sinusoidal":
            return abs(self.p("a") * self.p("k", 1.0))
        if k == "composite":
            return math.hypot(self.p("a1") * self.p("k1", 1.0), self.p("a2") * self.p("k2", 1.0))
        if self.n_terms == 1:
            return abs(self.p("amp", 1.0)) / self.p("base", 1.0)
        return math.inf

    def oscillation(self, r: float) -> float:
        """Upper bound for the angle change of v over any distance <= r."""
        k = self.kind
        if k == "constant":
            return 0.0
        if k == "linear":
            return abs(self.p("c")) * r
        if k == "sinusoidal":
            return min(self.lip * r, 2.0 * abs(self.p("a")))
        if k == "composite":
            return min(self.lip * r, 2.0 * (abs(self.p("a1")) + abs(self.p("a2"))))
        base, alpha = self.p("base", 1.0), self.p("alpha")
        # each term has slope 2**j / base and range 1/2 before weighting
        return abs(self.p("amp", 1.0)) * sum(
            2.0 ** (-j * alpha) * min(2.0 ** j * r / base, 0.5) for j in range(self.n_terms))

    @property
    def nu(self) -> float:
        """Largest admissible rectangle length, (100 * lip)**-1."""
        lip = self.lip
        if lip == 0.0:
            return math.inf
        return 1.0 / (LENGTH_CAP_FACTOR * lip)


def estimate_lipschitz(v: VectorField, box=None, n: int = 10_000, min_dist: float | None = None,
                       max_dist: float | None = None, seed: int = 0) -> float:
    """Largest sampled difference quotient angle_dist(v(x), v(y)) / |x - y|."""
    if n < 1000:
        raise ValueError("need at least 1000 trial pairs")
    x0, y0, x1, y1 = box if box is not None else v.domain
    diag = math.hypot(x1 - x0, y1 - y0)
    min_dist = 1e-4 * diag if min_dist is None else min_dist
    max_dist = max(min_dist, 1e-2 * diag) if max_dist is None else max_dist
    rng = np.random.default_rng(seed)
    r = np.exp(rng.uniform(math.log(min_dist), math.log(max_dist), n)) if max_dist > min_dist \
        else np.full(n, min_dist)
    phi = rng.uniform(0.0, TWO_PI, n)
    dx, dy = r * np.cos(phi), r * np.sin(phi)
    px = rng.uniform(x0 + np.abs(dx), x1 - np.abs(dx))
    py = rng.uniform(y0 + np.abs(dy), y1 - np.abs(dy))
    d = angle_dist_array(v.angles(px, py), v.angles(px + dx, py + dy))
    return float(np.max(d / np.hypot(dx, dy)))


# ------------------------------------------------------------------ sampling

@lru_cache(maxsize=64)
def _sobol(n: int, seed: int) -> np.ndarray:
    m = max(0, math.ceil(math.log2(n)))
    pts = qmc.Sobol(d=2, scramble=True, seed=seed).random_base2(m)
    pts = pts[:n]
    pts.setflags(write=False)
    return pts


def lattice_shape(n: int, aspect: float) -> tuple[int, int]:
    """(along, across) counts with about n points and cells matched to the aspect ratio."""
    n_len = max(1, math.ceil(math.sqrt(n * aspect)))
    n_wid = max(1, math.ceil(n / n_len))
    return n_len, n_wid


@dataclass(frozen=True)
class Sampler:
    strategy: str = "qmc"
    count: int | None = None
    seed: int = 0
    max_count: int = 4096
    scale: int = 1

    def __post_init__(self):
        if self.strategy not in ("grid", "qmc"):
            raise ValueError(f"unknown sampling strategy {self.strategy!r}")
        if self.count is not None and self.count < 16:
            raise ValueError("at least 16 samples per rectangle")

    def n_for(self, length: float, width: float) -> int:
        if self.count is not None:
            return self.count * self.scale
        n = min(self.max_count, max(256, math.ceil(64.0 * length / width)))
        return int(n) * self.scale

    def refined(self, factor: int) -> "Sampler":
        return replace(self, scale=self.scale * factor)

    def unit_points(self, length: float, width: float) -> np.ndarray:
        """Points in [-1/2, 1/2]^2, columns (along, across)."""
        n = self.n_for(length, width)
        if self.strategy == "qmc":
            return _sobol(n, self.seed) - 0.5
        a, b = lattice_shape(n, length / width)
        u = (np.arange(a) + 0.5) / a - 0.5
        w = (np.arange(b) + 0.5) / b - 0.5
        uu, ww = np.meshgrid(u, w, indexing="ij")
        return np.column_stack([uu.ravel(), ww.ravel()])


def _check_admissible(R: Rect, v: VectorField):
    if R.length > v.nu * (1.0 + 1e-12):
        raise ValueError(f"rectangle length {R.length} exceeds the cap {v.nu}")
    for p in R.corners():
        if not v.in_domain(p):
            raise ValueError("rectangle leaves the field domain")


def densities(rows: np.ndarray, v: VectorField, s: Sampler, chunk: int = 1 << 21) -> np.ndarray:
    """Sampled |V(R)|/|R| for rect rows (cx, cy, cos, sin, L, W) sharing one (L, W)."""
    m = rows.shape[0]
    out = np.empty(m)
    if m == 0:
        return out
    L, W = float(rows[0, 4]), float(rows[0, 5])
    half = 0.5 * W / L
    dirs = np.arctan2(rows[:, 3], rows[:, 2])
    undecided = np.ones(m, dtype=bool)
    spread = v.oscillation(0.5 * math.hypot(L, W))
    if spread < math.pi:
        d0 = angle_dist_array(v.angles(rows[:, 0], rows[:, 1]), dirs)
        full = d0 + spread < half - 1e-9
        empty = d0 - spread > half + 1e-9
        out[full] = 1.0
        out[empty] = 0.0
        undecided = ~(full | empty)
    idx = np.flatnonzero(undecided)
    if idx.size == 0:
        return out
    unit = s.unit_points(L, W)
    du = unit[:, 0] * L
    dw = unit[:, 1] * W
    step = max(1, chunk // unit.shape[0])
    for k in range(0, idx.size, step):
        sel = idx[k:k + step]
        c = rows[sel, 2][:, None]
        sn = rows[sel, 3][:, None]
        px = rows[sel, 0][:, None] + du * c - dw * sn
        py = rows[sel, 1][:, None] + du * sn + dw * c
        inside = angle_dist_array(v.angles(px, py), dirs[sel][:, None]) <= half + ARC_EPS
        out[sel] = inside.mean(axis=1)
    return out


def vset_density(R: Rect, v: VectorField, s: Sampler) -> float:
    _check_admissible(R, v)
    return float(densities(np.array([R.as_row()]), v, s)[0])


class GridUnion:
    """Union of closed cells on the 1-D grid of pitch ``S.halfwidth / 2048`` along S."""

    CELLS_PER_HALF = 2048

    def __init__(self, segment: Segment, mask: np.ndarray | None = None):
        self.segment = segment
        self.pitch = segment.halfwidth / self.CELLS_PER_HALF
        n = 2 * self.CELLS_PER_HALF
        self.mask = np.zeros(n, dtype=bool) if mask is None else mask

    @property
    def length(self) -> float:
        return float(self.mask.sum()) * self.pitch

    def empty(self) -> bool:
        return not self.mask.any()

    def overlaps(self, other: "GridUnion") -> bool:
        return bool(np.any(self.mask & other.mask))

    def mark(self, lo: np.ndarray, hi: np.ndarray):
        """Mark every cell whose center lies in one of the closed intervals [lo, hi]."""
        hw = self.segment.halfwidth
        n = self.mask.size
        a = np.ceil((np.asarray(lo) + hw) / self.pitch - 0.5).astype(np.int64)
        b = np.floor((np.asarray(hi) + hw) / self.pitch - 0.5).astype(np.int64)
        a = np.clip(a, 0, n)
        b = np.clip(b, -1, n - 1)
        ok = b >= a
        diff = np.zeros(n + 1, dtype=np.int64)
        np.add.at(diff, a[ok], 1)
        np.add.at(diff, b[ok] + 1, -1)
        self.mask |= np.cumsum(diff[:-1]) > 0

    def intervals(self) -> list[tuple[float, float]]:
        m = self.mask.astype(np.int8)
        edges = np.flatnonzero(np.diff(np.concatenate([[0], m, [0]])))
        hw = self.segment.halfwidth
        return [(float(a * self.pitch - hw), float(b * self.pitch - hw))
                for a, b in zip(edges[0::2], edges[1::2])]


def vset_projection(R: Rect, S: Segment, v: VectorField, s: Sampler) -> GridUnion:
    """Projection of V(R) onto S, as a union of grid cells.

    Each lattice cell of R whose center lies in V(R) contributes the
    projection of the whole cell, so a rectangle with V(R) = R projects
    onto its full shadow.
    """
    _check_admissible(R, v)
    n = s.n_for(R.length, R.width)
    a, b = lattice_shape(n, R.length / R.width)
    u = ((np.arange(a) + 0.5) / a - 0.5) * R.length
    w = ((np.arange(b) + 0.5) / b - 0.5) * R.width
    uu, ww = np.meshgrid(u, w, indexing="ij")
    c, sn = R.dir.cos, R.dir.sin
    px = R.center[0] + uu * c - ww * sn
    py = R.center[1] + uu * sn + ww * c
    inside = angle_dist_array(v.angles(px, py), R.dir.angle) <= 0.5 * R.width / R.length + ARC_EPS
    out = GridUnion(S)
    if not inside.any():
        return out
    t = S.coord(np.stack([px[inside], py[inside]], axis=-1))
    cos_t = abs(c * S.dir.cos + sn * S.dir.sin)
    sin_t = abs(-sn * S.dir.cos + c * S.dir.sin)
    hc = 0.5 * (R.length / a * cos_t + R.width / b * sin_t)
    out.mark(t - hc, t + hc)
    return out
