"""Oriented rectangles, eccentricity arcs, projections and intersection areas."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from lipkakeya import _kernels

TWO_PI = 2.0 * math.pi
ARC_EPS = 1e-12

Point = tuple[float, float]


@dataclass(frozen=True)
class UnitVec:
    angle: float
    cos: float = field(init=False, repr=False, compare=False)
    sin: float = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        a = math.fmod(float(self.angle), TWO_PI)
        if a < 0.0:
            a += TWO_PI
        if a >= TWO_PI:
            a = 0.0
        object.__setattr__(self, "angle", a)
        object.__setattr__(self, "cos", math.cos(a))
        object.__setattr__(self, "sin", math.sin(a))

    @property
    def xy(self) -> Point:
        return (self.cos, self.sin)

    def perp(self) -> "UnitVec":
        return UnitVec(self.angle + 0.5 * math.pi)


def angle_dist(e1: UnitVec | float, e2: UnitVec | float) -> float:
    """Geodesic distance on the unit circle, in [0, pi]."""
    a1 = e1.angle if isinstance(e1, UnitVec) else e1
    a2 = e2.angle if isinstance(e2, UnitVec) else e2
    d = math.fmod(abs(a1 - a2), TWO_PI)
    return min(d, TWO_PI - d)


def angle_dist_array(a1, a2):
    d = np.mod(np.abs(np.asarray(a1) - np.asarray(a2)), TWO_PI)
    return np.minimum(d, TWO_PI - d)


@dataclass(frozen=True)
class Arc:
    """Closed arc of the unit circle, symmetric about ``center``."""

    center: UnitVec
    length: float

    def __post_init__(self):
        if not self.length > 0.0:
            raise ValueError(f"arc length must be positive, got {self.length}")

    def contains(self, u: UnitVec | float) -> bool:
        if self.length >= TWO_PI:
            return True
        return angle_dist(self.center, u) <= 0.5 * self.length + ARC_EPS

    def dilate(self, c: float) -> "Arc":
        if c <= 0:
            raise ValueError("dilation factor must be positive")
        return Arc(self.center, min(self.length * c, TWO_PI))

    def contains_arc(self, other: "Arc") -> bool:
        if self.length >= TWO_PI:
            return True
        if other.length >= TWO_PI:
            return False
        return angle_dist(self.center, other.center) + 0.5 * other.length \
            <= 0.5 * self.length + ARC_EPS

    def distance(self, other: "Arc") -> float:
        """Gap between two arcs (0 when they overlap)."""
        gap = angle_dist(self.center, other.center) - 0.5 * (self.length + other.length)
        return max(gap, 0.0)


@dataclass(frozen=True)
class Rect:
    """Closed rectangle ``I x J`` in the frame (dir, dir rotated by pi/2)."""

    center: Point
    dir: UnitVec
    length: float
    width: float
    id: int = -1

    def __post_init__(self):
        if not (0.0 < self.width <= self.length):
            raise ValueError(f"need 0 < width <= length, got {self.width}, {self.length}")
        object.__setattr__(self, "center", (float(self.center[0]), float(self.center[1])))

    @property
    def area(self) -> float:
        return self.length * self.width

    @property
    def ex(self) -> Arc:
        return ex_interval(self)

    def corners(self) -> np.ndarray:
        cx, cy = self.center
        c, s = self.dir.cos, self.dir.sin
        hl, hw = 0.5 * self.length, 0.5 * self.width
        out = []
        for su, sw in ((-1, -1), (1, -1), (1, 1), (-1, 1)):
            out.append((cx + su * hl * c - sw * hw * s, cy + su * hl * s + sw * hw * c))
        return np.array(out)

    def as_row(self) -> tuple:
        return (self.center[0], self.center[1], self.dir.cos, self.dir.sin,
                self.length, self.width)

    def with_id(self, i: int) -> "Rect":
        return Rect(self.center, self.dir, self.length, self.width, i)

    def local(self, p: Point) -> Point:
        dx, dy = p[0] - self.center[0], p[1] - self.center[1]
        c, s = self.dir.cos, self.dir.sin
        return (dx * c + dy * s, -dx * s + dy * c)

    def to_world(self, u: float, w: float) -> Point:
        c, s = self.dir.cos, self.dir.sin
        return (self.center[0] + u * c - w * s, self.center[1] + u * s + w * c)


def box(center: Point, dir: UnitVec, along: float, across: float, id: int = -1) -> Rect:
    """Rectangle with given extents along ``dir`` and across it, either larger."""
    if along >= across:
        return Rect(center, dir, along, across, id)
    return Rect(center, dir.perp(), across, along, id)


def rect_array(rects) -> np.ndarray:
    if len(rects) == 0:
        return np.zeros((0, 6))
    return np.array([r.as_row() for r in rects], dtype=float)


@dataclass(frozen=True)
class Segment:
    """Segment ``origin + t * dir`` for ``|t| <= halfwidth``."""

    origin: Point
    dir: UnitVec
    halfwidth: float

    def __post_init__(self):
        if not self.halfwidth > 0:
            raise ValueError("segment half-width must be positive")

    def coord(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        return (p[..., 0] - self.origin[0]) * self.dir.cos \
            + (p[..., 1] - self.origin[1]) * self.dir.sin


def ex_interval(R: Rect) -> Arc:
    return Arc(R.dir, R.width / R.length)


def dilate(R: Rect, c: float) -> Rect:
    if not c > 0:
        raise ValueError(f"dilation factor must be positive, got {c}")
    return Rect(R.center, R.dir, R.length * c, R.width * c, R.id)


def contains_point(R: Rect, p: Point) -> bool:
    dx = p[0] - R.center[0]
    dy = p[1] - R.center[1]
    c, s = R.dir.cos, R.dir.sin
    u = dx * c + dy * s
    w = -dx * s + dy * c
    return abs(u) <= 0.5 * R.length and abs(w) <= 0.5 * R.width


def _canonical(r1: Rect, r2: Rect):
    k1 = r1.as_row()
    k2 = r2.as_row()
    return (k1, k2) if k1 <= k2 else (k2, k1)


def intersection_area(R1: Rect, R2: Rect) -> float:
    """Area of R1 ∩ R2 by convex clipping; argument order never matters."""
    a, b = _canonical(R1, R2)
    return _kernels.rect_rect_area(*a, *b)


def intersects(R1: Rect, R2: Rect) -> bool:
    a, b = _canonical(R1, R2)
    return bool(_kernels.rects_overlap(*a, *b))


def project_onto_segment(R: Rect, S: Segment) -> tuple[float, float] | None:
    """Interval of S-coordinates covered by the orthogonal projection of R."""
    t = S.coord(R.corners())
    lo = max(float(t.min()), -S.halfwidth)
    hi = min(float(t.max()), S.halfwidth)
    if hi < lo:
        return None
    return (lo, hi)


def inclusion_hypotheses(R: Rect, Rp: Rect) -> bool:
    return (intersects(R, Rp)
            and R.length >= Rp.length
            and R.width >= Rp.width
            and ex_interval(R).length <= ex_interval(Rp).length
            and ex_interval(Rp).dilate(10.0).contains_arc(ex_interval(R)))


def inclusion_holds(R: Rect, Rp: Rect, kappa: float) -> bool:
    """True unless the hypotheses hold and some corner of Rp leaves kappa*R."""
    if not inclusion_hypotheses(R, Rp):
        return True
    big = dilate(R, kappa)
    tol = 1e-12 * big.length
    for p in Rp.corners():
        u, w = big.local(p)
        if abs(u) > 0.5 * big.length + tol or abs(w) > 0.5 * big.width + tol:
            return False
    return True
