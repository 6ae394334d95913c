"""Exact geometry for balls, boxes, capsules, annuli and shells in R^d.

All containment tests use closed-set semantics with a fixed absolute slack
``EPS_GEO``.  Distances are accumulated coordinate by coordinate in a fixed
order so that scalar and vectorised code paths agree bit for bit.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

EPS_GEO = 1e-12


class GeometryError(ValueError):
    pass


class DimensionError(GeometryError):
    pass


def as_point(x) -> np.ndarray:
    p = np.asarray(x, dtype=float).reshape(-1)
    if not np.all(np.isfinite(p)):
        raise GeometryError(f"non-finite coordinates: {p}")
    return p


def as_points(xs, dim: int | None = None) -> np.ndarray:
    a = np.asarray(xs, dtype=float)
    if a.ndim == 1:
        a = a.reshape(1, -1) if dim is None or a.size == dim else a.reshape(-1, 1)
    if dim is not None and a.shape[-1] != dim:
        raise DimensionError(f"expected dimension {dim}, got {a.shape[-1]}")
    return a


def sqdist(a, b) -> np.ndarray:
    """Squared distance with a fixed summation order over coordinates."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    diff = a[..., 0] - b[..., 0]
    acc = diff * diff
    for k in range(1, a.shape[-1]):
        diff = a[..., k] - b[..., k]
        acc = acc + diff * diff
    return acc


def dist(a, b) -> np.ndarray:
    return np.sqrt(sqdist(a, b))


def norm(a) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    return np.sqrt(sqdist(a, np.zeros(a.shape[-1])))


def unit_ball_volume(d: int) -> float:
    if d < 0:
        return 0.0
    return math.pi ** (d / 2) / math.gamma(d / 2 + 1)


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float).reshape(-1)
    arr.setflags(write=False)
    return arr


def _point_segment_param(xs: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    ab = b - a
    den = float(sqdist(b, a))
    if den == 0.0:
        return np.zeros(xs.shape[:-1])
    num = (xs - a) @ ab
    return np.clip(num / den, 0.0, 1.0)


def point_segment_distance(xs, a, b) -> np.ndarray:
    xs = np.asarray(xs, dtype=float)
    t = _point_segment_param(xs, a, b)
    proj = a + t[..., None] * (b - a)
    return dist(xs, proj)


def point_box_distance(xs, lo, hi) -> np.ndarray:
    xs = np.asarray(xs, dtype=float)
    clipped = np.clip(xs, lo, hi)
    return dist(xs, clipped)


def segment_segment_distance(p1, q1, p2, q2) -> float:
    """Closest distance between two segments in R^d (clamped parametric form)."""
    p1, q1, p2, q2 = (np.asarray(v, dtype=float) for v in (p1, q1, p2, q2))
    d1 = q1 - p1
    d2 = q2 - p2
    r = p1 - p2
    a = float(d1 @ d1)
    e = float(d2 @ d2)
    f = float(d2 @ r)
    if a <= 0.0 and e <= 0.0:
        return float(dist(p1, p2))
    if a <= 0.0:
        s = 0.0
        t = min(max(f / e, 0.0), 1.0)
    else:
        c = float(d1 @ r)
        if e <= 0.0:
            t = 0.0
            s = min(max(-c / a, 0.0), 1.0)
        else:
            b = float(d1 @ d2)
            den = a * e - b * b
            s = min(max((b * f - c * e) / den, 0.0), 1.0) if den > 0.0 else 0.0
            t = (b * s + f) / e
            if t < 0.0:
                t = 0.0
                s = min(max(-c / a, 0.0), 1.0)
            elif t > 1.0:
                t = 1.0
                s = min(max((b - c) / a, 0.0), 1.0)
    return float(dist(p1 + s * d1, p2 + t * d2))


def segment_box_distance(a, b, lo, hi, iters: int = 200) -> float:
    # distance to a convex set is convex along the segment
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)

    def f(t):
        return float(point_box_distance(a + t * (b - a), lo, hi))

    gr = (math.sqrt(5) - 1) / 2
    x0, x1 = 0.0, 1.0
    c = x1 - gr * (x1 - x0)
    d = x0 + gr * (x1 - x0)
    fc, fd = f(c), f(d)
    for _ in range(iters):
        if fc < fd:
            x1, d, fd = d, c, fc
            c = x1 - gr * (x1 - x0)
            fc = f(c)
        else:
            x0, c, fc = c, d, fd
            d = x0 + gr * (x1 - x0)
            fd = f(d)
        if x1 - x0 < 1e-15:
            break
    return min(f(0.0), f(1.0), f((x0 + x1) / 2))


# ---------------------------------------------------------------------------
# Primitive shapes
# ---------------------------------------------------------------------------


class Primitive:
    """Bounded closed shape with closed-form volume."""

    dim: int

    def contains(self, xs) -> np.ndarray:
        raise NotImplementedError

    def distance(self, xs) -> np.ndarray:
        raise NotImplementedError

    @property
    def volume(self) -> float:
        raise NotImplementedError

    def bbox(self) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    def bound_radius(self, origin=None) -> float:
        """Largest distance from ``origin`` (default 0) to a point of the shape."""
        raise NotImplementedError

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return _rejection_sample(self, rng, n)

    def enlarge(self, r: float) -> "Primitive":
        raise GeometryError(f"enlargement of {type(self).__name__} is not supported")

    def to_dict(self) -> dict:
        raise NotImplementedError

    def _pts(self, xs) -> np.ndarray:
        return as_points(xs, self.dim)


def _rejection_sample(shape: Primitive, rng: np.random.Generator, n: int) -> np.ndarray:
    lo, hi = shape.bbox()
    out = np.empty((0, shape.dim))
    while out.shape[0] < n:
        m = max(16, 2 * (n - out.shape[0]))
        cand = lo + (hi - lo) * rng.random((m, shape.dim))
        out = np.vstack([out, cand[shape.contains(cand)]])
    return out[:n]


@dataclass(frozen=True, eq=False)
class Ball(Primitive):
    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", _frozen(self.center))
        r = float(self.radius)
        if not (r >= 0.0 and math.isfinite(r)):
            raise GeometryError(f"ball radius must be finite and >= 0, got {r}")
        if not np.all(np.isfinite(self.center)):
            raise GeometryError("ball center must be finite")
        object.__setattr__(self, "radius", r)

    @property
    def dim(self) -> int:
        return self.center.shape[0]

    def contains(self, xs) -> np.ndarray:
        return dist(self._pts(xs), self.center) <= self.radius + EPS_GEO

    def distance(self, xs) -> np.ndarray:
        return np.maximum(dist(self._pts(xs), self.center) - self.radius, 0.0)

    @property
    def volume(self) -> float:
        return unit_ball_volume(self.dim) * self.radius**self.dim

    def bbox(self):
        return self.center - self.radius, self.center + self.radius

    def bound_radius(self, origin=None) -> float:
        o = np.zeros(self.dim) if origin is None else as_point(origin)
        return float(dist(self.center, o)) + self.radius

    def sample(self, rng, n):
        d = self.dim
        g = rng.standard_normal((n, d))
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        rad = self.radius * rng.random(n) ** (1.0 / d)
        return self.center + g * rad[:, None]

    def enlarge(self, r):
        return Ball(self.center, self.radius + r)

    def to_dict(self):
        return {"shape": "ball", "center": self.center.tolist(), "radius": self.radius}

    def __repr__(self):
        return f"Ball({self.center.tolist()}, {self.radius})"


@dataclass(frozen=True, eq=False)
class Box(Primitive):
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "lo", _frozen(self.lo))
        object.__setattr__(self, "hi", _frozen(self.hi))
        if self.lo.shape != self.hi.shape or np.any(self.hi < self.lo):
            raise GeometryError("box needs lo <= hi coordinatewise")
        if not (np.all(np.isfinite(self.lo)) and np.all(np.isfinite(self.hi))):
            raise GeometryError("box must be bounded")

    @property
    def dim(self):
        return self.lo.shape[0]

    def contains(self, xs):
        p = self._pts(xs)
        return np.all((p >= self.lo - EPS_GEO) & (p <= self.hi + EPS_GEO), axis=-1)

    def distance(self, xs):
        return point_box_distance(self._pts(xs), self.lo, self.hi)

    @property
    def volume(self):
        return float(np.prod(self.hi - self.lo))

    def bbox(self):
        return self.lo.copy(), self.hi.copy()

    def bound_radius(self, origin=None):
        o = np.zeros(self.dim) if origin is None else as_point(origin)
        far = np.maximum(np.abs(self.lo - o), np.abs(self.hi - o))
        return float(norm(far))

    def sample(self, rng, n):
        return self.lo + (self.hi - self.lo) * rng.random((n, self.dim))

    def enlarge(self, r):
        return RoundedBox(self.lo, self.hi, r)

    def to_dict(self):
        return {"shape": "box", "lo": self.lo.tolist(), "hi": self.hi.tolist()}


@dataclass(frozen=True, eq=False)
class RoundedBox(Primitive):
    """Box enlarged by ``radius``: {x : d(x, box) <= radius}."""

    lo: np.ndarray
    hi: np.ndarray
    radius: float

    def __post_init__(self):
        Box(self.lo, self.hi)  # validation
        object.__setattr__(self, "lo", _frozen(self.lo))
        object.__setattr__(self, "hi", _frozen(self.hi))
        object.__setattr__(self, "radius", float(self.radius))

    @property
    def dim(self):
        return self.lo.shape[0]

    def contains(self, xs):
        return point_box_distance(self._pts(xs), self.lo, self.hi) <= self.radius + EPS_GEO

    def distance(self, xs):
        return np.maximum(point_box_distance(self._pts(xs), self.lo, self.hi) - self.radius, 0.0)

    @property
    def volume(self):
        # Steiner formula: intrinsic volumes of a box are elementary symmetric
        # polynomials of its side lengths.
        sides = self.hi - self.lo
        d = self.dim
        e = np.zeros(d + 1)
        e[0] = 1.0
        for s in sides:
            e[1:] = e[1:] + s * e[:-1]
        return float(sum(e[j] * unit_ball_volume(d - j) * self.radius ** (d - j) for j in range(d + 1)))

    def bbox(self):
        return self.lo - self.radius, self.hi + self.radius

    def bound_radius(self, origin=None):
        return Box(self.lo, self.hi).bound_radius(origin) + self.radius

    def enlarge(self, r):
        return RoundedBox(self.lo, self.hi, self.radius + r)

    def to_dict(self):
        return {"shape": "roundedbox", "lo": self.lo.tolist(), "hi": self.hi.tolist(), "radius": self.radius}


@dataclass(frozen=True, eq=False)
class Capsule(Primitive):
    """Segment [a, b] enlarged by ``radius``."""

    a: np.ndarray
    b: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "a", _frozen(self.a))
        object.__setattr__(self, "b", _frozen(self.b))
        object.__setattr__(self, "radius", float(self.radius))
        if self.a.shape != self.b.shape:
            raise DimensionError("capsule endpoints differ in dimension")
        if not (np.all(np.isfinite(self.a)) and np.all(np.isfinite(self.b))):
            raise GeometryError("capsule must be bounded")
        if self.radius < 0:
            raise GeometryError("capsule radius must be >= 0")

    @property
    def dim(self):
        return self.a.shape[0]

    @property
    def length(self) -> float:
        return float(dist(self.a, self.b))

    def contains(self, xs):
        return point_segment_distance(self._pts(xs), self.a, self.b) <= self.radius + EPS_GEO

    def distance(self, xs):
        return np.maximum(point_segment_distance(self._pts(xs), self.a, self.b) - self.radius, 0.0)

    @property
    def volume(self):
        d = self.dim
        return unit_ball_volume(d) * self.radius**d + unit_ball_volume(d - 1) * self.radius ** (d - 1) * self.length

    def bbox(self):
        return np.minimum(self.a, self.b) - self.radius, np.maximum(self.a, self.b) + self.radius

    def bound_radius(self, origin=None):
        o = np.zeros(self.dim) if origin is None else as_point(origin)
        return max(float(dist(self.a, o)), float(dist(self.b, o))) + self.radius

    def enlarge(self, r):
        return Capsule(self.a, self.b, self.radius + r)

    def to_dict(self):
        return {"shape": "capsule", "a": self.a.tolist(), "b": self.b.tolist(), "radius": self.radius}


@dataclass(frozen=True, eq=False)
class Annulus(Primitive):
    """Closed spherical shell inner <= |x - center| <= outer."""

    center: np.ndarray
    inner: float
    outer: float

    def __post_init__(self):
        object.__setattr__(self, "center", _frozen(self.center))
        object.__setattr__(self, "inner", float(self.inner))
        object.__setattr__(self, "outer", float(self.outer))
        if not (0.0 <= self.inner < self.outer < math.inf):
            raise GeometryError("annulus needs 0 <= inner < outer < inf")

    @property
    def dim(self):
        return self.center.shape[0]

    def contains(self, xs):
        r = dist(self._pts(xs), self.center)
        return (r >= self.inner - EPS_GEO) & (r <= self.outer + EPS_GEO)

    def distance(self, xs):
        r = dist(self._pts(xs), self.center)
        return np.maximum(np.maximum(self.inner - r, r - self.outer), 0.0)

    @property
    def volume(self):
        return unit_ball_volume(self.dim) * (self.outer**self.dim - self.inner**self.dim)

    def bbox(self):
        return self.center - self.outer, self.center + self.outer

    def bound_radius(self, origin=None):
        o = np.zeros(self.dim) if origin is None else as_point(origin)
        return float(dist(self.center, o)) + self.outer

    def sample(self, rng, n):
        d = self.dim
        g = rng.standard_normal((n, d))
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        u = rng.random(n)
        rad = (self.inner**d + u * (self.outer**d - self.inner**d)) ** (1.0 / d)
        return self.center + g * rad[:, None]

    def enlarge(self, r):
        return Annulus(self.center, max(0.0, self.inner - r), self.outer + r)

    def to_dict(self):
        return {"shape": "annulus", "center": self.center.tolist(), "inner": self.inner, "outer": self.outer}


@dataclass(frozen=True, eq=False)
class Difference(Primitive):
    """``base`` minus the open interiors of disjoint ball ``holes`` lying inside it."""

    base: Primitive
    holes: tuple = field(default_factory=tuple)

    def __post_init__(self):
        holes = tuple(self.holes)
        object.__setattr__(self, "holes", holes)
        for h in holes:
            if not isinstance(h, Ball):
                raise GeometryError("holes must be balls")
            if h.dim != self.base.dim:
                raise DimensionError("hole dimension mismatch")
        if isinstance(self.base, Ball):
            for h in holes:
                if float(dist(h.center, self.base.center)) + h.radius > self.base.radius + 1e-9:
                    raise GeometryError("hole is not contained in the base ball")
        for h1, h2 in itertools.combinations(holes, 2):
            if float(dist(h1.center, h2.center)) < h1.radius + h2.radius - EPS_GEO:
                raise GeometryError("holes overlap")
        if holes:
            c = np.array([h.center for h in holes])
            r = np.array([h.radius for h in holes])
            object.__setattr__(self, "_hc", c)
            object.__setattr__(self, "_hr", r)

    @property
    def dim(self):
        return self.base.dim

    def _in_hole(self, p):
        if not self.holes:
            return np.zeros(p.shape[0], dtype=bool)
        out = np.zeros(p.shape[0], dtype=bool)
        for c, r in zip(self._hc, self._hr):
            out |= dist(p, c) < r - EPS_GEO
        return out

    def contains(self, xs):
        p = self._pts(xs)
        return self.base.contains(p) & ~self._in_hole(p)

    def distance(self, xs):
        p = self._pts(xs)
        d = self.base.distance(p)
        for c, r in zip(getattr(self, "_hc", []), getattr(self, "_hr", [])):
            inside = dist(p, c) < r
            d = np.where(inside, r - dist(p, c), d)
        return d

    @property
    def volume(self):
        return self.base.volume - sum(h.volume for h in self.holes)

    def bbox(self):
        return self.base.bbox()

    def bound_radius(self, origin=None):
        return self.base.bound_radius(origin)

    def sample(self, rng, n):
        out = np.empty((0, self.dim))
        while out.shape[0] < n:
            m = max(16, 2 * (n - out.shape[0]))
            cand = self.base.sample(rng, m)
            out = np.vstack([out, cand[~self._in_hole(cand)]])
        return out[:n]

    def to_dict(self):
        return {"shape": "difference", "base": self.base.to_dict(), "holes": [h.to_dict() for h in self.holes]}


# ---------------------------------------------------------------------------
# Regions, segments, shells
# ---------------------------------------------------------------------------


class Region:
    """Finite union of primitives.

    ``volume`` is the sum of the primitive volumes, which is the volume of the
    union when the primitives have pairwise disjoint interiors.
    """

    def __init__(self, parts: Iterable[Primitive]):
        parts = tuple(parts)
        if not parts:
            raise GeometryError("region needs at least one primitive")
        dims = {p.dim for p in parts}
        if len(dims) != 1:
            raise DimensionError(f"mixed dimensions in region: {dims}")
        self.parts = parts
        self.dim = dims.pop()

    @classmethod
    def of(cls, shape) -> "Region":
        if isinstance(shape, Region):
            return shape
        if isinstance(shape, Primitive):
            return cls([shape])
        return cls(shape)

    def contains(self, xs) -> np.ndarray:
        p = as_points(xs, self.dim)
        out = self.parts[0].contains(p)
        for part in self.parts[1:]:
            out = out | part.contains(p)
        return out

    def distance(self, xs) -> np.ndarray:
        p = as_points(xs, self.dim)
        return np.min(np.stack([part.distance(p) for part in self.parts]), axis=0)

    @property
    def volume(self) -> float:
        return float(sum(p.volume for p in self.parts))

    def bbox(self):
        boxes = [p.bbox() for p in self.parts]
        return np.min([b[0] for b in boxes], axis=0), np.max([b[1] for b in boxes], axis=0)

    def bound_radius(self, origin=None) -> float:
        return max(p.bound_radius(origin) for p in self.parts)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        vols = np.array([p.volume for p in self.parts])
        if len(self.parts) == 1:
            return self.parts[0].sample(rng, n)
        counts = rng.multinomial(n, vols / vols.sum())
        pts = np.vstack([p.sample(rng, int(k)) for p, k in zip(self.parts, counts)])
        return pts[rng.permutation(n)]

    def enlarge(self, r: float) -> "Region":
        return Region([p.enlarge(r) for p in self.parts])

    def to_dict(self) -> dict:
        if len(self.parts) == 1:
            return self.parts[0].to_dict()
        return {"shape": "union", "parts": [p.to_dict() for p in self.parts]}

    def __repr__(self):
        return f"Region({list(self.parts)!r})"


@dataclass(frozen=True, eq=False)
class Segment:
    """Segment from p1 to p2; points are ordered by their parameter along p1 -> p2."""

    p1: np.ndarray
    p2: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "p1", _frozen(self.p1))
        object.__setattr__(self, "p2", _frozen(self.p2))
        if self.p1.shape != self.p2.shape:
            raise DimensionError("segment endpoints differ in dimension")

    @property
    def dim(self):
        return self.p1.shape[0]

    @property
    def length(self) -> float:
        return float(dist(self.p1, self.p2))

    @property
    def direction(self) -> np.ndarray:
        L = self.length
        if L == 0.0:
            raise GeometryError("degenerate segment has no direction")
        return (self.p2 - self.p1) / L

    def at(self, t):
        """Point at signed arc-length ``t`` from p1 along the line."""
        t = np.asarray(t, dtype=float)
        return self.p1 + t[..., None] * self.direction

    def coordinate(self, xs) -> np.ndarray:
        """Signed arc-length coordinate of the projection onto the line."""
        return (as_points(xs, self.dim) - self.p1) @ self.direction

    def line_distance(self, xs) -> np.ndarray:
        p = as_points(xs, self.dim)
        proj = self.at(self.coordinate(p))
        return dist(p, proj)

    def distance(self, xs) -> np.ndarray:
        return point_segment_distance(as_points(xs, self.dim), self.p1, self.p2)


@dataclass(frozen=True, eq=False)
class Polyline:
    vertices: np.ndarray

    def __post_init__(self):
        v = np.array(self.vertices, dtype=float)
        if v.ndim != 2 or v.shape[0] < 1:
            raise GeometryError("polyline needs an (n, d) vertex array")
        if not np.all(np.isfinite(v)):
            raise GeometryError("polyline must be bounded")
        v.setflags(write=False)
        object.__setattr__(self, "vertices", v)

    @property
    def dim(self):
        return self.vertices.shape[1]

    @property
    def segments(self) -> list[Segment]:
        v = self.vertices
        return [Segment(v[i], v[i + 1]) for i in range(len(v) - 1)]

    @property
    def length(self) -> float:
        return float(sum(s.length for s in self.segments))

    def distance(self, xs) -> np.ndarray:
        p = as_points(xs, self.dim)
        if len(self.vertices) == 1:
            return dist(p, self.vertices[0])
        return np.min(np.stack([point_segment_distance(p, s.p1, s.p2) for s in self.segments]), axis=0)


@dataclass(frozen=True, eq=False)
class CylindricalShell:
    """Points at distance ``radius`` from the axis line whose projection lies on the axis segment."""

    axis: Segment
    radius: float

    def contains(self, xs) -> np.ndarray:
        p = as_points(xs, self.axis.dim)
        t = self.axis.coordinate(p)
        on_axis = (t >= -EPS_GEO) & (t <= self.axis.length + EPS_GEO)
        return on_axis & (np.abs(self.axis.line_distance(p) - self.radius) <= EPS_GEO)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        d = self.axis.dim
        u = self.axis.direction
        g = rng.standard_normal((n, d))
        g -= (g @ u)[:, None] * u
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        t = self.axis.length * rng.random(n)
        return self.axis.at(t) + self.radius * g


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------


def ball_contains(b: Ball, x) -> bool:
    p = as_point(x)
    if p.shape[0] != b.dim:
        raise DimensionError(f"point has dimension {p.shape[0]}, ball has {b.dim}")
    return bool(b.contains(p.reshape(1, -1))[0])


def enlarge(a, r: float):
    """Closed r-enlargement {x : d(x, a) <= r} as a Region."""
    r = float(r)
    if not (r > 0 and math.isfinite(r)):
        raise GeometryError("enlargement radius must be positive and finite")
    if isinstance(a, Region):
        return a.enlarge(r)
    if isinstance(a, Primitive):
        return Region([a.enlarge(r)])
    if isinstance(a, Segment):
        return Region([Capsule(a.p1, a.p2, r)])
    if isinstance(a, Polyline):
        if len(a.vertices) == 1:
            return Region([Ball(a.vertices[0], r)])
        return Region([Capsule(s.p1, s.p2, r) for s in a.segments])
    pts = np.asarray(a, dtype=float)
    if pts.ndim == 1:
        return Region([Ball(as_point(pts), r)])
    if not np.all(np.isfinite(pts)):
        raise GeometryError("cannot enlarge an unbounded set")
    return Region([Ball(p, r) for p in pts])


def shell_sphere_distance(r2: float, s: float, r: float) -> float:
    """Distance from the shell of radius ``r`` at axial coordinate ``r2 - s`` to the sphere of radius ``r2``."""
    if not (0.0 <= r <= s <= r2):
        raise GeometryError(f"need 0 <= r <= s <= r2, got r={r}, s={s}, r2={r2}")
    return r2 - math.sqrt((r2 - s) ** 2 + r * r)


def shell_offset(d0: float, d1: float, d2: float, a_next: float) -> float:
    """Axial coordinate b with d(S_{d1}(b), a_next) = d0 + 2 d2, b <= a_next."""
    reach = d0 + 2 * d2
    if not (d1 < reach):
        raise GeometryError(f"no right triangle: d1={d1} >= d0 + 2 d2 = {reach}")
    return a_next - math.sqrt(reach * reach - d1 * d1)


# -- minimal enclosing ball -------------------------------------------------


def _tangent_ball(C: np.ndarray, R: np.ndarray):
    """Smallest ball internally tangent to all given balls, centre in their affine hull."""
    k = C.shape[0]
    if k == 1:
        return C[0].copy(), float(R[0])
    c0, r0 = C[0], float(R[0])
    A = (C[1:] - c0).T
    G = A.T @ A
    if np.linalg.matrix_rank(G) < k - 1:
        return None
    b = 0.5 * (np.sum(A * A, axis=0) - R[1:] ** 2 + r0 * r0)
    g = R[1:] - r0
    ub = A @ np.linalg.solve(G, b)
    ug = A @ np.linalg.solve(G, g)
    qa = float(ug @ ug) - 1.0
    qb = 2.0 * (float(ub @ ug) + r0)
    qc = float(ub @ ub) - r0 * r0
    if abs(qa) < 1e-14:
        if qb == 0.0:
            return None
        roots = [-qc / qb]
    else:
        disc = qb * qb - 4 * qa * qc
        if disc < 0:
            if disc < -1e-12 * max(1.0, qb * qb):
                return None
            disc = 0.0
        sq = math.sqrt(disc)
        roots = [(-qb - sq) / (2 * qa), (-qb + sq) / (2 * qa)]
    rmax = float(np.max(R))
    valid = [x for x in roots if x >= rmax - 1e-12]
    if not valid:
        return None
    rad = min(valid)
    return c0 + ub + rad * ug, rad


def _small_meb(C: np.ndarray, R: np.ndarray, tol: float):
    n, d = C.shape
    best = None
    for size in range(1, min(n, d + 1) + 1):
        for sub in itertools.combinations(range(n), size):
            res = _tangent_ball(C[list(sub)], R[list(sub)])
            if res is None:
                continue
            c, rad = res
            if best is not None and rad >= best[1]:
                continue
            if np.all(dist(C, c) + R <= rad + tol):
                best = (c, rad, sub)
    if best is None:
        raise GeometryError("minimal enclosing ball computation failed")
    return best


def min_enclosing_ball(items) -> Ball:
    """Minimal enclosing ball of a finite set of points and/or balls.

    Active-set iteration: the support set grows by the worst violator and is
    re-solved exactly by enumerating at most d+1 internally tangent balls;
    the radius strictly increases so the loop terminates.
    """
    centers, radii = [], []
    for it in items:
        if isinstance(it, Ball):
            centers.append(it.center)
            radii.append(it.radius)
        else:
            centers.append(as_point(it))
            radii.append(0.0)
    if not centers:
        raise GeometryError("minimal enclosing ball of an empty set")
    C = np.array(centers, dtype=float)
    R = np.array(radii, dtype=float)
    if C.ndim != 2:
        raise DimensionError("inconsistent dimensions")
    scale = max(1.0, float(np.max(np.abs(C))) + float(np.max(R)))
    tol = 1e-10 * scale
    support = [int(np.argmax(R))]
    c, rad = C[support[0]].copy(), float(R[support[0]])
    for _ in range(10 * len(C) + 100):
        viol = dist(C, c) + R - rad
        j = int(np.argmax(viol))
        if viol[j] <= tol:
            return Ball(c, rad)
        S = support + [j]
        c, rad, sub = _small_meb(C[S], R[S], tol)
        support = [S[i] for i in sub]
    raise GeometryError("minimal enclosing ball iteration did not converge")


# -- chains covering curves ---------------------------------------------------


def _chain_spacing(d0: float, delta: float) -> float:
    # A point y with d(y, C) <= d0 - 2 delta has its nearest curve point q within
    # g/2 (along a straight piece) of a chain point c; |y - c|^2 <= (d0 - 2delta)^2 + g^2/4
    # stays below (d0 - delta)^2 for g < 2 sqrt(delta (2 d0 - 3 delta)).
    # the relative shrink keeps rounded gaps strictly inside the bound
    return min(d0 - 2 * delta, 2 * math.sqrt(delta * (2 * d0 - 3 * delta))) * (1 - 1e-9)


def _walk(vertices: np.ndarray, g: float) -> list[np.ndarray]:
    pts = [vertices[0]]
    for u, v in zip(vertices[:-1], vertices[1:]):
        L = float(dist(u, v))
        if L == 0.0:
            continue
        n = max(1, math.ceil(L / g - 1e-12))
        for k in range(1, n + 1):
            pts.append(u + (k / n) * (v - u))
    return pts


def cover_chain(c, c0, d0: float, delta: float) -> list[np.ndarray]:
    """Ordered chain c_0 = c0, c_1, ... with consecutive gaps <= d0 - 2 delta.

    For a curve (Segment or Polyline) the open balls B(c_i, d0 - delta) cover
    the (d0 - 2 delta)-enlargement of the curve.  For a finite point set the
    chain is an Euler tour of the proximity graph, so points may repeat.
    """
    if not (0 < delta < d0 / 2):
        raise GeometryError(f"need 0 < delta < d0/2, got delta={delta}, d0={d0}")
    c0 = as_point(c0)
    gap = d0 - 2 * delta
    if isinstance(c, Segment):
        c = Polyline([c.p1, c.p2])
    if isinstance(c, Polyline):
        if float(c.distance(c0)[0]) > 1e-9:
            raise GeometryError("c0 does not lie on the curve")
        v = c.vertices
        if len(v) == 1:
            return [c0]
        g = _chain_spacing(d0, delta)
        # split the polyline at c0
        segs = c.segments
        k = int(np.argmin([float(s.distance(c0)[0]) for s in segs]))
        back = _walk(np.vstack([c0[None, :], v[: k + 1][::-1]]), g)
        fwd = _walk(np.vstack([c0[None, :], v[k + 1 :]]), g)
        # walk out along the first branch, retrace to c0, then do the second
        chain = back + back[-2::-1] + fwd[1:] if len(back) > 1 else fwd
        return [np.array(p) for p in chain]
    pts = as_points(c)
    if pts.shape[1] != c0.shape[0]:
        raise DimensionError("chain points and c0 differ in dimension")
    dd = np.sqrt(np.array([sqdist(pts, p) for p in pts]))
    start = np.where(dist(pts, c0) <= 1e-12)[0]
    if start.size == 0:
        raise GeometryError("c0 is not an element of the point set")
    n = len(pts)
    seen = np.zeros(n, dtype=bool)
    order = []

    def visit(i):
        seen[i] = True
        order.append(i)
        for j in np.argsort(dd[i]):
            if not seen[j] and dd[i, j] <= gap:
                visit(int(j))
                order.append(i)

    visit(int(start[0]))
    if not seen.all():
        raise GeometryError("point set is not chain-connected at gap d0 - 2 delta")
    while len(order) > 1 and order[-1] == order[-2]:
        order.pop()
    # drop the trailing return to c0
    while len(order) > 1 and seen.all() and order[-1] in order[:-1]:
        order.pop()
    return [pts[i].copy() for i in order]


# -- overlap tests used to validate initial configurations --------------------


def _core(p: Primitive):
    if isinstance(p, Ball):
        return ("point", (p.center,), p.radius)
    if isinstance(p, Capsule):
        return ("segment", (p.a, p.b), p.radius)
    if isinstance(p, Box):
        return ("box", (p.lo, p.hi), 0.0)
    if isinstance(p, RoundedBox):
        return ("box", (p.lo, p.hi), p.radius)
    return None


def _core_distance(k1, k2) -> float:
    (t1, g1, _), (t2, g2, _) = k1, k2
    if t1 > t2:
        (t1, g1), (t2, g2) = (t2, g2), (t1, g1)
    if t1 == "box" and t2 == "box":
        gap = np.maximum(0.0, np.maximum(g1[0] - g2[1], g2[0] - g1[1]))
        return float(norm(gap))
    if t1 == "box" and t2 == "point":
        return float(point_box_distance(g2[0], *g1))
    if t1 == "box" and t2 == "segment":
        return segment_box_distance(g2[0], g2[1], *g1)
    if t1 == "point" and t2 == "point":
        return float(dist(g1[0], g2[0]))
    if t1 == "point" and t2 == "segment":
        return float(point_segment_distance(g1[0], *g2))
    if t1 == "segment" and t2 == "segment":
        return segment_segment_distance(g1[0], g1[1], g2[0], g2[1])
    raise AssertionError((t1, t2))


def _core_maxdist(k, c) -> float:
    t, g, r = k
    if t == "point":
        return float(dist(g[0], c)) + r
    if t == "segment":
        return max(float(dist(g[0], c)), float(dist(g[1], c))) + r
    far = np.maximum(np.abs(g[0] - c), np.abs(g[1] - c))
    return float(norm(far)) + r


def _dist_to_point(p: Primitive, c) -> float:
    return float(p.distance(np.asarray(c).reshape(1, -1))[0])


def _maxdist(p: Primitive, c) -> float:
    return p.bound_radius(c)


def interiors_overlap(p: Primitive, q: Primitive) -> bool:
    """True when the two closed primitives share interior points (touching is allowed)."""
    if p.dim != q.dim:
        raise DimensionError("primitives differ in dimension")
    if isinstance(q, Difference) and not isinstance(p, Difference):
        p, q = q, p
    if isinstance(p, Difference):
        if not interiors_overlap(p.base, q):
            return False
        return not any(_maxdist(q, h.center) <= h.radius + EPS_GEO for h in p.holes)
    if isinstance(q, Annulus) and not isinstance(p, Annulus):
        p, q = q, p
    if isinstance(p, Annulus):
        c = p.center
        if isinstance(q, Annulus):
            cc = float(dist(c, q.center))
            if cc >= p.outer + q.outer - EPS_GEO:
                return False
            if cc + q.outer <= p.inner + EPS_GEO or cc + p.outer <= q.inner + EPS_GEO:
                return False
            return True
        return _dist_to_point(q, c) < p.outer - EPS_GEO and _maxdist(q, c) > p.inner + EPS_GEO
    k1, k2 = _core(p), _core(q)
    if k1 is None or k2 is None:
        raise GeometryError(f"no overlap test for {type(p).__name__} / {type(q).__name__}")
    rsum = k1[2] + k2[2]
    if rsum == 0.0:
        # two plain boxes: need positive-length overlap on every axis
        (lo1, hi1), (lo2, hi2) = k1[1], k2[1]
        return bool(np.all(np.minimum(hi1, hi2) - np.maximum(lo1, lo2) > EPS_GEO))
    return _core_distance(k1, k2) < rsum - EPS_GEO


def regions_overlap(a: Region, b: Region) -> bool:
    return any(interiors_overlap(p, q) for p in a.parts for q in b.parts)


# -- (de)serialisation ---------------------------------------------------------


def shape_from_dict(doc: dict):
    kind = doc.get("shape")
    if kind == "ball":
        return Ball(doc["center"], doc["radius"])
    if kind == "box":
        return Box(doc["lo"], doc["hi"])
    if kind == "roundedbox":
        return RoundedBox(doc["lo"], doc["hi"], doc["radius"])
    if kind == "capsule":
        return Capsule(doc["a"], doc["b"], doc["radius"])
    if kind == "annulus":
        return Annulus(doc["center"], doc["inner"], doc["outer"])
    if kind == "difference":
        return Difference(shape_from_dict(doc["base"]), tuple(shape_from_dict(h) for h in doc.get("holes", [])))
    if kind == "union":
        return Region([shape_from_dict(p) for p in doc["parts"]])
    raise GeometryError(f"unknown shape kind: {kind!r}")


def region_from_dict(doc: dict) -> Region:
    return Region.of(shape_from_dict(doc))


def grid_points(lo, hi, pitch: float) -> np.ndarray:
    """Regular grid with the given pitch covering the box [lo, hi] (inclusive ends)."""
    lo = as_point(lo)
    hi = as_point(hi)
    axes = [np.arange(l, h + pitch * 0.5, pitch) for l, h in zip(lo, hi)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.reshape(-1) for m in mesh], axis=-1)


def points_in_ball(center, radius: float, pitch: float) -> np.ndarray:
    center = as_point(center)
    pts = grid_points(center - radius, center + radius, pitch)
    return pts[dist(pts, center) <= radius]


__all__ = [
    "EPS_GEO",
    "Annulus",
    "Ball",
    "Box",
    "Capsule",
    "CylindricalShell",
    "Difference",
    "DimensionError",
    "GeometryError",
    "Polyline",
    "Primitive",
    "Region",
    "RoundedBox",
    "Segment",
    "ball_contains",
    "cover_chain",
    "enlarge",
    "grid_points",
    "interiors_overlap",
    "min_enclosing_ball",
    "regions_overlap",
    "shell_offset",
    "shell_sphere_distance",
    "sqdist",
]
