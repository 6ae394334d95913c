"""Radius laws and reproducible sampling of the marked Poisson point process.

A marked point is ``(x, s, r, w)``: position, time, radius, strength.  The
driving intensity is Lebesgue in space and time, ``rho`` in the radius and
Lebesgue in the strength.  Only strengths up to a cap are ever generated,
because a point with strength above every growth rate can never fire.

Every window draws from its own stream, keyed by ``(master_seed, window
key)`` through :class:`numpy.random.SeedSequence`, so the points of a window
do not depend on which other windows were generated or in which order.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .geometry import Box, Region


class DistributionError(ValueError):
    pass


class ResourceError(RuntimeError):
    """Raised when a run would exceed its spatial or point budget."""


# ---------------------------------------------------------------------------
# Radius laws
# ---------------------------------------------------------------------------


class RadiusDistribution:
    kind: str

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        raise NotImplementedError

    def cdf(self, r: float) -> float:
        raise NotImplementedError

    def moment(self, d: int) -> float:
        """E[r^d]; ``math.inf`` when the integral diverges."""
        raise NotImplementedError

    def mean(self) -> float:
        return self.moment(1)

    def quantile(self, p: float) -> float:
        raise NotImplementedError

    @property
    def has_exponential_moment(self) -> bool:
        raise NotImplementedError

    @property
    def ess_sup(self) -> float:
        raise NotImplementedError

    @property
    def support_reaches_zero(self) -> bool:
        """True when rho([0, e]) > 0 for every e > 0."""
        raise NotImplementedError

    def choose_d0(self, r0: float) -> float:
        """inf{r > r0 : rho([0, r]) > rho([0, r0])}."""
        raise NotImplementedError

    def params(self) -> dict:
        raise NotImplementedError

    def to_dict(self) -> dict:
        return {"kind": self.kind, "params": self.params()}

    def _check_r0(self, r0: float):
        if r0 < 0:
            raise DistributionError("r0 must be nonnegative")
        if self.cdf(r0) >= 1.0:
            raise DistributionError(f"r0={r0} is at or beyond the essential supremum {self.ess_sup}")


@dataclass(frozen=True)
class Deterministic(RadiusDistribution):
    r: float
    kind = "deterministic"

    def __post_init__(self):
        if not self.r > 0:
            raise DistributionError("deterministic radius must be positive")

    def sample(self, rng, n):
        return np.full(n, float(self.r))

    def cdf(self, r):
        return 1.0 if r >= self.r else 0.0

    def moment(self, d):
        return float(self.r) ** d

    def quantile(self, p):
        return float(self.r)

    has_exponential_moment = True
    support_reaches_zero = False

    @property
    def ess_sup(self):
        return float(self.r)

    def choose_d0(self, r0):
        self._check_r0(r0)
        return float(self.r)

    def params(self):
        return {"r": self.r}


@dataclass(frozen=True)
class Uniform(RadiusDistribution):
    a: float
    b: float
    kind = "uniform"

    def __post_init__(self):
        if not (0 <= self.a < self.b < math.inf):
            raise DistributionError("uniform law needs 0 <= a < b < inf")

    def sample(self, rng, n):
        out = self.a + (self.b - self.a) * rng.random(n)
        if self.a == 0.0:
            # rho({0}) = 0; a draw of exactly zero has probability 2^-53
            out[out == 0.0] = np.nextafter(0.0, 1.0)
        return out

    def cdf(self, r):
        return float(np.clip((r - self.a) / (self.b - self.a), 0.0, 1.0))

    def moment(self, d):
        return (self.b ** (d + 1) - self.a ** (d + 1)) / ((d + 1) * (self.b - self.a))

    def quantile(self, p):
        return self.a + p * (self.b - self.a)

    has_exponential_moment = True

    @property
    def support_reaches_zero(self):
        return self.a == 0.0

    @property
    def ess_sup(self):
        return float(self.b)

    def choose_d0(self, r0):
        self._check_r0(r0)
        return max(float(r0), float(self.a))

    def params(self):
        return {"a": self.a, "b": self.b}


@dataclass(frozen=True)
class Exponential(RadiusDistribution):
    mean_radius: float
    kind = "exponential"

    def __post_init__(self):
        if not self.mean_radius > 0:
            raise DistributionError("exponential mean must be positive")

    def sample(self, rng, n):
        out = rng.exponential(self.mean_radius, n)
        out[out == 0.0] = np.nextafter(0.0, 1.0)
        return out

    def cdf(self, r):
        return 0.0 if r <= 0 else 1.0 - math.exp(-r / self.mean_radius)

    def moment(self, d):
        return math.factorial(d) * self.mean_radius**d

    def quantile(self, p):
        return -self.mean_radius * math.log1p(-p)

    has_exponential_moment = True
    support_reaches_zero = True
    ess_sup = math.inf

    def choose_d0(self, r0):
        self._check_r0(r0)
        return float(r0)

    def params(self):
        return {"mean": self.mean_radius}


@dataclass(frozen=True)
class Pareto(RadiusDistribution):
    """Density alpha * scale^alpha / r^(alpha + 1) on [scale, inf)."""

    scale: float
    alpha: float
    kind = "pareto"

    def __post_init__(self):
        if not (self.scale > 0 and self.alpha > 0):
            raise DistributionError("pareto law needs scale > 0 and alpha > 0")

    def sample(self, rng, n):
        u = 1.0 - rng.random(n)  # in (0, 1]
        return self.scale * u ** (-1.0 / self.alpha)

    def cdf(self, r):
        return 0.0 if r < self.scale else 1.0 - (self.scale / r) ** self.alpha

    def moment(self, d):
        if self.alpha <= d:
            return math.inf
        return self.alpha * self.scale**d / (self.alpha - d)

    def quantile(self, p):
        return self.scale * (1.0 - p) ** (-1.0 / self.alpha)

    has_exponential_moment = False
    support_reaches_zero = False
    ess_sup = math.inf

    def choose_d0(self, r0):
        self._check_r0(r0)
        return max(float(r0), float(self.scale))

    def params(self):
        return {"scale": self.scale, "alpha": self.alpha}


@dataclass(frozen=True)
class Mixture(RadiusDistribution):
    components: tuple
    weights: tuple
    kind = "mixture"

    def __post_init__(self):
        comps = tuple(self.components)
        w = np.asarray(self.weights, dtype=float)
        if len(comps) == 0 or len(comps) != len(w):
            raise DistributionError("mixture needs matching components and weights")
        if np.any(w <= 0):
            raise DistributionError("mixture weights must be positive")
        object.__setattr__(self, "components", comps)
        object.__setattr__(self, "weights", tuple(float(x) for x in w / w.sum()))

    def sample(self, rng, n):
        which = rng.choice(len(self.components), size=n, p=self.weights)
        out = np.empty(n)
        for k, comp in enumerate(self.components):
            idx = np.flatnonzero(which == k)
            out[idx] = comp.sample(rng, idx.size)
        return out

    def cdf(self, r):
        return float(sum(w * c.cdf(r) for w, c in zip(self.weights, self.components)))

    def moment(self, d):
        return float(sum(w * c.moment(d) for w, c in zip(self.weights, self.components)))

    def quantile(self, p):
        lo, hi = 0.0, max(1.0, max(c.quantile(min(p, 1 - 1e-12)) for c in self.components))
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if self.cdf(mid) >= p:
                hi = mid
            else:
                lo = mid
        return hi

    @property
    def has_exponential_moment(self):
        return all(c.has_exponential_moment for c in self.components)

    @property
    def support_reaches_zero(self):
        return any(c.support_reaches_zero for c in self.components)

    @property
    def ess_sup(self):
        return max(c.ess_sup for c in self.components)

    def choose_d0(self, r0):
        # the mixture cdf increases past r0 as soon as one component's does
        self._check_r0(r0)
        return min(c.choose_d0(r0) for c in self.components if c.cdf(r0) < 1.0)

    def params(self):
        return {"components": [c.to_dict() for c in self.components], "weights": list(self.weights)}


def moment_d(rho: RadiusDistribution, d: int) -> float:
    if d < 1:
        raise DistributionError("d must be a positive integer")
    return rho.moment(d)


def has_exponential_moment(rho: RadiusDistribution) -> bool:
    return rho.has_exponential_moment


def choose_d0(rho: RadiusDistribution, r0: float) -> float:
    return rho.choose_d0(r0)


def distribution_from_dict(doc: dict) -> RadiusDistribution:
    kind = doc.get("kind")
    p = doc.get("params", {})
    if kind == "deterministic":
        return Deterministic(float(p["r"]))
    if kind == "uniform":
        return Uniform(float(p["a"]), float(p["b"]))
    if kind == "exponential":
        return Exponential(float(p["mean"]))
    if kind == "pareto":
        return Pareto(float(p["scale"]), float(p["alpha"]))
    if kind == "mixture":
        return Mixture(tuple(distribution_from_dict(c) for c in p["components"]), tuple(p["weights"]))
    raise DistributionError(f"unknown radius law {kind!r}")


# ---------------------------------------------------------------------------
# Poisson points and windows
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PoissonPoint:
    position: np.ndarray
    time: float
    radius: float
    strength: float
    id: int


@dataclass
class PointBatch:
    """Structure-of-arrays view of marked points."""

    positions: np.ndarray
    times: np.ndarray
    radii: np.ndarray
    strengths: np.ndarray
    ids: np.ndarray

    @classmethod
    def empty(cls, d: int) -> "PointBatch":
        return cls(np.empty((0, d)), np.empty(0), np.empty(0), np.empty(0), np.empty(0, dtype=np.int64))

    def __len__(self):
        return self.times.shape[0]

    def take(self, idx) -> "PointBatch":
        return PointBatch(self.positions[idx], self.times[idx], self.radii[idx], self.strengths[idx], self.ids[idx])

    @staticmethod
    def concat(batches: Sequence["PointBatch"], d: int) -> "PointBatch":
        if not batches:
            return PointBatch.empty(d)
        return PointBatch(
            np.concatenate([b.positions for b in batches]).reshape(-1, d),
            np.concatenate([b.times for b in batches]),
            np.concatenate([b.radii for b in batches]),
            np.concatenate([b.strengths for b in batches]),
            np.concatenate([b.ids for b in batches]).astype(np.int64),
        )

    def points(self) -> list[PoissonPoint]:
        return [
            PoissonPoint(self.positions[k].copy(), float(self.times[k]), float(self.radii[k]), float(self.strengths[k]), int(self.ids[k]))
            for k in range(len(self))
        ]

    @classmethod
    def from_points(cls, pts: Sequence[PoissonPoint], d: int) -> "PointBatch":
        if not pts:
            return cls.empty(d)
        return cls(
            np.array([p.position for p in pts], dtype=float).reshape(-1, d),
            np.array([p.time for p in pts], dtype=float),
            np.array([p.radius for p in pts], dtype=float),
            np.array([p.strength for p in pts], dtype=float),
            np.array([p.id for p in pts], dtype=np.int64),
        )


@dataclass(frozen=True)
class Window:
    spatial: Region
    t0: float
    t1: float
    strength_cap: float
    strength_floor: float = 0.0

    def __post_init__(self):
        if not self.t0 <= self.t1:
            raise DistributionError("window needs t0 <= t1")
        if not 0 <= self.strength_floor <= self.strength_cap:
            raise DistributionError("window needs 0 <= strength floor <= cap")

    @property
    def measure(self) -> float:
        return self.spatial.volume * (self.t1 - self.t0) * (self.strength_cap - self.strength_floor)


def stream_for(master_seed: int, key: Sequence[int]) -> np.random.Generator:
    """Independent generator for one window; ``key`` entries must be nonnegative."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(master_seed), spawn_key=tuple(int(k) for k in key))))


def sample_window(w: Window, rho: RadiusDistribution, rng: np.random.Generator, id_base: int = 0) -> PointBatch:
    """Poisson points in ``w`` sorted by time; ids are ``id_base + rank``."""
    d = w.spatial.dim
    lam = w.measure
    if lam <= 0.0:
        return PointBatch.empty(d)
    n = int(rng.poisson(lam))
    pos = w.spatial.sample(rng, n) if n else np.empty((0, d))
    times = w.t0 + (w.t1 - w.t0) * rng.random(n)
    radii = rho.sample(rng, n)
    strengths = w.strength_floor + (w.strength_cap - w.strength_floor) * rng.random(n)
    order = np.argsort(times, kind="stable")
    return PointBatch(pos[order], times[order], radii[order], strengths[order], id_base + np.arange(n, dtype=np.int64))


# ---------------------------------------------------------------------------
# Lattice of windows: cubes x time slabs x unit strength layers
# ---------------------------------------------------------------------------

LOCAL_BITS = 16
SLAB_BITS = 12
LAYER_BITS = 6
SPACE_BITS = 63 - LOCAL_BITS - SLAB_BITS - LAYER_BITS - 1


def _zigzag(k: int) -> int:
    return 2 * k if k >= 0 else -2 * k - 1


class PointStore:
    """Lazily generated Poisson configuration on a lattice of windows.

    Space is tiled by cubes of side ``cube_side``, time by slabs of width
    ``slab_width`` and strength by unit layers.  A layer is always sampled in
    full and then cut at ``strength_cap``; the points with strength below any
    cap are therefore identical for every cap.
    """

    def __init__(self, dim: int, rho: RadiusDistribution, master_seed: int, strength_cap: float,
                 cube_side: float = 2.0, slab_width: float = 4.0, max_points: int = 50_000_000):
        if strength_cap < 0:
            raise DistributionError("strength cap must be nonnegative")
        self.dim = dim
        self.rho = rho
        self.master_seed = int(master_seed)
        self.strength_cap = float(strength_cap)
        self.cube_side = float(cube_side)
        self.slab_width = float(slab_width)
        self.max_points = max_points
        self.n_layers = int(math.ceil(self.strength_cap))
        self.space_bits = SPACE_BITS // dim
        self._cache: dict[tuple, PointBatch] = {}
        self.generated = 0

    def compatible(self, other: "PointStore") -> bool:
        return (type(self) is type(other) and self.dim == other.dim and self.rho == other.rho
                and self.master_seed == other.master_seed and self.cube_side == other.cube_side
                and self.slab_width == other.slab_width)

    def window_id(self, cube: tuple, slab: int, layer: int) -> int:
        code = 0
        for k in cube:
            z = _zigzag(k)
            if z >= 1 << self.space_bits:
                raise ResourceError(f"cube index {cube} exceeds the id space")
            code = (code << self.space_bits) | z
        if slab >= 1 << SLAB_BITS or layer >= 1 << LAYER_BITS:
            raise ResourceError("time slab or strength layer exceeds the id space")
        code = (((code << SLAB_BITS) | slab) << LAYER_BITS) | layer
        return code << LOCAL_BITS

    def cube_box(self, cube: tuple) -> Box:
        lo = np.array(cube, dtype=float) * self.cube_side
        return Box(lo, lo + self.cube_side)

    def window(self, cube: tuple, slab: int, layer: int) -> Window:
        return Window(Region([self.cube_box(cube)]), slab * self.slab_width, (slab + 1) * self.slab_width,
                      float(layer + 1), float(layer))

    def _layer(self, cube, slab, layer) -> PointBatch:
        key = (*(_zigzag(k) for k in cube), slab, layer)
        rng = stream_for(self.master_seed, key)
        batch = sample_window(self.window(cube, slab, layer), self.rho, rng, self.window_id(cube, slab, layer))
        if len(batch) >= 1 << LOCAL_BITS:
            raise ResourceError("too many points in one window")
        return batch

    def points(self, cube: tuple, slab: int) -> PointBatch:
        """All points of the cube and slab with strength <= cap, sorted by (time, id)."""
        key = (cube, slab)
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        parts = [self._layer(cube, slab, layer) for layer in range(self.n_layers)]
        batch = PointBatch.concat(parts, self.dim)
        batch = batch.take(np.flatnonzero(batch.strengths <= self.strength_cap))
        batch = batch.take(np.lexsort((batch.ids, batch.times)))
        self.generated += len(batch)
        if self.generated > self.max_points:
            raise ResourceError(f"point budget of {self.max_points} exceeded")
        self._cache[key] = batch
        return batch


class FixedStore:
    """A hand-specified point configuration exposed through the store interface."""

    def __init__(self, dim: int, points: Sequence[PoissonPoint] | PointBatch, cube_side: float = 2.0,
                 slab_width: float = 4.0):
        self.dim = dim
        self.cube_side = float(cube_side)
        self.slab_width = float(slab_width)
        batch = points if isinstance(points, PointBatch) else PointBatch.from_points(list(points), dim)
        if len(np.unique(batch.ids)) != len(batch):
            raise DistributionError("injected point ids must be unique")
        if len(batch) and (np.any(batch.times < 0) or np.any(batch.radii <= 0) or np.any(batch.strengths < 0)):
            raise DistributionError("injected points need s >= 0, r > 0, w >= 0")
        self.batch = batch
        cubes = np.floor(batch.positions / self.cube_side).astype(np.int64)
        slabs = np.floor(batch.times / self.slab_width).astype(np.int64)
        self._index: dict[tuple, np.ndarray] = {}
        for k in range(len(batch)):
            key = (tuple(int(c) for c in cubes[k]), int(slabs[k]))
            self._index.setdefault(key, []).append(k)
        self.strength_cap = float(batch.strengths.max()) if len(batch) else 0.0
        self.generated = len(batch)

    def compatible(self, other) -> bool:
        return other is self

    def cube_box(self, cube: tuple) -> Box:
        lo = np.array(cube, dtype=float) * self.cube_side
        return Box(lo, lo + self.cube_side)

    def points(self, cube: tuple, slab: int) -> PointBatch:
        idx = self._index.get((cube, slab))
        if not idx:
            return PointBatch.empty(self.dim)
        b = self.batch.take(np.array(idx))
        return b.take(np.lexsort((b.ids, b.times)))
