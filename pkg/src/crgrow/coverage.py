"""First-coverage index over a chronological log of infection events.

The log holds initial-region activations and outburst balls in the order
they happened.  A point outside every initial piece takes the type and time
of the earliest outburst ball that contains it; a point inside a piece
follows that piece alone.  Everything else (status, infection times,
effectiveness, rasters) is derived from the batched first-cover query.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .geometry import EPS_GEO, Ball, DimensionError, GeometryError, Region, as_points, dist, norm, region_from_dict, regions_overlap

IMMUNE = -1
UNINFECTED = 0

REGION = "region"
OUTBURST = "outburst"


class ConfigError(ValueError):
    pass


class LogError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Initial configurations
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Piece:
    region: Region
    type: int
    time: float

    @property
    def immune(self) -> bool:
        return math.isinf(self.time)


def _fmt_time(t: float):
    return "inf" if math.isinf(t) else t


def _parse_time(v) -> float:
    if isinstance(v, str):
        if v == "inf":
            return math.inf
        raise ConfigError(f"bad time literal {v!r}")
    return float(v)


class InitialConfig:
    """Disjoint bounded pieces with a type and an activation time (inf = immune)."""

    def __init__(self, pieces: Sequence[Piece], dim: int, n_types: int, validate: bool = True):
        self.pieces = tuple(pieces)
        self.dim = int(dim)
        self.n_types = int(n_types)
        if validate:
            self.validate()

    def validate(self):
        if not 1 <= self.n_types <= 8:
            raise ConfigError("number of types must be in 1..8")
        if not self.pieces:
            raise ConfigError("configuration has no pieces")
        for j, p in enumerate(self.pieces):
            if p.region.dim != self.dim:
                raise ConfigError(f"piece {j} has dimension {p.region.dim}, expected {self.dim}")
            if not p.immune and not 1 <= p.type <= self.n_types:
                raise ConfigError(f"piece {j} has type {p.type} outside 1..{self.n_types}")
            if p.time < 0 or math.isnan(p.time):
                raise ConfigError(f"piece {j} has invalid time {p.time}")
        for j, k in ((j, k) for j in range(len(self.pieces)) for k in range(j + 1, len(self.pieces))):
            if regions_overlap(self.pieces[j].region, self.pieces[k].region):
                raise ConfigError(f"pieces {j} and {k} overlap")
        if not any(not p.immune and p.region.volume > 0 for p in self.pieces):
            raise ConfigError("need at least one piece with finite time and positive volume")

    @classmethod
    def standard(cls, regions: Sequence[Region], types: Sequence[int], n_types: int | None = None) -> "InitialConfig":
        regions = [Region.of(r) for r in regions]
        n = n_types or max(types)
        return cls([Piece(r, int(i), 0.0) for r, i in zip(regions, types)], regions[0].dim, n)

    def piece_of(self, xs) -> np.ndarray:
        """Index of the (first) piece containing each point, -1 if none."""
        p = as_points(xs, self.dim)
        out = np.full(p.shape[0], -1, dtype=np.int64)
        for j in range(len(self.pieces) - 1, -1, -1):
            out[self.pieces[j].region.contains(p)] = j
        return out

    @property
    def piece_times(self) -> np.ndarray:
        return np.array([p.time for p in self.pieces])

    @property
    def piece_types(self) -> np.ndarray:
        return np.array([IMMUNE if p.immune else p.type for p in self.pieces], dtype=np.int64)

    def bound_radius(self) -> float:
        return max(p.region.bound_radius() for p in self.pieces)

    def union_region(self) -> Region:
        return Region([prim for p in self.pieces for prim in p.region.parts])

    def to_dict(self) -> dict:
        return {
            "dimension": self.dim,
            "types": self.n_types,
            "pieces": [{"shape": p.region.to_dict(), "type": p.type, "time": _fmt_time(p.time)} for p in self.pieces],
        }

    @classmethod
    def from_dict(cls, doc: dict, validate: bool = True) -> "InitialConfig":
        try:
            pieces = [Piece(region_from_dict(p["shape"]), int(p.get("type", 0)), _parse_time(p["time"])) for p in doc["pieces"]]
        except (KeyError, TypeError, GeometryError) as exc:
            raise ConfigError(f"malformed piece: {exc}") from exc
        return cls(pieces, int(doc["dimension"]), int(doc["types"]), validate=validate)


# ---------------------------------------------------------------------------
# Status values
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class InfectionStatus:
    state: str  # "uninfected" | "immune" | "infected"
    type: int = 0
    since: float = math.nan

    @classmethod
    def uninfected(cls):
        return cls("uninfected")

    @classmethod
    def immune(cls):
        return cls("immune")

    @classmethod
    def infected(cls, i: int, since: float):
        return cls("infected", int(i), float(since))

    def __eq__(self, other):
        if not isinstance(other, InfectionStatus):
            return NotImplemented
        if self.state != other.state:
            return False
        return self.state != "infected" or (self.type == other.type and self.since == other.since)

    def __hash__(self):
        return hash((self.state, self.type if self.state == "infected" else 0))


@dataclass(frozen=True)
class CoverageEvent:
    event_id: int
    time: float
    kind: str
    type: int
    center: np.ndarray | None = None
    radius: float | None = None
    cause: int | None = None
    piece: int | None = None

    @property
    def ball(self) -> Ball:
        return Ball(self.center, self.radius)


# ---------------------------------------------------------------------------
# The log and its grid index
# ---------------------------------------------------------------------------


class _Growable:
    def __init__(self, shape_tail=(), dtype=float, cap=256):
        self.a = np.empty((cap, *shape_tail), dtype=dtype)
        self.n = 0

    def append(self, v):
        if self.n == self.a.shape[0]:
            self.a = np.concatenate([self.a, np.empty_like(self.a)])
        self.a[self.n] = v
        self.n += 1

    @property
    def view(self):
        return self.a[: self.n]


class EventLog:
    """Append-only chronological event log with a lazy uniform-grid index.

    ``cell_size`` defaults to the median outburst radius at the time the grid
    is first built.  Buckets hold event ids in increasing order, so the first
    covering id in a bucket is the earliest covering event.
    """

    LARGE_FACTOR = 4.0

    def __init__(self, config: InitialConfig, cell_size: float | None = None):
        self.config = config
        self.dim = config.dim
        self.horizon = 0.0
        self._times = _Growable()
        self._types = _Growable(dtype=np.int64)
        self._centers = _Growable((self.dim,))
        self._radii = _Growable()
        self._causes = _Growable(dtype=np.int64)
        self._pieces = _Growable(dtype=np.int64)
        self._cell = cell_size
        self._buckets: dict[tuple, list] | None = None
        self._bucket_arrays: dict[tuple, np.ndarray] = {}
        self._large: list[int] = []
        self._extent = _Growable()

    # -- basic accessors --------------------------------------------------
    def __len__(self):
        return self._times.n

    @property
    def times(self) -> np.ndarray:
        return self._times.view

    @property
    def types(self) -> np.ndarray:
        return self._types.view

    @property
    def centers(self) -> np.ndarray:
        return self._centers.view

    @property
    def radii(self) -> np.ndarray:
        return self._radii.view

    @property
    def causes(self) -> np.ndarray:
        return self._causes.view

    @property
    def piece_ids(self) -> np.ndarray:
        return self._pieces.view

    @property
    def is_outburst(self) -> np.ndarray:
        return self.piece_ids < 0

    @property
    def last_time(self) -> float:
        return float(self._times.a[self._times.n - 1]) if len(self) else 0.0

    def event(self, eid: int) -> CoverageEvent:
        if self.piece_ids[eid] >= 0:
            return CoverageEvent(eid, float(self.times[eid]), REGION, int(self.types[eid]), piece=int(self.piece_ids[eid]))
        return CoverageEvent(eid, float(self.times[eid]), OUTBURST, int(self.types[eid]), self.centers[eid].copy(),
                             float(self.radii[eid]), int(self.causes[eid]) if self.causes[eid] >= 0 else None)

    def events(self) -> list[CoverageEvent]:
        return [self.event(k) for k in range(len(self))]

    # -- insertion ----------------------------------------------------------
    def _check_time(self, t: float):
        if not math.isfinite(t) or t < 0:
            raise LogError(f"event time must be finite and >= 0, got {t}")
        if len(self) and t < self.last_time:
            raise LogError(f"out-of-order insertion: {t} < {self.last_time}")

    def insert_activation(self, piece: int, t: float | None = None) -> int:
        p = self.config.pieces[piece]
        if p.immune:
            raise LogError("immune pieces are never activated")
        t = p.time if t is None else t
        self._check_time(t)
        eid = len(self)
        self._times.append(t)
        self._types.append(p.type)
        self._centers.append(np.zeros(self.dim))
        self._radii.append(0.0)
        self._causes.append(-1)
        self._pieces.append(piece)
        prev = self._extent.a[eid - 1] if eid else 0.0
        self._extent.append(max(prev, p.region.bound_radius()))
        self.horizon = max(self.horizon, t)
        return eid

    def insert_outburst(self, ball: Ball, t: float, type_: int, cause: int | None = None) -> int:
        if ball.dim != self.dim:
            raise DimensionError("outburst ball dimension mismatch")
        if not 1 <= type_ <= self.config.n_types:
            raise LogError(f"outburst type {type_} outside 1..{self.config.n_types}")
        self._check_time(t)
        return self._append_outburst(ball.center, ball.radius, t, type_, -1 if cause is None else cause)

    def _append_outburst(self, center, radius: float, t: float, type_: int, cause: int) -> int:
        # unchecked fast path for the dynamics loop
        eid = self._times.n
        self._times.append(t)
        self._types.append(type_)
        self._centers.append(center)
        self._radii.append(radius)
        self._causes.append(cause)
        self._pieces.append(-1)
        cl = center.tolist() if isinstance(center, np.ndarray) else [float(v) for v in center]
        ext = math.sqrt(sum(v * v for v in cl)) + radius
        prev = self._extent.a[eid - 1] if eid else 0.0
        self._extent.append(ext if ext > prev else prev)
        if t > self.horizon:
            self.horizon = t
        if self._buckets is not None:
            self._register(eid, cl, radius)
        return eid

    # -- grid ---------------------------------------------------------------
    @property
    def cell_size(self) -> float:
        if self._cell is None:
            r = self.radii[self.is_outburst]
            self._cell = float(np.median(r)) if r.size else 1.0
            if not self._cell > 0:
                self._cell = 1.0
        return self._cell

    def _build(self):
        self._buckets = {}
        self._bucket_arrays = {}
        self._large = []
        for eid in np.flatnonzero(self.is_outburst):
            self._register(int(eid), self._centers.a[eid].tolist(), float(self._radii.a[eid]))

    def _register(self, eid: int, center, r: float):
        h = self.cell_size
        if r > self.LARGE_FACTOR * h:
            self._large.append(eid)
            self._bucket_arrays.pop("large", None)
            return
        floor = math.floor
        rr = r + EPS_GEO
        ranges = [range(floor((c - rr) / h), floor((c + rr) / h) + 1) for c in center]
        buckets = self._buckets
        cached = self._bucket_arrays
        for key in itertools.product(*ranges):
            b = buckets.get(key)
            if b is None:
                buckets[key] = [eid]
            else:
                b.append(eid)
            if key in cached:
                del cached[key]

    def _bucket(self, key) -> np.ndarray:
        arr = self._bucket_arrays.get(key)
        if arr is None:
            src = self._large if key == "large" else self._buckets.get(key, ())
            arr = np.array(src, dtype=np.int64)
            self._bucket_arrays[key] = arr
        return arr

    # -- queries --------------------------------------------------------------
    def _first_in(self, pts: np.ndarray, ids: np.ndarray, limit: int | None) -> np.ndarray:
        out = np.full(pts.shape[0], np.iinfo(np.int64).max, dtype=np.int64)
        if ids.size == 0:
            return out
        if limit is not None:
            ids = ids[ids < limit]
            if ids.size == 0:
                return out
        c = self._centers.a[ids]
        r = self._radii.a[ids]
        step = max(1, 4_000_000 // max(1, ids.size))
        for s in range(0, pts.shape[0], step):
            block = pts[s : s + step]
            cov = dist(block[:, None, :], c[None, :, :]) <= r[None, :] + EPS_GEO
            hit = cov.any(axis=1)
            first = np.argmax(cov, axis=1)
            out[s : s + step] = np.where(hit, ids[first], out[s : s + step])
        return out

    def first_cover_batch(self, xs, limit: int | None = None):
        """Earliest outburst (id, time, type) containing each point, ignoring pieces.

        Points never covered get id -1, time inf, type 0.  ``limit`` restricts
        the search to events with id < limit.
        """
        pts = as_points(xs, self.dim)
        m = pts.shape[0]
        if self._buckets is None:
            self._build()
        best = np.full(m, np.iinfo(np.int64).max, dtype=np.int64)
        if m == 0:
            return best.astype(np.int64), np.empty(0), np.empty(0, dtype=np.int64)
        h = self.cell_size
        keys = np.floor(pts / h).astype(np.int64)
        if m == 1:
            groups = [(tuple(int(k) for k in keys[0]), np.array([0]))]
        else:
            uniq, inv = np.unique(keys, axis=0, return_inverse=True)
            inv = inv.reshape(-1)
            order = np.argsort(inv, kind="stable")
            bounds = np.searchsorted(inv[order], np.arange(len(uniq) + 1))
            groups = [(tuple(int(k) for k in uniq[g]), order[bounds[g] : bounds[g + 1]]) for g in range(len(uniq))]
        for key, idx in groups:
            ids = self._bucket(key)
            if ids.size:
                best[idx] = self._first_in(pts[idx], ids, limit)
        if self._large:
            best = np.minimum(best, self._first_in(pts, self._bucket("large"), limit))
        found = best != np.iinfo(np.int64).max
        eid = np.where(found, best, -1)
        safe = np.where(found, best, 0)
        t = np.where(found, self._times.a[safe] if len(self) else np.inf, np.inf)
        ty = np.where(found, self._types.a[safe] if len(self) else 0, 0)
        return eid.astype(np.int64), t.astype(float), ty.astype(np.int64)

    def infection_times(self, xs):
        """(time, type) at which each point is first infected; immune -> (inf, -1), never -> (inf, 0)."""
        pts = as_points(xs, self.dim)
        piece = self.config.piece_of(pts)
        _, t, ty = self.first_cover_batch(pts)
        in_piece = piece >= 0
        if in_piece.any():
            pt = self.config.piece_times[piece[in_piece]]
            pty = self.config.piece_types[piece[in_piece]]
            t = t.copy()
            ty = ty.copy()
            t[in_piece] = pt
            ty[in_piece] = pty
        return t, ty

    def status_batch(self, xs, t: float):
        """Codes per point: -1 immune, 0 uninfected, i infected with type i; plus since-times."""
        if t > self.horizon + 0.0:
            raise LogError(f"query time {t} beyond horizon {self.horizon}")
        tt, ty = self.infection_times(xs)
        immune = ty == IMMUNE
        infected = (~immune) & (tt <= t)
        code = np.where(immune, IMMUNE, np.where(infected, ty, UNINFECTED))
        since = np.where(infected, tt, np.nan)
        return code.astype(np.int64), since

    def status(self, x, t: float) -> InfectionStatus:
        code, since = self.status_batch(np.asarray(x, dtype=float).reshape(1, -1), t)
        c = int(code[0])
        if c == IMMUNE:
            return InfectionStatus.immune()
        if c == UNINFECTED:
            return InfectionStatus.uninfected()
        return InfectionStatus.infected(c, float(since[0]))

    # -- diagnostics ------------------------------------------------------------
    def effectiveness(self, ball: Ball, t: float, n_samples: int, rng: np.random.Generator | int = 0,
                      before_event: int | None = None) -> dict:
        """Sampled test of whether ``ball`` adds new infected area at time t-.

        With ``before_event`` the reference state is "all events with a smaller
        id", which is how a logged outburst is judged against its predecessors.
        """
        if n_samples <= 0:
            raise ValueError("n_samples must be positive")
        if not isinstance(rng, np.random.Generator):
            rng = np.random.default_rng(rng)
        pts = ball.sample(rng, n_samples)
        fresh = self._fresh(pts, t, before_event)
        frac = float(fresh.mean())
        return {"effective": bool(fresh.any()), "newFraction": frac}

    def _fresh(self, pts, t, before_event):
        outside = self.config.piece_of(pts) < 0
        eid, ct, _ = self.first_cover_batch(pts, limit=before_event)
        if before_event is None:
            uncovered = ~(ct < t)
        else:
            uncovered = eid < 0
        return outside & uncovered

    def effective_events(self, n_samples: int, seed: int = 0, mask: np.ndarray | None = None) -> np.ndarray:
        """Boolean per event: sampled effectiveness of each outburst against earlier events."""
        out = np.zeros(len(self), dtype=bool)
        rng = np.random.default_rng(seed)
        todo = np.flatnonzero(self.is_outburst if mask is None else (self.is_outburst & mask))
        for eid in todo:
            pts = Ball(self.centers[eid], self.radii[eid]).sample(rng, n_samples)
            outside = self.config.piece_of(pts) < 0
            if not outside.any():
                continue
            first, _, _ = self.first_cover_batch(pts[outside])
            out[eid] = bool(np.any(first >= eid))
        return out

    def extent_at(self, t: float) -> float:
        k = int(np.searchsorted(self.times, t, side="right"))
        ev = float(self._extent.a[k - 1]) if k else 0.0
        return max(ev, self.config.bound_radius())

    def infected_extent(self, t: float) -> Ball:
        if t > self.horizon:
            raise LogError(f"query time {t} beyond horizon {self.horizon}")
        return Ball(np.zeros(self.dim), self.extent_at(t))

    def truncated(self, t: float) -> "EventLog":
        """Copy holding only events with time <= t."""
        out = EventLog(self.config, self._cell)
        for k in range(int(np.searchsorted(self.times, t, side="right"))):
            if self.piece_ids[k] >= 0:
                out.insert_activation(int(self.piece_ids[k]), float(self.times[k]))
            else:
                out.insert_outburst(Ball(self.centers[k], self.radii[k]), float(self.times[k]), int(self.types[k]),
                                    int(self.causes[k]) if self.causes[k] >= 0 else None)
        out.horizon = t
        return out

    # -- serialisation ----------------------------------------------------------
    def to_jsonl(self) -> str:
        header = {"kind": "header", **self.config.to_dict(), "horizon": self.horizon}
        lines = [json.dumps(header)]
        for k in range(len(self)):
            if self.piece_ids[k] >= 0:
                doc = {"eventId": k, "time": float(self.times[k]), "kind": REGION, "type": int(self.types[k]),
                       "piece": int(self.piece_ids[k]), "center": None, "radius": None, "causePointId": None}
            else:
                doc = {"eventId": k, "time": float(self.times[k]), "kind": OUTBURST, "type": int(self.types[k]),
                       "center": [float(v) for v in self.centers[k]], "radius": float(self.radii[k]),
                       "causePointId": int(self.causes[k]) if self.causes[k] >= 0 else None}
            lines.append(json.dumps(doc))
        return "\n".join(lines) + "\n"

    def write(self, path):
        with open(path, "w") as fh:
            fh.write(self.to_jsonl())

    @classmethod
    def from_jsonl(cls, text: str | Iterable[str]) -> "EventLog":
        lines = text.splitlines() if isinstance(text, str) else list(text)
        lines = [ln for ln in lines if ln.strip()]
        if not lines:
            raise LogError("empty log")
        header = json.loads(lines[0])
        if header.get("kind") != "header":
            raise LogError("first line must be the config header")
        log = cls(InitialConfig.from_dict(header, validate=False))
        for n, ln in enumerate(lines[1:]):
            doc = json.loads(ln)
            if doc["eventId"] != n:
                raise LogError(f"event ids must be consecutive, got {doc['eventId']} at line {n + 2}")
            if doc["kind"] == REGION:
                log.insert_activation(int(doc["piece"]), float(doc["time"]))
            elif doc["kind"] == OUTBURST:
                log.insert_outburst(Ball(doc["center"], doc["radius"]), float(doc["time"]), int(doc["type"]),
                                    doc.get("causePointId"))
            else:
                raise LogError(f"unknown event kind {doc['kind']!r}")
        log.horizon = float(header["horizon"])
        return log

    @classmethod
    def read(cls, path) -> "EventLog":
        with open(path) as fh:
            return cls.from_jsonl(fh.read())


def status(log: EventLog, x, t: float) -> InfectionStatus:
    return log.status(x, t)


def insert_outburst(log: EventLog, ball: Ball, t: float, type_: int, cause: int | None = None) -> EventLog:
    log.insert_outburst(ball, t, type_, cause)
    if t > log.horizon:
        log.horizon = t
    return log


def effectiveness(log: EventLog, ball: Ball, t: float, n_samples: int, rng=0) -> dict:
    return log.effectiveness(ball, t, n_samples, rng)


def infected_extent(log: EventLog, t: float) -> Ball:
    return log.infected_extent(t)


def raster(log: EventLog, t: float, resolution: int, lo=None, hi=None) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Type-id grid over the bounding box of the log's final extent (x1-x2 plane through 0 when d > 2).

    Using the final extent keeps rasters of one log at different times aligned.
    Returns (grid, lo, hi); grid[i, j] is the code at lo + (j, i) * pitch with
    255 for immune points.
    """
    d = log.dim
    if t > log.horizon:
        raise LogError(f"time {t} is beyond the log horizon {log.horizon}")
    ext = log.extent_at(log.horizon)
    if lo is None:
        lo = np.full(min(d, 2), -ext)
        hi = np.full(min(d, 2), ext)
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    n = int(resolution)
    if n < 1:
        raise ValueError("resolution must be positive")
    xs = np.linspace(lo[0], hi[0], n)
    if d == 1:
        pts = xs[:, None]
        shape = (1, n)
    else:
        ys = np.linspace(lo[1], hi[1], n)
        gx, gy = np.meshgrid(xs, ys)
        pts = np.zeros((n * n, d))
        pts[:, 0] = gx.reshape(-1)
        pts[:, 1] = gy.reshape(-1)
        shape = (n, n)
    code, _ = log.status_batch(pts, t)
    grid = np.where(code == IMMUNE, 255, code).astype(np.uint8).reshape(shape)
    return grid, lo, hi


__all__ = [
    "IMMUNE",
    "UNINFECTED",
    "ConfigError",
    "CoverageEvent",
    "EventLog",
    "InfectionStatus",
    "InitialConfig",
    "LogError",
    "Piece",
    "effectiveness",
    "infected_extent",
    "insert_outburst",
    "raster",
    "status",
]
