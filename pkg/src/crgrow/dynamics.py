"""Event-driven replay of the two scanning constructions.

``fromInfection``: a point (x, s, r, w) fires at time s when x already
carries type i at time s and w <= beta_i.

``fromZero``: the same point fires at t + s, where t is the time x was first
infected (with type i, w <= beta_i).

Points are generated lazily on a lattice of cubes x time slabs.  A cube is
generated the first time an event ball or an activated piece reaches its
bounding box; before that no point of the cube can be infected, so nothing
inside it can fire.  Every newly generated point is classified immediately:
points of pieces and points already covered get their firing time at once,
the rest wait in a per-cube pending list until an outburst covers them.
"""
from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .coverage import IMMUNE, EventLog, InitialConfig
from .geometry import EPS_GEO, Ball, dist, norm
from .pointproc import FixedStore, PointBatch, PointStore, RadiusDistribution, ResourceError

FROM_INFECTION = "fromInfection"
FROM_ZERO = "fromZero"
CONSTRUCTIONS = (FROM_INFECTION, FROM_ZERO)


class SpecError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Radius transforms
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RadiusTransform:
    kind: str = "identity"
    factor: float = 1.0

    def __post_init__(self):
        if self.kind not in ("identity", "shrink", "scale"):
            raise SpecError(f"unknown radius transform {self.kind!r}")
        if self.kind == "scale" and not self.factor > 0:
            raise SpecError("scale factor must be positive")

    def __call__(self, r):
        if self.kind == "identity":
            return r
        if self.kind == "shrink":
            return r / (1.0 + r)
        return r * self.factor

    def to_dict(self):
        return {"kind": self.kind, "factor": self.factor} if self.kind == "scale" else {"kind": self.kind}

    @classmethod
    def from_dict(cls, doc) -> "RadiusTransform":
        if doc is None:
            return cls()
        if isinstance(doc, str):
            return cls(doc)
        return cls(doc.get("kind", "identity"), float(doc.get("factor", 1.0)))


IDENTITY = RadiusTransform()
SHRINK = RadiusTransform("shrink")


# ---------------------------------------------------------------------------
# Specs and results
# ---------------------------------------------------------------------------


@dataclass
class RunSpec:
    config: InitialConfig
    rho: RadiusDistribution
    betas: Sequence[float]
    seed: int
    t_max: float
    r_stop: float | None = None
    construction: str = FROM_INFECTION
    transform: RadiusTransform = IDENTITY
    strength_cap: float | None = None
    r_cap: float = 1e4
    cube_side: float = 2.0
    slab_width: float = 4.0
    reach_radius: float | None = None
    effective_samples: int = 0
    max_points: int = 50_000_000
    stop_when_all_reach: bool = False

    def __post_init__(self):
        self.betas = tuple(float(b) for b in self.betas)
        self.validate()

    def validate(self):
        if len(self.betas) != self.config.n_types:
            raise SpecError(f"need {self.config.n_types} growth rates, got {len(self.betas)}")
        if any(not b > 0 for b in self.betas):
            raise SpecError("growth rates must be positive")
        if not (self.t_max > 0 and math.isfinite(self.t_max)):
            raise SpecError("t_max must be positive and finite")
        if self.construction not in CONSTRUCTIONS:
            raise SpecError(f"construction must be one of {CONSTRUCTIONS}")
        if self.r_stop is not None and not self.r_stop > 0:
            raise SpecError("r_stop must be positive")
        if self.cap < max(self.betas):
            raise SpecError("strength cap below the largest growth rate")

    @property
    def dim(self) -> int:
        return self.config.dim

    @property
    def cap(self) -> float:
        return max(self.betas) if self.strength_cap is None else float(self.strength_cap)

    @property
    def checkpoint_radius(self) -> float | None:
        return self.reach_radius if self.reach_radius is not None else self.r_stop

    def make_store(self) -> PointStore:
        return PointStore(self.dim, self.rho, self.seed, self.cap, self.cube_side, self.slab_width, self.max_points)


@dataclass
class RunResult:
    spec: RunSpec
    log: EventLog
    fired_ids: np.ndarray
    fired_times: np.ndarray
    stats: dict
    explored: dict
    store: object = field(repr=False, default=None)

    @property
    def fired(self) -> list[tuple[int, float]]:
        return list(zip(self.fired_ids.tolist(), self.fired_times.tolist()))


# ---------------------------------------------------------------------------
# Engine
# ---------------------------------------------------------------------------

_ACTIVATE, _SLAB, _FIRE = 0, 1, 2


class _Pending:
    __slots__ = ("pos", "s", "r", "w", "ids")

    def __init__(self, b: PointBatch):
        self.pos, self.s, self.r, self.w, self.ids = b.positions, b.times, b.radii, b.strengths, b.ids

    def add(self, b: PointBatch):
        self.pos = np.concatenate([self.pos, b.positions])
        self.s = np.concatenate([self.s, b.times])
        self.r = np.concatenate([self.r, b.radii])
        self.w = np.concatenate([self.w, b.strengths])
        self.ids = np.concatenate([self.ids, b.ids])

    def keep(self, mask):
        self.pos, self.s, self.r, self.w, self.ids = self.pos[mask], self.s[mask], self.r[mask], self.w[mask], self.ids[mask]


class _Engine:
    def __init__(self, spec: RunSpec, store, log: EventLog | None = None, start_time: float = 0.0):
        self.spec = spec
        self.store = store
        self.side = store.cube_side
        self.tau = store.slab_width
        self.dim = spec.dim
        self.betas = np.array((0.0,) + spec.betas)  # index by type
        self.from_zero = spec.construction == FROM_ZERO
        self.t_max = spec.t_max
        self.heap: list = []
        self.seq = itertools.count()
        self.touched: dict[tuple, float] = {}
        self.pending: dict[tuple, _Pending] = {}
        self.fired_ids: list[int] = []
        self.fired_times: list[float] = []
        self.now = start_time
        self.stopped_at: float | None = None
        cfg = spec.config
        self.piece_times = cfg.piece_times
        self.piece_types = cfg.piece_types
        self.extent = 0.0
        base = spec.checkpoint_radius
        self.levels = None if base is None else base * np.arange(1, 11) / 10.0
        self.reach = {i: [None] * 10 for i in range(1, cfg.n_types + 1)}
        self.type_extent = {i: 0.0 for i in range(1, cfg.n_types + 1)}
        if log is None:
            self.log = EventLog(cfg, cell_size=max(spec.rho.quantile(0.5), 1e-6))
            for j, p in enumerate(cfg.pieces):
                if not p.immune:
                    heapq.heappush(self.heap, (p.time, _ACTIVATE, j))
        else:
            if self.from_zero:
                raise SpecError("continuing an existing log is only supported for fromInfection")
            self.log = log
            for k in range(len(log)):
                if log.piece_ids[k] >= 0:
                    reg = cfg.pieces[int(log.piece_ids[k])].region
                    self._note_extent(int(log.types[k]), reg.bound_radius(), float(log.times[k]))
                else:
                    self._note_extent(int(log.types[k]), float(norm(log.centers[k])) + float(log.radii[k]), float(log.times[k]))
            done = set(int(j) for j in log.piece_ids[log.piece_ids >= 0])
            for j, p in enumerate(cfg.pieces):
                if not p.immune and j not in done:
                    heapq.heappush(self.heap, (p.time, _ACTIVATE, j))
            for k in range(len(log)):
                if log.piece_ids[k] >= 0:
                    lo, hi = cfg.pieces[int(log.piece_ids[k])].region.bbox()
                else:
                    lo, hi = log.centers[k] - log.radii[k], log.centers[k] + log.radii[k]
                self._touch_box(lo, hi, start_time)

    # -- bookkeeping ------------------------------------------------------------
    def _note_extent(self, type_: int, ext: float, t: float):
        if ext > self.extent:
            self.extent = ext
        if ext > self.type_extent[type_]:
            self.type_extent[type_] = ext
            if self.levels is not None:
                row = self.reach[type_]
                for k in range(10):
                    if row[k] is None and ext >= self.levels[k]:
                        row[k] = t

    def _cubes(self, lo, hi):
        side = self.side
        floor = math.floor
        return itertools.product(*[range(floor(x / side), floor(y / side) + 1) for x, y in zip(lo, hi)])

    def _touch_box(self, lo, hi, t):
        for cube in self._cubes(lo, hi):
            if cube not in self.touched:
                self._touch(cube, t)

    def _touch(self, cube, t):
        self.touched[cube] = t
        if self.from_zero:
            first = 0
        else:
            first = int(math.floor(t / self.tau))
        self._generate(cube, first, t)
        nxt = first + 1
        when = t + nxt * self.tau if self.from_zero else nxt * self.tau
        if when <= self.t_max:
            heapq.heappush(self.heap, (when, _SLAB, next(self.seq), cube, nxt))

    def _schedule(self, when, pid, type_, pos, r):
        heapq.heappush(self.heap, (float(when), _FIRE, int(pid), int(type_), pos, float(r)))

    def _generate(self, cube, slab, t):
        b = self.store.points(cube, slab)
        if len(b) == 0:
            return
        if not self.from_zero:
            b = b.take(np.flatnonzero((b.times >= self.touched[cube]) & (b.times <= self.t_max)))
            if len(b) == 0:
                return
        cfg = self.spec.config
        piece = cfg.piece_of(b.positions)
        in_piece = piece >= 0
        inf_t = np.full(len(b), np.inf)
        inf_ty = np.zeros(len(b), dtype=np.int64)
        if in_piece.any():
            inf_t[in_piece] = self.piece_times[piece[in_piece]]
            inf_ty[in_piece] = self.piece_types[piece[in_piece]]
        free = ~in_piece
        if free.any():
            _, ct, cty = self.log.first_cover_batch(b.positions[free])
            inf_t[free] = ct
            inf_ty[free] = cty
        known = (inf_ty > 0) | (inf_ty == IMMUNE)
        live = np.flatnonzero(inf_ty > 0)
        if live.size:
            ty = inf_ty[live]
            s = b.times[live]
            ok = b.strengths[live] <= self.betas[ty]
            if self.from_zero:
                when = inf_t[live] + s
            else:
                when = s
                ok &= s >= inf_t[live]
            ok &= when <= self.t_max
            for k, w_, t_ in zip(live[ok].tolist(), when[ok].tolist(), ty[ok].tolist()):
                self._schedule(w_, b.ids[k], t_, b.positions[k], b.radii[k])
        wait = np.flatnonzero(~known)
        if wait.size:
            part = b.take(wait)
            pend = self.pending.get(cube)
            if pend is None:
                self.pending[cube] = _Pending(part)
            else:
                pend.add(part)

    def _infect_pending(self, center, radius, t, type_):
        rr = radius + EPS_GEO
        cl = center.tolist()
        lo = [c - rr for c in cl]
        hi = [c + rr for c in cl]
        beta = self.betas[type_]
        touched = self.touched
        pending = self.pending
        for cube in self._cubes(lo, hi):
            if cube not in touched:
                self._touch(cube, t)
                continue
            pend = pending.get(cube)
            if pend is None or pend.ids.size == 0:
                continue
            hit = dist(pend.pos, center) <= radius + EPS_GEO
            if not self.from_zero:
                alive = pend.s >= t
                fire = hit & alive & (pend.w <= beta)
                drop = hit | ~alive
            else:
                fire = hit & (pend.w <= beta)
                drop = hit
            if not drop.any():
                continue
            for k in np.flatnonzero(fire):
                when = t + pend.s[k] if self.from_zero else pend.s[k]
                if when <= self.t_max:
                    self._schedule(when, pend.ids[k], type_, pend.pos[k], pend.r[k])
            pend.keep(~drop)

    # -- main loop -----------------------------------------------------------------
    def _stop_check(self, t):
        r_stop = self.spec.r_stop
        if r_stop is not None and self.extent >= r_stop:
            self.stopped_at = t
            return True
        if self.spec.stop_when_all_reach and all(row[-1] is not None for row in self.reach.values()):
            self.stopped_at = t
            return True
        return False

    def run(self):
        spec = self.spec
        transform = spec.transform
        heap = self.heap
        while heap and heap[0][0] <= self.t_max:
            item = heapq.heappop(heap)
            t, kind = item[0], item[1]
            self.now = t
            if kind == _FIRE:
                _, _, pid, type_, pos, r = item
                rr = float(transform(r))
                ext = math.sqrt(sum(v * v for v in pos.tolist())) + rr
                if ext > spec.r_cap:
                    raise ResourceError(f"outburst reaching radius {ext:.4g} exceeds the cap {spec.r_cap:.4g}")
                self.log._append_outburst(pos, rr, t, type_, pid)
                self.fired_ids.append(pid)
                self.fired_times.append(t)
                self._note_extent(type_, ext, t)
                self._infect_pending(pos, rr, t, type_)
                if self._stop_check(t):
                    break
            elif kind == _SLAB:
                _, _, _, cube, slab = item
                self._generate(cube, slab, t)
                nxt = slab + 1
                when = self.touched[cube] + nxt * self.tau if self.from_zero else nxt * self.tau
                if when <= self.t_max:
                    heapq.heappush(heap, (when, _SLAB, next(self.seq), cube, nxt))
            else:
                j = item[2]
                piece = spec.config.pieces[j]
                self.log.insert_activation(j, t)
                ext = piece.region.bound_radius()
                if ext > spec.r_cap:
                    raise ResourceError(f"piece {j} exceeds the cap {spec.r_cap:.4g}")
                self._note_extent(piece.type, ext, t)
                lo, hi = piece.region.bbox()
                self._touch_box(lo, hi, t)
                if self._stop_check(t):
                    break
        horizon = self.stopped_at if self.stopped_at is not None else self.t_max
        self.log.horizon = horizon
        return self._result(horizon)

    def _result(self, horizon):
        spec = self.spec
        stats = {
            "horizon": horizon,
            "stoppedByReach": self.stopped_at is not None,
            "finalExtent": self.extent,
            "typeExtent": {str(i): v for i, v in self.type_extent.items()},
            "reachLevels": None if self.levels is None else self.levels.tolist(),
            "reachTimes": {str(i): row for i, row in self.reach.items()},
            "nEvents": len(self.log),
            "nFired": len(self.fired_ids),
            "nGenerated": int(getattr(self.store, "generated", 0)),
            "effectiveCount": None,
        }
        if spec.effective_samples:
            eff = self.log.effective_events(spec.effective_samples, seed=spec.seed)
            stats["effectiveCount"] = {str(i): int(np.sum(eff & (self.log.types == i))) for i in range(1, spec.config.n_types + 1)}
        return RunResult(spec, self.log, np.array(self.fired_ids, dtype=np.int64), np.array(self.fired_times, dtype=float),
                         stats, dict(self.touched), self.store)


def run(spec: RunSpec, store=None, log: EventLog | None = None, start_time: float = 0.0) -> RunResult:
    """Run either construction; ``log``/``start_time`` continue an existing run."""
    if store is None:
        store = spec.make_store()
    elif isinstance(store, PointStore) and store.strength_cap < spec.cap:
        raise SpecError("shared store has a smaller strength cap than the run needs")
    if log is not None:
        log = log.truncated(start_time)
    return _Engine(spec, store, log, start_time).run()


def run_scan_from_infection(spec: RunSpec, store=None) -> RunResult:
    if spec.construction != FROM_INFECTION:
        raise SpecError("spec construction is not fromInfection")
    return run(spec, store)


def run_scan_from_zero(spec: RunSpec, store=None) -> RunResult:
    if spec.construction != FROM_ZERO:
        raise SpecError("spec construction is not fromZero")
    return run(spec, store)


def shared_store(specs: Sequence[RunSpec]) -> PointStore:
    first = specs[0]
    for s in specs[1:]:
        if s.dim != first.dim or s.rho != first.rho or s.seed != first.seed:
            raise SpecError("coupled runs need identical dimension, radius law and seed")
        if s.cube_side != first.cube_side or s.slab_width != first.slab_width:
            raise SpecError("coupled runs need identical window lattices")
    cap = max(s.cap for s in specs)
    return PointStore(first.dim, first.rho, first.seed, cap, first.cube_side, first.slab_width,
                      max(s.max_points for s in specs))


def run_coupled(specs: Sequence[RunSpec], store=None) -> list[RunResult]:
    """Run all specs on one shared point configuration."""
    if not specs:
        return []
    store = shared_store(specs) if store is None else store
    return [run(s, store) for s in specs]


# ---------------------------------------------------------------------------
# Independent replay check
# ---------------------------------------------------------------------------


def _explored_points(store, explored, horizon: float) -> PointBatch:
    n_slabs = int(math.floor(horizon / store.slab_width)) + 1
    parts = [store.points(cube, k) for cube in sorted(explored) for k in range(n_slabs)]
    return PointBatch.concat([p for p in parts if len(p)], store.dim if hasattr(store, "dim") else 0)


def verify_log(log: EventLog, spec: RunSpec, store, explored, fired: Sequence[tuple[int, float]] | None = None,
               max_report: int = 50) -> list[str]:
    """Re-derive every firing decision from status queries alone.

    Returns a list of human-readable divergences; empty means the log is a
    faithful replay of the scanning rule on the given points.
    """
    issues: list[str] = []
    horizon = log.horizon
    side = store.cube_side
    explored = set(explored)

    def add(msg):
        if len(issues) < max_report:
            issues.append(msg)

    times = log.times
    if np.any(np.diff(times) < 0):
        add("event times are not nondecreasing")
    if len(times) and times[-1] > horizon:
        add(f"event after horizon {horizon}")

    # every event must lie inside the explored cubes
    def covered(lo, hi):
        a = np.floor(np.asarray(lo) / side).astype(np.int64)
        b = np.floor(np.asarray(hi) / side).astype(np.int64)
        return all(c in explored for c in itertools.product(*[range(int(x), int(y) + 1) for x, y in zip(a, b)]))

    for k in range(len(log)):
        if log.piece_ids[k] >= 0:
            j = int(log.piece_ids[k])
            p = spec.config.pieces[j]
            if p.immune or float(times[k]) != p.time:
                add(f"event {k}: activation of piece {j} at {times[k]} does not match its time {p.time}")
            if not covered(*p.region.bbox()):
                add(f"event {k}: piece {j} reaches unexplored space")
        else:
            c, r = log.centers[k], log.radii[k]
            if not covered(c - r - EPS_GEO, c + r + EPS_GEO):
                add(f"event {k}: outburst ball reaches unexplored space")

    pts = _explored_points(store, explored, horizon)
    if len(pts) == 0:
        pred_ids = np.empty(0, dtype=np.int64)
        pred_t = np.empty(0)
        pred_ty = np.empty(0, dtype=np.int64)
    else:
        t_inf, ty = log.infection_times(pts.positions)
        betas = np.array((0.0,) + tuple(spec.betas))
        ok_type = ty > 0
        ok = ok_type.copy()
        ok[ok_type] &= pts.strengths[ok_type] <= betas[ty[ok_type]]
        if spec.construction == FROM_ZERO:
            when = t_inf + pts.times
        else:
            ok &= t_inf <= pts.times
            when = pts.times
        ok &= when <= horizon
        pred_ids, pred_t, pred_ty = pts.ids[ok], when[ok], ty[ok]
    predicted = dict(zip(pred_ids.tolist(), zip(pred_t.tolist(), pred_ty.tolist())))

    out_mask = log.is_outburst
    ev_ids = np.flatnonzero(out_mask)
    logged = {}
    for k in ev_ids:
        cid = int(log.causes[k])
        if cid in logged:
            add(f"point {cid} fired twice")
        logged[cid] = int(k)

    if fired is not None:
        fired_map = dict(fired)
        if set(fired_map) != set(logged):
            add("fired list and logged outbursts differ")

    by_id = {}
    if len(pts):
        by_id = {int(i): n for n, i in enumerate(pts.ids.tolist())}
    for cid, k in logged.items():
        t = float(times[k])
        if cid not in predicted:
            n = by_id.get(cid)
            if n is None:
                add(f"event {k}: cause point {cid} is not part of the explored configuration")
            else:
                w = float(pts.strengths[n])
                ty = int(log.types[k])
                if 1 <= ty <= len(spec.betas) and w > spec.betas[ty - 1]:
                    add(f"event {k}: strength {w} exceeds beta of type {ty}")
                add(f"event {k}: point {cid} fired at {t} but the scanning rule says it never fires")
            continue
        pt, pty = predicted[cid]
        if pt != t:
            add(f"event {k}: point {cid} fired at {t}, rule gives {pt}")
        if pty != int(log.types[k]):
            add(f"event {k}: point {cid} fired with type {int(log.types[k])}, rule gives {pty}")
        n = by_id[cid]
        if not np.array_equal(log.centers[k], pts.positions[n]):
            add(f"event {k}: outburst center differs from point position")
        if float(log.radii[k]) != float(spec.transform(pts.radii[n])):
            add(f"event {k}: outburst radius differs from transformed point radius")
        w = float(pts.strengths[n])
        if w > spec.betas[pty - 1]:
            add(f"event {k}: strength {w} exceeds beta of type {pty}")
    for cid, (pt, _) in predicted.items():
        if cid not in logged and pt < horizon:
            add(f"point {cid} should have fired at {pt} but did not")
    return issues


def verify_result(res: RunResult) -> list[str]:
    return verify_log(res.log, res.spec, res.store, res.explored, res.fired)


__all__ = [
    "CONSTRUCTIONS",
    "FROM_INFECTION",
    "FROM_ZERO",
    "IDENTITY",
    "SHRINK",
    "RadiusTransform",
    "RunResult",
    "RunSpec",
    "SpecError",
    "run",
    "run_coupled",
    "run_scan_from_infection",
    "run_scan_from_zero",
    "shared_store",
    "verify_log",
    "verify_result",
]
