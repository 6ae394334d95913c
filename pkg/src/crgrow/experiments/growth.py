"""Replay of the deterministic chain construction that grows type 1 along a set."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..coverage import EventLog
from ..dynamics import RunSpec, run
from ..geometry import Ball, Polyline, Region, Segment, as_point, cover_chain, enlarge, grid_points
from ..pointproc import Deterministic, FixedStore, PoissonPoint

INJECTED_ID_BASE = 1 << 60


class HypothesisError(ValueError):
    """The starting state does not satisfy the growth hypotheses."""


@dataclass
class GrowthCheckReport:
    lower_inclusion_holds: bool
    upper_inclusion_holds: bool
    type2_frozen: bool
    sampled_violations: list = field(default_factory=list)
    chain: list = field(default_factory=list)
    n_grid: int = 0

    @property
    def passed(self) -> bool:
        return self.lower_inclusion_holds and self.upper_inclusion_holds and self.type2_frozen

    def to_dict(self) -> dict:
        return {
            "lowerInclusionHolds": self.lower_inclusion_holds,
            "upperInclusionHolds": self.upper_inclusion_holds,
            "type2Frozen": self.type2_frozen,
            "sampledViolations": self.sampled_violations[:50],
            "chainLength": len(self.chain),
            "gridPoints": self.n_grid,
        }


def chain_points(chain: Sequence[np.ndarray], T1: float, T2: float, d0: float) -> list[PoissonPoint]:
    """One point per chain entry: at the centre, mid-slot time, radius d0, strength 0."""
    n = len(chain) - 1
    step = (T2 - T1) / (n + 1)
    pts = []
    for i, c in enumerate(chain):
        t_i = T1 + i * step
        pts.append(PoissonPoint(np.asarray(c, dtype=float), t_i + step / 2, float(d0), 0.0, INJECTED_ID_BASE + i))
    return pts


def _as_set(c):
    if isinstance(c, (Segment, Polyline)):
        return c
    return np.asarray(c, dtype=float).reshape(-1, np.asarray(c).shape[-1])


def _grid_in(region: Region, pitch: float) -> np.ndarray:
    lo, hi = region.bbox()
    pts = grid_points(lo, hi, pitch)
    return pts[region.contains(pts)]


def verify_growth_along(c, c0, B: Region, d0: float, delta: float, T1: float, T2: float, existing_log: EventLog,
                        betas: Sequence[float] | None = None, pitch: float | None = None) -> GrowthCheckReport:
    """Grow type 1 along ``c`` during (T1, T2] with the chain construction and check the inclusions.

    Only the injected chain points are present in B x (T1, T2]; the replay
    continues ``existing_log`` from T1.  All checks run on a grid of pitch
    delta/4 unless ``pitch`` is given.
    """
    if not 0 < delta < d0 / 2:
        raise HypothesisError(f"need 0 < delta < d0/2, got delta={delta}, d0={d0}")
    if not T1 < T2:
        raise HypothesisError("need T1 < T2")
    B = Region.of(B)
    c = _as_set(c)
    c0 = as_point(c0)
    pitch = delta / 4 if pitch is None else pitch
    cfg = existing_log.config
    n_types = cfg.n_types
    betas = tuple(betas) if betas is not None else (1.0,) * n_types
    log1 = existing_log.truncated(T1)

    outer = enlarge(c, d0 + 2 * delta)
    inner = enlarge(c, d0 - 2 * delta)
    thin = enlarge(c, delta)
    outer_grid = _grid_in(outer, pitch)
    if not B.contains(outer_grid).all():
        raise HypothesisError("the (d0 + 2 delta)-enlargement of the set is not inside B")
    start = _grid_in(Region([Ball(c0, delta)]), pitch)
    code, _ = log1.status_batch(np.vstack([start, c0[None, :]]), T1)
    if not np.all(code == 1):
        raise HypothesisError("B(c0, delta) is not 1-infected at T1")
    code, _ = log1.status_batch(_grid_in(thin, pitch), T1)
    if n_types >= 2 and np.any(code == 2):
        raise HypothesisError("the delta-enlargement of the set meets type 2 at T1")
    ext = log1.extent_at(T1)
    # the infected region at T1 lies inside B (checked on the grid of its bounding box)
    d = cfg.dim
    box = grid_points(np.full(d, -ext), np.full(d, ext), pitch)
    code, _ = log1.status_batch(box, T1)
    if np.any((code > 0) & ~B.contains(box)):
        raise HypothesisError("the infected region at T1 is not inside B")

    chain = cover_chain(c, c0, d0, delta)
    store = FixedStore(d, chain_points(chain, T1, T2, d0))
    spec = RunSpec(cfg, Deterministic(d0), betas, 0, T2)
    res = run(spec, store, log=existing_log, start_time=T1)
    log2 = res.log

    lo, hi = outer.bbox()
    e2 = log2.extent_at(T2)
    lo = np.minimum(lo, -e2)
    hi = np.maximum(hi, e2)
    grid = grid_points(lo, hi, pitch)
    s1, _ = log1.status_batch(grid, T1)
    s2, _ = log2.status_batch(grid, T2)
    in_inner = inner.contains(grid)
    in_outer = outer.contains(grid)
    violations = []
    low_bad = in_inner & (s1 != 2) & (s2 != 1)
    up_bad = (s2 == 1) & ~in_outer & (s1 != 1)
    frozen_bad = (s1 == 2) != (s2 == 2)
    for name, bad in (("lower", low_bad), ("upper", up_bad), ("type2", frozen_bad)):
        for k in np.flatnonzero(bad)[:20]:
            violations.append({"check": name, "point": grid[k].tolist(), "statusT1": int(s1[k]), "statusT2": int(s2[k])})
    return GrowthCheckReport(not low_bad.any(), not up_bad.any(), not frozen_bad.any(), violations,
                             [np.asarray(p).tolist() for p in chain], len(grid))
