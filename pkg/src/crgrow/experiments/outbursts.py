"""Counting effective outbursts originating from a bounded region."""
from __future__ import annotations

import dataclasses
import math
from typing import Sequence

import numpy as np

from ..dynamics import FROM_ZERO, RunResult, RunSpec, run
from ..geometry import Ball, Region


def _in_region(region: Region, pts: np.ndarray) -> np.ndarray:
    return region.contains(pts) if len(pts) else np.zeros(0, dtype=bool)


def effective_in_region(res: RunResult, region: Region, n_samples: int = 64, seed: int = 0) -> np.ndarray:
    """Times of the logged outbursts centred in ``region`` judged effective by sampling."""
    log = res.log
    mask = np.zeros(len(log), dtype=bool)
    out = log.is_outburst
    if out.any():
        mask[out] = _in_region(region, log.centers[out])
    eff = log.effective_events(n_samples, seed=seed, mask=mask)
    return np.sort(log.times[eff])


def virtual_effective_outside(res: RunResult, region: Region, n_samples: int = 64, seed: int = 0) -> np.ndarray:
    """Scan times of points in ``region`` that would add infection outside the ball enclosing the pieces.

    A point counts when its strength is at most the largest rate and its ball
    contains sampled points outside that ball, outside every piece and not
    yet infected at its scan time, whether or not the point itself fires.
    """
    spec, log, store = res.spec, res.log, res.store
    bound = spec.config.bound_radius()
    lo, hi = region.bbox()
    side = store.cube_side
    cubes = [tuple(c) for c in np.array(np.meshgrid(*[np.arange(math.floor(a / side), math.floor(b / side) + 1)
                                                    for a, b in zip(lo, hi)], indexing="ij")).reshape(spec.dim, -1).T]
    n_slabs = int(math.floor(log.horizon / store.slab_width)) + 1
    rng = np.random.default_rng(seed)
    beta_max = max(spec.betas)
    times = []
    for cube in cubes:
        for k in range(n_slabs):
            b = store.points(tuple(int(v) for v in cube), k)
            if len(b) == 0:
                continue
            keep = _in_region(region, b.positions) & (b.strengths <= beta_max) & (b.times <= log.horizon)
            for n in np.flatnonzero(keep):
                r = float(spec.transform(b.radii[n]))
                x = b.positions[n]
                if float(np.linalg.norm(x)) + r <= bound:
                    continue
                pts = Ball(x, r).sample(rng, n_samples)
                pts = pts[np.linalg.norm(pts, axis=1) > bound]
                pts = pts[log.config.piece_of(pts) < 0]
                if len(pts) == 0:
                    continue
                _, ct, _ = log.first_cover_batch(pts)
                if np.any(ct >= b.times[n]):
                    times.append(float(b.times[n]))
    return np.sort(np.array(times))


def count_effective_outbursts(spec: RunSpec, region: Region, horizons: Sequence[float], n_samples: int = 64,
                              speed: float | None = None, virtual: bool = False) -> dict:
    """Effective outbursts from ``region`` up to each horizon, plus the intensity bound.

    The bound is beta_max * vol(region) * E[r] / v with v the measured speed
    (final extent over horizon) unless given.
    """
    horizons = sorted(float(h) for h in horizons)
    res = run(dataclasses.replace(spec, t_max=horizons[-1], r_stop=None))
    eff_t = effective_in_region(res, region, n_samples, seed=spec.seed)
    counts = [int(np.searchsorted(eff_t, h, side="right")) for h in horizons]
    if speed is None:
        speed = res.stats["finalExtent"] / res.log.horizon if res.log.horizon > 0 else math.nan
    mean_r = spec.rho.mean()
    bound = max(spec.betas) * region.volume * mean_r / speed if speed and speed > 0 else math.inf
    out = {"horizons": horizons, "counts": counts, "bound": bound, "speed": speed}
    if virtual:
        vt = virtual_effective_outside(res, region, n_samples, seed=spec.seed)
        out["virtualOutside"] = [int(np.searchsorted(vt, h, side="right")) for h in horizons]
    return out


def stabilizes(counts: Sequence[int]) -> bool:
    """Doubling-stabilisation for counts at T, 2T, 4T."""
    c1, c2, c4 = counts[:3]
    return (c4 - c2) <= (c2 - c1)
