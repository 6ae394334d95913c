"""Coupled runs on one point configuration and checks of their set inclusions.

Infected sets only grow, so an inclusion ``A_t ⊆ B_t`` for every t up to a
horizon reduces, per sample point, to comparing first infection times.  Every
check below is of that exact step-function form.
"""
from __future__ import annotations

import math
from dataclasses import replace
from typing import Sequence

import numpy as np

from ..coverage import IMMUNE, EventLog, InitialConfig, LogError, Piece
from ..dynamics import FROM_INFECTION, FROM_ZERO, SHRINK, RunResult, RunSpec, run
from ..geometry import Ball, Box, Difference, Region, dist, norm

RELATIONS = ("shrink", "sandwich", "reduced")
T2_GRID = 0.25


class CouplingError(ValueError):
    pass


# -- spec builders ----------------------------------------------------------------


def shrink_pair(spec: RunSpec) -> tuple[RunSpec, RunSpec]:
    """A run spec and its one-type comparison: all pieces merged into type 1, slowest rate, shrunk radii."""
    pieces = [Piece(p.region, 1, p.time) for p in spec.config.pieces]
    merged = InitialConfig(pieces, spec.dim, 1)
    tilde = replace(spec, config=merged, betas=(min(spec.betas),), transform=SHRINK, strength_cap=spec.cap,
                    r_stop=None, stop_when_all_reach=False, reach_radius=None)
    return spec, tilde


def enclosing_standard(config: InitialConfig, gamma_radius: float | None = None) -> InitialConfig:
    """Standard one-type configuration on the origin ball that encloses every piece."""
    r = config.bound_radius() if gamma_radius is None else gamma_radius
    return InitialConfig.standard([Region([Ball(np.zeros(config.dim), r)])], [1])


def sandwich_pair(tilde_config: InitialConfig, rho, beta: float, seed: int, t_max: float,
                  tilde_factor: float = 2.0) -> tuple[RunSpec, RunSpec]:
    """scan-from-0 specs for the standard ball run and the generalized run (the latter runs longer)."""
    if tilde_config.n_types != 1:
        raise CouplingError("the sandwich relation is stated for one type")
    std = RunSpec(enclosing_standard(tilde_config), rho, (beta,), seed, t_max, construction=FROM_ZERO)
    gen = RunSpec(tilde_config, rho, (beta,), seed, tilde_factor * t_max, construction=FROM_ZERO)
    return std, gen


def leaves_ball(log: EventLog, radius: float) -> bool:
    """True if some outburst of the log is centred outside B(0, radius)."""
    if not len(log):
        return False
    mask = log.is_outburst
    return bool(np.any(norm(log.centers[mask]) > radius))


def _inner_margin(region: Region, x: np.ndarray) -> float:
    best = 0.0
    for part in region.parts:
        if not part.contains(x[None, :])[0]:
            continue
        if isinstance(part, Ball):
            best = max(best, part.radius - float(dist(x, part.center)))
        elif isinstance(part, Box):
            best = max(best, float(min(np.min(x - part.lo), np.min(part.hi - x))))
    return best


def build_reduced_config(res: RunResult, b2_radius: float, lead: float = 1e-6) -> InitialConfig:
    """Generalized configuration that reproduces ``res`` outside B(0, b2_radius).

    Every outburst centred in B2 whose ball leaves B2 gets a small ball D around
    its centre, taken in time order and skipped if the centre already lies in an
    earlier D.  D lies inside the set its type had infected when the centre was
    infected, away from earlier other-type balls, other pieces, the boundary of B2
    and earlier D balls.
    It becomes a piece of that type activated just before the outburst fires.
    The rest of B2 is immune.
    """
    log = res.log
    cfg = log.config
    r2 = float(b2_radius)
    if cfg.bound_radius() > r2:
        raise CouplingError("the initial pieces must lie inside B2")
    outbursts = np.flatnonzero(log.is_outburst)
    centers, radii, times, types = log.centers, log.radii, log.times, log.types
    cand = [e for e in outbursts if float(norm(centers[e])) < r2 and float(norm(centers[e])) + radii[e] > r2]
    if not cand:
        raise CouplingError("no outburst centred in B2 leaves B2")
    discs: list[tuple[np.ndarray, float, int, float]] = []
    for e in cand:
        x = centers[e]
        if any(float(dist(x, c)) <= r for c, r, _, _ in discs):
            continue
        j = int(types[e])
        s = float(times[e])
        src, t_src, _ = log.first_cover_batch(x[None, :])
        piece = int(cfg.piece_of(x[None, :])[0])
        if piece >= 0:
            margin = _inner_margin(cfg.pieces[piece].region, x)
            t_x = cfg.pieces[piece].time
        else:
            k = int(src[0])
            margin = float(radii[k] - dist(x, centers[k]))
            t_x = float(t_src[0])
        terms = [margin, r2 - float(norm(x))]
        early = log.is_outburst & (times < t_x) & (types != j)
        if early.any():
            terms.append(float(np.min(dist(centers[early], x) - radii[early])))
        for q, p in enumerate(cfg.pieces):
            if q != piece:
                terms.append(float(p.region.distance(x[None, :])[0]))
        terms += [float(dist(x, c)) - r for c, r, _, _ in discs]
        rad = 0.5 * min(terms)
        if not rad > 0:
            raise LogError(f"outburst {e} leaves no room for its ball")
        discs.append((x.copy(), rad, j, s - min(lead, (s - t_x) / 2)))
    balls = [Ball(c, r) for c, r, _, _ in discs]
    pieces = [Piece(Region([b]), j, t) for b, (_, _, j, t) in zip(balls, discs)]
    pieces.append(Piece(Region([Difference(Ball(np.zeros(cfg.dim), r2), tuple(balls))]), 1, math.inf))
    return InitialConfig(pieces, cfg.dim, cfg.n_types)


def reduced_spec(res: RunResult, b2_radius: float) -> RunSpec:
    return replace(res.spec, config=build_reduced_config(res, b2_radius), r_stop=None, stop_when_all_reach=False,
                   reach_radius=None)


# -- sandwich bounds ------------------------------------------------------------


def sandwich_bounds(z: RunResult, z_tilde: RunResult, extra_points: np.ndarray | None = None,
                    n_effective_samples: int = 256, n_points: int = 2000, seed: int = 0) -> tuple[float, float]:
    """(T1, T2): last sampled-effective outburst centred in the standard ball, and the
    smallest multiple of 0.25 with Z_{T1} ⊆ Z~_{T2} ∪ Γ on the sampled points."""
    log = z.log
    gamma = z.spec.config.union_region()
    mask = np.zeros(len(log), dtype=bool)
    ob = log.is_outburst
    mask[ob] = gamma.contains(log.centers[ob]) if ob.any() else mask[ob]
    eff = log.effective_events(n_effective_samples, seed=seed, mask=mask)
    t1 = float(log.times[eff].max()) if eff.any() else 0.0
    rng = np.random.default_rng(seed)
    pts = Ball(np.zeros(log.dim), log.extent_at(t1)).sample(rng, n_points)
    if extra_points is not None:
        pts = np.vstack([pts, extra_points])
    tz, _ = log.infection_times(pts)
    sel = (tz <= t1) & ~gamma.contains(pts)
    if not sel.any():
        return t1, 0.0
    tt, _ = z_tilde.log.infection_times(pts[sel])
    worst = float(tt.max())
    if not math.isfinite(worst) or worst > z_tilde.log.horizon:
        return t1, math.inf
    return t1, math.ceil(worst / T2_GRID - 1e-12) * T2_GRID



def sandwich_runs(tilde_config: InitialConfig, rho, beta: float, seed: int, t_max: float, tilde_factor: float = 4.0,
                  max_factor: float = 32.0, sample_points: int = 1000):
    """Coupled standard and generalized runs with (T1, T2).

    The generalized run's horizon starts at ``tilde_factor * t_max`` and doubles
    until the sampled T2 is finite or ``max_factor * t_max`` is exhausted.
    Returns (z, z_tilde, T1, T2, points); T2 is inf if never reached.
    """
    std, gen = sandwich_pair(tilde_config, rho, beta, seed, t_max, tilde_factor)
    z = run(std)
    pts = _sample_points([z.log], [z.log.horizon], sample_points, seed)
    factor = tilde_factor
    while True:
        zt = run(replace(gen, t_max=factor * t_max), z.store)
        t1, t2 = sandwich_bounds(z, zt, extra_points=pts, seed=seed)
        if math.isfinite(t2) or factor * 2 > max_factor:
            return z, zt, t1, t2, pts
        factor *= 2

# -- report -----------------------------------------------------------------------


def _sample_points(logs: Sequence[EventLog], horizons: Sequence[float], n: int, seed: int) -> np.ndarray:
    r = max(log.extent_at(h) for log, h in zip(logs, horizons))
    return Ball(np.zeros(logs[0].dim), r).sample(np.random.default_rng(seed), n)


def _emit(out, relation, clause, pts, mask, ta, tb, limit=20):
    for k in np.flatnonzero(mask)[:limit]:
        out.append({"relation": relation, "clause": clause, "point": pts[k].tolist(),
                    "tLeft": float(ta[k]), "tRight": float(tb[k])})
    if mask.sum() > limit:
        out.append({"relation": relation, "clause": clause, "more": int(mask.sum() - limit)})


def coupling_report(results: Sequence[RunResult], relation: str, sample_points: int = 1000, seed: int = 0,
                    t2: float | None = None, b2_radius: float | None = None) -> list[dict]:
    """Violations of the relation between ``results[0]`` (Z) and ``results[1]`` (Z~).

    shrink: Z~_t ⊆ Z^∪_t.  sandwich: Z~_t ∪ Γ ⊆ Z_t ⊆ Z~_{t+T2} ∪ Γ for t up to
    min(H, H~ - T2).  reduced: Z~^∪ ⊆ Z^∪, Z~^1 ⊆ Z^1, Z^2 \\ B2 ⊆ Z~^2 \\ B2, and
    every fired point of Z~ fires in Z at the same time with the same type.
    """
    if relation not in RELATIONS:
        raise CouplingError(f"unknown relation {relation!r}")
    if len(results) != 2:
        raise CouplingError("a relation compares exactly two runs")
    z, zt = results
    if z.spec.dim != zt.spec.dim:
        raise CouplingError("runs differ in dimension")
    if z.store is not None and zt.store is not None and z.store is not zt.store:
        raise CouplingError("runs do not share a point configuration")
    out: list[dict] = []
    hz, ht = z.log.horizon, zt.log.horizon

    if relation == "shrink":
        if zt.spec.config.n_types != 1 and zt.spec != z.spec:
            raise CouplingError("shrink comparison run must be one-type")
        h = min(hz, ht)
        pts = _sample_points([z.log, zt.log], [h, h], sample_points, seed)
        ta, tya = zt.log.infection_times(pts)
        tb, tyb = z.log.infection_times(pts)
        bad = (tya > 0) & (ta <= h) & ~((tyb > 0) & (tb <= ta))
        _emit(out, relation, "tilde within union", pts, bad, ta, tb)
        return out

    if relation == "sandwich":
        if z.spec.construction != FROM_ZERO or zt.spec.construction != FROM_ZERO:
            raise CouplingError("sandwich relation needs scan-from-0 runs")
        pts = _sample_points([z.log], [hz], sample_points, seed)
        if t2 is None:
            _, t2 = sandwich_bounds(z, zt, extra_points=pts, seed=seed)
        if not math.isfinite(t2):
            out.append({"relation": relation, "clause": "T2", "detail": "no finite T2 within the comparison horizon"})
            return out
        hc = min(hz, ht - t2)
        gamma = z.spec.config.union_region()
        in_gamma = gamma.contains(pts)
        tz, tyz = z.log.infection_times(pts)
        tt, tyt = zt.log.infection_times(pts)
        z_inf = tyz > 0
        t_inf = tyt > 0
        bad_gamma = in_gamma & ~(z_inf & (tz <= 0.0))
        _emit(out, relation, "gamma within Z", pts, bad_gamma, np.zeros_like(tz), tz)
        bad_low = t_inf & (tt <= hc) & ~(z_inf & (tz <= tt))
        _emit(out, relation, "tilde within Z", pts, bad_low, tt, tz)
        bad_up = ~in_gamma & z_inf & (tz <= hc) & ~(t_inf & (tt <= tz + t2))
        _emit(out, relation, "Z within shifted tilde", pts, bad_up, tz, tt)
        return out

    if b2_radius is None:
        raise CouplingError("reduced relation needs b2_radius")
    h = min(hz, ht)
    pts = _sample_points([z.log, zt.log], [h, h], sample_points, seed)
    tz, tyz = z.log.infection_times(pts)
    tt, tyt = zt.log.infection_times(pts)
    live = (tyt > 0) & (tt <= h)
    bad = live & ~((tyz > 0) & (tz <= tt))
    _emit(out, relation, "tilde union within union", pts, bad, tt, tz)
    bad = live & (tyt == 1) & ~((tyz == 1) & (tz <= tt))
    _emit(out, relation, "tilde type 1 within type 1", pts, bad, tt, tz)
    outside = norm(pts) > b2_radius
    bad = outside & (tyz == 2) & (tz <= h) & ~((tyt == 2) & (tt <= tz))
    _emit(out, relation, "type 2 outside B2 within tilde", pts, bad, tz, tt)
    fired_z = {int(c): (float(t), int(ty)) for c, t, ty in zip(z.log.causes, z.log.times, z.log.types) if c >= 0}
    for c, t, ty in zip(zt.log.causes, zt.log.times, zt.log.types):
        if c < 0 or t > h:
            continue
        if fired_z.get(int(c)) != (float(t), int(ty)):
            out.append({"relation": relation, "clause": "fired path", "pointId": int(c), "time": float(t),
                        "type": int(ty), "inZ": fired_z.get(int(c))})
    return out
