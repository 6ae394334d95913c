"""Random configurations, logs and run specs shared by several test modules."""
from __future__ import annotations

import math

import numpy as np

from crgrow.coverage import EventLog, InitialConfig, Piece
from crgrow.dynamics import FROM_INFECTION, FROM_ZERO, RunSpec
from crgrow.geometry import Annulus, Ball, Box, Region, regions_overlap
from crgrow.pointproc import Deterministic, Exponential, Mixture, Uniform


def _random_shape(rng, d, spread):
    c = rng.uniform(-spread, spread, d)
    kind = rng.integers(3) if d >= 2 else rng.integers(2)
    if kind == 0:
        return Ball(c, rng.uniform(0.3, 1.2))
    if kind == 1:
        half = rng.uniform(0.2, 0.8, d)
        return Box(c - half, c + half)
    inner = rng.uniform(0.3, 0.8)
    return Annulus(c, inner, inner + rng.uniform(0.2, 0.6))


def random_config(rng, d: int, n_types: int, generalized: bool, spread: float = 3.0) -> InitialConfig:
    pieces: list[Piece] = []
    target = int(rng.integers(1, 4))
    for _ in range(50):
        if len(pieces) == target:
            break
        region = Region([_random_shape(rng, d, spread)])
        if any(regions_overlap(region, p.region) for p in pieces):
            continue
        if not pieces:
            t = 0.0
        elif generalized:
            t = [0.0, float(rng.uniform(0.5, 3.0)), math.inf][int(rng.integers(3))]
        else:
            t = 0.0
        pieces.append(Piece(region, int(rng.integers(1, n_types + 1)), t))
    return InitialConfig(pieces, d, n_types)


def random_log(seed: int, n_events: int = 60) -> EventLog:
    rng = np.random.default_rng(seed)
    d = int(rng.integers(1, 4))
    n_types = int(rng.integers(1, 4))
    log = EventLog(random_config(rng, d, n_types, generalized=True))
    times = np.sort(rng.uniform(0, 10, n_events))
    acts = sorted((p.time, j) for j, p in enumerate(log.config.pieces) if not p.immune)
    k = 0
    for t in times:
        while k < len(acts) and acts[k][0] <= t:
            log.insert_activation(acts[k][1], acts[k][0])
            k += 1
        log.insert_outburst(Ball(rng.uniform(-6, 6, d), float(rng.exponential(1.0) + 0.05)), float(t),
                            int(rng.integers(1, n_types + 1)), int(rng.integers(0, 10**6)))
    while k < len(acts):
        log.insert_activation(acts[k][1], acts[k][0])
        k += 1
    log.horizon = 10.0
    return log


def random_spec(seed: int, t_max: float | None = None) -> RunSpec:
    rng = np.random.default_rng(seed)
    d = int(rng.integers(1, 4))
    n_types = int(rng.integers(1, 4))
    cfg = random_config(rng, d, n_types, generalized=bool(rng.integers(2)), spread=2.0)
    rho = [Deterministic(0.8), Uniform(0.3, 1.2), Exponential(0.5),
           Mixture((Deterministic(0.4), Uniform(0.8, 1.2)), (0.5, 0.5))][int(rng.integers(4))]
    betas = tuple(float(b) for b in rng.uniform(0.3, 1.8, n_types))
    construction = FROM_ZERO if rng.integers(2) else FROM_INFECTION
    if t_max is None:
        t_max = {1: 6.0, 2: 3.0, 3: 1.6}[d]
    return RunSpec(cfg, rho, betas, int(rng.integers(0, 2**31)), t_max, construction=construction)


def outburst_list(log: EventLog) -> list[tuple]:
    ob = log.is_outburst
    return [(float(t), int(ty), c.tolist(), float(r))
            for t, ty, c, r in zip(log.times[ob], log.types[ob], log.centers[ob], log.radii[ob])]


# -- growth-replay fixtures --------------------------------------------------------------------------

def initial_log(config: InitialConfig) -> EventLog:
    """Log holding only the activations at time 0."""
    log = EventLog(config)
    for j, p in enumerate(config.pieces):
        if p.time == 0:
            log.insert_activation(j, 0.0)
    log.horizon = 0.0
    return log


def segment_fixture(type2_ball: Ball | None = None):
    """Straight segment (0,0)-(3,0), d0 = 1, delta = 0.2, seed ball of radius delta at the start."""
    from crgrow.geometry import Segment

    d0, delta = 1.0, 0.2
    pieces = [Piece(Region([Ball([0.0, 0.0], delta)]), 1, 0.0)]
    n_types = 1
    if type2_ball is not None:
        pieces.append(Piece(Region([type2_ball]), 2, 0.0))
        n_types = 2
    config = InitialConfig(pieces, 2, n_types)
    B = Region([Box([-3.0, -5.0], [6.0, 5.0])])
    return dict(c=Segment(np.array([0.0, 0.0]), np.array([3.0, 0.0])), c0=[0.0, 0.0], B=B, d0=d0, delta=delta,
                T1=0.0, T2=10.0, existing_log=initial_log(config), betas=(1.0,) * n_types)


def polyline_fixture(seed: int):
    """Random 2-4 segment polyline from the origin with random d0 and delta < d0/2."""
    from crgrow.geometry import Polyline

    rng = np.random.default_rng(seed)
    n_seg = int(rng.integers(2, 5))
    verts = [np.zeros(2)]
    for _ in range(n_seg):
        a = rng.uniform(0, 2 * math.pi)
        verts.append(verts[-1] + rng.uniform(0.8, 2.5) * np.array([math.cos(a), math.sin(a)]))
    verts = np.array(verts)
    d0 = float(rng.uniform(0.8, 1.5))
    delta = float(rng.uniform(0.15, 0.45) * d0)
    margin = d0 + 2 * delta + 0.5
    B = Region([Box(verts.min(axis=0) - margin, verts.max(axis=0) + margin)])
    config = InitialConfig([Piece(Region([Ball([0.0, 0.0], delta)]), 1, 0.0)], 2, 1)
    return dict(c=Polyline(verts), c0=[0.0, 0.0], B=B, d0=d0, delta=delta, T1=0.0,
                T2=float(rng.uniform(5, 15)), existing_log=initial_log(config), betas=(1.0,))


# -- named configurations -----------------------------------------------------------------------------

def symmetric_two_ball(d: int = 2, offset: float = 3.0) -> InitialConfig:
    e = np.zeros(d)
    e[0] = offset
    return InitialConfig([Piece(Region([Ball(-e, 1.0)]), 1, 0.0), Piece(Region([Ball(e, 1.0)]), 2, 0.0)], d, 2)


def strangled_config() -> InitialConfig:
    return InitialConfig([Piece(Region([Ball([0.0, 0.0], 1.0)]), 2, 0.0),
                          Piece(Region([Annulus([0.0, 0.0], 2.0, 5.0)]), 1, 0.0)], 2, 2)


def sandwich_tilde_config() -> InitialConfig:
    """Seed ball, immune ring around it and a delayed ball beyond the ring."""
    return InitialConfig([Piece(Region([Ball([0.0, 0.0], 1.0)]), 1, 0.0),
                          Piece(Region([Annulus([0.0, 0.0], 1.4, 2.6)]), 1, math.inf),
                          Piece(Region([Ball([0.0, 4.0], 0.5)]), 1, 3.0)], 2, 1)


def reduced_base_spec(seed: int) -> RunSpec:
    config = InitialConfig([Piece(Region([Ball([-1.0, 0.0], 0.5)]), 1, 0.0),
                            Piece(Region([Ball([1.0, 0.0], 0.5)]), 2, 0.0)], 2, 2)
    return RunSpec(config, Deterministic(1.0), (1.0, 1.0), seed, 6.0)
