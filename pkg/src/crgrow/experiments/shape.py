"""Directional growth speed and roundness of a one-type infection."""
from __future__ import annotations

import dataclasses
import math
import warnings
from dataclasses import dataclass

import numpy as np

from ..coverage import EventLog
from ..dynamics import RunResult, RunSpec, run
from ..geometry import Ball


def unit_directions(k: int, d: int) -> np.ndarray:
    """k fixed unit vectors: equally spaced angles in the plane, a Fibonacci lattice in 3-d."""
    if d == 1:
        return np.array([[1.0], [-1.0]])
    if d == 2:
        a = 2 * np.pi * np.arange(k) / k
        return np.stack([np.cos(a), np.sin(a)], axis=1)
    if d == 3:
        i = np.arange(k) + 0.5
        phi = np.arccos(1 - 2 * i / k)
        theta = np.pi * (1 + 5**0.5) * i
        return np.stack([np.cos(theta) * np.sin(phi), np.sin(theta) * np.sin(phi), np.cos(phi)], axis=1)
    g = np.random.default_rng(0).standard_normal((k, d))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def directional_radii(log: EventLog, directions: np.ndarray, t: float) -> np.ndarray:
    """Support function max(<c, u> + r) over event balls and activated ball pieces up to time t."""
    k = int(np.searchsorted(log.times, t, side="right"))
    out = np.full(len(directions), -np.inf)
    mask = log.is_outburst[:k]
    if mask.any():
        c = log.centers[:k][mask]
        r = log.radii[:k][mask]
        out = np.maximum(out, (c @ directions.T + r[:, None]).max(axis=0))
    for j in set(int(p) for p in log.piece_ids[:k] if p >= 0):
        for prim in log.config.pieces[j].region.parts:
            if isinstance(prim, Ball):
                out = np.maximum(out, directions @ prim.center + prim.radius)
            else:
                out = np.maximum(out, prim.bound_radius())
    return out


@dataclass
class ShapeReport:
    mu_hat: float
    anisotropy: float
    speed_series: list[tuple[float, float]]
    horizon: float
    directional_radii: list[float]
    supported: bool = True

    def speed_cv(self, from_fraction: float = 0.5) -> float:
        v = np.array([s for t, s in self.speed_series if t >= from_fraction * self.horizon])
        return float(v.std() / v.mean()) if v.size else math.nan

    def to_dict(self) -> dict:
        return {
            "muHat": self.mu_hat,
            "anisotropy": self.anisotropy,
            "speedSeries": [list(p) for p in self.speed_series],
            "speedCV": self.speed_cv(),
            "horizon": self.horizon,
            "directionalRadii": self.directional_radii,
            "supported": self.supported,
        }


def shape_from_result(res: RunResult, directions: int = 16, n_series: int = 20) -> ShapeReport:
    spec = res.spec
    log = res.log
    T = log.horizon
    U = unit_directions(directions, spec.dim)
    radii = directional_radii(log, U, T)
    mu_hat = spec.betas[0] / float(np.mean(radii / T))
    ts = T * np.arange(1, n_series + 1) / n_series
    series = [(float(t), log.extent_at(float(t)) / float(t)) for t in ts]
    return ShapeReport(mu_hat, float(radii.max() / radii.min()), series, T, radii.tolist(),
                       spec.rho.has_exponential_moment)


def estimate_shape(spec: RunSpec, directions: int = 16, horizon: float | None = None, n_series: int = 20) -> ShapeReport:
    """Run a one-type spec to ``horizon`` (or to its own stopping rule) and summarise the shape."""
    if spec.config.n_types != 1:
        raise ValueError("shape estimation needs a 1-type spec")
    if not spec.rho.has_exponential_moment:
        warnings.warn("radius law has no exponential moment; linear growth is not guaranteed", RuntimeWarning)
    if horizon is not None:
        spec = dataclasses.replace(spec, t_max=float(horizon), r_stop=None)
    return shape_from_result(run(spec), directions, n_series)
