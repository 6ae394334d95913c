"""Monte Carlo estimate of the probability that both types reach a radius."""
from __future__ import annotations

import dataclasses
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

from ..dynamics import RunSpec, run

Z95 = 1.959963984540054


def wilson_interval(k: int, n: int, z: float = Z95) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion k/n."""
    if n <= 0:
        return (0.0, 1.0)
    p = k / n
    den = 1.0 + z * z / n
    centre = (p + z * z / (2 * n)) / den
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / den
    lo = 0.0 if k == 0 else max(0.0, centre - half)
    hi = 1.0 if k == n else min(1.0, centre + half)
    return (lo, hi)


@dataclass
class CoexistenceReport:
    n_runs: int
    n_both_reached: int
    wilson_ci95: tuple[float, float]
    reach_radius: float
    per_type_reach_counts: dict[int, int]
    seeds: list[int] = field(default_factory=list)

    @property
    def proportion(self) -> float:
        return self.n_both_reached / self.n_runs if self.n_runs else 0.0

    def to_dict(self) -> dict:
        return {
            "nRuns": self.n_runs,
            "nBothReached": self.n_both_reached,
            "proportion": self.proportion,
            "wilsonCI95": list(self.wilson_ci95),
            "reachRadius": self.reach_radius,
            "perTypeReachCounts": {str(k): v for k, v in self.per_type_reach_counts.items()},
            "seeds": [self.seeds[0], self.seeds[-1]] if self.seeds else [],
        }


def _reached(spec: RunSpec, seed: int, r_stop: float, reach_radius: float) -> tuple[bool, bool]:
    s = dataclasses.replace(spec, seed=seed, r_stop=r_stop, reach_radius=reach_radius, stop_when_all_reach=True)
    res = run(s)
    return tuple(res.stats["reachTimes"][str(i)][-1] is not None for i in (1, 2))


def estimate_coexistence(spec: RunSpec, reach_radius: float, n_runs: int, stop_factor: float = 2.0,
                         first_seed: int | None = None, workers: int = 1) -> CoexistenceReport:
    """Run seeds first_seed, first_seed+1, ... and count runs where both types reach ``reach_radius``.

    Each run stops once every type has reached the radius, or when the whole
    infection reaches ``stop_factor * reach_radius``, or at ``spec.t_max``.
    With ``workers > 1`` seeds run in separate processes; the counts do not
    depend on the number of workers.
    """
    if spec.config.n_types != 2:
        raise ValueError("coexistence needs a 2-type spec")
    r_stop = stop_factor * reach_radius
    if reach_radius > r_stop:
        raise ValueError("reach radius must not exceed the stopping radius")
    base = spec.seed if first_seed is None else first_seed
    seeds = [base + k for k in range(n_runs)]
    if workers > 1 and n_runs > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_reached, [spec] * n_runs, seeds, [r_stop] * n_runs, [reach_radius] * n_runs))
    else:
        outcomes = [_reached(spec, seed, r_stop, reach_radius) for seed in seeds]
    per_type = {i: sum(o[i - 1] for o in outcomes) for i in (1, 2)}
    both = sum(a and b for a, b in outcomes)
    return CoexistenceReport(n_runs, both, wilson_interval(both, n_runs), reach_radius, per_type, seeds)
