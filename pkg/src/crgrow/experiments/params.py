"""Admissibility of the radii and distances used for fundamental balls."""


def check_proppara(r0: float, r1: float, r2: float, d0: float, d1: float, d2: float) -> bool:
    if min(r0, r1, r2, d0, d1, d2) <= 0:
        raise ValueError("all parameters must be positive")
    return r1 > r0 + 4 * d0 and r2 > r1 + 4 * d0 and d1 < d0 / 4 and d2 < min(d1 / 10, d1 * d1 / (8 * d0))
