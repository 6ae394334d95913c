"""Detection of escape corridors between a type-1 and a type-2 region."""
from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from ..coverage import EventLog
from ..geometry import as_point, dist, grid_points, norm


def _frame(u: np.ndarray) -> np.ndarray:
    """Orthonormal basis whose first vector is u."""
    d = u.shape[0]
    m = np.eye(d)
    m[:, 0] = u
    q, _ = np.linalg.qr(m)
    if q[:, 0] @ u < 0:
        q = -q
    return q.T


def capsule_grid(a: np.ndarray, direction: np.ndarray, length: float, radius: float, pitch: float) -> np.ndarray:
    """Grid points (pitch-spaced in a frame along the axis) of the capsule around [a, a + length*direction]."""
    basis = _frame(direction)
    d = a.shape[0]
    lo = np.array([-radius] + [-radius] * (d - 1))
    hi = np.array([length + radius] + [radius] * (d - 1))
    local = grid_points(lo, hi, pitch)
    axial = np.clip(local[:, 0], 0.0, length)
    off = local.copy()
    off[:, 0] -= axial
    keep = norm(off) <= radius
    return a + local[keep] @ basis


def corridor_clauses(log: EventLog, t: float, x1, x2, r0: float, delta0: float, d0: float,
                     pitch: float | None = None) -> dict[str, bool]:
    x1 = as_point(x1)
    x2 = as_point(x2)
    pitch = delta0 / 4 if pitch is None else pitch
    out = {"separation": float(dist(x1, x2)) > d0 + 4 * delta0}
    if not out["separation"]:
        return out
    for i, x in ((1, x1), (2, x2)):
        ball = grid_points(x - delta0, x + delta0, pitch)
        ball = np.vstack([ball[dist(ball, x) <= delta0], x[None, :]])
        code, _ = log.status_batch(ball, t)
        out[f"core{i}"] = bool(np.all(code == i))
    ext = log.extent_at(t)
    if ext <= r0:
        out["bounded"] = True
    else:
        box = grid_points(np.full(x1.shape[0], -ext), np.full(x1.shape[0], ext), pitch)
        box = box[norm(box) > r0]
        code, _ = log.status_batch(box, t)
        out["bounded"] = not np.any(code > 0)
    u = (x1 - x2) / float(dist(x1, x2))
    length1 = float(norm(x1)) + r0 + delta0
    length2 = float(norm(x2)) + r0 + delta0
    ray1 = capsule_grid(x1, u, length1, delta0, pitch)
    ray2 = capsule_grid(x2, -u, length2, delta0, pitch)
    c1, _ = log.status_batch(ray1, t)
    c2, _ = log.status_batch(ray2, t)
    out["ray1"] = not np.any(c1 == 2)
    out["ray2"] = not np.any(c2 == 1)
    return out


def check_escape_corridors(log: EventLog, t: float, x1, x2, r0: float, delta0: float, d0: float,
                           pitch: float | None = None) -> bool:
    clauses = corridor_clauses(log, t, x1, x2, r0, delta0, d0, pitch)
    return all(clauses.values()) and len(clauses) == 6


def find_escape_corridors(log: EventLog, times: Sequence[float], delta0: float, d0: float,
                          candidate_pitch: float = 0.5, top: int = 4) -> dict | None:
    """Search rational candidates (t, x1, x2) for a corridor witness.

    Candidates are grid points of pitch ``candidate_pitch`` carrying each type;
    the ``top`` points of each type lying furthest out along the axis joining
    the two types' centroids are paired up.  r0 is the infected extent at t
    rounded up to an integer.
    """
    d = log.dim
    for t in times:
        ext = log.extent_at(t)
        r0 = float(math.ceil(ext + 1e-9))
        grid = grid_points(np.full(d, -r0), np.full(d, r0), candidate_pitch)
        code, _ = log.status_batch(grid, t)
        p1 = grid[code == 1]
        p2 = grid[code == 2]
        if len(p1) == 0 or len(p2) == 0:
            continue
        axis = p1.mean(axis=0) - p2.mean(axis=0)
        if float(norm(axis)) == 0.0:
            continue
        axis = axis / float(norm(axis))
        c1 = p1[np.argsort(-(p1 @ axis))][: 4 * top]
        c2 = p2[np.argsort(p2 @ axis)][: 4 * top]

        def interior(cands, i):
            kept = []
            for x in cands:
                ball = grid_points(x - delta0, x + delta0, delta0 / 4)
                ball = ball[dist(ball, x) <= delta0]
                cd, _ = log.status_batch(ball, t)
                if np.all(cd == i):
                    kept.append(x)
                if len(kept) == top:
                    break
            return kept

        for x1 in interior(c1, 1):
            for x2 in interior(c2, 2):
                if check_escape_corridors(log, t, x1, x2, r0, delta0, d0):
                    return {"t": float(t), "x1": x1.tolist(), "x2": x2.tolist(), "r0": r0, "delta0": delta0, "d0": d0}
    return None
