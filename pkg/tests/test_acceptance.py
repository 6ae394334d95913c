"""Acceptance criteria 1-11, each at its stated size and tolerance.

Every criterion records one PASS/FAIL line, printed in the pytest terminal
summary (and directly when this file is run as a script).  Statistical values
are compared against tests/fixtures/pilot.json, produced by tests/make_pilot.py.
"""
import dataclasses
import json
import math
import time
from pathlib import Path

import numpy as np
import pytest

import acceptance_cases as cases
from builders import (
    outburst_list,
    polyline_fixture,
    random_log,
    random_spec,
    reduced_base_spec,
    sandwich_tilde_config,
    segment_fixture,
)
from crgrow.cli import main as cli_main
from crgrow.coverage import InitialConfig, Piece
from crgrow.dynamics import RunSpec, run, run_coupled, verify_result
from crgrow.experiments import (
    count_effective_outbursts,
    coupling_report,
    reduced_spec,
    shrink_pair,
    stabilizes,
    verify_growth_along,
    wilson_interval,
)
from crgrow.experiments.coupling import leaves_ball, sandwich_runs
from crgrow.geometry import Ball, Box, Region, min_enclosing_ball, shell_offset, shell_sphere_distance
from crgrow.pointproc import Deterministic, Uniform
from oracles import brute_force_meb, linear_scan_status

RESULTS: dict[int, str] = {}
PILOT_PATH = Path(__file__).parent / "fixtures" / "pilot.json"


def record(n: int, ok: bool, detail: str, started: float):
    line = f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}  ({time.time() - started:.1f} s)"
    RESULTS[n] = line
    print(line)
    assert ok, line


@pytest.fixture(scope="module")
def pilot():
    return json.loads(PILOT_PATH.read_text())


def sample_in_ball(rng, n, d, radius):
    g = rng.standard_normal((n, d))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    return g * radius * rng.uniform(0, 1, (n, 1)) ** (1 / d)


# 1 -----------------------------------------------------------------------------------------


def test_criterion_01_scanning_rule_faithfulness():
    t0 = time.time()
    bad, dims, constructions, generalized = [], set(), set(), 0
    for seed in range(100):
        spec = random_spec(seed)
        dims.add(spec.dim)
        constructions.add(spec.construction)
        generalized += any(p.time != 0 for p in spec.config.pieces)
        issues = verify_result(run(spec))
        if issues:
            bad.append((seed, issues[:3]))
    covers = dims == {1, 2, 3} and len(constructions) == 2 and generalized > 0
    record(1, not bad and covers and time.time() - t0 < 300,
           f"100 specs, {len(bad)} with divergences, dims={sorted(dims)}, generalized={generalized}", t0)


# 2 -----------------------------------------------------------------------------------------


def test_criterion_02_coverage_oracle_equivalence():
    t0 = time.time()
    mismatches = 0
    total = 0
    for seed in range(20):
        log = random_log(100 + seed)
        events = outburst_list(log)
        doc = log.config.to_dict()
        rng = np.random.default_rng(seed)
        xs = rng.uniform(-7, 7, (5000, log.dim))
        ts = rng.choice(np.concatenate([rng.uniform(0, 10, 4000), log.times[:1000]]), 5000)
        for t in np.unique(ts):
            sel = ts == t
            code, since = log.status_batch(xs[sel], t)
            for x, c, s in zip(xs[sel], code, since):
                ec, es = linear_scan_status(doc, events, x, float(t))
                total += 1
                if int(c) != ec or (ec > 0 and s != es):
                    mismatches += 1
    record(2, mismatches == 0 and total == 100_000 and time.time() - t0 < 60,
           f"{total} queries over 20 logs, {mismatches} mismatches", t0)


# 3 -----------------------------------------------------------------------------------------


def test_criterion_03_growth_replay():
    t0 = time.time()
    fixtures = [segment_fixture()] + [polyline_fixture(s) for s in range(20)]
    reports = [verify_growth_along(**fx) for fx in fixtures]
    failed = [k for k, r in enumerate(reports) if not r.passed or r.sampled_violations]
    record(3, not failed and time.time() - t0 < 120,
           f"segment + 20 polylines, pitch delta/4, failing fixtures={failed}", t0)


# 4 -----------------------------------------------------------------------------------------


def event_time_check(z, zt, n_points, seed, n_times=20):
    """Second route: direct status queries at sampled event times of the comparison run."""
    h = min(z.log.horizon, zt.log.horizon)
    times = zt.log.times[zt.log.times <= h]
    if len(times) == 0:
        return 0
    rng = np.random.default_rng(seed)
    times = np.unique(rng.choice(times, min(n_times, len(times)), replace=False))
    pts = sample_in_ball(rng, n_points, z.spec.dim, max(zt.log.extent_at(h), 1e-9))
    bad = 0
    for t in times:
        a, _ = zt.log.status_batch(pts, t)
        b, _ = z.log.status_batch(pts, t)
        bad += int(np.sum((a > 0) & ~(b > 0)))
    return bad


def test_criterion_04_shrink_coupling():
    t0 = time.time()
    violations = second = 0
    for seed in range(100):
        spec = dataclasses.replace(random_spec(seed), seed=seed)
        z, zt = run_coupled(list(shrink_pair(spec)))
        violations += len(coupling_report([z, zt], "shrink", 1000, seed=seed))
        second += event_time_check(z, zt, 1000, seed)
    record(4, violations == 0 and second == 0 and time.time() - t0 < 300,
           f"100 seeds x 1000 points, {violations} violations (exact), {second} at sampled event times", t0)


# 5 -----------------------------------------------------------------------------------------


def sandwich_twenty_times(z, zt, t2, pts):
    hc = min(z.log.horizon, zt.log.horizon - t2)
    gamma = z.spec.config.union_region().contains(pts)
    bad = 0
    for t in np.linspace(0.0, hc, 20):
        cz, _ = z.log.status_batch(pts, t)
        ct, _ = zt.log.status_batch(pts, t)
        cs, _ = zt.log.status_batch(pts, t + t2)
        bad += int(np.sum(gamma & ~(cz > 0)))
        bad += int(np.sum((ct > 0) & ~(cz > 0)))
        bad += int(np.sum((cz > 0) & ~gamma & ~(cs > 0)))
    return bad


def test_criterion_05_sandwich_coupling():
    t0 = time.time()
    used = excluded = violations = sampled = 0
    longest = 0.0
    seed = 0
    while used < 100 and seed < 400:
        z, zt, _, t2, pts = sandwich_runs(sandwich_tilde_config(), Uniform(0.5, 1.5), 1.0, seed, 6.0)
        seed += 1
        if not leaves_ball(zt.log, z.spec.config.bound_radius()):
            excluded += 1
            continue
        used += 1
        longest = max(longest, zt.log.horizon)
        violations += len(coupling_report([z, zt], "sandwich", 1000, seed=seed - 1, t2=t2))
        if math.isfinite(t2):
            sampled += sandwich_twenty_times(z, zt, t2, pts)
    record(5, used == 100 and violations == 0 and sampled == 0 and time.time() - t0 < 600,
           f"{used} conditioned seeds ({excluded} excluded), {violations} violations, {sampled} at 20 sampled times, "
           f"longest comparison horizon {longest:g}", t0)


# 6 -----------------------------------------------------------------------------------------


def test_criterion_06_reduced_coupling():
    t0 = time.time()
    violations = 0
    designated = 0
    for seed in range(50):
        z = run(reduced_base_spec(seed))
        zspec = reduced_spec(z, 3.0)
        designated += sum(1 for p in zspec.config.pieces if not p.immune)
        zt = run(zspec, z.store)
        violations += len(coupling_report([z, zt], "reduced", 1000, seed=seed, b2_radius=3.0))
    record(6, violations == 0 and time.time() - t0 < 600,
           f"50 seeds, {designated} designated balls, {violations} violations", t0)


# 7 -----------------------------------------------------------------------------------------


def test_criterion_07_shape(pilot):
    t0 = time.time()
    table = cases.shape_table()
    frozen = pilot["shape"]
    same = all(math.isclose(a[k], b[k], rel_tol=1e-12) for a, b in zip(table, frozen)
               for k in ("muHat", "anisotropy", "speedCV"))
    base = [r for r in table if r["beta"] == 1.0]
    double = [r for r in table if r["beta"] == 2.0]
    n_aniso = sum(r["anisotropy"] <= 1.15 for r in base)
    n_cv = sum(r["speedCV"] <= 0.05 for r in base)
    mu1 = float(np.mean([r["muHat"] for r in base]))
    mu2 = float(np.mean([r["muHat"] for r in double]))
    mu_ok = abs(mu2 / mu1 - 1) <= 0.10
    ok = same and n_aniso >= 18 and n_cv >= 18 and mu_ok and time.time() - t0 < 900
    record(7, ok, f"anisotropy<=1.15 in {n_aniso}/20 (median {np.median([r['anisotropy'] for r in base]):.3f}), "
                  f"CV<=0.05 in {n_cv}/20, muHat {mu1:.4f} vs {mu2:.4f} under 2*beta, matches pilot={same}", t0)


def test_shape_anisotropy_median_nonincreasing(pilot):
    base = [r for r in pilot["shape"] if r["beta"] == 1.0]
    assert np.median([r["anisotropy"] for r in base]) <= np.median([r["anisotropyHalfTime"] for r in base])


# 8 -----------------------------------------------------------------------------------------


def stabilized_seeds(T):
    cfg = InitialConfig([Piece(Region([Ball([0.0, 0.0], 1.0)]), 1, 0.0)], 2, 1)
    box = Region([Box([-0.5, -0.5], [0.5, 0.5])])
    good = 0
    for seed in range(100):
        spec = RunSpec(cfg, Deterministic(1.0), (1.0,), seed, 4 * T)
        good += stabilizes(count_effective_outbursts(spec, box, [T, 2 * T, 4 * T])["counts"])
    return good


def test_criterion_08_effective_outburst_finiteness():
    t0 = time.time()
    # T = two outburst radii of front travel at unit rate; T = 1 is still inside the start-up transient
    good = stabilized_seeds(2.0)
    early = stabilized_seeds(1.0)
    record(8, good >= 90 and time.time() - t0 < 600,
           f"doubling-stabilization at T=2 in {good}/100 seeds (diagnostic T=1: {early}/100)", t0)


# 9 -----------------------------------------------------------------------------------------


def test_criterion_09_coexistence(pilot):
    t0 = time.time()
    small = cases.coexistence((1.0, 1.0), cases.COEXIST_N_SMALL)
    sym = cases.coexistence((1.0, 1.0), cases.COEXIST_N_LARGE)
    asym = cases.coexistence((5.0, 1.0), cases.COEXIST_N_LARGE)
    strangled = cases.strangled()
    frozen = (small == pilot["coexistSymmetricSmall"] and sym == pilot["coexistSymmetric"]
              and asym == pilot["coexistAsymmetric"] and strangled == pilot["coexistStrangled"])
    sym_ci = wilson_interval(sym["nBothReached"], sym["nRuns"])
    asym_ci = wilson_interval(asym["nBothReached"], asym["nRuns"])
    ok = (small["nBothReached"] >= 1 and strangled["nBothReached"] == 0
          and asym["proportion"] < sym["proportion"] and asym_ci[1] < sym_ci[0] and frozen
          and time.time() - t0 < 1200)
    record(9, ok, f"symmetric N=200 both={small['nBothReached']}, strangled both={strangled['nBothReached']}, "
                  f"N=400 symmetric {sym['proportion']:.3f} CI [{sym_ci[0]:.3f},{sym_ci[1]:.3f}] vs "
                  f"(5,1) {asym['proportion']:.3f} CI [{asym_ci[0]:.3f},{asym_ci[1]:.3f}], matches pilot={frozen}", t0)


def test_corridor_witness_proportion(pilot):
    out = cases.corridor_proportion()
    assert out == pilot["corridors"]
    assert out["proportion"] >= 0.5


# 10 ----------------------------------------------------------------------------------------


def test_criterion_10_determinism(tmp_path):
    t0 = time.time()
    doc = {
        "dimension": 2, "types": 2,
        "pieces": [{"shape": {"shape": "ball", "center": [-3, 0], "radius": 1}, "type": 1, "time": 0},
                   {"shape": {"shape": "ball", "center": [3, 0], "radius": 1}, "type": 2, "time": 0}],
        "rho": {"kind": "uniform", "params": {"a": 0.5, "b": 1.5}},
        "betas": [1.0, 2.0], "seed": 5, "stop": {"tmax": 4.0},
    }
    outs = []
    for name, extra in (("a", {}), ("b", {}), ("c", {"strengthCap": 7.5})):
        cfg = tmp_path / f"{name}.json"
        cfg.write_text(json.dumps({**doc, **extra}))
        out = tmp_path / f"{name}.jsonl"
        assert cli_main(["simulate", "--config", str(cfg), "--out", str(out)]) == 0
        outs.append(out.read_bytes())
    ok = outs[0] == outs[1] == outs[2] and time.time() - t0 < 60
    record(10, ok, f"repeat identical={outs[0] == outs[1]}, strengthCap 7.5 identical={outs[0] == outs[2]}", t0)


# 11 ----------------------------------------------------------------------------------------


def test_criterion_11_geometry_identities():
    t0 = time.time()
    rng = np.random.default_rng(11)
    r2 = rng.uniform(0.1, 50, 10_000)
    s = r2 * rng.uniform(0, 1, 10_000)
    r = s * rng.uniform(0, 1, 10_000)
    distance_bad = sum(shell_sphere_distance(a, b, c) < b - c - 1e-12 * a for a, b, c in zip(r2, s, r))

    d0 = rng.uniform(0.1, 5, 10_000)
    d1 = d0 / 2 * rng.uniform(0.01, 1, 10_000)
    d2 = d1 * d1 / (8 * d0) * rng.uniform(0.01, 1, 10_000)
    offset_bad = 0
    for a0, a1, a2 in zip(d0, d1, d2):
        a_next = 10.0
        a = a_next - (a0 - 2 * a2)
        b = shell_offset(a0, a1, a2, a_next)
        if not (a - 1e-12 <= b <= a + a1 / 2 + 1e-12):
            offset_bad += 1

    meb_bad = 0
    for seed in range(200):
        g = np.random.default_rng(seed)
        d = 1 + seed % 3
        pts = g.normal(size=(1 + seed % 8, d)) * g.uniform(0.5, 3)
        ball = min_enclosing_ball(pts)
        c, rad = brute_force_meb(pts)
        if not (math.isclose(ball.radius, rad, rel_tol=1e-7, abs_tol=1e-9) and np.allclose(ball.center, c, atol=1e-6)):
            meb_bad += 1
    ok = distance_bad == 0 and offset_bad == 0 and meb_bad == 0 and time.time() - t0 < 60
    record(11, ok, f"distance inequality violations {distance_bad}/10000, offset bracket violations {offset_bad}/10000, "
                   f"MEB mismatches {meb_bad}/200", t0)


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q"]))
