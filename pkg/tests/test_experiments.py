import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crgrow.coverage import EventLog, InitialConfig, Piece
from crgrow.dynamics import FROM_ZERO, RunSpec, run, run_coupled
from crgrow.experiments import (
    CouplingError,
    HypothesisError,
    check_escape_corridors,
    check_proppara,
    count_effective_outbursts,
    coupling_report,
    estimate_coexistence,
    estimate_shape,
    reduced_spec,
    shrink_pair,
    stabilizes,
    verify_growth_along,
    wilson_interval,
)
from crgrow.experiments.corridors import corridor_clauses, find_escape_corridors
from crgrow.experiments.coupling import build_reduced_config, leaves_ball, sandwich_runs
from crgrow.experiments.growth import INJECTED_ID_BASE, chain_points
from crgrow.geometry import Annulus, Ball, Box, Region
from crgrow.pointproc import Deterministic, Pareto, Uniform
from builders import (
    initial_log,
    polyline_fixture,
    random_spec,
    reduced_base_spec,
    sandwich_tilde_config,
    segment_fixture,
    strangled_config,
    symmetric_two_ball,
)
from oracles import exact_coverage, score_statistic


# -- Wilson interval --------------------------------------------------------------------------------


@pytest.mark.parametrize("n", [5, 12, 30])
def test_wilson_matches_score_inversion(n):
    z = 1.959963984540054
    for k in range(n + 1):
        lo, hi = wilson_interval(k, n)
        for p in np.linspace(0.01, 0.99, 99):
            if abs(score_statistic(k, n, p) - z) < 1e-6:
                continue
            assert (lo <= p <= hi) == (score_statistic(k, n, p) <= z)


@pytest.mark.parametrize("n", [20, 40, 80])
def test_wilson_coverage_near_nominal(n):
    ps = np.linspace(0.1, 0.9, 41)
    cov = [exact_coverage(wilson_interval, n, p) for p in ps]
    assert 0.93 <= float(np.mean(cov)) <= 0.97
    assert min(cov) >= 0.88


def test_wilson_edges():
    assert wilson_interval(0, 10)[0] == 0.0
    assert wilson_interval(10, 10)[1] == 1.0
    assert wilson_interval(0, 0) == (0.0, 1.0)


# -- parameter conditions -----------------------------------------------------------------------------


def test_check_proppara_examples():
    assert check_proppara(1, 5.1, 9.2, 1, 0.24, 0.007)
    assert not check_proppara(1, 5.1, 9.2, 1, 0.24, 0.024)
    assert not check_proppara(1, 5.1, 9.2, 1, 0.25, 0.005)


def test_check_proppara_rejects_nonpositive():
    with pytest.raises(ValueError):
        check_proppara(1, 5.1, 9.2, 0, 0.24, 0.007)


@pytest.mark.parametrize("dr1", [0, 0.5, 3])
@pytest.mark.parametrize("dr2", [0, 0.5, 3])
@pytest.mark.parametrize("fd2", [1.0, 0.5, 0.1])
def test_check_proppara_monotone(dr1, dr2, fd2):
    base = dict(r0=1, r1=5.1, r2=9.2, d0=1, d1=0.24, d2=0.007)
    assert check_proppara(**base)
    moved = dict(base, r1=base["r1"] + dr1, r2=base["r2"] + dr1 + dr2, d2=base["d2"] * fd2)
    assert check_proppara(**moved)


# -- growth replay ----------------------------------------------------------------------------------


def test_growth_segment_fixture():
    rep = verify_growth_along(**segment_fixture())
    assert rep.lower_inclusion_holds and rep.upper_inclusion_holds and rep.type2_frozen
    assert rep.sampled_violations == []


def test_growth_with_distant_type2_ball():
    rep = verify_growth_along(**segment_fixture(Ball([1.5, 3.0], 0.3)))
    assert rep.type2_frozen and rep.passed


def test_growth_rejects_large_delta():
    fx = segment_fixture()
    fx["delta"] = fx["d0"] / 2
    with pytest.raises(HypothesisError):
        verify_growth_along(**fx)


def test_growth_rejects_uninfected_start():
    fx = segment_fixture()
    fx["c0"] = [1.0, 0.0]
    with pytest.raises(HypothesisError):
        verify_growth_along(**fx)


def test_growth_rejects_type2_on_path():
    fx = segment_fixture(Ball([1.5, 0.5], 0.3))
    with pytest.raises(HypothesisError):
        verify_growth_along(**fx)


@pytest.mark.parametrize("seed", range(6))
def test_growth_random_polylines(seed):
    assert verify_growth_along(**polyline_fixture(seed)).passed


def test_chain_points_layout():
    chain = [np.array([float(i), 0.0]) for i in range(4)]
    pts = chain_points(chain, 2.0, 7.0, 1.0)
    assert [p.time for p in pts] == pytest.approx([2.625, 3.875, 5.125, 6.375])
    assert all(p.radius == 1.0 and p.strength == 0.0 for p in pts)
    assert [p.id for p in pts] == [INJECTED_ID_BASE + i for i in range(4)]


# -- escape corridors --------------------------------------------------------------------------------


def two_core_log(gap, delta0=0.1):
    x1, x2 = np.array([-gap / 2, 0.0]), np.array([gap / 2, 0.0])
    cfg = InitialConfig([Piece(Region([Ball(x1, delta0)]), 1, 0.0), Piece(Region([Ball(x2, delta0)]), 2, 0.0)], 2, 2)
    return initial_log(cfg), x1, x2


def test_corridors_hand_built_true():
    d0, delta0 = 1.0, 0.1
    log, x1, x2 = two_core_log(d0 + 5 * delta0)
    assert check_escape_corridors(log, 0.0, x1, x2, 1.0, delta0, d0)


def test_corridors_too_close_false():
    d0, delta0 = 1.0, 0.1
    log, x1, x2 = two_core_log(d0 + 3 * delta0)
    assert not check_escape_corridors(log, 0.0, x1, x2, 1.0, delta0, d0)


def test_corridors_swapped_rays_false():
    d0, delta0 = 1.0, 0.1
    log, x1, x2 = two_core_log(d0 + 5 * delta0)
    # type 1 core sits at x1, so pointing the rays the other way crosses the opposite type
    clauses = corridor_clauses(log, 0.0, x2, x1, 1.0, delta0, d0)
    assert not clauses["core1"] and not clauses["core2"]


def test_corridors_unbounded_false():
    d0, delta0 = 1.0, 0.1
    log, x1, x2 = two_core_log(d0 + 5 * delta0)
    assert not check_escape_corridors(log, 0.0, x1, x2, 0.5, delta0, d0)


def test_corridor_search_finds_hand_built_witness():
    log, _, _ = two_core_log(2.0, delta0=0.3)
    w = find_escape_corridors(log, [0.0], 0.1, 1.0, candidate_pitch=0.1)
    assert w is not None
    assert check_escape_corridors(log, w["t"], w["x1"], w["x2"], w["r0"], w["delta0"], w["d0"])


# -- couplings ----------------------------------------------------------------------------------


def test_identical_runs_every_relation_empty():
    spec = RunSpec(symmetric_two_ball(), Deterministic(1.0), (1.0, 1.0), 4, 3.0, construction=FROM_ZERO)
    a, b = run_coupled([spec, spec])
    assert coupling_report([a, b], "shrink", 500) == []
    assert coupling_report([a, b], "sandwich", 500, t2=0.0) == []
    assert coupling_report([a, b], "reduced", 500, b2_radius=3.0) == []


@pytest.mark.parametrize("seed", range(4))
def test_shrink_relation_holds(seed):
    spec = dataclasses.replace(random_spec(seed), seed=seed)
    assert coupling_report(run_coupled(list(shrink_pair(spec))), "shrink", 1000, seed=seed) == []


@pytest.mark.parametrize("seed", range(3))
def test_reduced_relation_holds(seed):
    z = run(reduced_base_spec(seed))
    zt = run(reduced_spec(z, 3.0), z.store)
    assert coupling_report([z, zt], "reduced", 1000, seed=seed, b2_radius=3.0) == []


def test_reduced_config_shape():
    z = run(reduced_base_spec(1))
    cfg = build_reduced_config(z, 3.0)
    immune = [p for p in cfg.pieces if p.immune]
    assert len(immune) == 1
    assert all(p.time >= 0 for p in cfg.pieces)


def test_reduced_relation_detects_corruption():
    z = run(reduced_base_spec(0))
    zt = run(reduced_spec(z, 3.0), z.store)
    bad = EventLog.from_jsonl(zt.log.to_jsonl())
    bad.insert_outburst(Ball([8.0, 0.0], 2.0), bad.horizon, 1, 987654321)
    corrupted = dataclasses.replace(zt, log=bad)
    assert coupling_report([z, corrupted], "reduced", 1000, b2_radius=3.0)


@pytest.mark.parametrize("seed", [0, 1, 27])
def test_sandwich_relation_holds(seed):
    z, zt, _, t2, _ = sandwich_runs(sandwich_tilde_config(), Uniform(0.5, 1.5), 1.0, seed, 6.0)
    assert math.isfinite(t2)
    if leaves_ball(zt.log, z.spec.config.bound_radius()):
        assert coupling_report([z, zt], "sandwich", 1000, seed=seed, t2=t2) == []


def test_coupling_report_errors():
    spec = random_spec(0)
    res = run(spec)
    with pytest.raises(CouplingError):
        coupling_report([res, res], "sideways")
    with pytest.raises(CouplingError):
        coupling_report([res], "shrink")
    with pytest.raises(CouplingError):
        coupling_report([res, res], "reduced")


# -- effective outbursts ---------------------------------------------------------------------------


def unit_spec(seed=0, t_max=4.0):
    cfg = InitialConfig([Piece(Region([Ball([0.0, 0.0], 1.0)]), 1, 0.0)], 2, 1)
    return RunSpec(cfg, Deterministic(1.0), (1.0,), seed, t_max)


def test_disjoint_region_counts_zero():
    out = count_effective_outbursts(unit_spec(), Region([Box([40.0, 40.0], [41.0, 41.0])]), [1, 2, 4])
    assert out["counts"] == [0, 0, 0]


def test_counts_nondecreasing_and_bound_finite():
    out = count_effective_outbursts(unit_spec(3), Region([Box([-0.5, -0.5], [0.5, 0.5])]), [1, 2, 4])
    c = out["counts"]
    assert c[0] <= c[1] <= c[2]
    assert math.isfinite(out["bound"]) and out["bound"] > 0


def test_virtual_zero_inside_immune_shell():
    cfg = InitialConfig([Piece(Region([Ball([0.0, 0.0], 1.0)]), 1, 0.0),
                         Piece(Region([Annulus([0.0, 0.0], 1.5, 4.0)]), 1, math.inf)], 2, 1)
    spec = RunSpec(cfg, Deterministic(1.0), (1.0,), 2, 4.0)
    out = count_effective_outbursts(spec, Region([Ball([0.0, 0.0], 1.0)]), [1, 2, 4], virtual=True)
    assert out["virtualOutside"] == [0, 0, 0]


def test_stabilizes():
    assert stabilizes([3, 5, 6])
    assert not stabilizes([3, 4, 6])


# -- shape ------------------------------------------------------------------------------------------


def test_shape_report_invariants():
    rep = estimate_shape(unit_spec(1), directions=16, horizon=6.0)
    assert rep.anisotropy >= 1.0 and rep.mu_hat > 0
    ts = [t for t, _ in rep.speed_series]
    assert ts == sorted(ts) and len(ts) == 20
    assert rep.supported


def test_shape_warns_without_exponential_moment():
    cfg = InitialConfig([Piece(Region([Ball([0.0, 0.0], 1.0)]), 1, 0.0)], 2, 1)
    spec = RunSpec(cfg, Pareto(0.5, 3.0), (1.0,), 0, 1.5)
    with pytest.warns(RuntimeWarning):
        rep = estimate_shape(spec, horizon=1.5)
    assert not rep.supported


def test_shape_needs_one_type():
    with pytest.raises(ValueError):
        estimate_shape(RunSpec(symmetric_two_ball(), Deterministic(1.0), (1.0, 1.0), 0, 2.0))


# -- coexistence ---------------------------------------------------------------------------------


def test_coexistence_report_invariants():
    spec = RunSpec(symmetric_two_ball(), Deterministic(1.0), (1.0, 1.0), 0, 40.0)
    rep = estimate_coexistence(spec, 6.0, 6)
    d = rep.to_dict()
    assert d["nRuns"] == 6
    assert 0 <= d["nBothReached"] <= min(d["perTypeReachCounts"].values()) <= 6
    lo, hi = d["wilsonCI95"]
    assert lo <= rep.proportion <= hi


def test_coexistence_workers_do_not_change_counts():
    spec = RunSpec(symmetric_two_ball(), Deterministic(1.0), (1.0, 1.0), 0, 40.0)
    assert estimate_coexistence(spec, 5.0, 4).to_dict() == estimate_coexistence(spec, 5.0, 4, workers=2).to_dict()


def test_strangled_type_never_escapes():
    spec = RunSpec(strangled_config(), Deterministic(1.0), (1.0, 1.0), 0, 60.0)
    rep = estimate_coexistence(spec, 10.0, 5)
    assert rep.n_both_reached == 0


def test_coexistence_needs_two_types():
    with pytest.raises(ValueError):
        estimate_coexistence(unit_spec(), 5.0, 2)
