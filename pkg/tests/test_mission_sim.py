import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import make_scenario
from fleetroute.coordination import AgentView
from fleetroute.giant_route import GAParams, build_cost_matrix, matrix_from_points
from fleetroute.mission_sim import (MissionEvent, MissionLog, MonteCarloConfig, SimOptions, check_time_violation,
                                    completion_metrics, load_log, log_to_jsonl, monte_carlo, sample_travel_time,
                                    save_log, simulate_mission)
from fleetroute.ocean_field import Perturbation
from fleetroute.plan import FleetPlan, Route
from fleetroute.route_optimizer import NoiseModel, PlannerParams, RouteOptParams, preplan_fleet

FAST = PlannerParams(ga=GAParams(population=40, generations=100, stall_generations=30, restarts=4),
                     route=RouteOptParams(population=20, generations=40, stall_generations=15,
                                          verify_samples=2048))
MATRIX = SimOptions(path_aware=False)
T_MAX = 6000.0


@pytest.fixture(scope="module")
def small_plan(small_scenario):
    return preplan_fleet(small_scenario, T_MAX, FAST, seed=1)


# -- sampler and violation check ----------------------------------------------------

def test_travel_time_zero_noise():
    assert sample_travel_time(812.5, NoiseModel.zero(), np.random.default_rng(0)) == 812.5


def test_travel_time_moments():
    x = sample_travel_time(1000.0, NoiseModel(0.1, 0.0, 60.0), np.random.default_rng(1), size=100_000)
    assert x.mean() == pytest.approx(1000.0, abs=1.0)
    assert x.std() == pytest.approx(100.0, abs=2.0)


def test_travel_time_clamp():
    noise = NoiseModel(0.8, 2.0, 60.0, 0.5)
    x = sample_travel_time(300.0, noise, np.random.default_rng(2), size=1_000_000)
    assert x.min() >= 150.0


def test_travel_time_needs_positive_nominal():
    with pytest.raises(ValueError):
        sample_travel_time(0.0, NoiseModel(), np.random.default_rng(0))


def line_matrix():
    s = make_scenario([(1000.0, 0.0), (2000.0, 0.0)], [0.5, 0.5], start=(0.0, 0.0), end=(5000.0, 0.0))
    return build_cost_matrix(s)


def test_violation_empty_route_tiny_budget():
    m = line_matrix()
    assert check_time_violation(AgentView(0, 0, 0.0, [], 100.0), m)


def test_violation_strict():
    m = line_matrix()
    need = m.route_time([0, 1])
    assert not check_time_violation(AgentView(0, 0, 250.0, [0, 1], 250.0 + need), m)
    assert check_time_violation(AgentView(0, 0, 250.0, [0, 1], 250.0 + need - 1e-6), m)


@given(st.integers(0, 10**6))
def test_violation_resum(seed):
    rng = np.random.default_rng(seed)
    k = 8
    pts = rng.uniform(0, 5000, size=(k + 2, 2))
    service = np.r_[0.0, 10 * rng.random(k), 0.0]
    m = matrix_from_points(pts, service, np.r_[0.0, rng.random(k), 0.0])
    anchor = int(rng.integers(0, k + 1))
    route = [int(n) for n in rng.permutation(k) if n + 1 != anchor][: int(rng.integers(0, k))]
    elapsed, t_max = float(rng.uniform(0, 5000)), float(rng.uniform(5000, 30000))
    seq = [anchor, *(n + 1 for n in route), k + 1]
    hand = sum(math.dist(pts[a], pts[b]) + service[b] for a, b in zip(seq, seq[1:]))
    assert check_time_violation(AgentView(0, anchor, elapsed, route, t_max), m) == (hand > t_max - elapsed)


# -- missions --------------------------------------------------------------------------

@pytest.mark.parametrize("coordination", [False, True])
def test_zero_noise_degenerates_to_plan(small_scenario, coordination):
    params = PlannerParams(ga=FAST.ga, route=FAST.route, noise=NoiseModel.zero())
    plan = preplan_fleet(small_scenario, T_MAX, params, seed=2)
    opts = SimOptions(coordination=coordination, path_aware=False, reserve_z=0.0)
    log = simulate_mission(plan, small_scenario, small_scenario.field, NoiseModel.zero(), opts, seed=5)
    assert log.count("discard") == 0 and log.count("award") == 0
    assert log.theta == pytest.approx(plan.expected_completion(small_scenario), abs=1e-12)
    m = build_cost_matrix(small_scenario)
    for r in plan.routes:
        assert log.totals[r.vehicle]["time"] == pytest.approx(m.route_time(r.nodes), rel=1e-12)


def test_unreachable_node_discarded():
    s = make_scenario([(500.0, 0.0), (9000.0, 9000.0)], [0.5, 0.9], start=(0.0, 0.0), end=(1000.0, 0.0))
    m = build_cost_matrix(s)
    plan = FleetPlan(M=1, routes=[Route(0, (0, 1), m.route_time([0, 1]), 1.4)], t_max=3000.0, idle_nodes=())
    log = simulate_mission(plan, s, noise=NoiseModel.zero(), options=MATRIX, seed=0)
    assert [e.node for e in log.events if e.kind == "discard"] == [1]
    assert log.count("strand") == 0
    assert log.totals[0]["time"] <= 3000.0
    assert log.totals[0]["collected"] == [0]


def test_stranded_when_end_unreachable():
    s = make_scenario([(500.0, 0.0)], start=(0.0, 0.0), end=(8000.0, 0.0))
    m = build_cost_matrix(s)
    plan = FleetPlan(M=1, routes=[Route(0, (0,), m.route_time([0]), 0.5)], t_max=3000.0, idle_nodes=())
    log = simulate_mission(plan, s, noise=NoiseModel.zero(), options=MATRIX, seed=0)
    assert log.count("strand") >= 1


@pytest.mark.parametrize("seed", range(4))
@pytest.mark.parametrize("path_aware", [False, True])
def test_mission_invariants(small_scenario, small_plan, seed, path_aware):
    opts = SimOptions(path_aware=path_aware)
    log = simulate_mission(small_plan, small_scenario, options=opts, seed=seed)
    collected = [e.node for e in log.events if e.kind == "collect"]
    assert len(collected) == len(set(collected))
    allowed = set(small_plan.assigned()) | {e.node for e in log.events if e.kind == "award"}
    assert set(collected) <= allowed
    assert 0.0 <= log.theta <= 1.0 and log.J <= small_scenario.total_rho
    assert log.count("strand") == 0
    assert all(t["time"] <= T_MAX for t in log.totals.values())
    last, arrived = {}, {}
    for e in log.events:
        assert e.t >= last.get(e.vehicle, 0.0)
        last[e.vehicle] = e.t
        if e.kind == "arrive":
            arrived[e.vehicle] = e.node
        if e.kind == "collect":
            assert arrived[e.vehicle] == e.node


def test_mission_deterministic(small_scenario, small_plan):
    a = simulate_mission(small_plan, small_scenario, options=MATRIX, seed=9)
    b = simulate_mission(small_plan, small_scenario, options=MATRIX, seed=9)
    assert a.events == b.events and a.theta == b.theta


# -- metrics and logs ----------------------------------------------------------------------

def log_from(events, scenario):
    return MissionLog("x", 0, {}, events, {}, 0.0, 0.0)


def test_metrics_all_and_none(small_scenario):
    every = [MissionEvent(float(i), 0, "collect", n.id) for i, n in enumerate(small_scenario.nodes)]
    assert completion_metrics(log_from(every, small_scenario), small_scenario)[0] == pytest.approx(1.0)
    assert completion_metrics(log_from([], small_scenario), small_scenario) == (0.0, 0.0)


@given(st.integers(0, 10**6))
def test_metrics_replay(seed):
    rng = np.random.default_rng(seed)
    pts = rng.uniform(0, 1000, size=(10, 2)).tolist()
    s = make_scenario(pts, rng.uniform(0.01, 1, 10).tolist())
    picked = [int(i) for i in rng.choice(10, int(rng.integers(0, 11)), replace=False)]
    events = [MissionEvent(float(k), 0, "collect", i) for k, i in enumerate(picked)]
    events.insert(0, MissionEvent(0.0, 0, "arrive", picked[0] if picked else None))
    theta, J = completion_metrics(log_from(events, s), s)
    want = sum(s.nodes[i].rho for i in picked)
    assert J == pytest.approx(want, rel=1e-12)
    assert theta == pytest.approx(want / sum(n.rho for n in s.nodes), rel=1e-12)


def test_log_roundtrip(small_scenario, small_plan, tmp_path):
    log = simulate_mission(small_plan, small_scenario, options=MATRIX, seed=4)
    path = tmp_path / "m.jsonl"
    save_log(log, path, {"tool": "test", "seed": 1})
    back = load_log(path)
    assert back.events == log.events and back.seed == log.seed and back.totals == log.totals
    assert completion_metrics(back, small_scenario) == (log.theta, log.J)
    assert log_to_jsonl(back) == log_to_jsonl(log)


def test_load_log_rejects_garbage(tmp_path):
    p = tmp_path / "bad.jsonl"
    p.write_text('{"kind": "depart"}\n')
    with pytest.raises(ValueError):
        load_log(p)


# -- Monte Carlo ---------------------------------------------------------------------------

def test_monte_carlo_one_run(small_scenario, small_plan):
    table, _, _ = monte_carlo(small_scenario, MonteCarloConfig(runs=1, t_max=T_MAX, sim=MATRIX), 3,
                              plan=small_plan)
    assert len(table.rows) == 1
    assert table.summary()["mean"] == table.rows[0]["theta"]


def test_monte_carlo_deterministic(small_scenario, small_plan):
    cfg = MonteCarloConfig(runs=5, t_max=T_MAX, sim=MATRIX)
    a, _, _ = monte_carlo(small_scenario, cfg, 11, plan=small_plan)
    b, _, _ = monte_carlo(small_scenario, cfg, 11, plan=small_plan)
    assert a.to_csv() == b.to_csv()
    assert list(a.column("run")) == list(range(5))


def test_monte_carlo_degenerate_std(small_scenario):
    cfg = MonteCarloConfig(runs=50, t_max=T_MAX, noise=NoiseModel.zero(), perturbation=Perturbation(0, 0, 0),
                           sim=MATRIX, planner=PlannerParams(ga=FAST.ga, route=FAST.route))
    table, _, _ = monte_carlo(small_scenario, cfg, 2)
    assert len(set(table.column("theta"))) == 1
    assert table.summary()["std"] == 0.0


def test_monte_carlo_needs_runs(small_scenario, small_plan):
    with pytest.raises(ValueError):
        monte_carlo(small_scenario, MonteCarloConfig(runs=0), plan=small_plan)


def test_csv_header(small_scenario, small_plan):
    table, _, _ = monte_carlo(small_scenario, MonteCarloConfig(runs=2, t_max=T_MAX, sim=MATRIX), 0,
                              plan=small_plan)
    text = table.to_csv({"seed": 0})
    lines = text.splitlines()
    assert lines[0].startswith("# ") and lines[1] == "run,seed,M,theta,J,discards,pickups,runtime_s"
