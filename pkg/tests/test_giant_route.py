import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import make_scenario
from oracles import brute_force_tour, walk_time
from fleetroute.giant_route import (PROHIBITIVE, START, GAParams, build_cost_matrix, matrix_from_points,
                                    nearest_neighbor, solve_giant_route, tour_cost)

FAST = GAParams(population=60, generations=300, stall_generations=60)


def random_matrix(seed, k):
    rng = np.random.default_rng(seed)
    pts = rng.uniform(0, 3000, size=(k + 2, 2))
    service = np.concatenate([[0.0], 5 + 20 * rng.random(k), [0.0]])
    rho = np.concatenate([[0.0], rng.random(k), [0.0]])
    return matrix_from_points(pts, service, rho), pts, service


def test_entry_composition():
    s = make_scenario([(1000.0, 0.0), (2000.0, 0.0)], [0.5, 0.5], start=(0.0, 0.0), end=(3000.0, 0.0))
    m = build_cost_matrix(s)
    assert m[0, 1] == pytest.approx(1015.0)
    assert m[1, 2] == pytest.approx(1015.0)
    assert m[2, START] == PROHIBITIVE and m[m.end, 1] == PROHIBITIVE
    assert m[1, 1] == 0.0


def test_transit_symmetric_and_homogeneous(full_scenario):
    m = build_cost_matrix(full_scenario)
    assert np.array_equal(m.transit, m.transit.T)
    inner = slice(1, m.end)
    lhs = m.cost[inner, inner] - m.service[None, inner]
    rhs = (m.cost[inner, inner] - m.service[None, inner]).T
    assert np.allclose(lhs, rhs, rtol=0, atol=1e-9)  # float round-off only
    doubled = matrix_from_points(2 * m.points, m.service, m.rho)
    assert np.allclose(doubled.transit, 2 * m.transit)
    assert np.array_equal(doubled.service, m.service)


def test_three_nodes_exact():
    m, pts, service = random_matrix(0, 3)
    gr = solve_giant_route(m, FAST, seed=0)
    best, _ = brute_force_tour(pts, service)
    assert gr.total_time == pytest.approx(best, rel=1e-12)


def test_line_visited_in_order():
    xs = [700.0, 100.0, 400.0, 900.0, 250.0, 550.0]
    s = make_scenario([(x, 0.0) for x in xs], start=(0.0, 0.0), end=(1000.0, 0.0))
    gr = solve_giant_route(build_cost_matrix(s), FAST, seed=2)
    assert [xs[i] for i in gr.node_ids] == sorted(xs)


@pytest.mark.parametrize("seed", range(5))
def test_brute_force_small(seed):
    m, pts, service = random_matrix(100 + seed, 7)
    gr = solve_giant_route(m, FAST, seed=seed)
    best, _ = brute_force_tour(pts, service)
    assert gr.total_time <= best * 1.02
    assert gr.total_time == pytest.approx(walk_time(pts, service, list(gr.order)), rel=1e-9)


@given(st.integers(0, 10_000), st.integers(3, 25))
def test_valid_permutation_and_resum(seed, k):
    m, pts, service = random_matrix(seed, k)
    gr = solve_giant_route(m, GAParams(population=30, generations=40, stall_generations=20, restarts=2), seed)
    assert gr.order[0] == START and gr.order[-1] == m.end
    assert sorted(gr.order[1:-1]) == list(range(1, m.end))
    assert gr.total_time == pytest.approx(walk_time(pts, service, list(gr.order)), rel=1e-9)
    assert gr.total_time <= tour_cost(m, nearest_neighbor(m)) + 1e-6
    h = np.array(gr.history)
    assert np.all(np.diff(h) <= 1e-9)


def test_deterministic(full_scenario):
    m = build_cost_matrix(full_scenario)
    p = GAParams(population=50, generations=60, restarts=2)
    assert solve_giant_route(m, p, 4).order == solve_giant_route(m, p, 4).order


def test_needs_a_node():
    m = matrix_from_points(np.array([[0.0, 0.0], [1.0, 0.0]]), np.zeros(2), np.zeros(2))
    with pytest.raises(ValueError):
        solve_giant_route(m)


@given(st.integers(0, 2**32), st.integers(3, 400), st.integers(2, 3))
def test_distinct_matches_random_sample(seed, n, k):
    import random
    from fleetroute.giant_route import _distinct
    a, b = random.Random(seed), random.Random(seed)
    for _ in range(5):
        assert _distinct(a, n, k) == b.sample(range(n), k)
    assert a.getstate() == b.getstate()


def test_tiny_instances_stop_early():
    m, *_ = random_matrix(5, 4)
    gr = solve_giant_route(m, seed=0)
    assert len(gr.history) <= 10 + 1
