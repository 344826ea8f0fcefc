import json

import pytest
from hypothesis import given, strategies as st

from conftest import make_scenario
from fleetroute.scenario import (ScenarioConfig, ScenarioError, dumps_scenario, generate_scenario, load_scenario,
                                 persist_scenario, save_scenario, scenario_from_dict, scenario_to_dict, service_time)


def test_full_scale_instance(full_scenario):
    s = full_scenario
    assert len(s.nodes) == 60 and len(s.vortexes) == 20
    xmin, ymin, xmax, ymax = s.region
    assert (xmax - xmin, ymax - ymin) == (10000.0, 10000.0)
    for v in s.vortexes:
        assert xmin <= v.x <= xmax and ymin <= v.y <= ymax
        assert v.delta >= 1.0


def test_single_node_no_current():
    s = generate_scenario(ScenarioConfig(node_count=1, vortex_count=0, seed=7))
    assert len(s.nodes) == 1
    assert tuple(s.field.velocity((123.0, 456.0))) == (0.0, 0.0)


def test_same_seed_same_bytes():
    a = dumps_scenario(generate_scenario(ScenarioConfig(seed=5)))
    b = dumps_scenario(generate_scenario(ScenarioConfig(seed=5)))
    assert a == b
    assert a != dumps_scenario(generate_scenario(ScenarioConfig(seed=6)))


@pytest.mark.parametrize("kw, field", [({"node_count": 0}, "node_count"), ({"region_size": 0.0}, "region_size"),
                                       ({"region_size": -5.0}, "region_size")])
def test_config_rejects(kw, field):
    with pytest.raises(ScenarioError) as err:
        generate_scenario(ScenarioConfig(**kw))
    assert err.value.field == field


@pytest.mark.parametrize("rho, expected", [(1.0, 25.0), (0.5, 15.0), (1e-12, 5.0)])
def test_service_time(rho, expected):
    s = make_scenario([(10.0, 0.0)], [rho])
    assert service_time(s.nodes[0], s) == pytest.approx(expected, abs=1e-9)


def test_round_trip_file(tmp_path, full_scenario):
    p = save_scenario(full_scenario, tmp_path / "s.json", meta={"seed": 1})
    assert load_scenario(p) == full_scenario
    assert persist_scenario is save_scenario


def test_rho_out_of_range_rejected(full_scenario):
    d = scenario_to_dict(full_scenario)
    d["nodes"][3]["rho"] = 1.5
    with pytest.raises(ScenarioError) as err:
        scenario_from_dict(d)
    assert "nodes[3].rho" in err.value.field


def test_missing_end_named(tmp_path, full_scenario):
    d = scenario_to_dict(full_scenario)
    del d["end"]
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(d))
    with pytest.raises(ScenarioError) as err:
        load_scenario(path)
    assert err.value.field == "end"


def test_invalid_json(tmp_path):
    path = tmp_path / "x.json"
    path.write_text("{nope")
    with pytest.raises(ScenarioError):
        load_scenario(path)


def test_start_equals_end_rejected():
    with pytest.raises(ScenarioError) as err:
        make_scenario([(1.0, 1.0)], start=(0.0, 0.0), end=(0.0, 0.0))
    assert err.value.field == "end"


@given(st.integers(0, 2**63 - 1))
def test_generated_scenarios_valid_and_round_trip(seed):
    s = generate_scenario(ScenarioConfig(node_count=15, vortex_count=5, obstacle_count=3, seed=seed))
    xmin, ymin, xmax, ymax = s.region
    assert all(0 < n.rho <= 1 and xmin <= n.x <= xmax and ymin <= n.y <= ymax for n in s.nodes)
    assert all(not ob.contains(n.position) for ob in s.obstacles for n in s.nodes)
    assert scenario_from_dict(json.loads(dumps_scenario(s))) == s
