import json
import xml.etree.ElementTree as ET

import pytest

from conftest import make_scenario
from fleetroute.cli import main
from fleetroute.mission_sim import MissionEvent, MissionLog
from fleetroute.plan import FleetPlan, Route, load_plan
from fleetroute.render import RenderError, render_svg
from fleetroute.scenario import load_scenario, save_scenario, scenario_digest

NS = {"s": "http://www.w3.org/2000/svg"}


@pytest.fixture(scope="module")
def small_file(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    assert main(["gen", "--nodes", "10", "--vortexes", "3", "--obstacles", "1", "--region", "2500",
                 "--seed", "4", "--out", str(d / "s.json")]) == 0
    return d / "s.json"


def test_gen_full_scale(tmp_path, capsys):
    out = tmp_path / "scenario.json"
    assert main(["gen", "--nodes", "60", "--vortexes", "20", "--seed", "1", "--out", str(out)]) == 0
    s = load_scenario(out)
    assert len(s.nodes) == 60 and len(s.field.vortexes) == 20
    assert json.loads(out.read_text())["meta"]["seed"] == 1
    assert str(out) in capsys.readouterr().out


def test_gen_into_directory(tmp_path):
    assert main(["gen", "--nodes", "5", "--seed", "2", "--out", str(tmp_path) + "/"]) == 0
    assert (tmp_path / "scenario.json").is_file()


def test_missing_scenario(tmp_path, capsys):
    missing = tmp_path / "nope.json"
    assert main(["simulate", "--scenario", str(missing)]) == 1
    err = capsys.readouterr().err.strip().splitlines()
    assert len(err) == 1 and str(missing) in err[0]


def test_invalid_scenario(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{}")
    assert main(["plan", "--scenario", str(bad)]) == 1
    assert str(bad) in capsys.readouterr().err


def test_unknown_flag(capsys):
    assert main(["gen", "--bogus"]) == 2
    assert "usage" in capsys.readouterr().err


def test_bad_seed(capsys):
    assert main(["gen", "--seed", "-1"]) == 2


def test_montecarlo_reproducible(small_file, tmp_path):
    args = ["montecarlo", "--scenario", str(small_file), "--runs", "4", "--seed", "9", "--paths", "off",
            "--tmax", "5000"]
    assert main(args + ["--out", str(tmp_path / "a.csv")]) == 0
    assert main(args + ["--out", str(tmp_path / "b.csv")]) == 0
    a, b = (tmp_path / "a.csv").read_text(), (tmp_path / "b.csv").read_text()
    assert a == b
    assert a.startswith("# ") and "run,seed,M,theta,J,discards,pickups,runtime_s" in a
    assert len(a.strip().splitlines()) == 2 + 4


def test_plan_simulate_render(small_file, tmp_path):
    plan_path, log_path, svg_path = tmp_path / "p.json", tmp_path / "m.jsonl", tmp_path / "f.svg"
    assert main(["plan", "--scenario", str(small_file), "--tmax", "5000", "--out", str(plan_path)]) == 0
    assert main(["simulate", "--scenario", str(small_file), "--plan", str(plan_path), "--tmax", "5000",
                 "--paths", "off", "--out", str(log_path)]) == 0
    head = json.loads(log_path.read_text().splitlines()[0])
    assert head["kind"] == "meta" and head["tool"] == "fleetroute"
    assert main(["render", "--scenario", str(small_file), "--plan", str(plan_path), "--log", str(log_path),
                 "--out", str(svg_path)]) == 0
    root = ET.parse(svg_path).getroot()
    plan = load_plan(plan_path)
    assert len(root.findall("s:polyline[@class='route']", NS)) == len(plan.routes)


def test_plan_for_other_scenario(small_file, tmp_path, capsys):
    plan_path = tmp_path / "p.json"
    assert main(["plan", "--scenario", str(small_file), "--tmax", "5000", "--out", str(plan_path)]) == 0
    other = tmp_path / "o.json"
    assert main(["gen", "--nodes", "10", "--seed", "5", "--out", str(other)]) == 0
    assert main(["simulate", "--scenario", str(other), "--plan", str(plan_path), "--paths", "off"]) == 1
    assert "scenario" in capsys.readouterr().err


# -- rendering -------------------------------------------------------------------------------

def three_route_case():
    s = make_scenario([(100.0 * i, 80.0 * (i % 3)) for i in range(1, 10)], start=(0.0, 0.0), end=(1000.0, 0.0),
                      region=(0.0, -100.0, 1100.0, 400.0))
    routes = [Route(m, tuple(range(3 * m, 3 * m + 2)), 0.0, 0.0) for m in range(3)]
    plan = FleetPlan(M=3, routes=routes, t_max=1e4, idle_nodes=(2, 5, 8))
    return s, plan


def test_scenario_only():
    s, _ = three_route_case()
    root = ET.fromstring(render_svg(s))
    assert len(root.findall("s:circle[@class='node']", NS)) == 9
    assert len(root.findall("s:g[@class='quiver']/s:line", NS)) == 25 * 25
    assert not root.findall("s:polyline", NS)


def test_three_routes():
    s, plan = three_route_case()
    root = ET.fromstring(render_svg(s, plan))
    lines = root.findall("s:polyline[@class='route']", NS)
    assert len(lines) == 3
    assert len({ln.get("points") for ln in lines}) == 3 and len({ln.get("stroke") for ln in lines}) == 3


def test_one_discard_one_pickup():
    s, plan = three_route_case()
    events = [MissionEvent(0.0, 0, "depart", 0), MissionEvent(10.0, 0, "collect", 0),
              MissionEvent(11.0, 0, "discard", 1), MissionEvent(11.0, 1, "bid", 2),
              MissionEvent(12.0, 1, "award", 2), MissionEvent(30.0, 1, "collect", 2)]
    log = MissionLog(scenario_digest(s), 0, {}, events, {}, 0.0, 0.0)
    svg = render_svg(s, plan, log)
    root = ET.fromstring(svg)
    marks = root.findall("s:text[@class='discard']", NS)
    assert len(marks) == 1 and marks[0].text == "×" and marks[0].get("data-id") == "1"
    picks = root.findall("s:circle[@class='pickup']", NS)
    assert len(picks) == 1 and picks[0].get("data-id") == "2"


def test_mismatched_ids():
    s, plan = three_route_case()
    bad = FleetPlan(M=1, routes=[Route(0, (0, 42), 0.0, 0.0)], t_max=1e4, idle_nodes=())
    with pytest.raises(RenderError, match="42"):
        render_svg(s, bad)
    log = MissionLog("0123456789abcdef", 0, {}, [], {}, 0.0, 0.0)
    with pytest.raises(RenderError, match="0123456789abcdef"):
        render_svg(s, plan, log)


def test_render_cli_reports_mismatch(small_file, tmp_path, capsys):
    p = tmp_path / "p.json"
    p.write_text(json.dumps({"M": 1, "t_max": 100.0, "routes": [{"vehicle": 0, "nodes": [99],
                                                                "expected_time": 1.0, "expected_value": 0.1}],
                             "idle_nodes": []}))
    assert main(["render", "--scenario", str(small_file), "--plan", str(p), "--out", str(tmp_path / "x.svg")]) == 1
    assert "99" in capsys.readouterr().err
