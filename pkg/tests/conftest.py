import sys
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

from fleetroute.scenario import Node, Scenario, ScenarioConfig, generate_scenario  # noqa: E402


def make_scenario(points, rho=None, start=(0.0, 0.0), end=(1000.0, 0.0), region=(-1e4, -1e4, 1e4, 1e4), **kw):
    rho = rho or [0.5] * len(points)
    nodes = tuple(Node(i, float(x), float(y), float(r)) for i, ((x, y), r) in enumerate(zip(points, rho)))
    return Scenario(region=region, nodes=nodes, start=start, end=end, **kw)


@pytest.fixture(scope="session")
def full_scenario():
    return generate_scenario(ScenarioConfig(seed=1))


@pytest.fixture(scope="session")
def small_scenario():
    return generate_scenario(ScenarioConfig(region_size=3000.0, node_count=12, vortex_count=4, obstacle_count=2,
                                            seed=11))


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def acceptance():
    """Record one pass/fail line per acceptance criterion; printed in the terminal summary."""
    def report(number, ok, detail):
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok
    return report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split(":")[0].split()[1])):
            terminalreporter.write_line(line)
