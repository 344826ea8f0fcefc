"""Command-line front end: gen, plan, simulate, montecarlo, render."""
from __future__ import annotations

import argparse
import hashlib
import json
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

from fleetroute import __version__
from fleetroute.giant_route import build_cost_matrix
from fleetroute.mission_sim import MonteCarloConfig, SimOptions, load_log, monte_carlo, save_log, simulate_mission
from fleetroute.ocean_field import realize_true_field
from fleetroute.plan import load_plan, save_plan
from fleetroute.rng import derive_seed
from fleetroute.render import RenderError, render_svg
from fleetroute.route_optimizer import NoiseModel, PlannerParams, preplan_fleet
from fleetroute.scenario import ScenarioConfig, ScenarioError, generate_scenario, load_scenario, save_scenario, \
    scenario_digest


class InputError(Exception):
    """Bad or missing input file; reported on one line with exit code 1."""


@dataclass
class RunConfig:
    subcommand: str
    scenario: str | None = None
    seed: int = 0
    t_max: float = 18000.0
    speed: float = 1.0
    noise: NoiseModel = field(default_factory=NoiseModel)
    coordination: bool = True
    out: str | None = None

    def meta(self, argv) -> dict:
        """Provenance preamble; output locations are left out so reruns produce identical files."""
        d = asdict(self)
        d.pop("out")
        blob = json.dumps(d, sort_keys=True, default=str).encode()
        return {"tool": "fleetroute", "version": __version__, "seed": self.seed,
                "config": hashlib.sha256(blob).hexdigest()[:12], "argv": _strip_out(argv)}


def _strip_out(argv) -> list[str]:
    out, skip = [], False
    for a in argv:
        if skip:
            skip = False
        elif a == "--out":
            skip = True
        elif not a.startswith("--out="):
            out.append(a)
    return out


def _seed(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in 64 bits")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=_seed, default=0)
    common.add_argument("--out", help="output file, or directory for the default file name")

    mission = argparse.ArgumentParser(add_help=False)
    mission.add_argument("--scenario", required=True)
    mission.add_argument("--tmax", type=float, default=18000.0, help="per-vehicle time budget, s")
    mission.add_argument("--speed", type=float, default=1.0, help="propulsion speed, m/s")
    mission.add_argument("--sigma", type=float, default=0.1, help="relative leg-time std")
    mission.add_argument("--maneuver-rate", type=float, default=1.0, help="manoeuvres per hour")
    mission.add_argument("--maneuver-cost", type=float, default=60.0, help="seconds per manoeuvre")

    sim = argparse.ArgumentParser(add_help=False)
    sim.add_argument("--coordination", choices=("on", "off"), default="on")
    sim.add_argument("--paths", choices=("on", "off"), default="on",
                     help="plan obstacle-aware paths per leg (off: straight-line legs)")
    sim.add_argument("--plan", help="plan JSON; planned from the scenario when omitted")

    p = argparse.ArgumentParser(prog="fleetroute", description=__doc__)
    p.add_argument("--version", action="version", version=f"fleetroute {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", parents=[common], help="generate a random scenario")
    g.add_argument("--nodes", type=int, default=60)
    g.add_argument("--vortexes", type=int, default=20)
    g.add_argument("--obstacles", type=int, default=10)
    g.add_argument("--region", type=float, default=10000.0, help="square side, m")

    sub.add_parser("plan", parents=[common, mission], help="pre-plan a fleet")
    sub.add_parser("simulate", parents=[common, mission, sim], help="fly one mission")
    mc = sub.add_parser("montecarlo", parents=[common, mission, sim], help="batch of missions to CSV")
    mc.add_argument("--runs", type=int, default=50)

    r = sub.add_parser("render", parents=[common], help="SVG of a scenario, plan and/or log")
    r.add_argument("--scenario", required=True)
    r.add_argument("--plan")
    r.add_argument("--log")
    return p


def _out_path(out: str | None, default: str) -> Path:
    if out is None:
        return Path(default)
    path = Path(out)
    if path.is_dir() or out.endswith(("/", "\\")):
        path.mkdir(parents=True, exist_ok=True)
        return path / default
    return path


def _load(loader, path: str, what: str):
    if not Path(path).is_file():
        raise InputError(f"{what} file not found: {path}")
    try:
        return loader(path)
    except (ScenarioError, ValueError, KeyError, TypeError) as exc:
        raise InputError(f"invalid {what} file {path}: {exc}") from exc


def _planner(cfg: RunConfig) -> PlannerParams:
    return PlannerParams(prop_speed=cfg.speed, noise=cfg.noise)


def _sim_options(args) -> SimOptions:
    return SimOptions(coordination=args.coordination == "on", path_aware=args.paths == "on")


def _mission_plan(args, cfg, scenario, matrix):
    if args.plan:
        plan = _load(load_plan, args.plan, "plan")
        ref = plan.notes.get("scenario")
        if ref is not None and ref != scenario_digest(scenario):
            raise InputError(f"plan {args.plan} was made for scenario {ref}, not {scenario_digest(scenario)}")
        return plan
    plan = preplan_fleet(scenario, cfg.t_max, _planner(cfg), derive_seed(cfg.seed, 0), matrix)
    plan.notes["scenario"] = scenario_digest(scenario)
    return plan


def run(args, argv) -> str:
    cfg = RunConfig(args.command, getattr(args, "scenario", None), args.seed, getattr(args, "tmax", 18000.0),
                    getattr(args, "speed", 1.0), coordination=getattr(args, "coordination", "on") == "on",
                    out=args.out)
    if hasattr(args, "sigma"):
        cfg.noise = NoiseModel(args.sigma, args.maneuver_rate, args.maneuver_cost)
    meta = cfg.meta(argv)

    if args.command == "gen":
        sc = ScenarioConfig(region_size=args.region, node_count=args.nodes, vortex_count=args.vortexes,
                            obstacle_count=args.obstacles, seed=args.seed)
        s = generate_scenario(sc)
        path = save_scenario(s, _out_path(args.out, "scenario.json"), meta)
        return f"wrote {path} ({len(s.nodes)} nodes, {len(s.field.vortexes)} vortexes)"

    scenario = _load(load_scenario, args.scenario, "scenario")

    if args.command == "render":
        plan = _load(load_plan, args.plan, "plan") if args.plan else None
        log = _load(load_log, args.log, "log") if args.log else None
        try:
            svg = render_svg(scenario, plan, log, comment=json.dumps(meta))
        except RenderError as exc:
            raise InputError(str(exc)) from exc
        path = _out_path(args.out, "figure.svg")
        path.write_text(svg + "\n")
        return f"wrote {path}"

    matrix = build_cost_matrix(scenario, cfg.speed)
    if args.command == "plan":
        plan = preplan_fleet(scenario, cfg.t_max, _planner(cfg), derive_seed(cfg.seed, 0), matrix)
        plan.notes["scenario"] = scenario_digest(scenario)
        path = save_plan(plan, _out_path(args.out, "plan.json"), meta)
        return f"wrote {path} (M={plan.M}, expected completion {plan.expected_completion(scenario):.3f})"

    plan = _mission_plan(args, cfg, scenario, matrix)
    if args.command == "simulate":
        fld = realize_true_field(scenario.field, MonteCarloConfig().perturbation, derive_seed(cfg.seed, 1))
        log = simulate_mission(plan, scenario, fld, cfg.noise, _sim_options(args), derive_seed(cfg.seed, 2), matrix,
                               prop_speed=cfg.speed)
        path = _out_path(args.out, "mission.jsonl")
        save_log(log, path, meta)
        return f"wrote {path} (theta {log.theta:.3f}, {log.count('discard')} discards, {log.count('award')} pickups)"

    if args.runs < 1:
        raise InputError("--runs must be >= 1")
    mc = MonteCarloConfig(runs=args.runs, t_max=cfg.t_max, noise=cfg.noise, sim=_sim_options(args),
                          planner=_planner(cfg))
    table, _, _ = monte_carlo(scenario, mc, cfg.seed, plan=plan)
    path = _out_path(args.out, "metrics.csv")
    path.write_text(table.to_csv(meta))
    s = table.summary()
    return f"wrote {path} (theta mean {s['mean']:.3f} std {s['std']:.3f} over {args.runs} runs)"


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        print(run(args, argv))
    except InputError as exc:
        print(f"fleetroute: error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"fleetroute: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
