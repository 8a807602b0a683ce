"""Command-line entry point: ``smcr <subcommand> ...``.

Exit status 0 on success, 1 when a planner finds no solution, 2 on bad input.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path

from . import io as sio
from .evaluation import (BenchmarkConfig, child_seed, execute_path, monte_carlo_success,
                         random_mcr_instance, reduction_check, run_benchmark)
from .geometry import DEFAULT_RESOLUTION
from .planner import PLANNER_NAMES, NoSolution, plan
from .roadmap import UnsolvableInstance, build_roadmap, prepare_roadmap
from .scenarios import SCENARIOS, get_scenario
from .scene import BeliefError, generate_hypotheses

log = logging.getLogger("smcr")

EXIT_OK, EXIT_NO_SOLUTION, EXIT_INPUT = 0, 1, 2


class InputError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _tolerance(args, fallback):
    if args.grasp_tolerance is None:
        return tuple(fallback)
    pos, deg = args.grasp_tolerance
    return (pos, math.radians(deg))


def _need(args, *names):
    missing = [f"--{n.replace('_', '-')}" for n in names if getattr(args, n) is None]
    if missing:
        raise InputError(f"missing required option(s): {', '.join(missing)}")


def _world(doc: dict, what: str) -> sio.World:
    w = sio.world_of(doc)
    if w is None:
        raise InputError(f"{what} has no world block (robot, bounds, start)")
    return w


def _write(doc: dict, out):
    if out is None:
        sys.stdout.write(sio.dumps(doc))
    else:
        sio.save(doc, out)
        log.info("wrote %s", out)


# --------------------------------------------------------------------------
# subcommands


def cmd_gen_scene(args) -> int:
    if (args.gt is None) == (args.scenario is None):
        raise InputError("give exactly one of --gt or --scenario")
    if args.scenario is not None:
        sc = get_scenario(args.scenario)
        gt = sc.ground_truth
        world = sio.World(sc.robot, sc.bounds, sc.start, sc.grasp_tolerance)
    else:
        doc = sio.load(args.gt)
        gt, world = sio.ground_truth_from(doc), sio.world_of(doc)
    belief = generate_hypotheses(gt, args.k, args.level, child_seed(args.seed, "belief"),
                                 existence=args.existence)
    if args.gt_out:
        sio.save(sio.ground_truth_to(gt, world), args.gt_out)
    _write(sio.belief_to(belief, world), args.out)
    return EXIT_OK


def cmd_build_roadmap(args) -> int:
    _need(args, "scene")
    doc = sio.load(args.scene)
    scene, world = sio.belief_from(doc), _world(doc, args.scene)
    skeleton = build_roadmap(world.robot, scene.static_obstacles, world.bounds, args.samples,
                             child_seed(args.seed, "roadmap"), start=world.start,
                             resolution=args.resolution)
    rm = prepare_roadmap(skeleton, scene, args.resolution, _tolerance(args, world.grasp_tolerance),
                         inject_goals=args.inject_goals, injected_only=args.injected_only)
    unreachable = rm.meta.get("unreachable_targets", [])
    if unreachable:
        log.warning("target hypotheses without a goal node: %s", unreachable)
    _write(sio.roadmap_to(rm), args.out)
    return EXIT_OK


def _summary(res) -> str:
    labels = ", ".join(f"({i},{j})" for i, j in sorted(res.labels)) or "none"
    return "\n".join([
        f"planner       {res.planner}",
        f"path          {len(res.path)} nodes, goal node {res.goal.node} picks {sorted(res.goal.targets)}",
        f"S             {res.survivability:.12g}",
        f"reach         {res.reach:.12g}",
        f"succ          {res.succ:.12g}",
        f"labels        {labels}",
        f"cost          {res.cost:.6f}",
    ])


def cmd_plan(args) -> int:
    _need(args, "roadmap", "scene", "planner")
    rm = sio.roadmap_from(sio.load(args.roadmap))
    scene = sio.belief_from(sio.load(args.scene))
    res = plan(args.planner, rm, scene)
    print(_summary(res))
    if args.out is not None:
        sio.save(sio.plan_to(res, rm.robot), args.out)
    return EXIT_OK


def _plan_and_robot(path):
    doc = sio.load(path)
    robot = sio.plan_robot(doc)
    if robot is None:
        raise InputError(f"{path} does not name its robot")
    return sio.plan_from(doc), robot


def cmd_exec(args) -> int:
    _need(args, "plan", "gt")
    res, robot = _plan_and_robot(args.plan)
    doc = sio.load(args.gt)
    gt = sio.ground_truth_from(doc)
    w = sio.world_of(doc)
    tol = _tolerance(args, w.grasp_tolerance if w else sio.DEFAULT_GRASP_TOLERANCE)
    out = execute_path(res.configs, robot, gt, args.resolution, tol, not args.ignore_target)
    print(f"collided {sorted(out.collided)}  reached {out.reached_target}  "
          f"success {out.success}  cost {out.path_cost:.6f}")
    if args.out is not None:
        sio.save(sio.outcome_to(out), args.out)
    return EXIT_OK


def cmd_validate(args) -> int:
    _need(args, "plan", "scene")
    res, robot = _plan_and_robot(args.plan)
    doc = sio.load(args.scene)
    scene = sio.belief_from(doc)
    w = sio.world_of(doc)
    tol = _tolerance(args, w.grasp_tolerance if w else sio.DEFAULT_GRASP_TOLERANCE)
    rep = monte_carlo_success(res, scene, robot, args.samples, child_seed(args.seed, "validate"),
                              args.resolution, tol)
    print(f"empirical {rep.rate:.6f} over {rep.trials} trials, 99% CI [{rep.ci[0]:.6f}, {rep.ci[1]:.6f}]; "
          f"analytic {rep.analytic:.6f} {'inside' if rep.agrees else 'OUTSIDE'}")
    if args.out is not None:
        sio.save(sio.monte_carlo_to(rep), args.out)
    return EXIT_OK


def cmd_bench(args) -> int:
    if args.config is not None:
        cfg = BenchmarkConfig.from_text(Path(args.config).read_text())
    else:
        cfg = BenchmarkConfig()
    result = run_benchmark(cfg, jobs=args.jobs)
    if args.out is None:
        sys.stdout.write(result.metrics_csv())
        return EXIT_OK
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "metrics.csv").write_text(result.metrics_csv())
    (out / "trials.json").write_text(result.raw_json())
    log.info("wrote %s and %s", out / "metrics.csv", out / "trials.json")
    return EXIT_OK


def cmd_reduce_check(args) -> int:
    if args.instance is not None:
        inst = sio.mcr_instance_from(sio.load(args.instance))
    else:
        inst = random_mcr_instance(child_seed(args.seed, "mcr-instance"), n_nodes=args.nodes)
    reports = [reduction_check(inst, xi) for xi in args.xi]
    for r in reports:
        if r.solvable:
            print(f"xi={r.xi:g}  m={r.m}  brute-force={r.m_bruteforce}  mcr-exact={r.m_mcr_exact}  "
                  f"succ={r.succ:.12g}  expected={r.expected_succ:.12g}  agrees={r.agrees}")
        else:
            print(f"xi={r.xi:g}  unsolvable  brute-force={r.m_bruteforce}  agrees={r.agrees}")
    if args.out is not None:
        sio.save(sio.reduction_to(reports), args.out)
    return EXIT_OK if all(r.agrees for r in reports) else EXIT_NO_SOLUTION


# --------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", help="output file (stdout when omitted)")
    common.add_argument("--resolution", type=float, default=DEFAULT_RESOLUTION,
                        help="collision-check step along edges")
    common.add_argument("--grasp-tolerance", nargs=2, type=float, metavar=("POS", "DEG"),
                        help="grasp tolerance; defaults to the one stored with the scene")
    common.add_argument("-v", "--verbose", action="store_true")

    p = _Parser(prog="smcr", description="Roadmap planning over discrete object-pose hypotheses.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("gen-scene", parents=[common], help="ground truth -> belief scene")
    s.add_argument("--gt", help="ground-truth file")
    s.add_argument("--scenario", choices=sorted(SCENARIOS), help="bundled scenario instead of --gt")
    s.add_argument("--k", type=int, default=4, help="hypotheses per object")
    s.add_argument("--level", type=int, default=4, help="uncertainty level 1..7")
    s.add_argument("--existence", type=float, default=1.0)
    s.add_argument("--gt-out", help="also write the ground truth used")
    s.set_defaults(func=cmd_gen_scene)

    s = sub.add_parser("build-roadmap", parents=[common], help="scene -> labeled roadmap with goals")
    s.add_argument("--scene")
    s.add_argument("--samples", type=int, default=1000, help="roadmap nodes")
    s.add_argument("--inject-goals", action=argparse.BooleanOptionalAction, default=True,
                   help="add one exact grasp configuration per target hypothesis")
    s.add_argument("--injected-only", action=argparse.BooleanOptionalAction, default=False,
                   help="only injected grasp configurations may be goals")
    s.set_defaults(func=cmd_build_roadmap)

    s = sub.add_parser("plan", parents=[common], help="roadmap + scene -> plan")
    s.add_argument("--roadmap")
    s.add_argument("--scene")
    s.add_argument("--planner", choices=PLANNER_NAMES)
    s.set_defaults(func=cmd_plan)

    s = sub.add_parser("exec", parents=[common], help="plan + ground truth -> outcome")
    s.add_argument("--plan")
    s.add_argument("--gt")
    s.add_argument("--ignore-target", action="store_true",
                   help="do not count collisions with the target itself")
    s.set_defaults(func=cmd_exec)

    s = sub.add_parser("validate", parents=[common], help="Monte-Carlo check of a plan's succ")
    s.add_argument("--plan")
    s.add_argument("--scene")
    s.add_argument("--samples", type=int, default=100_000, help="trials")
    s.set_defaults(func=cmd_validate)

    s = sub.add_parser("bench", parents=[common], help="benchmark sweep -> metric tables")
    s.add_argument("--config", help="flat key = value file mirroring BenchmarkConfig")
    s.add_argument("--jobs", type=int, default=1)
    s.set_defaults(func=cmd_bench)

    s = sub.add_parser("reduce-check", parents=[common], help="MCR reduction equivalence report")
    s.add_argument("--instance", help="MCR instance file (random instance from --seed otherwise)")
    s.add_argument("--nodes", type=int, default=10)
    s.add_argument("--xi", type=float, nargs="+", default=[0.5])
    s.set_defaults(func=cmd_reduce_check)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (NoSolution, UnsolvableInstance) as exc:
        print(f"no solution: {exc}", file=sys.stderr)
        return EXIT_NO_SOLUTION
    except (InputError, sio.FormatError, BeliefError, ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
