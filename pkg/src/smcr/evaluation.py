"""Executing plans against ground truth, Monte-Carlo validation, benchmarks
and the MCR equivalence harness."""

from __future__ import annotations

import csv
import io
import json
import math
import time
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from itertools import product
from typing import Sequence

import networkx as nx
import numpy as np
from scipy import stats

from .geometry import DEFAULT_RESOLUTION, Placement, RobotModel, interpolate, samples_hit
from .planner import PLANNER_NAMES, InvariantViolation, NoSolution, PlanResult, max_success_exact, mcr_exact, plan
from .roadmap import (GoalSpec, Roadmap, UnsolvableInstance, build_roadmap, end_effector_poses,
                      grasp_matches, prepare_roadmap, roadmap_from_graph)
from .scenarios import get_scenario
from .scene import (BeliefScene, GroundTruthScene, Hypothesis, ObjectBelief, generate_hypotheses,
                    sample_hypothesis_indices)

CI_LEVEL = 0.99


@dataclass(frozen=True)
class ExecutionOutcome:
    collided: frozenset
    num_collided: int
    reached_target: bool
    success: bool
    path_cost: float


def path_samples(robot: RobotModel, configs: np.ndarray, resolution: float) -> np.ndarray:
    configs = np.atleast_2d(np.asarray(configs, dtype=float))
    if len(configs) == 1:
        return configs.copy()
    return np.vstack([interpolate(robot, a, b, resolution) for a, b in zip(configs, configs[1:])])


def path_cost(robot: RobotModel, configs: np.ndarray) -> float:
    from .geometry import c_distance
    return float(sum(c_distance(a, b, robot.angular) for a, b in zip(configs, configs[1:])))


def _reaches(robot: RobotModel, final_config, frame, tolerance) -> bool:
    probe = Roadmap(robot, np.atleast_2d(final_config), np.zeros((0, 2), dtype=np.int64))
    pos, head = end_effector_poses(probe)
    return bool(grasp_matches(robot, pos, head, frame, tolerance)[0])


def execute_path(configs, robot: RobotModel, gt: GroundTruthScene,
                 resolution: float = DEFAULT_RESOLUTION, tolerance=(0.1, math.radians(30.0)),
                 count_target: bool = True) -> ExecutionOutcome:
    """Sweep the path through the true world.

    Every truly present object (the target too, unless ``count_target`` is
    off) that the sweep touches counts as one collision. Success needs no
    collision and a final end effector within ``tolerance`` of the true grasp
    frame.
    """
    configs = np.atleast_2d(np.asarray(configs, dtype=float))
    if configs.size == 0:
        raise ValueError("cannot execute an empty path")
    samples = path_samples(robot, configs, resolution)
    collided = frozenset(
        o.object_id for o in gt.objects
        if (count_target or o.object_id != gt.target_id)
        and samples_hit(robot, samples, Placement(o.shape, o.pose).world())
    )
    reached = _reaches(robot, configs[-1], gt.grasp_frame(), tolerance)
    return ExecutionOutcome(collided, len(collided), reached, reached and not collided,
                            path_cost(robot, configs))


@dataclass(frozen=True)
class MonteCarloReport:
    trials: int
    successes: int
    rate: float
    ci: tuple[float, float]
    analytic: float

    @property
    def agrees(self) -> bool:
        return self.ci[0] <= self.analytic <= self.ci[1]


def clopper_pearson(successes: int, trials: int, level: float = CI_LEVEL) -> tuple[float, float]:
    a = 1.0 - level
    lo = 0.0 if successes == 0 else float(stats.beta.ppf(a / 2, successes, trials - successes + 1))
    hi = 1.0 if successes == trials else float(stats.beta.ppf(1 - a / 2, successes + 1, trials - successes))
    return lo, hi


def monte_carlo_success(plan_result: PlanResult, scene: BeliefScene, robot: RobotModel,
                        trials: int, seed, resolution: float = DEFAULT_RESOLUTION,
                        tolerance=(0.1, math.radians(30.0))) -> MonteCarloReport:
    """Empirical success rate of a plan over worlds drawn from the belief.

    Worlds are drawn jointly per trial; the path is swept once against every
    pose an object can take, and each trial's outcome is read off those
    sweeps, which is the same as executing the path in that world.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    samples = path_samples(robot, plan_result.configs, resolution)
    final = plan_result.configs[-1]
    draws = sample_hypothesis_indices(scene, trials, seed)
    ok = np.ones(trials, dtype=bool)
    for c, obj in enumerate(scene.objects):
        hit = np.array([samples_hit(robot, samples, Placement(obj.shape, h.pose).world())
                        for h in obj.hypotheses] + [False])
        idx = draws[:, c]
        ok &= ~hit[idx]  # idx == -1 (absent) maps onto the trailing False
        if obj.object_id == scene.target_id:
            frames = scene.grasp_frames()
            reach = np.array([_reaches(robot, final, f, tolerance) for f in frames] + [False])
            ok &= reach[idx]
    k = int(ok.sum())
    return MonteCarloReport(trials, k, k / trials, clopper_pearson(k, trials), plan_result.succ)


# --------------------------------------------------------------------------
# benchmark


@dataclass(frozen=True)
class BenchmarkConfig:
    scenarios: tuple[str, ...] = ("narrow-passage", "clutter", "arch")
    ks: tuple[int, ...] = (1, 4, 7)
    levels: tuple[int, ...] = (1, 4, 7)
    roadmaps_per_gt: int = 35
    n_samples: int = 1000
    seed: int = 0
    planners: tuple[str, ...] = PLANNER_NAMES
    resolution: float = DEFAULT_RESOLUTION
    existence: float = 1.0
    inject_goals: bool = True
    injected_goals_only: bool = True
    count_target: bool = True
    timing: bool = False
    audit: bool = False
    robot_radius: float | None = None
    grasp_tolerance: tuple[float, float] | None = None

    def __post_init__(self):
        for k in self.ks:
            if not 1 <= k <= 7:
                raise ValueError(f"K={k} outside [1, 7]")
        for lv in self.levels:
            if not 1 <= lv <= 7:
                raise ValueError(f"level={lv} outside [1, 7]")
        if self.roadmaps_per_gt < 1:
            raise ValueError("roadmaps_per_gt must be >= 1")
        for p in self.planners:
            if p not in PLANNER_NAMES:
                raise ValueError(f"unknown planner {p!r}")

    @classmethod
    def from_text(cls, text: str) -> "BenchmarkConfig":
        """Parse a flat ``key = value`` document (``#`` starts a comment)."""
        kw: dict = {}
        tuples = {"scenarios": str, "ks": int, "levels": int, "planners": str}
        for raw in text.splitlines():
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"malformed config line: {raw!r}")
            key, value = (s.strip() for s in line.split("=", 1))
            key = key.replace("-", "_")
            if key in tuples:
                kw[key] = tuple(tuples[key](v.strip()) for v in value.split(",") if v.strip())
            elif key in ("roadmaps_per_gt", "n_samples", "seed"):
                kw[key] = int(value)
            elif key in ("resolution", "existence", "robot_radius"):
                kw[key] = float(value)
            elif key in ("inject_goals", "injected_goals_only", "count_target", "timing", "audit"):
                if value.lower() not in ("true", "false", "1", "0", "yes", "no", "on", "off"):
                    raise ValueError(f"{key}: expected a boolean, got {value!r}")
                kw[key] = value.lower() in ("true", "1", "yes", "on")
            elif key == "grasp_tolerance":
                pos, deg = (float(v) for v in value.split(","))
                kw[key] = (pos, math.radians(deg))
            else:
                raise ValueError(f"unknown config key {key!r}")
        return cls(**kw)


@dataclass(frozen=True)
class TrialRecord:
    planner: str
    scenario: str
    K: int
    level: int
    roadmap: int
    solved: bool
    collisions: int | None
    collided: tuple[int, ...]
    success: bool
    reached: bool
    cost: float | None
    succ: float | None
    plan_time_s: float
    belief_norm_error: float
    records_audited: int


@dataclass(frozen=True)
class MetricsRow:
    planner: str
    scenario: str
    K: int
    level: int
    mean_collisions: float
    var_collisions: float
    success_rate: float
    mean_cost: float
    mean_plan_time: float | None
    trials: int
    failures: int


METRICS_HEADER = ["planner", "scenario", "K", "level", "mean_collisions", "var_collisions",
                  "success_rate", "mean_cost", "mean_plan_time_s"]


def child_seed(cfg_seed: int, *key) -> np.random.SeedSequence:
    """Counter-based child seed: stable under edits to unrelated config keys."""
    words = [zlib.crc32(str(k).encode()) for k in key]
    return np.random.SeedSequence(cfg_seed, spawn_key=tuple(words))


@lru_cache(maxsize=64)
def _skeleton(scenario: str, n: int, roadmap_idx: int, seed: int, resolution: float,
              robot_radius: float | None) -> Roadmap:
    sc = get_scenario(scenario)
    robot = sc.robot if robot_radius is None else type(sc.robot)(robot_radius)
    return build_roadmap(robot, sc.ground_truth.static_obstacles, sc.bounds, n,
                         child_seed(seed, "roadmap", scenario, roadmap_idx), start=sc.start,
                         resolution=resolution)


def audit_trace(trace: Sequence) -> int:
    """Check survivability bounds and monotonicity along every parent chain."""
    for rec in trace:
        r = rec
        while r is not None:
            if not 0.0 <= r.S <= 1.0:
                raise InvariantViolation(f"survivability {r.S} outside [0, 1]")
            if r.parent is not None and r.S > r.parent.S:
                raise InvariantViolation("survivability increased along a parent chain")
            r = r.parent
    return len(trace)


def run_cell(cfg: BenchmarkConfig, scenario: str, k: int, level: int, roadmap_idx: int) -> list[TrialRecord]:
    sc = get_scenario(scenario)
    tolerance = cfg.grasp_tolerance or sc.grasp_tolerance
    gt = sc.ground_truth
    belief = generate_hypotheses(gt, k, level, child_seed(cfg.seed, "belief", scenario, k, level, roadmap_idx),
                                 existence=cfg.existence)
    norm_err = max(o.normalization_error for o in belief.objects)
    skeleton = _skeleton(scenario, cfg.n_samples, roadmap_idx, cfg.seed, cfg.resolution, cfg.robot_radius)
    robot = skeleton.robot
    out = []
    try:
        rm = prepare_roadmap(skeleton, belief, cfg.resolution, tolerance, inject_goals=cfg.inject_goals,
                             injected_only=cfg.inject_goals and cfg.injected_goals_only)
    except UnsolvableInstance:
        rm = None
    for name in cfg.planners:
        trace = [] if cfg.audit and name.startswith("max-success") else None
        t0 = time.perf_counter()
        try:
            if rm is None:
                raise NoSolution("unsolvable instance")
            kw = {"trace": trace} if trace is not None else {}
            res = plan(name, rm, belief, **kw)
        except NoSolution:
            res = None
        dt = time.perf_counter() - t0
        audited = audit_trace(trace) if trace is not None else 0
        if res is None:
            out.append(TrialRecord(name, scenario, k, level, roadmap_idx, False, None, (), False, False,
                                   None, None, dt, norm_err, audited))
            continue
        ex = execute_path(res.configs, robot, gt, cfg.resolution, tolerance, cfg.count_target)
        out.append(TrialRecord(name, scenario, k, level, roadmap_idx, True, ex.num_collided,
                               tuple(sorted(ex.collided)), ex.success, ex.reached_target,
                               ex.path_cost, res.succ, dt, norm_err, audited))
    return out


def _run_cell_args(args):
    return run_cell(*args)


def aggregate(cfg: BenchmarkConfig, trials: Sequence[TrialRecord]) -> list[MetricsRow]:
    order = {p: i for i, p in enumerate(PLANNER_NAMES)}
    groups: dict = {}
    for t in trials:
        groups.setdefault((t.scenario, t.K, t.level, t.planner), []).append(t)
    rows = []
    for (scenario, k, level, planner), ts in groups.items():
        solved = [t for t in ts if t.solved]
        coll = np.array([t.collisions for t in solved], dtype=float)
        costs = np.array([t.cost for t in solved], dtype=float)
        rows.append(MetricsRow(
            planner, scenario, k, level,
            float(coll.mean()) if len(coll) else math.nan,
            float(coll.var()) if len(coll) else math.nan,
            sum(t.success for t in ts) / len(ts),
            float(costs.mean()) if len(costs) else math.nan,
            float(np.mean([t.plan_time_s for t in ts])) if cfg.timing else None,
            len(ts), len(ts) - len(solved),
        ))
    scen_order = {s: i for i, s in enumerate(cfg.scenarios)}
    rows.sort(key=lambda r: (scen_order.get(r.scenario, len(scen_order)), r.scenario, r.K, r.level,
                             order[r.planner]))
    return rows


@dataclass
class BenchmarkResult:
    config: BenchmarkConfig
    rows: list[MetricsRow]
    trials: list[TrialRecord] = field(repr=False)

    def metrics_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(METRICS_HEADER)
        for r in self.rows:
            w.writerow([r.planner, r.scenario, r.K, r.level, _fmt(r.mean_collisions),
                        _fmt(r.var_collisions), _fmt(r.success_rate), _fmt(r.mean_cost),
                        "" if r.mean_plan_time is None else _fmt(r.mean_plan_time)])
        return buf.getvalue()

    def raw_json(self) -> str:
        trials = []
        for t in self.trials:
            d = asdict(t)
            if not self.config.timing:
                d.pop("plan_time_s")
            trials.append(d)
        return json.dumps({"trials": trials}, indent=1, sort_keys=True)


def _fmt(x: float) -> str:
    return "nan" if x is None or math.isnan(x) else f"{x:.6f}"


def run_benchmark(cfg: BenchmarkConfig, jobs: int = 1) -> BenchmarkResult:
    cells = list(product(cfg.scenarios, cfg.ks, cfg.levels, range(cfg.roadmaps_per_gt)))
    for s in cfg.scenarios:
        get_scenario(s)
    # group cells by roadmap so a worker reuses its skeleton cache
    cells.sort(key=lambda c: (c[0], c[3], c[1], c[2]))
    args = [(cfg, *c) for c in cells]
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as pool:
            chunks = list(pool.map(_run_cell_args, args, chunksize=max(1, len(args) // (4 * jobs))))
    else:
        chunks = [_run_cell_args(a) for a in args]
    trials = [t for chunk in chunks for t in chunk]
    trials.sort(key=lambda t: (t.scenario, t.K, t.level, t.roadmap, PLANNER_NAMES.index(t.planner)))
    return BenchmarkResult(cfg, aggregate(cfg, trials), trials)


# --------------------------------------------------------------------------
# MCR -> stochastic MCR


@dataclass(frozen=True)
class MCRInstance:
    """Deterministic MCR: edges carry the ids of the obstacles they cross."""

    n_nodes: int
    edges: tuple[tuple[int, int, frozenset], ...]
    start: int
    goal: int
    target: int
    objects: tuple[int, ...]

    def to_dict(self) -> dict:
        return {"n_nodes": self.n_nodes, "start": self.start, "goal": self.goal, "target": self.target,
                "objects": list(self.objects),
                "edges": [[u, v, sorted(c)] for u, v, c in self.edges]}

    @classmethod
    def from_dict(cls, d: dict) -> "MCRInstance":
        return cls(int(d["n_nodes"]), tuple((int(u), int(v), frozenset(c)) for u, v, c in d["edges"]),
                   int(d["start"]), int(d["goal"]), int(d["target"]), tuple(d["objects"]))


def random_mcr_instance(seed, n_nodes: int = 10, n_objects: int = 5, edge_prob: float = 0.35,
                        label_prob: float = 0.25) -> MCRInstance:
    rng = np.random.default_rng(seed)
    objects = tuple(range(1, n_objects + 1))
    target = 0
    edges = []
    for u in range(n_nodes):
        for v in range(u + 1, n_nodes):
            if rng.random() < edge_prob:
                crossed = frozenset(o for o in (target, *objects) if rng.random() < label_prob / (3 if o == target else 1))
                edges.append((u, v, crossed))
    return MCRInstance(n_nodes, tuple(edges), 0, n_nodes - 1, target, objects)


def brute_force_mcr(inst: MCRInstance) -> int | None:
    """Fewest obstacles crossed by a simple start-goal path that never
    crosses the target; None when no such path exists."""
    g = nx.Graph()
    g.add_nodes_from(range(inst.n_nodes))
    for u, v, c in inst.edges:
        g.add_edge(u, v, crossed=c)
    best = None
    for path in nx.all_simple_paths(g, inst.start, inst.goal):
        crossed = frozenset().union(*(g.edges[u, v]["crossed"] for u, v in zip(path, path[1:])))
        if inst.target in crossed:
            continue
        if best is None or len(crossed) < best:
            best = len(crossed)
    return best


def stochastic_instance(inst: MCRInstance, xi: float) -> tuple[Roadmap, BeliefScene]:
    """Every obstacle becomes a single pose of probability ``xi``; the target
    gets one pose of probability ``xi`` that the goal picks."""
    from .geometry import Disc, Pose2

    origin = Pose2(0.0, 0.0)
    objs = [ObjectBelief(o, Disc(1.0), xi, (Hypothesis(origin, xi),)) for o in inst.objects]
    objs.append(ObjectBelief(inst.target, Disc(1.0), xi, (Hypothesis(origin, xi),)))
    scene = BeliefScene((), tuple(objs), inst.target, require_certain_target=False)
    edges = [(u, v, [(o, 0) for o in c]) for u, v, c in inst.edges]
    rm = roadmap_from_graph(inst.n_nodes, edges, inst.start, [GoalSpec(inst.goal, {0})])
    return rm, scene


@dataclass(frozen=True)
class ReductionReport:
    xi: float
    solvable: bool
    m: int | None
    succ: float | None
    expected_succ: float | None
    m_bruteforce: int | None
    m_mcr_exact: int | None

    @property
    def agrees(self) -> bool:
        if not self.solvable:
            return self.m_bruteforce is None and self.m_mcr_exact is None
        return (self.m == self.m_bruteforce == self.m_mcr_exact
                and abs(self.succ - self.expected_succ) <= 1e-12)


def reduction_check(inst: MCRInstance, xi: float = 0.5) -> ReductionReport:
    if not 0.0 < xi < 1.0:
        raise ValueError("xi must lie in (0, 1)")
    rm, scene = stochastic_instance(inst, xi)
    try:
        res = max_success_exact(rm, scene)
        m = sum(1 for (o, _) in res.labels if o != inst.target)
        solvable, succ, expected = True, res.succ, (1.0 - xi) ** m * xi
    except NoSolution:
        solvable, m, succ, expected = False, None, None, None

    # MCR with the target pose as an irremovable constraint
    pruned = MCRInstance(inst.n_nodes, tuple(e for e in inst.edges if inst.target not in e[2]),
                         inst.start, inst.goal, inst.target, inst.objects)
    prm, pscene = stochastic_instance(pruned, xi)
    try:
        m_mcr = len(mcr_exact(prm, pscene).labels)
    except NoSolution:
        m_mcr = None
    return ReductionReport(xi, solvable, m, succ, expected, brute_force_mcr(inst), m_mcr)
