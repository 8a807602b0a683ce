"""JSON documents for scenes, roadmaps, plans and reports.

Every writer has a matching reader and the pair round-trips losslessly:
floats are written with ``repr`` precision by :mod:`json`, and label sets are
stored as sorted ``[object, hypothesis]`` pairs.

A scene or ground-truth document may carry an optional ``world`` block
(robot, workspace bounds, start configuration, grasp tolerance) so that later
pipeline stages need nothing but the files.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np

from .evaluation import ExecutionOutcome, MCRInstance, MonteCarloReport, ReductionReport
from .geometry import Disc, DiscRobot, Placement, PlanarArm, Polygon, Pose2, RobotModel, Shape
from .planner import PlanResult
from .roadmap import DEFAULT_GRASP_TOLERANCE, GoalSpec, Roadmap
from .scene import BeliefScene, GroundTruthScene, Hypothesis, ObjectBelief, TrueObject


class FormatError(ValueError):
    """A document is malformed or of the wrong kind."""


@dataclass(frozen=True)
class World:
    robot: RobotModel
    bounds: tuple[tuple[float, float], ...]
    start: tuple[float, ...]
    grasp_tolerance: tuple[float, float] = DEFAULT_GRASP_TOLERANCE


# --------------------------------------------------------------------------
# primitives


def pose_to(p: Pose2) -> list[float]:
    return [p.x, p.y, p.theta]


def pose_from(d) -> Pose2:
    x, y, theta = (float(v) for v in d)
    return Pose2(x, y, theta)


def shape_to(s: Shape) -> dict:
    if isinstance(s, Disc):
        return {"type": "disc", "radius": s.radius}
    if isinstance(s, Polygon):
        return {"type": "polygon", "vertices": [list(v) for v in s.vertices]}
    raise FormatError(f"unsupported shape {type(s).__name__}")


def shape_from(d: dict) -> Shape:
    kind = d.get("type")
    if kind == "disc":
        return Disc(float(d["radius"]))
    if kind == "polygon":
        return Polygon(tuple((float(x), float(y)) for x, y in d["vertices"]))
    raise FormatError(f"unknown shape type {kind!r}")


def placement_to(p: Placement) -> dict:
    return {"shape": shape_to(p.shape), "pose": pose_to(p.pose)}


def placement_from(d: dict) -> Placement:
    return Placement(shape_from(d["shape"]), pose_from(d["pose"]))


def robot_to(r: RobotModel) -> dict:
    if isinstance(r, DiscRobot):
        return {"type": "disc", "radius": r.radius}
    if isinstance(r, PlanarArm):
        return {"type": "arm", "base": list(r.base), "link_lengths": list(r.link_lengths),
                "link_width": r.link_width}
    raise FormatError(f"unsupported robot {type(r).__name__}")


def robot_from(d: dict) -> RobotModel:
    kind = d.get("type")
    if kind == "disc":
        return DiscRobot(float(d["radius"]))
    if kind == "arm":
        return PlanarArm(tuple(float(v) for v in d["base"]),
                         tuple(float(v) for v in d["link_lengths"]), float(d["link_width"]))
    raise FormatError(f"unknown robot type {kind!r}")


def world_to(w: World) -> dict:
    return {"robot": robot_to(w.robot), "bounds": [list(b) for b in w.bounds],
            "start": list(w.start), "grasp_tolerance": list(w.grasp_tolerance)}


def world_from(d: dict) -> World:
    return World(robot_from(d["robot"]), tuple((float(a), float(b)) for a, b in d["bounds"]),
                 tuple(float(v) for v in d["start"]),
                 tuple(float(v) for v in d.get("grasp_tolerance", DEFAULT_GRASP_TOLERANCE)))


def _labels_to(labels) -> list[list[int]]:
    return [[int(i), int(j)] for i, j in sorted(labels)]


def _labels_from(d) -> frozenset:
    return frozenset((int(i), int(j)) for i, j in d)


def _expect(doc: dict, kind: str) -> dict:
    if not isinstance(doc, dict) or doc.get("kind") != kind:
        found = doc.get("kind") if isinstance(doc, dict) else type(doc).__name__
        raise FormatError(f"expected a {kind!r} document, found {found!r}")
    return doc


# --------------------------------------------------------------------------
# scenes


def belief_to(scene: BeliefScene, world: World | None = None) -> dict:
    doc: dict[str, Any] = {
        "kind": "belief-scene",
        "static_obstacles": [placement_to(p) for p in scene.static_obstacles],
        "objects": [{
            "id": o.object_id, "shape": shape_to(o.shape), "existence": o.existence,
            "hypotheses": [{"x": h.pose.x, "y": h.pose.y, "theta": h.pose.theta, "prob": h.prob}
                           for h in o.hypotheses],
        } for o in scene.objects],
        "target_id": scene.target_id,
        "target_grasp": pose_to(scene.target_grasp),
        "require_certain_target": scene.require_certain_target,
    }
    if world is not None:
        doc["world"] = world_to(world)
    return doc


def belief_from(doc: dict) -> BeliefScene:
    _expect(doc, "belief-scene")
    objects = tuple(ObjectBelief(
        int(o["id"]), shape_from(o["shape"]), float(o["existence"]),
        tuple(Hypothesis(Pose2(float(h["x"]), float(h["y"]), float(h["theta"])), float(h["prob"]))
              for h in o["hypotheses"]),
    ) for o in doc["objects"])
    return BeliefScene(tuple(placement_from(p) for p in doc["static_obstacles"]), objects,
                       int(doc["target_id"]), pose_from(doc.get("target_grasp", [0, 0, 0])),
                       bool(doc.get("require_certain_target", True)))


def ground_truth_to(gt: GroundTruthScene, world: World | None = None) -> dict:
    doc: dict[str, Any] = {
        "kind": "ground-truth",
        "static_obstacles": [placement_to(p) for p in gt.static_obstacles],
        "objects": [{"id": o.object_id, "shape": shape_to(o.shape), "pose": pose_to(o.pose)}
                    for o in gt.objects],
        "target_id": gt.target_id,
        "target_grasp": pose_to(gt.target_grasp),
    }
    if world is not None:
        doc["world"] = world_to(world)
    return doc


def ground_truth_from(doc: dict) -> GroundTruthScene:
    _expect(doc, "ground-truth")
    objects = tuple(TrueObject(int(o["id"]), shape_from(o["shape"]), pose_from(o["pose"]))
                    for o in doc["objects"])
    return GroundTruthScene(tuple(placement_from(p) for p in doc["static_obstacles"]), objects,
                            int(doc["target_id"]), pose_from(doc.get("target_grasp", [0, 0, 0])))


def world_of(doc: dict) -> World | None:
    w = doc.get("world")
    return None if w is None else world_from(w)


# --------------------------------------------------------------------------
# roadmaps and plans


def roadmap_to(rm: Roadmap) -> dict:
    lengths = rm.lengths
    return {
        "kind": "roadmap",
        "robot": robot_to(rm.robot),
        "static_obstacles": [placement_to(p) for p in rm.static_obstacles],
        "k_neighbors": rm.k_neighbors,
        "start": rm.start,
        "nodes": [[i, *map(float, q)] for i, q in enumerate(rm.nodes)],
        "labeled": rm.labels is not None,
        "edges": [[int(u), int(v), float(lengths[e]), _labels_to(rm.edge_labels(e))]
                  for e, (u, v) in enumerate(rm.edges)],
        "goals": [[g.node, sorted(g.targets)] for g in rm.goals],
        "meta": rm.meta,
    }


def roadmap_from(doc: dict) -> Roadmap:
    _expect(doc, "roadmap")
    robot = robot_from(doc["robot"])
    rows = sorted(doc["nodes"], key=lambda r: r[0])
    if [int(r[0]) for r in rows] != list(range(len(rows))):
        raise FormatError("node ids must be 0..n-1")
    nodes = np.array([r[1:] for r in rows], dtype=float).reshape(len(rows), robot.dof)
    edges = np.array([[int(e[0]), int(e[1])] for e in doc["edges"]], dtype=np.int64).reshape(-1, 2)
    labels = tuple(_labels_from(e[3]) for e in doc["edges"]) if doc.get("labeled") else None
    goals = tuple(GoalSpec(int(n), frozenset(js)) for n, js in doc.get("goals", []))
    rm = Roadmap(robot, nodes, edges, int(doc["start"]), int(doc.get("k_neighbors", 0)),
                 tuple(placement_from(p) for p in doc.get("static_obstacles", [])),
                 labels, goals, dict(doc.get("meta", {})))
    for e, row in enumerate(doc["edges"]):
        if not math.isclose(rm.lengths[e], float(row[2]), rel_tol=1e-9, abs_tol=1e-12):
            raise FormatError(f"edge {e}: stored length disagrees with its endpoints")
    return rm


def plan_to(res: PlanResult, robot: RobotModel | None = None) -> dict:
    doc = {
        "kind": "plan",
        "planner": res.planner,
        "path": list(res.path),
        "configs": [list(map(float, q)) for q in res.configs],
        "labels": _labels_to(res.labels),
        "survivability": res.survivability,
        "reach": res.reach,
        "succ": res.succ,
        "cost": res.cost,
        "goal": [res.goal.node, sorted(res.goal.targets)],
        "stats": {k: v for k, v in res.stats.items() if k != "wall_time"},
    }
    if robot is not None:
        doc["robot"] = robot_to(robot)
    return doc


def plan_from(doc: dict) -> PlanResult:
    _expect(doc, "plan")
    node, js = doc["goal"]
    configs = np.array(doc["configs"], dtype=float)
    return PlanResult(doc["planner"], [int(v) for v in doc["path"]], configs,
                      _labels_from(doc["labels"]), float(doc["survivability"]),
                      float(doc["reach"]), float(doc["succ"]), float(doc["cost"]),
                      GoalSpec(int(node), frozenset(js)), dict(doc.get("stats", {})))


def plan_robot(doc: dict) -> RobotModel | None:
    return robot_from(doc["robot"]) if "robot" in doc else None


def outcome_to(ex: ExecutionOutcome) -> dict:
    return {"kind": "outcome", "collided": sorted(ex.collided), "num_collided": ex.num_collided,
            "reached_target": ex.reached_target, "success": ex.success, "path_cost": ex.path_cost}


def outcome_from(doc: dict) -> ExecutionOutcome:
    _expect(doc, "outcome")
    return ExecutionOutcome(frozenset(int(i) for i in doc["collided"]), int(doc["num_collided"]),
                            bool(doc["reached_target"]), bool(doc["success"]),
                            float(doc["path_cost"]))


def monte_carlo_to(rep: MonteCarloReport) -> dict:
    return {"kind": "monte-carlo", "trials": rep.trials, "successes": rep.successes,
            "rate": rep.rate, "ci": list(rep.ci), "analytic": rep.analytic, "agrees": rep.agrees}


def monte_carlo_from(doc: dict) -> MonteCarloReport:
    _expect(doc, "monte-carlo")
    lo, hi = doc["ci"]
    return MonteCarloReport(int(doc["trials"]), int(doc["successes"]), float(doc["rate"]),
                            (float(lo), float(hi)), float(doc["analytic"]))


def mcr_instance_to(inst: MCRInstance) -> dict:
    return {"kind": "mcr-instance", **inst.to_dict()}


def mcr_instance_from(doc: dict) -> MCRInstance:
    _expect(doc, "mcr-instance")
    return MCRInstance.from_dict(doc)


def reduction_to(reports: list[ReductionReport]) -> dict:
    return {"kind": "reduction-report",
            "reports": [{"xi": r.xi, "solvable": r.solvable, "m": r.m, "succ": r.succ,
                         "expected_succ": r.expected_succ, "m_bruteforce": r.m_bruteforce,
                         "m_mcr_exact": r.m_mcr_exact, "agrees": r.agrees} for r in reports]}


# --------------------------------------------------------------------------
# files


def dumps(doc: dict) -> str:
    return json.dumps(doc, indent=1, sort_keys=True, allow_nan=False) + "\n"


def save(doc: dict, path) -> None:
    Path(path).write_text(dumps(doc))


def load(path) -> dict:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: not valid JSON ({exc})") from None
    if not isinstance(doc, dict):
        raise FormatError(f"{path}: top level must be an object")
    return doc
