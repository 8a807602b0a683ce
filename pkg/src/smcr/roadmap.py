"""PRM*-style roadmaps whose edges carry pose-hypothesis labels."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Sequence

import numpy as np

from .geometry import (DEFAULT_RESOLUTION, DiscRobot, Placement, RobotModel, WorldShape,
                       check_configuration, config_delta, discs_hit, samples_hit,
                       segment_point_distance, segments_hit, wrap_angle)
from .scene import BeliefScene

Label = tuple[int, int]  # (object id, hypothesis index)
LabelSet = frozenset  # of Label

DEFAULT_GRASP_TOLERANCE = (0.1, math.radians(30.0))


class RoadmapError(RuntimeError):
    pass


class UnsolvableInstance(RuntimeError):
    """No roadmap node can pick any target hypothesis."""


def prm_star_k(n: int, d: int) -> int:
    """Neighbor count ceil(e * (1 + 1/d) * ln n) for PRM* connectivity."""
    if n < 2 or d < 1:
        raise ValueError("need n >= 2 and d >= 1")
    return math.ceil(math.e * (1.0 + 1.0 / d) * math.log(n))


@dataclass(frozen=True)
class GoalSpec:
    node: int
    targets: frozenset  # target hypothesis indices this node can pick

    def __post_init__(self):
        object.__setattr__(self, "targets", frozenset(int(j) for j in self.targets))
        if not self.targets:
            raise ValueError("a goal must pick at least one target hypothesis")


@dataclass(frozen=True, eq=False)
class Roadmap:
    robot: RobotModel
    nodes: np.ndarray  # (n, dof)
    edges: np.ndarray  # (m, 2) int, u < v, canonical sorted order
    start: int = 0
    k_neighbors: int = 0
    static_obstacles: tuple[Placement, ...] = ()
    labels: tuple[LabelSet, ...] | None = None
    goals: tuple[GoalSpec, ...] = ()
    meta: dict = field(default_factory=dict)

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @cached_property
    def lengths(self) -> np.ndarray:
        if not len(self.edges):
            return np.zeros(0)
        d = config_delta(self.nodes[self.edges[:, 0]], self.nodes[self.edges[:, 1]], self.robot.angular)
        return np.linalg.norm(d, axis=1)

    @cached_property
    def adjacency(self) -> list[list[tuple[int, int]]]:
        """Per node: (neighbor, edge index), neighbors ascending."""
        adj: list[list[tuple[int, int]]] = [[] for _ in range(self.n_nodes)]
        for e, (u, v) in enumerate(self.edges.tolist()):
            adj[u].append((v, e))
            adj[v].append((u, e))
        for a in adj:
            a.sort()
        return adj

    @cached_property
    def edge_index(self) -> dict[tuple[int, int], int]:
        return {(u, v): e for e, (u, v) in enumerate(self.edges.tolist())}

    def edge_between(self, u: int, v: int) -> int:
        return self.edge_index[(min(u, v), max(u, v))]

    def edge_labels(self, e: int) -> LabelSet:
        return self.labels[e] if self.labels is not None else frozenset()

    def goal_map(self) -> dict[int, GoalSpec]:
        return {g.node: g for g in self.goals}

    def path_configs(self, path: Sequence[int]) -> np.ndarray:
        return self.nodes[np.asarray(path, dtype=int)]


# --------------------------------------------------------------------------
# construction


def _static_free(robot: RobotModel, configs: np.ndarray, static: Sequence[WorldShape]) -> np.ndarray:
    ok = np.ones(len(configs), dtype=bool)
    if not static:
        return ok
    if isinstance(robot, DiscRobot):
        for obs in static:
            ok &= ~discs_hit(configs, robot.radius, obs)
        return ok
    for i, q in enumerate(configs):
        ok[i] = not any(samples_hit(robot, q[None, :], obs) for obs in static)
    return ok


def _sample_free(robot, bounds: np.ndarray, count: int, static, rng, max_attempts: int) -> np.ndarray:
    out = []
    attempts = 0
    while sum(len(c) for c in out) < count:
        if attempts >= max_attempts:
            got = sum(len(c) for c in out)
            raise RoadmapError(f"sampled only {got} of {count} collision-free configurations "
                               f"in {attempts} attempts")
        batch = min(max(2 * count, 64), max_attempts - attempts)
        q = rng.uniform(bounds[:, 0], bounds[:, 1], size=(batch, robot.dof))
        if robot.angular.any():
            q = np.where(robot.angular, wrap_angle(q), q)
        attempts += batch
        out.append(q[_static_free(robot, q, static)])
    return np.vstack(out)[:count]


def _nearest(nodes: np.ndarray, queries: np.ndarray, k: int, angular, exclude_self: bool,
             chunk: int = 256) -> np.ndarray:
    """Indices of the k nearest nodes for each query (ascending distance)."""
    out = np.empty((len(queries), k), dtype=np.int64)
    for s in range(0, len(queries), chunk):
        q = queries[s:s + chunk]
        d = np.linalg.norm(config_delta(q[:, None, :], nodes[None, :, :], angular), axis=2)
        if exclude_self:
            d[np.arange(len(q)), np.arange(s, s + len(q))] = np.inf
        part = np.argpartition(d, k - 1, axis=1)[:, :k]
        rows = np.arange(len(q))[:, None]
        order = np.lexsort((part, d[rows, part]), axis=1)
        out[s:s + chunk] = part[rows, order]
    return out


def _edge_free(robot, nodes, pairs: np.ndarray, static, resolution) -> np.ndarray:
    ok = np.ones(len(pairs), dtype=bool)
    for obs in static:
        cand = _candidates(robot, nodes, pairs, obs)
        cand = cand[ok[cand]]
        u, v = pairs[cand, 0], pairs[cand, 1]
        ok[cand[segments_hit(robot, nodes[u], nodes[v], obs, resolution)]] = False
    return ok


def _candidates(robot: RobotModel, nodes: np.ndarray, pairs: np.ndarray, obstacle: WorldShape) -> np.ndarray:
    """Edges whose sweep could possibly reach the obstacle (cheap filter)."""
    if not len(pairs):
        return np.zeros(0, dtype=np.int64)
    center, radius = obstacle.bounding
    if isinstance(robot, DiscRobot):
        d = segment_point_distance(nodes[pairs[:, 0]], nodes[pairs[:, 1]], center[None, :])
        return np.flatnonzero(d <= robot.radius + radius + 1e-9)
    if np.hypot(*(center - np.array(robot.base))) > robot.reach + radius:
        return np.zeros(0, dtype=np.int64)
    return np.arange(len(pairs))


def _canonical_edges(pairs: np.ndarray) -> np.ndarray:
    if not len(pairs):
        return np.zeros((0, 2), dtype=np.int64)
    pairs = np.sort(pairs, axis=1)
    return np.unique(pairs, axis=0)


def build_roadmap(robot: RobotModel, static_obstacles: Sequence[Placement], bounds, n: int, seed,
                  start=None, resolution: float = DEFAULT_RESOLUTION,
                  max_attempts: int | None = None) -> Roadmap:
    """Sample ``n`` statically collision-free configurations (the start, when
    given, is node 0 and counts towards ``n``) and connect each to its
    PRM* number of nearest neighbors. Edges whose sweep touches a static
    obstacle are dropped."""
    if n < 2:
        raise ValueError("a roadmap needs n >= 2")
    bounds = np.asarray(bounds, dtype=float).reshape(robot.dof, 2)
    rng = np.random.default_rng(seed)
    static = [p.world() for p in static_obstacles]
    max_attempts = max_attempts or 100 * n
    nodes = []
    if start is not None:
        s = check_configuration(robot, start)
        if not _static_free(robot, s[None, :], static)[0]:
            raise RoadmapError("start configuration collides with a static obstacle")
        nodes.append(s[None, :])
    nodes.append(_sample_free(robot, bounds, n - len(nodes), static, rng, max_attempts))
    nodes = np.vstack(nodes)

    k = prm_star_k(n, robot.dof)
    kk = min(k, len(nodes) - 1)
    nbrs = _nearest(nodes, nodes, kk, robot.angular, exclude_self=True)
    pairs = _canonical_edges(np.stack([np.repeat(np.arange(len(nodes)), kk), nbrs.ravel()], axis=1))
    pairs = pairs[_edge_free(robot, nodes, pairs, static, resolution)]
    return Roadmap(robot, nodes, pairs, start=0, k_neighbors=k,
                   static_obstacles=tuple(static_obstacles),
                   meta={"n_requested": n, "resolution": resolution})


def add_nodes(rm: Roadmap, configs, resolution: float | None = None) -> tuple[Roadmap, list[int]]:
    """Append configurations, each wired to its k nearest existing nodes.

    Configurations colliding with a static obstacle are skipped. Returns the
    new roadmap and the indices of the added nodes.
    """
    if rm.labels is not None:
        raise RoadmapError("add nodes before labeling")
    resolution = resolution or rm.meta.get("resolution", DEFAULT_RESOLUTION)
    robot = rm.robot
    configs = np.atleast_2d(np.asarray(configs, dtype=float))
    if not len(configs):
        return rm, []
    configs = np.stack([check_configuration(robot, q) for q in configs])
    static = [p.world() for p in rm.static_obstacles]
    configs = configs[_static_free(robot, configs, static)]
    base = rm.n_nodes
    kk = min(rm.k_neighbors or prm_star_k(max(base, 2), robot.dof), base)
    nbrs = _nearest(rm.nodes, configs, kk, robot.angular, exclude_self=False)
    new_ids = np.arange(base, base + len(configs))
    new_pairs = np.stack([np.repeat(new_ids, kk), nbrs.ravel()], axis=1)
    nodes = np.vstack([rm.nodes, configs])
    new_pairs = _canonical_edges(new_pairs)
    new_pairs = new_pairs[_edge_free(robot, nodes, new_pairs, static, resolution)]
    edges = _canonical_edges(np.vstack([rm.edges, new_pairs]))
    return replace(rm, nodes=nodes, edges=edges, goals=(), meta=dict(rm.meta)), new_ids.tolist()


# --------------------------------------------------------------------------
# labeling and goals


def _hypothesis_edges(rm: Roadmap, obstacle: WorldShape, resolution: float) -> list[int]:
    cand = _candidates(rm.robot, rm.nodes, rm.edges, obstacle)
    u, v = rm.edges[cand, 0], rm.edges[cand, 1]
    return cand[segments_hit(rm.robot, rm.nodes[u], rm.nodes[v], obstacle, resolution)].tolist()


def label_edges(rm: Roadmap, scene: BeliefScene, resolution: float = DEFAULT_RESOLUTION,
                jobs: int = 1) -> Roadmap:
    """Attach label (i, j) to every edge whose sweep intersects hypothesis j
    of object i (target hypotheses included)."""
    work = [(o.object_id, j, Placement(o.shape, h.pose).world())
            for o in scene.objects for j, h in enumerate(o.hypotheses)]
    if jobs > 1:
        with ThreadPoolExecutor(jobs) as pool:
            hits = list(pool.map(lambda w: _hypothesis_edges(rm, w[2], resolution), work))
    else:
        hits = [_hypothesis_edges(rm, w[2], resolution) for w in work]
    sets: list[set] = [set() for _ in range(rm.n_edges)]
    for (i, j, _), edges in zip(work, hits):
        for e in edges:
            sets[e].add((i, j))
    meta = dict(rm.meta, label_resolution=resolution)
    return replace(rm, labels=tuple(frozenset(s) for s in sets), meta=meta)


def end_effector_poses(rm: Roadmap) -> tuple[np.ndarray, np.ndarray]:
    """End-effector positions (n, 2) and headings (n,) of all nodes."""
    robot = rm.robot
    if isinstance(robot, DiscRobot):
        return rm.nodes[:, :2].copy(), np.zeros(rm.n_nodes)
    heading = np.cumsum(rm.nodes, axis=1)
    lengths = np.array(robot.link_lengths)
    x = robot.base[0] + np.sum(lengths * np.cos(heading), axis=1)
    y = robot.base[1] + np.sum(lengths * np.sin(heading), axis=1)
    return np.stack([x, y], axis=1), wrap_angle(heading[:, -1])


def grasp_matches(robot: RobotModel, positions: np.ndarray, headings: np.ndarray, frame,
                  tolerance=DEFAULT_GRASP_TOLERANCE) -> np.ndarray:
    eps_p, eps_o = tolerance
    ok = np.hypot(positions[:, 0] - frame.x, positions[:, 1] - frame.y) <= eps_p
    if robot.has_orientation:
        ok &= np.abs(wrap_angle(headings - frame.theta)) <= eps_o
    return ok


def compute_goals(rm: Roadmap, scene: BeliefScene, tolerance=DEFAULT_GRASP_TOLERANCE,
                  eligible: Sequence[int] | None = None) -> list[GoalSpec]:
    """Goal nodes with the target hypotheses each can pick.

    A node picks hypothesis j when its end effector lies within ``tolerance``
    (position, orientation) of that hypothesis' grasp frame. The start node is
    never a goal. ``eligible`` restricts which nodes are considered.
    """
    pos, head = end_effector_poses(rm)
    picks = [grasp_matches(rm.robot, pos, head, f, tolerance) for f in scene.grasp_frames()]
    goals = []
    nodes = range(rm.n_nodes) if eligible is None else sorted(set(eligible))
    for q in nodes:
        if q == rm.start:
            continue
        js = frozenset(j for j, m in enumerate(picks) if m[q])
        if js:
            goals.append(GoalSpec(q, js))
    if not goals:
        raise UnsolvableInstance("no roadmap node can pick any target hypothesis")
    return goals


def with_goals(rm: Roadmap, scene: BeliefScene, tolerance=DEFAULT_GRASP_TOLERANCE,
               eligible: Sequence[int] | None = None) -> Roadmap:
    goals = compute_goals(rm, scene, tolerance, eligible)
    covered = set().union(*(g.targets for g in goals))
    unreachable = sorted(set(range(len(scene.target.hypotheses))) - covered)
    meta = dict(rm.meta, unreachable_targets=unreachable, grasp_tolerance=list(tolerance))
    return replace(rm, goals=tuple(goals), meta=meta)


def grasp_configurations(robot: RobotModel, scene: BeliefScene) -> np.ndarray:
    """One exact grasp configuration per target hypothesis (disc robots only:
    the grasp position itself)."""
    if not isinstance(robot, DiscRobot):
        raise NotImplementedError("grasp injection needs inverse kinematics; disc robots only")
    return np.array([[f.x, f.y] for f in scene.grasp_frames()])


def prepare_roadmap(skeleton: Roadmap, scene: BeliefScene, resolution: float = DEFAULT_RESOLUTION,
                    tolerance=DEFAULT_GRASP_TOLERANCE, inject_goals: bool = False,
                    injected_only: bool = False) -> Roadmap:
    """Skeleton -> labeled roadmap with goals for ``scene``.

    With ``inject_goals`` one exact grasp configuration per target hypothesis
    is added; ``injected_only`` then makes those the only goal candidates.
    """
    rm, eligible = skeleton, None
    if inject_goals:
        rm, added = add_nodes(rm, grasp_configurations(rm.robot, scene), resolution)
        eligible = added if injected_only else None
    elif injected_only:
        raise ValueError("injected_only requires inject_goals")
    return with_goals(label_edges(rm, scene, resolution), scene, tolerance, eligible)


def roadmap_from_graph(n_nodes: int, edges: Sequence[tuple[int, int, Sequence[Label]]],
                       start: int, goals: Sequence[GoalSpec], positions=None) -> Roadmap:
    """Labeled roadmap from an abstract graph. Nodes are placed for a point
    robot at ``positions`` (default: evenly on a unit circle, so edge lengths
    are chord lengths)."""
    if positions is None:
        ang = 2.0 * math.pi * np.arange(n_nodes) / max(n_nodes, 1)
        positions = np.stack([np.cos(ang), np.sin(ang)], axis=1)
    positions = np.asarray(positions, dtype=float)
    table: dict[tuple[int, int], set] = {}
    for u, v, labs in edges:
        if u == v:
            raise ValueError("self-loops are not allowed")
        table.setdefault((min(u, v), max(u, v)), set()).update(tuple(l) for l in labs)
    pairs = sorted(table)
    arr = np.array(pairs, dtype=np.int64).reshape(-1, 2)
    return Roadmap(DiscRobot(1e-3), positions, arr, start=start,
                   labels=tuple(frozenset(table[p]) for p in pairs), goals=tuple(goals))
