"""Label-set search over labeled roadmaps.

Success probability of a path to a goal q_g:

    succ = S * reach,  S = prod_i (1 - sum_{j carried} Pr(p_i^j))

over non-target objects i, and reach = sum of Pr(p_t^j) over the target
hypotheses j that q_g can pick and the path has not swept through. Before a
goal is reached, reach sums over all target hypotheses not yet swept through,
which bounds the value of every extension from above.
"""

from __future__ import annotations

import heapq
import time
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

from .roadmap import GoalSpec, LabelSet, Roadmap
from .scene import BeliefScene

PLANNER_NAMES = (
    "max-success-exact",
    "max-success-greedy",
    "mcr-exact",
    "mcr-greedy",
    "mcr-mlc",
    "osp",
)
WEIGHT_SUM_TOL = 1e-9


class NoSolution(RuntimeError):
    """No path reaches a valid goal."""


class InvariantViolation(RuntimeError):
    pass


class ProbabilityModel:
    """Bit layout of the scene's labels plus everything needed to score them.

    Label (i, j) gets one bit; bits follow canonical (object id, hypothesis)
    order so per-object sums are always accumulated in the same order.
    """

    def __init__(self, scene: BeliefScene):
        self.scene = scene
        self.bit: dict[tuple[int, int], int] = {}
        self.weight: list[float] = []
        self.group: list[int] = []  # object slot per bit; -1 for target bits
        self.target_j: dict[int, int] = {}  # bit -> target hypothesis index
        slots = 0
        for obj in sorted(scene.objects, key=lambda o: o.object_id):
            is_target = obj.object_id == scene.target_id
            for j, h in enumerate(obj.hypotheses):
                b = len(self.weight)
                self.bit[(obj.object_id, j)] = b
                self.weight.append(h.prob)
                self.group.append(-1 if is_target else slots)
                if is_target:
                    self.target_j[b] = j
            if not is_target:
                slots += 1
        self.n_groups = slots
        self.target_probs = [h.prob for h in scene.target.hypotheses]
        self.target_mask = sum(1 << b for b in self.target_j)
        self.obstacle_mask = ((1 << len(self.weight)) - 1) & ~self.target_mask
        self._labels = {b: lab for lab, b in self.bit.items()}

    # -- conversions ---------------------------------------------------------

    def mask(self, labels: Iterable[tuple[int, int]]) -> int:
        m = 0
        for lab in labels:
            try:
                m |= 1 << self.bit[tuple(lab)]
            except KeyError:
                raise InvariantViolation(f"label {lab} does not resolve in the scene") from None
        return m

    def labels(self, mask: int) -> LabelSet:
        return frozenset(self._labels[b] for b in _bits(mask))

    def most_likely_mask(self) -> int:
        m = 0
        for obj in self.scene.objects:
            if obj.hypotheses:
                m |= 1 << self.bit[(obj.object_id, obj.most_likely())]
        return m

    # -- probabilities -------------------------------------------------------

    def survivability(self, mask: int) -> float:
        sums: dict[int, float] = {}
        for b in _bits(mask & self.obstacle_mask):
            g = self.group[b]
            sums[g] = sums.get(g, 0.0) + self.weight[b]
        s = 1.0
        for g in sorted(sums):
            w = sums[g]
            if w > 1.0 + WEIGHT_SUM_TOL:
                raise InvariantViolation(f"label weights of one object sum to {w} > 1")
            s *= max(0.0, 1.0 - w)
        return s

    def swept_targets(self, mask: int) -> frozenset:
        return frozenset(self.target_j[b] for b in _bits(mask & self.target_mask))

    def reach(self, mask: int, picks: Iterable[int] | None = None) -> float:
        """Reach restricted to ``picks`` (a goal's targets), or over all targets."""
        swept = self.swept_targets(mask)
        idx = range(len(self.target_probs)) if picks is None else sorted(picks)
        total = 0.0
        for j in idx:
            if j not in swept:
                total += self.target_probs[j]
        return total


def _bits(mask: int):
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


def survivability(labels: Iterable[tuple[int, int]], scene: BeliefScene) -> float:
    """Probability that a path carrying ``labels`` hits none of the
    non-target objects."""
    model = ProbabilityModel(scene)
    return model.survivability(model.mask(labels))


def reach_probability(labels: Iterable[tuple[int, int]], scene: BeliefScene,
                      goal: GoalSpec | None = None) -> float:
    model = ProbabilityModel(scene)
    return model.reach(model.mask(labels), None if goal is None else goal.targets)


# --------------------------------------------------------------------------
# search


@dataclass
class PlanResult:
    planner: str
    path: list[int]
    configs: np.ndarray
    labels: LabelSet
    survivability: float
    reach: float
    succ: float
    cost: float
    goal: GoalSpec
    stats: dict = field(default_factory=dict)


class SearchRecord:
    __slots__ = ("node", "mask", "parent", "S", "reach", "succ", "cost", "nlab",
                 "is_goal", "alive", "twin")

    def __init__(self, node, mask, parent, S, reach, cost, nlab, is_goal=False):
        self.node = node
        self.mask = mask
        self.parent = parent
        self.S = S
        self.reach = reach
        self.succ = S * reach
        self.cost = cost
        self.nlab = nlab
        self.is_goal = is_goal
        self.alive = True
        self.twin = None  # the non-goal record a goal record duplicates

    def path(self) -> list[int]:
        out = []
        r = self
        while r is not None:
            out.append(r.node)
            r = r.parent
        return out[::-1]

    def on_path(self, node: int) -> bool:
        r = self
        while r is not None:
            if r.node == node:
                return True
            r = r.parent
        return False

    @property
    def valid(self) -> bool:
        return self.alive and (self.twin is None or self.twin.alive)


def _success_key(r: SearchRecord):
    return (-r.succ, r.nlab, r.cost)


def _constraint_key(r: SearchRecord):
    return (r.nlab, r.cost)


def _label_search(rm: Roadmap, model: ProbabilityModel, *, objective: str, exact: bool,
                  edge_masks: list[int], goals: dict[int, frozenset], prune: bool = True,
                  trace: list | None = None) -> tuple[SearchRecord, dict]:
    """Best-first search over (node, label set) records.

    ``objective="success"`` maximizes succ; ``"constraints"`` minimizes the
    number of distinct labels. Exact mode keeps an antichain of label sets per
    node; greedy mode keeps one best record per (node, goal flag). With
    ``prune=False`` (exact only) dominance pruning is replaced by a simple-path
    restriction.
    """
    success = objective == "success"
    key = _success_key if success else _constraint_key
    lengths = rm.lengths
    adjacency = rm.adjacency
    t0 = time.perf_counter()
    heap: list = []
    seq = 0
    stored: dict = {}
    n_stored = 0
    checks = 0

    def push(rec: SearchRecord):
        nonlocal seq
        heapq.heappush(heap, (key(rec), rec.node, 0 if rec.is_goal else 1, seq, rec))
        seq += 1

    def admit(rec: SearchRecord) -> bool:
        """Dominance bookkeeping; True when ``rec`` is kept."""
        nonlocal n_stored
        if exact:
            if not prune:
                n_stored += 1
                if trace is not None:
                    trace.append(rec)
                return True
            bucket = stored.setdefault(rec.node, [])
            m = rec.mask
            for s in bucket:
                if s.mask & m == s.mask:
                    return False
            keep = []
            for s in bucket:
                if m & s.mask == m:
                    s.alive = False
                else:
                    keep.append(s)
            keep.append(rec)
            stored[rec.node] = keep
        else:
            slot = (rec.node, rec.is_goal)
            old = stored.get(slot)
            if old is not None and old.alive and key(old) <= key(rec):
                return False
            if old is not None:
                old.alive = False
            stored[slot] = rec
        n_stored += 1
        if trace is not None:
            trace.append(rec)
        return True

    S0 = 1.0
    root = SearchRecord(rm.start, 0, None, S0, model.reach(0) if success else 1.0, 0.0, 0)
    admit(root)
    push(root)
    expansions = 0
    while heap:
        *_, rec = heapq.heappop(heap)
        if not rec.valid:
            continue
        if rec.is_goal:
            stats = {"expansions": expansions, "records_stored": n_stored,
                     "invariant_checks": checks, "wall_time": time.perf_counter() - t0}
            return rec, stats
        expansions += 1
        for nbr, e in adjacency[rec.node]:
            if not prune and rec.on_path(nbr):
                continue
            mask = rec.mask | edge_masks[e]
            cost = rec.cost + float(lengths[e])
            nlab = mask.bit_count()
            if success:
                S = model.survivability(mask)
                child = SearchRecord(nbr, mask, rec, S, model.reach(mask), cost, nlab)
                checks += 1
                if not (0.0 <= S <= rec.S <= 1.0 and child.succ <= rec.succ):
                    raise InvariantViolation(
                        f"success probability increased along a path at node {nbr}: "
                        f"S {rec.S} -> {S}, succ {rec.succ} -> {child.succ}")
                if child.succ == 0.0 and prune:
                    continue
            else:
                child = SearchRecord(nbr, mask, rec, 1.0, 1.0, cost, nlab)
            if not admit(child):
                continue
            push(child)
            picks = goals.get(nbr)
            if picks is None:
                continue
            if success:
                reach = model.reach(mask, picks)
                if reach <= 0.0 or child.S * reach <= 0.0:
                    continue
                g = SearchRecord(nbr, mask, rec, child.S, reach, cost, nlab, is_goal=True)
            else:
                g = SearchRecord(nbr, mask, rec, 1.0, 1.0, cost, nlab, is_goal=True)
            if exact:
                g.twin = child
            elif not admit(g):
                continue
            push(g)
    raise NoSolution("no solution: search frontier exhausted")


def _edge_masks(rm: Roadmap, model: ProbabilityModel) -> list[int]:
    if rm.labels is None:
        return [0] * rm.n_edges
    cache: dict = {}
    out = []
    for labs in rm.labels:
        m = cache.get(labs)
        if m is None:
            m = cache[labs] = model.mask(labs)
        out.append(m)
    return out


def _check_inputs(rm: Roadmap):
    goals = [g for g in rm.goals if g.node != rm.start]
    if not goals:
        raise NoSolution("no solution: roadmap has no goal configurations")
    return goals


def _result(name: str, rm: Roadmap, model: ProbabilityModel, path: list[int],
            edge_masks: list[int], stats: dict) -> PlanResult:
    goal = rm.goal_map()[path[-1]]
    mask = 0
    cost = 0.0
    for u, v in zip(path, path[1:]):
        e = rm.edge_between(u, v)
        mask |= edge_masks[e]
        cost += float(rm.lengths[e])
    S = model.survivability(mask)
    reach = model.reach(mask, goal.targets)
    return PlanResult(name, path, rm.path_configs(path), model.labels(mask), S, reach,
                      S * reach, cost, goal, stats)


def _success_planner(name: str, exact: bool):
    def run(rm: Roadmap, scene: BeliefScene, *, prune: bool = True,
            trace: list | None = None) -> PlanResult:
        goals = _check_inputs(rm)
        model = ProbabilityModel(scene)
        masks = _edge_masks(rm, model)
        goal_picks = {g.node: g.targets for g in goals}
        rec, stats = _label_search(rm, model, objective="success", exact=exact,
                                   edge_masks=masks, goals=goal_picks, prune=prune, trace=trace)
        return _result(name, rm, model, rec.path(), masks, stats)
    run.__name__ = name.replace("-", "_")
    return run


max_success_exact = _success_planner("max-success-exact", exact=True)
max_success_exact.__doc__ = """Maximize success probability exactly (label-set antichain per node)."""
max_success_greedy = _success_planner("max-success-greedy", exact=False)
max_success_greedy.__doc__ = """Keep only the best record per (node, goal flag); not optimal."""


def _mcr(name: str, rm: Roadmap, scene: BeliefScene, exact: bool, most_likely_only: bool = False,
         prune: bool = True, trace: list | None = None) -> PlanResult:
    goals = _check_inputs(rm)
    model = ProbabilityModel(scene)
    masks = _edge_masks(rm, model)
    search_masks = masks
    goal_picks = {g.node: g.targets for g in goals}
    if most_likely_only:
        keep = model.most_likely_mask()
        search_masks = [m & keep for m in masks]
        j_ml = scene.target.most_likely()
        goal_picks = {q: frozenset([j_ml]) for q, js in goal_picks.items() if j_ml in js}
        if not goal_picks:
            raise NoSolution("no solution: no goal picks the most likely target pose")
    rec, stats = _label_search(rm, model, objective="constraints", exact=exact,
                               edge_masks=search_masks, goals=goal_picks, prune=prune, trace=trace)
    stats["constraints"] = rec.nlab
    return _result(name, rm, model, rec.path(), masks, stats)


def mcr_exact(rm: Roadmap, scene: BeliefScene, **kw) -> PlanResult:
    """Fewest distinct pose labels to any goal, ties by path cost."""
    return _mcr("mcr-exact", rm, scene, exact=True, **kw)


def mcr_greedy(rm: Roadmap, scene: BeliefScene, **kw) -> PlanResult:
    return _mcr("mcr-greedy", rm, scene, exact=False, **kw)


def mcr_mlc(rm: Roadmap, scene: BeliefScene, **kw) -> PlanResult:
    """MCR over each object's most likely pose only; the target's most likely
    pose alone defines the goals."""
    return _mcr("mcr-mlc", rm, scene, exact=True, most_likely_only=True, **kw)


def osp(rm: Roadmap, scene: BeliefScene) -> PlanResult:
    """Shortest path to the nearest goal, ignoring every label."""
    goals = {g.node for g in _check_inputs(rm)}
    model = ProbabilityModel(scene)
    masks = _edge_masks(rm, model)
    t0 = time.perf_counter()
    lengths = rm.lengths
    dist = {rm.start: 0.0}
    parent: dict[int, int | None] = {rm.start: None}
    done = set()
    heap = [(0.0, rm.start)]
    expansions = 0
    while heap:
        d, u = heapq.heappop(heap)
        if u in done:
            continue
        if u in goals:
            path = [u]
            while parent[path[-1]] is not None:
                path.append(parent[path[-1]])
            stats = {"expansions": expansions, "records_stored": len(dist),
                     "wall_time": time.perf_counter() - t0}
            return _result("osp", rm, model, path[::-1], masks, stats)
        done.add(u)
        expansions += 1
        for v, e in rm.adjacency[u]:
            nd = d + float(lengths[e])
            if nd < dist.get(v, float("inf")):
                dist[v] = nd
                parent[v] = u
                heapq.heappush(heap, (nd, v))
    raise NoSolution("no solution: no goal is connected to the start")


PLANNERS: dict[str, Callable[..., PlanResult]] = {
    "max-success-exact": max_success_exact,
    "max-success-greedy": max_success_greedy,
    "mcr-exact": mcr_exact,
    "mcr-greedy": mcr_greedy,
    "mcr-mlc": mcr_mlc,
    "osp": osp,
}


def plan(name: str, rm: Roadmap, scene: BeliefScene, **kw) -> PlanResult:
    try:
        fn = PLANNERS[name]
    except KeyError:
        raise ValueError(f"unknown planner {name!r}; choose from {', '.join(PLANNER_NAMES)}") from None
    return fn(rm, scene, **kw)
