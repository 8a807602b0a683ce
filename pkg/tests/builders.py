"""Small hand-built problems shared by several test modules."""

from __future__ import annotations

import math

from smcr.geometry import Disc, Pose2
from smcr.roadmap import GoalSpec, roadmap_from_graph
from smcr.scene import BeliefScene, Hypothesis, ObjectBelief

ORIGIN = Pose2(0.0, 0.0)
TARGET = 99

# node names of the two counterexample graphs
S, A, B, M, G = range(5)


def _existence(ps) -> float:
    return min(1.0, math.fsum(ps))


def abstract_scene(probs: dict, target: int = TARGET, target_probs=(1.0,)) -> BeliefScene:
    """Scene whose poses exist only as labels (geometry is irrelevant)."""
    objs = [ObjectBelief(i, Disc(1.0), _existence(ps), tuple(Hypothesis(ORIGIN, p) for p in ps))
            for i, ps in probs.items() if i != target]
    tp = probs.get(target, list(target_probs))
    objs.append(ObjectBelief(target, Disc(1.0), _existence(tp), tuple(Hypothesis(ORIGIN, p) for p in tp)))
    return BeliefScene((), tuple(objs), target, require_certain_target=False)


def split_routes(one_object: bool = False):
    """Pink route s-a-m crosses p1 (0.3), blue route s-b-m crosses p2 (0.4),
    and the last hop m-g crosses p2 again."""
    p1, p2 = ((1, 0), (1, 1)) if one_object else ((1, 0), (2, 0))
    rm = roadmap_from_graph(5, [(S, A, []), (S, B, []), (A, M, [p1]), (B, M, [p2]), (M, G, [p2])],
                            S, [GoalSpec(G, {0})])
    probs = {1: [0.3, 0.4]} if one_object else {1: [0.3], 2: [0.4]}
    return rm, abstract_scene(probs)


def shared_routes():
    """Object 1 has two poses (0.3 each), object 2 one pose (0.4): the pink
    route crosses p_1^1 then p_1^2, the blue one p_2^1 then p_1^2."""
    rm = roadmap_from_graph(5, [(S, A, []), (S, B, []), (A, M, [(1, 0)]), (B, M, [(2, 0)]),
                                (M, G, [(1, 1)])], S, [GoalSpec(G, {0})])
    return rm, abstract_scene({1: [0.3, 0.3], 2: [0.4]})


def to_problem(inst):
    """Oracle ``Instance`` -> (Roadmap, BeliefScene)."""
    rm = roadmap_from_graph(inst.n_nodes, [(u, v, sorted(l)) for u, v, l in inst.edges], inst.start,
                            [GoalSpec(g, js) for g, js in sorted(inst.goals.items())])
    return rm, abstract_scene(inst.probs, inst.target)
