import json
import math

import numpy as np
import pytest

from builders import shared_routes
from smcr import io as sio
from smcr.evaluation import ExecutionOutcome, MonteCarloReport, random_mcr_instance, reduction_check
from smcr.geometry import Disc, DiscRobot, Placement, PlanarArm, Polygon, Pose2
from smcr.planner import max_success_exact
from smcr.roadmap import build_roadmap, prepare_roadmap
from smcr.scenarios import get_scenario
from smcr.scene import generate_hypotheses


def _through_text(doc):
    return json.loads(sio.dumps(doc))


@pytest.fixture(scope="module")
def clutter():
    sc = get_scenario("clutter")
    belief = generate_hypotheses(sc.ground_truth, 3, 3, 5)
    world = sio.World(sc.robot, sc.bounds, sc.start, sc.grasp_tolerance)
    return sc, belief, world


class TestScenes:
    def test_belief_round_trip(self, clutter):
        sc, belief, world = clutter
        doc = _through_text(sio.belief_to(belief, world))
        assert sio.belief_from(doc) == belief
        assert sio.world_of(doc) == world

    def test_ground_truth_round_trip(self, clutter):
        sc, _, world = clutter
        doc = _through_text(sio.ground_truth_to(sc.ground_truth, world))
        assert sio.ground_truth_from(doc) == sc.ground_truth

    def test_world_optional(self, clutter):
        assert sio.world_of(sio.belief_to(clutter[1])) is None

    def test_kind_checked(self, clutter):
        with pytest.raises(sio.FormatError):
            sio.belief_from(sio.ground_truth_to(clutter[0].ground_truth))

    @pytest.mark.parametrize("shape", [Disc(0.7), Polygon.box(2.0, 1.0)])
    def test_shapes(self, shape):
        p = Placement(shape, Pose2(1.0, -2.0, 0.3))
        assert sio.placement_from(_through_text(sio.placement_to(p))) == p

    @pytest.mark.parametrize("robot", [DiscRobot(0.4), PlanarArm((1.0, 2.0), (1.5, 1.0, 0.5), 0.1)])
    def test_robots(self, robot):
        assert sio.robot_from(_through_text(sio.robot_to(robot))) == robot


class TestRoadmapDocument:
    def test_labeled_round_trip(self, clutter):
        sc, belief, _ = clutter
        skel = build_roadmap(sc.robot, sc.ground_truth.static_obstacles, sc.bounds, 150, 0, start=sc.start)
        rm = prepare_roadmap(skel, belief, tolerance=sc.grasp_tolerance, inject_goals=True)
        back = sio.roadmap_from(_through_text(sio.roadmap_to(rm)))
        assert np.array_equal(back.nodes, rm.nodes) and np.array_equal(back.edges, rm.edges)
        assert back.labels == rm.labels and back.goals == rm.goals and back.start == rm.start
        assert back.robot == rm.robot and back.static_obstacles == rm.static_obstacles

    def test_unlabeled_round_trip(self):
        rm = build_roadmap(DiscRobot(0.2), (), ((0, 5), (0, 5)), 30, 1)
        assert sio.roadmap_from(_through_text(sio.roadmap_to(rm))).labels is None

    def test_tampered_length_rejected(self):
        rm, _ = shared_routes()
        doc = _through_text(sio.roadmap_to(rm))
        doc["edges"][0][2] += 0.5
        with pytest.raises(sio.FormatError):
            sio.roadmap_from(doc)

    def test_node_ids_checked(self):
        rm, _ = shared_routes()
        doc = _through_text(sio.roadmap_to(rm))
        doc["nodes"][0][0] = 42
        with pytest.raises(sio.FormatError):
            sio.roadmap_from(doc)


class TestReports:
    def test_plan_round_trip(self):
        rm, sc = shared_routes()
        res = max_success_exact(rm, sc)
        doc = _through_text(sio.plan_to(res, rm.robot))
        back = sio.plan_from(doc)
        assert back.path == res.path and back.labels == res.labels and back.goal == res.goal
        assert (back.succ, back.survivability, back.reach, back.cost) == (res.succ, res.survivability,
                                                                         res.reach, res.cost)
        assert np.array_equal(back.configs, res.configs)
        assert sio.plan_robot(doc) == rm.robot

    def test_outcome_round_trip(self):
        ex = ExecutionOutcome(frozenset({2, 5}), 2, True, False, 12.5)
        assert sio.outcome_from(_through_text(sio.outcome_to(ex))) == ex

    def test_monte_carlo_round_trip(self):
        rep = MonteCarloReport(1000, 420, 0.42, (0.38, 0.46), 0.41)
        assert sio.monte_carlo_from(_through_text(sio.monte_carlo_to(rep))) == rep

    def test_mcr_instance_round_trip(self):
        inst = random_mcr_instance(11)
        assert sio.mcr_instance_from(_through_text(sio.mcr_instance_to(inst))) == inst

    def test_reduction_report(self):
        doc = sio.reduction_to([reduction_check(random_mcr_instance(2), 0.5)])
        assert doc["kind"] == "reduction-report" and doc["reports"][0]["agrees"]


class TestFiles:
    def test_save_load(self, tmp_path):
        path = tmp_path / "doc.json"
        sio.save({"kind": "x", "v": [1.5, 2]}, path)
        assert sio.load(path) == {"kind": "x", "v": [1.5, 2]}

    def test_nan_refused(self):
        with pytest.raises(ValueError):
            sio.dumps({"v": math.nan})

    @pytest.mark.parametrize("text", ["{not json", "[1, 2]"])
    def test_bad_files(self, tmp_path, text):
        path = tmp_path / "bad.json"
        path.write_text(text)
        with pytest.raises(sio.FormatError):
            sio.load(path)
