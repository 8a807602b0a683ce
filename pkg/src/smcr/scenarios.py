"""Bundled desk-scale scenes for a disc gripper seen from above.

Units are centimetre-like: the workspace is 40 x 40, the gripper radius 1.
The target is grasped from its local -y side. Its grasp frame stands off
from the object by more than the position tolerance, so any configuration
that counts as reaching the true target is also clear of it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .geometry import Disc, DiscRobot, Placement, Polygon, Pose2, RobotModel
from .scene import GroundTruthScene, TrueObject

ROBOT_RADIUS = 1.0
BOUNDS = ((0.0, 40.0), (0.0, 40.0))
START = (20.0, 2.0)
GRASP_TOLERANCE = (1.5, math.radians(30.0))
GRASP_CLEARANCE = 1.6
TARGET_ID = 0


@dataclass(frozen=True)
class Scenario:
    name: str
    robot: RobotModel
    bounds: tuple
    start: tuple
    ground_truth: GroundTruthScene
    grasp_tolerance: tuple = GRASP_TOLERANCE


def _walls() -> tuple[Placement, ...]:
    """Back wall and side rails of the desk."""
    return (
        Placement(Polygon.box(30.0, 1.0), Pose2(20.0, 36.0)),
        Placement(Polygon.box(1.0, 20.0), Pose2(4.0, 26.0)),
        Placement(Polygon.box(1.0, 20.0), Pose2(36.0, 26.0)),
    )


def _ground_truth(target: TrueObject, others: list[TrueObject]) -> GroundTruthScene:
    standoff = target.shape.half_height + ROBOT_RADIUS + GRASP_CLEARANCE
    grasp = Pose2(0.0, -standoff, -math.pi / 2)
    return GroundTruthScene(_walls(), (target, *others), TARGET_ID, grasp)


def _target(x: float, y: float, theta: float = 0.0) -> TrueObject:
    return TrueObject(TARGET_ID, Polygon.box(3.0, 2.0), Pose2(x, y, theta))


def narrow_passage() -> Scenario:
    """Target at the end of a corridor between two tall boxes, with a can
    standing in the direct approach."""
    tall = Polygon.box(3.0, 9.0)
    others = [
        TrueObject(1, tall, Pose2(15.5, 24.0)),
        TrueObject(2, tall, Pose2(24.5, 24.0)),
        TrueObject(3, Disc(1.5), Pose2(11.0, 14.0)),
        TrueObject(4, Polygon.box(4.0, 2.5), Pose2(28.0, 13.0, 0.3)),
        TrueObject(5, Disc(1.5), Pose2(20.0, 12.0)),
    ]
    gt = _ground_truth(_target(20.0, 27.0), others)
    return Scenario("narrow-passage", DiscRobot(ROBOT_RADIUS), BOUNDS, START, gt)


def clutter() -> Scenario:
    """Target ringed by cans and boxes with a few narrow gaps."""
    can = Disc(1.5)
    others = [
        TrueObject(1, can, Pose2(15.5, 19.5)),
        TrueObject(2, can, Pose2(24.5, 19.5)),
        TrueObject(3, Polygon.box(3.0, 3.0), Pose2(14.5, 25.0, 0.4)),
        TrueObject(4, Polygon.box(3.0, 3.0), Pose2(25.5, 25.0, -0.4)),
        TrueObject(5, can, Pose2(20.0, 14.0)),
        TrueObject(6, Polygon.box(5.0, 2.0), Pose2(20.0, 30.0)),
    ]
    gt = _ground_truth(_target(20.0, 25.0), others)
    return Scenario("clutter", DiscRobot(ROBOT_RADIUS), BOUNDS, START, gt)


def arch() -> Scenario:
    """Target just beyond a pair of posts bridged by a low beam."""
    post = Disc(1.5)
    others = [
        TrueObject(1, post, Pose2(15.5, 21.5)),
        TrueObject(2, post, Pose2(24.5, 21.5)),
        TrueObject(3, Polygon.box(8.0, 1.5), Pose2(20.0, 15.5)),
        TrueObject(4, Polygon.box(2.5, 2.5), Pose2(10.0, 26.0, 0.6)),
    ]
    gt = _ground_truth(_target(20.0, 26.0), others)
    return Scenario("arch", DiscRobot(ROBOT_RADIUS), BOUNDS, START, gt)


SCENARIOS = {
    "narrow-passage": narrow_passage,
    "clutter": clutter,
    "arch": arch,
}


def get_scenario(name: str) -> Scenario:
    try:
        return SCENARIOS[name]()
    except KeyError:
        raise ValueError(f"unknown scenario {name!r}; choose from {', '.join(SCENARIOS)}") from None
