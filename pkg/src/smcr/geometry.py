"""Planar workspace geometry: poses, shapes, robot models and collision tests.

Angles are wrapped to (-pi, pi]. Shapes are closed sets, so touching counts
as a collision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

TWO_PI = 2.0 * math.pi
DEFAULT_RESOLUTION = 0.05


def wrap_angle(a):
    """Wrap an angle (scalar or array) into (-pi, pi]."""
    w = np.mod(np.asarray(a, dtype=float) + math.pi, TWO_PI) - math.pi
    w = np.where(w == -math.pi, math.pi, w)
    if np.ndim(w) == 0:
        return float(w)
    return w


@dataclass(frozen=True)
class Pose2:
    x: float
    y: float
    theta: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "y", float(self.y))
        object.__setattr__(self, "theta", wrap_angle(self.theta))

    @property
    def xy(self) -> np.ndarray:
        return np.array([self.x, self.y])

    def compose(self, other: "Pose2") -> "Pose2":
        """Return ``self * other``: ``other`` expressed in this frame."""
        c, s = math.cos(self.theta), math.sin(self.theta)
        return Pose2(
            self.x + c * other.x - s * other.y,
            self.y + s * other.x + c * other.y,
            self.theta + other.theta,
        )

    def distance(self, other: "Pose2") -> tuple[float, float]:
        """Translation distance and absolute wrapped rotation difference."""
        return (
            math.hypot(self.x - other.x, self.y - other.y),
            abs(wrap_angle(self.theta - other.theta)),
        )


# --------------------------------------------------------------------------
# Shapes


@dataclass(frozen=True)
class Disc:
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError(f"disc radius must be positive, got {self.radius}")

    @property
    def bounding_radius(self) -> float:
        return self.radius

    @property
    def half_height(self) -> float:
        return self.radius


@dataclass(frozen=True)
class Polygon:
    """Convex polygon with counter-clockwise vertices in its local frame."""

    vertices: tuple[tuple[float, float], ...]

    def __post_init__(self):
        verts = tuple((float(x), float(y)) for x, y in self.vertices)
        object.__setattr__(self, "vertices", verts)
        if len(verts) < 3:
            raise ValueError("polygon needs at least 3 vertices")
        v = np.array(verts)
        e = np.roll(v, -1, axis=0) - v
        f = np.roll(e, -1, axis=0)
        cross = e[:, 0] * f[:, 1] - e[:, 1] * f[:, 0]
        if np.any(cross <= 0):
            raise ValueError("polygon must be convex and counter-clockwise")

    @classmethod
    def box(cls, width: float, height: float) -> "Polygon":
        w, h = width / 2.0, height / 2.0
        return cls(((-w, -h), (w, -h), (w, h), (-w, h)))

    @property
    def bounding_radius(self) -> float:
        return float(np.max(np.hypot(*np.array(self.vertices).T)))

    @property
    def half_height(self) -> float:
        return float(np.max(np.abs(np.array(self.vertices)[:, 1])))


Shape = Union[Disc, Polygon]


@dataclass(frozen=True)
class Placement:
    """A shape placed at a world pose."""

    shape: Shape
    pose: Pose2

    def world(self) -> "WorldShape":
        if isinstance(self.shape, Disc):
            return WorldDisc(self.pose.xy, self.shape.radius)
        c, s = math.cos(self.pose.theta), math.sin(self.pose.theta)
        rot = np.array([[c, -s], [s, c]])
        verts = np.array(self.shape.vertices) @ rot.T + self.pose.xy
        return WorldPolygon(verts)


@dataclass(frozen=True, eq=False)
class WorldDisc:
    center: np.ndarray
    radius: float

    @property
    def bounding(self) -> tuple[np.ndarray, float]:
        return self.center, self.radius


@dataclass(frozen=True, eq=False)
class WorldPolygon:
    vertices: np.ndarray  # (m, 2), counter-clockwise
    _normals: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        edges = np.roll(self.vertices, -1, axis=0) - self.vertices
        normals = np.stack([edges[:, 1], -edges[:, 0]], axis=1)
        normals /= np.linalg.norm(normals, axis=1, keepdims=True)
        object.__setattr__(self, "_normals", normals)

    @property
    def normals(self) -> np.ndarray:
        return self._normals

    @property
    def bounding(self) -> tuple[np.ndarray, float]:
        c = self.vertices.mean(axis=0)
        return c, float(np.max(np.linalg.norm(self.vertices - c, axis=1)))


WorldShape = Union[WorldDisc, WorldPolygon]


def rectangle(p0: np.ndarray, p1: np.ndarray, width: float) -> WorldPolygon:
    """Rectangle of the given width around the segment p0 -> p1."""
    d = np.asarray(p1, float) - np.asarray(p0, float)
    length = np.hypot(*d)
    u = d / length
    n = np.array([-u[1], u[0]]) * (width / 2.0)
    return WorldPolygon(np.array([p0 - n, p1 - n, p1 + n, p0 + n]))


# --------------------------------------------------------------------------
# Pairwise tests


def points_polygon_distance(points: np.ndarray, poly: WorldPolygon) -> np.ndarray:
    """Distance from each point to a convex polygon (0 inside)."""
    pts = np.atleast_2d(points)
    v = poly.vertices
    w = np.roll(v, -1, axis=0)
    e = w - v  # (m, 2)
    rel = pts[:, None, :] - v[None, :, :]  # (p, m, 2)
    t = np.clip(np.einsum("pmk,mk->pm", rel, e) / np.einsum("mk,mk->m", e, e), 0.0, 1.0)
    closest = v[None] + t[..., None] * e[None]
    dist = np.min(np.linalg.norm(pts[:, None, :] - closest, axis=2), axis=1)
    # inside iff on the inner side of every edge
    signed = np.einsum("pmk,mk->pm", rel, poly.normals)
    inside = np.all(signed <= 0.0, axis=1)
    return np.where(inside, 0.0, dist)


def _sat_overlap(a: WorldPolygon, b: WorldPolygon) -> bool:
    for axes in (a.normals, b.normals):
        pa = a.vertices @ axes.T
        pb = b.vertices @ axes.T
        if np.any((pa.max(axis=0) < pb.min(axis=0)) | (pb.max(axis=0) < pa.min(axis=0))):
            return False
    return True


def shapes_intersect(a: WorldShape, b: WorldShape) -> bool:
    if isinstance(a, WorldDisc) and isinstance(b, WorldDisc):
        return bool(np.hypot(*(a.center - b.center)) <= a.radius + b.radius)
    if isinstance(a, WorldDisc):
        return bool(points_polygon_distance(a.center, b)[0] <= a.radius)
    if isinstance(b, WorldDisc):
        return bool(points_polygon_distance(b.center, a)[0] <= b.radius)
    return _sat_overlap(a, b)


def discs_hit(centers: np.ndarray, radius: float, obstacle: WorldShape) -> np.ndarray:
    """Vectorized disc-vs-shape test for many disc centers."""
    centers = np.atleast_2d(centers)
    if isinstance(obstacle, WorldDisc):
        return np.hypot(*(centers - obstacle.center).T) <= radius + obstacle.radius
    return points_polygon_distance(centers, obstacle) <= radius


# --------------------------------------------------------------------------
# Robots


@dataclass(frozen=True)
class DiscRobot:
    """Holonomic disc; configuration is the center (x, y)."""

    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("robot radius must be positive")

    @property
    def dof(self) -> int:
        return 2

    @property
    def angular(self) -> np.ndarray:
        return np.zeros(2, dtype=bool)

    @property
    def has_orientation(self) -> bool:
        return False

    def forward_kinematics(self, q) -> tuple[list[WorldShape], Pose2]:
        q = check_configuration(self, q)
        return [WorldDisc(q.copy(), self.radius)], Pose2(q[0], q[1], 0.0)


@dataclass(frozen=True)
class PlanarArm:
    """Serial chain of revolute joints; links are rectangles of ``link_width``."""

    base: tuple[float, float]
    link_lengths: tuple[float, ...]
    link_width: float

    def __post_init__(self):
        object.__setattr__(self, "base", tuple(float(b) for b in self.base))
        object.__setattr__(self, "link_lengths", tuple(float(l) for l in self.link_lengths))
        if not self.link_lengths or min(self.link_lengths) <= 0 or self.link_width <= 0:
            raise ValueError("arm lengths and width must be positive")

    @property
    def dof(self) -> int:
        return len(self.link_lengths)

    @property
    def angular(self) -> np.ndarray:
        return np.ones(self.dof, dtype=bool)

    @property
    def has_orientation(self) -> bool:
        return True

    @property
    def reach(self) -> float:
        return sum(self.link_lengths) + self.link_width

    def joint_positions(self, q) -> tuple[np.ndarray, float]:
        q = check_configuration(self, q)
        heading = np.cumsum(q)
        steps = np.stack([np.cos(heading), np.sin(heading)], axis=1) * np.array(self.link_lengths)[:, None]
        pts = np.vstack([np.array(self.base), np.array(self.base) + np.cumsum(steps, axis=0)])
        return pts, float(heading[-1])

    def forward_kinematics(self, q) -> tuple[list[WorldShape], Pose2]:
        pts, heading = self.joint_positions(q)
        links = [rectangle(pts[i], pts[i + 1], self.link_width) for i in range(self.dof)]
        return links, Pose2(pts[-1, 0], pts[-1, 1], heading)


RobotModel = Union[DiscRobot, PlanarArm]


def check_configuration(robot: RobotModel, q) -> np.ndarray:
    q = np.asarray(q, dtype=float).reshape(-1)
    if q.shape[0] != robot.dof:
        raise ValueError(f"configuration has {q.shape[0]} values, robot has {robot.dof} dof")
    if robot.angular.any():
        q = np.where(robot.angular, wrap_angle(q), q)
    return q


def forward_kinematics(robot: RobotModel, q) -> tuple[list[WorldShape], Pose2]:
    return robot.forward_kinematics(q)


def config_delta(q1, q2, angular=None) -> np.ndarray:
    """Component-wise q2 - q1, angular components along the shortest arc."""
    q1 = np.asarray(q1, dtype=float)
    q2 = np.asarray(q2, dtype=float)
    if q1.shape[-1:] != q2.shape[-1:]:
        raise ValueError(f"dimension mismatch: {q1.shape} vs {q2.shape}")
    d = q2 - q1
    if angular is not None:
        d = np.where(angular, wrap_angle(d), d)
    return d


def c_distance(q1, q2, angular=None) -> float:
    """Euclidean configuration distance; ``angular`` marks wrapped components
    (a bool, or a per-component mask)."""
    return float(np.linalg.norm(config_delta(q1, q2, angular)))


def collides_at(robot: RobotModel, q, obstacle: Placement | WorldShape) -> bool:
    obs = obstacle.world() if isinstance(obstacle, Placement) else obstacle
    bodies, _ = robot.forward_kinematics(q)
    return any(shapes_intersect(b, obs) for b in bodies)


def _dyadic_steps(dist: np.ndarray, resolution: float) -> np.ndarray:
    steps = np.ones(dist.shape, dtype=np.int64)
    coarse = dist / steps > resolution
    while coarse.any():
        steps[coarse] *= 2
        coarse = dist / steps > resolution
    return steps


def _canonical_pairs(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Order each pair of configurations lexicographically."""
    swap = np.zeros(len(a), dtype=bool)
    undecided = np.ones(len(a), dtype=bool)
    for c in range(a.shape[1]):
        swap |= undecided & (b[:, c] < a[:, c])
        undecided &= b[:, c] == a[:, c]
    lo = np.where(swap[:, None], b, a)
    hi = np.where(swap[:, None], a, b)
    return lo, hi


def interpolate_many(robot: RobotModel, q1s, q2s, resolution: float = DEFAULT_RESOLUTION
                     ) -> tuple[np.ndarray, np.ndarray]:
    """Dyadic samples along many segments at once.

    Each segment is subdivided into 2**k equal steps with the smallest k that
    keeps consecutive samples within ``resolution``, endpoints included, so a
    finer resolution always yields a superset of samples. Endpoints are put in
    canonical order first: a segment gives the same points in either
    direction. Returns the stacked samples and the segment index of each.
    """
    if not resolution > 0:
        raise ValueError("resolution must be positive")
    a = np.atleast_2d(np.asarray(q1s, dtype=float))
    b = np.atleast_2d(np.asarray(q2s, dtype=float))
    if a.shape != b.shape or a.shape[1] != robot.dof:
        raise ValueError("segment endpoints must match the robot's dof")
    if robot.angular.any():
        a = np.where(robot.angular, wrap_angle(a), a)
        b = np.where(robot.angular, wrap_angle(b), b)
    a, b = _canonical_pairs(a, b)
    delta = config_delta(a, b, robot.angular)
    steps = _dyadic_steps(np.linalg.norm(delta, axis=1), resolution)
    owner = np.repeat(np.arange(len(a)), steps + 1)
    first = np.concatenate([[0], np.cumsum(steps + 1)[:-1]])
    i = np.arange(len(owner)) - first[owner]
    t = i / steps[owner]
    pts = a[owner] + t[:, None] * delta[owner]
    last = i == steps[owner]
    pts[last] = b[owner[last]]
    if robot.angular.any():
        pts = np.where(robot.angular, wrap_angle(pts), pts)
    return pts, owner


def interpolate(robot: RobotModel, q1, q2, resolution: float = DEFAULT_RESOLUTION) -> np.ndarray:
    """Dyadic samples along one segment (see ``interpolate_many``)."""
    a = check_configuration(robot, q1)
    b = check_configuration(robot, q2)
    return interpolate_many(robot, a[None, :], b[None, :], resolution)[0]


def segments_hit(robot: RobotModel, q1s, q2s, obstacle: WorldShape,
                 resolution: float = DEFAULT_RESOLUTION) -> np.ndarray:
    """Per segment: does any sample along it touch ``obstacle``?"""
    q1s = np.atleast_2d(q1s)
    if not len(q1s):
        return np.zeros(0, dtype=bool)
    if not isinstance(robot, DiscRobot):
        return np.array([samples_hit(robot, interpolate(robot, a, b, resolution), obstacle)
                         for a, b in zip(q1s, np.atleast_2d(q2s))])
    pts, owner = interpolate_many(robot, q1s, q2s, resolution)
    hit = discs_hit(pts, robot.radius, obstacle)
    return np.bincount(owner[hit], minlength=len(q1s)) > 0


def samples_hit(robot: RobotModel, samples: np.ndarray, obstacle: WorldShape) -> bool:
    if isinstance(robot, DiscRobot):
        return bool(np.any(discs_hit(samples, robot.radius, obstacle)))
    if isinstance(robot, PlanarArm):
        c, r = obstacle.bounding
        if np.hypot(*(c - np.array(robot.base))) > robot.reach + r:
            return False
    return any(collides_at(robot, q, obstacle) for q in samples)


def segment_collides(robot: RobotModel, q1, q2, obstacle: Placement | WorldShape,
                     resolution: float = DEFAULT_RESOLUTION) -> bool:
    obs = obstacle.world() if isinstance(obstacle, Placement) else obstacle
    return samples_hit(robot, interpolate(robot, q1, q2, resolution), obs)


def segment_point_distance(a: np.ndarray, b: np.ndarray, p: np.ndarray) -> np.ndarray:
    """Distance from point(s) ``p`` to segment(s) a-b (broadcasting)."""
    d = b - a
    dd = np.sum(d * d, axis=-1)
    t = np.where(dd > 0, np.sum((p - a) * d, axis=-1) / np.where(dd > 0, dd, 1.0), 0.0)
    t = np.clip(t, 0.0, 1.0)
    return np.linalg.norm(a + t[..., None] * d - p, axis=-1)


def placements_world(placements: Sequence[Placement]) -> list[WorldShape]:
    return [p.world() for p in placements]
