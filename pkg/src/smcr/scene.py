"""Discrete pose-hypothesis beliefs over a planar scene."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .geometry import Placement, Pose2, Shape

NORMALIZATION_TOL = 1e-9
EXISTENCE_THRESHOLD = 0.3
DEFAULT_TRANS_THRESH = 2.5
DEFAULT_ROT_THRESH = math.radians(15.0)

LEVEL_MIN, LEVEL_MAX = 1, 7
TRANS_BOUND_L1, TRANS_BOUND_L7 = 0.5, 3.5
ROT_BOUND_L1, ROT_BOUND_L7 = math.radians(5.0), math.radians(35.0)


class BeliefError(ValueError):
    """A belief violates its normalization or range invariants."""


@dataclass(frozen=True)
class Hypothesis:
    pose: Pose2
    prob: float


@dataclass(frozen=True)
class ObjectBelief:
    object_id: int
    shape: Shape
    existence: float
    hypotheses: tuple[Hypothesis, ...]

    def __post_init__(self):
        object.__setattr__(self, "hypotheses", tuple(self.hypotheses))
        if not 0.0 <= self.existence <= 1.0:
            raise BeliefError(f"object {self.object_id}: existence {self.existence} outside [0, 1]")
        if any(not h.prob > 0 for h in self.hypotheses):
            raise BeliefError(f"object {self.object_id}: hypothesis probabilities must be positive")
        if self.normalization_error > NORMALIZATION_TOL:
            raise BeliefError(
                f"object {self.object_id}: hypothesis probabilities sum to "
                f"{sum(h.prob for h in self.hypotheses)!r}, existence is {self.existence!r}"
            )

    @property
    def normalization_error(self) -> float:
        return abs(math.fsum(h.prob for h in self.hypotheses) - self.existence)

    @property
    def probs(self) -> np.ndarray:
        return np.array([h.prob for h in self.hypotheses])

    def most_likely(self) -> int:
        """Index of the highest-probability hypothesis (lowest index on ties)."""
        return int(np.argmax(self.probs))


@dataclass(frozen=True)
class BeliefScene:
    static_obstacles: tuple[Placement, ...]
    objects: tuple[ObjectBelief, ...]
    target_id: int
    # grasp frame of the target, relative to the target pose
    target_grasp: Pose2 = Pose2(0.0, 0.0, 0.0)
    require_certain_target: bool = field(default=True, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "static_obstacles", tuple(self.static_obstacles))
        object.__setattr__(self, "objects", tuple(self.objects))
        ids = [o.object_id for o in self.objects]
        if len(set(ids)) != len(ids):
            raise BeliefError("object ids must be unique")
        if self.target_id not in ids:
            raise BeliefError(f"target {self.target_id} missing from the scene")
        target = self.target
        if not target.hypotheses:
            raise BeliefError("target has no pose hypotheses")
        if self.require_certain_target and abs(target.existence - 1.0) > NORMALIZATION_TOL:
            raise BeliefError("target must be present with existence probability 1")

    @property
    def target(self) -> ObjectBelief:
        return self.object(self.target_id)

    def object(self, object_id: int) -> ObjectBelief:
        for o in self.objects:
            if o.object_id == object_id:
                return o
        raise KeyError(object_id)

    def grasp_frames(self) -> list[Pose2]:
        return [h.pose.compose(self.target_grasp) for h in self.target.hypotheses]


@dataclass(frozen=True)
class TrueObject:
    object_id: int
    shape: Shape
    pose: Pose2


@dataclass(frozen=True)
class GroundTruthScene:
    static_obstacles: tuple[Placement, ...]
    objects: tuple[TrueObject, ...]  # objects actually present, target included
    target_id: int
    target_grasp: Pose2 = Pose2(0.0, 0.0, 0.0)

    def __post_init__(self):
        object.__setattr__(self, "static_obstacles", tuple(self.static_obstacles))
        object.__setattr__(self, "objects", tuple(self.objects))
        ids = [o.object_id for o in self.objects]
        if len(set(ids)) != len(ids):
            raise BeliefError("object ids must be unique")
        if self.target_id not in ids:
            raise BeliefError("the target must be present in the ground truth")

    @property
    def target(self) -> TrueObject:
        return next(o for o in self.objects if o.object_id == self.target_id)

    def grasp_frame(self) -> Pose2:
        return self.target.pose.compose(self.target_grasp)


@dataclass(frozen=True)
class ScoredHypothesis:
    object_id: int
    pose: Pose2
    score: float


def normalize(weights: Sequence[float], existence: float) -> list[float]:
    """Scale non-negative weights so they sum to ``existence``."""
    w = np.asarray(weights, dtype=float)
    if np.any(w < 0):
        raise BeliefError("weights must be non-negative")
    total = math.fsum(w)
    if total <= 0:
        w = np.ones_like(w)
        total = float(len(w))
    return [float(x) for x in w * (existence / total)]


def cluster_hypotheses(raw: Sequence[ScoredHypothesis], k: int, existence: float,
                       shape: Shape, trans_thresh: float = DEFAULT_TRANS_THRESH,
                       rot_thresh: float = DEFAULT_ROT_THRESH) -> ObjectBelief:
    """Greedy score-ordered pose clustering, keeping the top ``k`` clusters.

    A pose within both thresholds of an already retained, higher-ranked
    representative is absorbed into it (scores add up); representatives are
    then ranked by cluster score and normalized to ``existence``.
    """
    if not raw:
        raise ValueError("no hypotheses to cluster")
    if k < 1:
        raise ValueError("k must be at least 1")
    if trans_thresh <= 0 or rot_thresh <= 0:
        raise ValueError("thresholds must be positive")
    ids = {h.object_id for h in raw}
    if len(ids) != 1:
        raise ValueError(f"hypotheses of several objects given: {sorted(ids)}")

    order = sorted(range(len(raw)), key=lambda i: (-raw[i].score, i))
    reps: list[int] = []
    cluster_score: list[float] = []
    for i in order:
        pose = raw[i].pose
        for c, r in enumerate(reps):
            dt, dr = pose.distance(raw[r].pose)
            if dt <= trans_thresh and dr <= rot_thresh:
                cluster_score[c] += raw[i].score
                break
        else:
            reps.append(i)
            cluster_score.append(raw[i].score)

    ranked = sorted(range(len(reps)), key=lambda c: -cluster_score[c])[:k]
    probs = normalize([cluster_score[c] for c in ranked], existence)
    hyps = tuple(Hypothesis(raw[reps[c]].pose, p) for c, p in zip(ranked, probs) if p > 0)
    return ObjectBelief(raw[0].object_id, shape, existence if hyps else 0.0, hyps)


def ingest_detections(detections: Iterable[tuple[int, Shape, float, Sequence[ScoredHypothesis]]],
                      k: int, threshold: float = EXISTENCE_THRESHOLD, **cluster_kw) -> list[ObjectBelief]:
    """Beliefs for externally detected objects; objects with existence
    probability not above ``threshold`` are dropped."""
    out = []
    for object_id, shape, existence, raw in detections:
        if existence <= threshold or not raw:
            continue
        out.append(cluster_hypotheses(raw, k, existence, shape, **cluster_kw))
    return out


def level_bounds(level: int) -> tuple[float, float]:
    """(translation, rotation) noise half-widths of an uncertainty level."""
    if not LEVEL_MIN <= level <= LEVEL_MAX:
        raise ValueError(f"uncertainty level must be in [1, 7], got {level}")
    f = (level - LEVEL_MIN) / (LEVEL_MAX - LEVEL_MIN)
    return (TRANS_BOUND_L1 + f * (TRANS_BOUND_L7 - TRANS_BOUND_L1),
            ROT_BOUND_L1 + f * (ROT_BOUND_L7 - ROT_BOUND_L1))


def _sample_offsets(rng: np.random.Generator, k: int, t_bound: float, r_bound: float,
                    sampling: str) -> tuple[np.ndarray, np.ndarray]:
    if sampling == "uniform":
        radius = t_bound * np.sqrt(rng.random(k))
        rot = rng.uniform(-r_bound, r_bound, k)
    elif sampling == "gaussian":
        # truncated to the level box by resampling
        radius = np.abs(rng.normal(0.0, t_bound / 2.0, k))
        rot = rng.normal(0.0, r_bound / 2.0, k)
        while np.any(bad := (radius > t_bound) | (np.abs(rot) > r_bound)):
            n = int(bad.sum())
            radius[bad] = np.abs(rng.normal(0.0, t_bound / 2.0, n))
            rot[bad] = rng.normal(0.0, r_bound / 2.0, n)
    else:
        raise ValueError(f"unknown sampling mode {sampling!r}")
    angle = rng.uniform(-math.pi, math.pi, k)
    offsets = np.stack([radius * np.cos(angle), radius * np.sin(angle)], axis=1)
    return offsets, rot


def generate_hypotheses(gt: GroundTruthScene, k: int, level: int, seed,
                        existence: float = 1.0, weighting: str = "distance",
                        sampling: str = "uniform") -> BeliefScene:
    """Simulated perception output: ``k`` pose hypotheses per present object.

    Poses are drawn within the level's translation/rotation bounds around the
    true pose. With ``weighting="distance"`` each pose gets raw weight
    1 / (1 + d), d = max(|dt| / t_bound, |dtheta| / theta_bound), before being
    normalized to the object's existence probability (1 for the target).
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    t_bound, r_bound = level_bounds(level)
    if weighting not in ("distance", "uniform"):
        raise ValueError(f"unknown weighting {weighting!r}")
    rng = np.random.default_rng(seed)
    beliefs = []
    for obj in gt.objects:
        offsets, rot = _sample_offsets(rng, k, t_bound, r_bound, sampling)
        poses = [Pose2(obj.pose.x + dx, obj.pose.y + dy, obj.pose.theta + dr)
                 for (dx, dy), dr in zip(offsets, rot)]
        if weighting == "distance":
            d = np.maximum(np.hypot(offsets[:, 0], offsets[:, 1]) / t_bound, np.abs(rot) / r_bound)
            weights = 1.0 / (1.0 + d)
        else:
            weights = np.ones(k)
        x = 1.0 if obj.object_id == gt.target_id else existence
        probs = normalize(weights, x)
        hyps = tuple(Hypothesis(p, w) for p, w in zip(poses, probs) if w > 0)
        beliefs.append(ObjectBelief(obj.object_id, obj.shape, x if hyps else 0.0, hyps))
    return BeliefScene(gt.static_obstacles, tuple(beliefs), gt.target_id, gt.target_grasp)


def sample_hypothesis_indices(scene: BeliefScene, trials: int, seed) -> np.ndarray:
    """Draw ``trials`` joint outcomes: column per object (scene order), entry is
    the true hypothesis index or -1 when the object is absent."""
    rng = np.random.default_rng(seed)
    out = np.empty((trials, len(scene.objects)), dtype=np.int64)
    for c, obj in enumerate(scene.objects):
        k = len(obj.hypotheses)
        p = np.append(obj.probs, max(0.0, 1.0 - obj.existence)) if k else np.array([1.0])
        p = p / p.sum()
        draw = rng.choice(k + 1, size=trials, p=p) if k else np.full(trials, 0)
        out[:, c] = np.where(draw == k, -1, draw)
    return out


def ground_truth_from_indices(scene: BeliefScene, row: Sequence[int]) -> GroundTruthScene:
    objs = tuple(TrueObject(o.object_id, o.shape, o.hypotheses[j].pose)
                 for o, j in zip(scene.objects, row) if j >= 0)
    return GroundTruthScene(scene.static_obstacles, objs, scene.target_id, scene.target_grasp)


def sample_ground_truth(scene: BeliefScene, seed) -> GroundTruthScene:
    """One world consistent with the belief: object i present with probability
    X_i, at exactly one of its hypotheses (chosen with prob / X_i)."""
    row = sample_hypothesis_indices(scene, 1, seed)[0]
    return ground_truth_from_indices(scene, row)
